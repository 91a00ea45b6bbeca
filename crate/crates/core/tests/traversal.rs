mod common;

use plamp::cim::{dfs_loop, dfs_recursive};
use proptest::prelude::*;

fn orders(tree: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut recursive = Vec::new();
    dfs_recursive(0usize, &mut |&v: &usize| tree[v].clone(), &mut |&v: &usize| recursive.push(v));
    let mut looped = Vec::new();
    dfs_loop(0usize, |&v: &usize| tree[v].clone(), |&v: &usize| looped.push(v));
    (recursive, looped)
}

#[test]
fn loop_order_equals_recursive_order_on_100_trees() {
    for seed in 0..100 {
        let tree = common::random_tree(seed, 200);
        let (a, b) = orders(&tree);
        assert_eq!(a.len(), tree.len());
        assert_eq!(a, b, "tree seed {seed}");
    }
}

#[test]
fn single_node_and_path() {
    assert_eq!(orders(&[vec![]]).1, vec![0]);
    let path = vec![vec![1], vec![2], vec![]];
    assert_eq!(orders(&path).1, vec![0, 1, 2]);
}

proptest! {
    #[test]
    fn loop_order_equals_recursive_order(seed in any::<u64>(), size in 1usize..400) {
        let tree = common::random_tree(seed, size);
        let (a, b) = orders(&tree);
        prop_assert_eq!(a, b);
    }
}

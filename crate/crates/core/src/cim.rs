//! Closed itemset enumeration by prefix-preserving closure extension.
//!
//! Every closed itemset `Q` other than the root `clo(∅)` has a unique parent:
//! `Q` is generated from `P` by adding an item `e` greater than `P`'s core,
//! taking the closure, and accepting the result only if it adds no item
//! smaller than `e`. The search space is therefore a tree, which is what
//! lets stacks of nodes be split across workers without coordination.

use crate::bitset::Bitset;
use crate::dataset::{ItemId, PatternSupport, TransactionDatabase};

/// One node of the closed-itemset tree. The itemset and core item identify
/// the node; the cover is a cache that receivers rebuild after a transfer.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub itemset: Vec<ItemId>,
    /// Item whose extension produced this node; `None` for the root.
    pub core: Option<ItemId>,
    pub support: u32,
    cover: Bitset,
}

/// Wire form of a [`SearchNode`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeRecord {
    pub itemset: Vec<ItemId>,
    pub core: Option<ItemId>,
}

impl SearchNode {
    pub fn root(db: &TransactionDatabase) -> SearchNode {
        let cover = Bitset::ones(db.num_transactions());
        SearchNode {
            itemset: closure_of_cover(db, &cover),
            core: None,
            support: db.num_transactions() as u32,
            cover,
        }
    }

    pub fn from_record(db: &TransactionDatabase, record: NodeRecord) -> SearchNode {
        let mut cover = Bitset::ones(db.num_transactions());
        for &i in &record.itemset {
            cover.and_assign(db.item_bitset(i));
        }
        let node = SearchNode {
            support: cover.count_ones(),
            itemset: record.itemset,
            core: record.core,
            cover,
        };
        debug_assert_eq!(closure_of_cover(db, &node.cover), node.itemset);
        node
    }

    pub fn to_record(&self) -> NodeRecord {
        NodeRecord {
            itemset: self.itemset.clone(),
            core: self.core,
        }
    }

    pub fn into_record(self) -> NodeRecord {
        NodeRecord {
            itemset: self.itemset,
            core: self.core,
        }
    }

    pub fn cover(&self) -> &Bitset {
        &self.cover
    }

    pub fn pattern_support(&self, db: &TransactionDatabase) -> PatternSupport {
        PatternSupport {
            total: self.support,
            positive: self.cover.and_count(db.positive_bitset()),
        }
    }

    pub fn is_root(&self) -> bool {
        self.core.is_none()
    }
}

fn closure_of_cover(db: &TransactionDatabase, cover: &Bitset) -> Vec<ItemId> {
    let sup = cover.count_ones();
    db.item_bitsets()
        .iter()
        .zip(db.item_supports())
        .enumerate()
        .filter(|(_, (bits, &s))| s >= sup && cover.is_subset_of(bits))
        .map(|(i, _)| i as ItemId)
        .collect()
}

/// Largest superset of `itemset` with the same cover.
pub fn closure(db: &TransactionDatabase, itemset: &[ItemId]) -> Vec<ItemId> {
    let mut cover = Bitset::ones(db.num_transactions());
    for &i in itemset {
        cover.and_assign(db.item_bitset(i));
    }
    closure_of_cover(db, &cover)
}

/// Reusable scratch space for child generation.
pub struct Expander<'db> {
    db: &'db TransactionDatabase,
    member: Vec<bool>,
    scratch: Bitset,
}

impl<'db> Expander<'db> {
    pub fn new(db: &'db TransactionDatabase) -> Self {
        Expander {
            db,
            member: vec![false; db.num_items()],
            scratch: Bitset::zeros(db.num_transactions()),
        }
    }

    pub fn db(&self) -> &'db TransactionDatabase {
        self.db
    }

    /// Generates the ppc children of `node` in ascending extension-item order.
    ///
    /// Extensions rejected by `accept_item` are skipped. `emit` receives each
    /// child with support at least the current threshold and returns the
    /// threshold to apply from then on, so a threshold that rises during the
    /// expansion prunes the remaining candidates immediately.
    pub fn expand(
        &mut self,
        node: &SearchNode,
        mut min_support: u32,
        mut accept_item: impl FnMut(ItemId) -> bool,
        mut emit: impl FnMut(SearchNode) -> u32,
    ) {
        let db = self.db;
        let bitsets = db.item_bitsets();
        let supports = db.item_supports();
        for &i in &node.itemset {
            self.member[i as usize] = true;
        }
        let first = node.core.map_or(0, |c| c as usize + 1);
        for e in first..db.num_items() {
            if self.member[e] || supports[e] < min_support || !accept_item(e as ItemId) {
                continue;
            }
            let sup = self.scratch.assign_and(&node.cover, &bitsets[e]);
            if sup < min_support || sup == 0 {
                continue;
            }
            let cover = &self.scratch;
            // Prefix preservation: nothing below `e` may join the closure.
            let breaks_prefix = (0..e)
                .any(|j| !self.member[j] && supports[j] >= sup && cover.is_subset_of(&bitsets[j]));
            if breaks_prefix {
                continue;
            }
            let mut itemset = Vec::with_capacity(node.itemset.len() + 1);
            for j in 0..db.num_items() {
                let include = if j < e {
                    self.member[j]
                } else {
                    j == e || self.member[j] || (supports[j] >= sup && cover.is_subset_of(&bitsets[j]))
                };
                if include {
                    itemset.push(j as ItemId);
                }
            }
            min_support = emit(SearchNode {
                itemset,
                core: Some(e as ItemId),
                support: sup,
                cover: self.scratch.clone(),
            });
        }
        for &i in &node.itemset {
            self.member[i as usize] = false;
        }
    }

    pub fn children(&mut self, node: &SearchNode, min_support: u32) -> Vec<SearchNode> {
        let mut out = Vec::new();
        self.expand(node, min_support, |_| true, |c| {
            out.push(c);
            min_support
        });
        out
    }
}

/// Children of `node` whose support reaches `min_support`.
pub fn children(db: &TransactionDatabase, node: &SearchNode, min_support: u32) -> Vec<SearchNode> {
    Expander::new(db).children(node, min_support)
}

/// Recursive depth-first traversal.
pub fn dfs_recursive<N>(root: N, children: &mut impl FnMut(&N) -> Vec<N>, visit: &mut impl FnMut(&N)) {
    visit(&root);
    for c in children(&root) {
        dfs_recursive(c, children, visit);
    }
}

/// Stack-based traversal; children are pushed in reverse so the visit order
/// matches [`dfs_recursive`]. Returns the largest stack size observed.
pub fn dfs_loop<N>(root: N, mut children: impl FnMut(&N) -> Vec<N>, mut visit: impl FnMut(&N)) -> usize {
    let mut stack = vec![root];
    let mut max_len = 1;
    while let Some(n) = stack.pop() {
        visit(&n);
        stack.extend(children(&n).into_iter().rev());
        max_len = max_len.max(stack.len());
    }
    max_len
}

/// Sequential closed-itemset enumeration with the explicit-stack DFS.
///
/// `visitor` sees every closed itemset with support `>= min_support` in
/// depth-first order. The root is visited only when `clo(∅)` is non-empty;
/// the empty itemset is never counted.
pub fn count_closed_sequential(
    db: &TransactionDatabase,
    min_support: u32,
    mut visitor: impl FnMut(&SearchNode),
) -> u64 {
    let min_support = min_support.max(1);
    if (db.num_transactions() as u32) < min_support {
        return 0;
    }
    let mut expander = Expander::new(db);
    let mut count = 0;
    dfs_loop(
        SearchNode::root(db),
        |n| expander.children(n, min_support),
        |n| {
            if !n.itemset.is_empty() {
                count += 1;
                visitor(n);
            }
        },
    );
    count
}

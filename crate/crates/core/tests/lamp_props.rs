mod common;

use plamp::lamp::{min_support_from, LampState};
use plamp::{oracle, run_lamp, StatContext};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALPHAS: [f64; 3] = [0.01, 0.05, 0.3];

/// Supports of every closed set of a random database.
fn all_supports(seed: u64) -> (StatContext, Vec<u32>) {
    let db = common::small_random_db(seed, 12, 30);
    let ctx = StatContext::new(db.num_transactions(), db.num_positive()).unwrap();
    let supports = oracle::closed_sets(&db, 1)
        .unwrap()
        .into_iter()
        .map(|c| c.support.total)
        .collect();
    (ctx, supports)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>(), workers in 1usize..9, a in 0usize..3) {
        let alpha = ALPHAS[a];
        let db = common::small_random_db(seed, 14, 40);
        let want = oracle::lamp(&db, alpha).unwrap();
        let got = run_lamp(&db, alpha, &common::sim_config(workers, seed)).unwrap();
        prop_assert_eq!(got.final_lambda, want.final_lambda);
        prop_assert_eq!(got.min_support, want.min_support);
        prop_assert_eq!(got.correction_factor, want.correction_factor);
        prop_assert_eq!(got.delta, want.delta);
        prop_assert_eq!(got.patterns, want.patterns);
        let mut inventory = got.phase2.closed.clone();
        inventory.sort();
        prop_assert_eq!(inventory, oracle::closed_sets(&db, want.min_support).unwrap());
    }

    /// Recording closed sets in any order, skipping those below the current
    /// λ, ends at the same λ as the exhaustive scan, and λ never overshoots
    /// it along the way.
    #[test]
    fn final_lambda_is_order_independent(seed in any::<u64>(), order_seed in any::<u64>(), a in 0usize..3) {
        let alpha = ALPHAS[a];
        let db = common::small_random_db(seed, 12, 30);
        let want = oracle::lamp(&db, alpha).unwrap().final_lambda;
        let (ctx, mut supports) = all_supports(seed);
        supports.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
        let mut st = LampState::new(ctx.n_total(), alpha);
        for &s in &supports {
            if s >= st.lambda() {
                let l = st.record_closed_set(&ctx, s);
                prop_assert!(l <= want, "λ {} overshot {}", l, want);
            }
        }
        prop_assert_eq!(st.lambda(), want);
    }

    /// Counts split across workers and merged in batches give the same λ.
    #[test]
    fn merged_partial_counts_give_the_same_lambda(seed in any::<u64>(), parts in 1usize..6, a in 0usize..3) {
        let alpha = ALPHAS[a];
        let (ctx, supports) = all_supports(seed);
        let mut seq = LampState::new(ctx.n_total(), alpha);
        for &s in &supports {
            if s >= seq.lambda() {
                seq.record_closed_set(&ctx, s);
            }
        }
        let mut global = LampState::new(ctx.n_total(), alpha);
        for chunk in supports.chunks(supports.len().div_ceil(parts).max(1)) {
            let deltas: Vec<(u32, u64)> = chunk.iter().map(|&s| (s, 1)).collect();
            global.merge_counts(&deltas);
            global.advance(&ctx);
        }
        prop_assert_eq!(global.lambda(), seq.lambda());
    }

    /// Pruning a node below λ never hides a closed set that λ still needs:
    /// every set with support at least the final λ is counted.
    #[test]
    fn pruning_keeps_every_set_at_the_final_support(seed in any::<u64>(), a in 0usize..3) {
        let alpha = ALPHAS[a];
        let db = common::small_random_db(seed, 12, 30);
        let want = oracle::lamp(&db, alpha).unwrap();
        let ctx = StatContext::new(db.num_transactions(), db.num_positive()).unwrap();
        let mut st = LampState::new(ctx.n_total(), alpha);
        let mut recorded = 0u64;
        let root = plamp::cim::SearchNode::root(&db);
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            if node.support < st.lambda() {
                continue;
            }
            if !node.itemset.is_empty() {
                st.record_closed_set(&ctx, node.support);
                if node.support >= want.final_lambda {
                    recorded += 1;
                }
            }
            let kids = plamp::cim::children(&db, &node, st.lambda());
            stack.extend(kids.into_iter().rev());
        }
        prop_assert_eq!(st.lambda(), want.final_lambda);
        prop_assert_eq!(recorded, oracle::closed_sets(&db, want.final_lambda).unwrap().len() as u64);
    }
}

#[test]
fn engine_matches_oracle_on_threads() {
    for seed in 0..10 {
        let db = common::small_random_db(seed, 12, 40);
        let want = oracle::lamp(&db, 0.05).unwrap();
        for workers in [1, 3] {
            let got = run_lamp(&db, 0.05, &common::threads_config(workers)).unwrap();
            assert_eq!(got.final_lambda, want.final_lambda, "seed {seed} P={workers}");
            assert_eq!(got.patterns, want.patterns, "seed {seed} P={workers}");
        }
    }
}

/// The walkthrough of the support-increase search: a support-6 set moves λ
/// past 1, a support-5 set brings it to 3, a support-1 set met afterwards is
/// skipped, and the search ends at λ = 5, i.e. minimum support 4. The
/// figure's thresholds are illustrative, so suitable marginals are searched
/// for rather than assumed.
#[test]
fn support_increase_walkthrough_shape() {
    let mut found = None;
    'search: for n_total in 6..=40 {
        for n_pos in 1..n_total {
            let ctx = StatContext::new(n_total, n_pos).unwrap();
            for alpha in [0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5] {
                let mut st = LampState::new(n_total, alpha);
                if st.record_closed_set(&ctx, 6) != 2 || st.record_closed_set(&ctx, 5) != 3 {
                    continue;
                }
                if 1 >= st.lambda() {
                    continue;
                }
                let mut extra = 0;
                while st.lambda() < 5 && extra < 50 {
                    st.record_closed_set(&ctx, 4);
                    extra += 1;
                }
                if st.lambda() == 5 {
                    found = Some((n_total, n_pos, alpha, extra));
                    break 'search;
                }
            }
        }
    }
    let (n_total, n_pos, alpha, extra) = found.expect("marginals reproducing the walkthrough");
    // Replay and confirm the end state is stable: λ = 5 fails the condition.
    let ctx = StatContext::new(n_total, n_pos).unwrap();
    let mut st = LampState::new(n_total, alpha);
    st.record_closed_set(&ctx, 6);
    st.record_closed_set(&ctx, 5);
    for _ in 0..extra {
        st.record_closed_set(&ctx, 4);
    }
    assert_eq!(st.lambda(), 5);
    assert!(!ctx.lamp_condition_holds(5, st.cs(5), alpha));
    assert_eq!(min_support_from(st.lambda()), 4);
}

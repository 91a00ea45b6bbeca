#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plamp::runtime::{Schedule, SimConfig};
use plamp::{RuntimeConfig, TransactionDatabase, TransportKind};

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// One-sided Fisher P-value in exact arithmetic.
pub fn exact_fisher(n_total: usize, n_pos: usize, x: usize, n: usize) -> BigRational {
    let n_neg = n_total - n_pos;
    let mut num = BigInt::zero();
    for i in n..=x.min(n_pos) {
        num += binomial(n_pos, i) * binomial(n_neg, x - i);
    }
    BigRational::new(num, binomial(n_total, x))
}

/// Tarone's bound `C(N_pos, x) / C(N, x)` in exact arithmetic.
pub fn exact_tarone(n_total: usize, n_pos: usize, x: usize) -> BigRational {
    BigRational::new(binomial(n_pos, x), binomial(n_total, x))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("finite rational")
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// Small random database: up to `max_items` items, up to `max_rows` rows,
/// density drawn per database.
pub fn small_random_db(seed: u64, max_items: usize, max_rows: usize) -> TransactionDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let items = rng.random_range(1..=max_items);
    let rows = rng.random_range(2..=max_rows);
    let density = rng.random_range(0.15..0.75);
    plamp::synth::random_database(seed, items, rows, density)
}

pub fn sim_config(workers: usize, seed: u64) -> RuntimeConfig {
    RuntimeConfig {
        workers,
        transport: TransportKind::Sim,
        seed,
        sim: SimConfig {
            schedule: Schedule::Seeded(seed),
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn threads_config(workers: usize) -> RuntimeConfig {
    RuntimeConfig {
        workers,
        transport: TransportKind::Threads,
        ..Default::default()
    }
}

/// A random rooted tree as child lists; node 0 is the root.
pub fn random_tree(seed: u64, max_nodes: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_nodes);
    let mut children = vec![Vec::new(); n];
    for v in 1..n {
        let parent = rng.random_range(0..v);
        children[parent].push(v);
    }
    // Shuffle child lists so order is not simply ascending ids.
    for c in children.iter_mut() {
        for i in (1..c.len()).rev() {
            let j = rng.random_range(0..=i);
            c.swap(i, j);
        }
    }
    children
}

/// Worst relative error of `fisher_p` and `tarone_bound` against exact
/// arithmetic over every `(N_pos, x, n)` with `N <= max_n`, and where it
/// occurred.
pub fn stats_grid_max_rel_err(max_n: usize) -> (f64, String) {
    use plamp::{PatternSupport, StatContext};
    let mut worst = (0.0f64, String::from("none"));
    for n_total in 1..=max_n {
        for n_pos in 0..=n_total {
            let ctx = StatContext::new(n_total, n_pos).unwrap();
            let n_neg = n_total - n_pos;
            for x in 0..=n_total {
                let f = ctx.tarone_bound(x).unwrap();
                let e = rel_err(f, to_f64(&exact_tarone(n_total, n_pos, x)));
                if e > worst.0 {
                    worst = (e, format!("tarone N={n_total} N_pos={n_pos} x={x}"));
                }
                for n in x.saturating_sub(n_neg)..=x.min(n_pos) {
                    let support = PatternSupport {
                        total: x as u32,
                        positive: n as u32,
                    };
                    let p = ctx.fisher_p(support).unwrap();
                    let e = rel_err(p, to_f64(&exact_fisher(n_total, n_pos, x, n)));
                    if e > worst.0 {
                        worst = (e, format!("fisher N={n_total} N_pos={n_pos} x={x} n={n}"));
                    }
                }
            }
        }
    }
    worst
}

/// Number of `(N, N_pos, x)` with `f(x)` above the smallest achievable
/// P-value at support `x`, for `N <= max_n`.
pub fn dominance_failures(max_n: usize) -> usize {
    use plamp::{PatternSupport, StatContext};
    let mut failures = 0;
    for n_total in 1..=max_n {
        for n_pos in 0..=n_total {
            let ctx = StatContext::new(n_total, n_pos).unwrap();
            let n_neg = n_total - n_pos;
            for x in 0..=n_total {
                let f = ctx.tarone_bound(x).unwrap();
                let min_p = (x.saturating_sub(n_neg)..=x.min(n_pos))
                    .map(|n| {
                        ctx.fisher_p(PatternSupport {
                            total: x as u32,
                            positive: n as u32,
                        })
                        .unwrap()
                    })
                    .fold(f64::INFINITY, f64::min);
                if f > min_p {
                    failures += 1;
                }
            }
        }
    }
    failures
}

//! Seeded synthetic databases for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::TransactionDatabase;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("i{i}")).collect()
}

/// Both classes are guaranteed: the first row is positive, the second
/// negative.
fn labels(rng: &mut ChaCha8Rng, n: usize, positive_fraction: f64) -> Vec<bool> {
    (0..n)
        .map(|t| match t {
            0 => true,
            1 => false,
            _ => rng.random_bool(positive_fraction),
        })
        .collect()
}

/// Independent Bernoulli(`density`) entries.
pub fn random_database(seed: u64, items: usize, transactions: usize, density: f64) -> TransactionDatabase {
    assert!(transactions >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = labels(&mut rng, transactions, 0.4);
    let rows: Vec<Vec<bool>> = (0..transactions)
        .map(|_| (0..items).map(|_| rng.random_bool(density)).collect())
        .collect();
    TransactionDatabase::from_matrix(names(items), &rows, &labels).expect("valid synthetic database")
}

/// Dense random background with the items in `planted` appearing together
/// in most positive rows, so their combination is significant.
pub fn planted_database(
    seed: u64,
    items: usize,
    transactions: usize,
    density: f64,
    planted: &[usize],
) -> TransactionDatabase {
    assert!(transactions >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = labels(&mut rng, transactions, 0.3);
    let rows: Vec<Vec<bool>> = labels
        .iter()
        .map(|&pos| {
            let mut row: Vec<bool> = (0..items).map(|_| rng.random_bool(density)).collect();
            if pos && rng.random_bool(0.9) {
                for &i in planted {
                    row[i] = true;
                }
            }
            row
        })
        .collect();
    TransactionDatabase::from_matrix(names(items), &rows, &labels).expect("valid synthetic database")
}

/// A database whose closed-itemset tree is concentrated under item 0.
///
/// The first `heavy_rows` rows all contain item 0 plus a dense sample of
/// items `1..=heavy_items`; the remaining rows draw sparsely from the other
/// items and never contain item 0. Every closed set touching the dense block
/// contains item 0, so nearly the whole search lies in the first root
/// subtree.
pub fn skewed_database(
    seed: u64,
    heavy_items: usize,
    heavy_rows: usize,
    light_items: usize,
    light_rows: usize,
) -> TransactionDatabase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = 1 + heavy_items + light_items;
    let n = heavy_rows + light_rows;
    assert!(n >= 2);
    let labels = labels(&mut rng, n, 0.5);
    let rows: Vec<Vec<bool>> = (0..n)
        .map(|t| {
            let mut row = vec![false; items];
            if t < heavy_rows {
                row[0] = true;
                for cell in &mut row[1..=heavy_items] {
                    *cell = rng.random_bool(0.6);
                }
            } else {
                for cell in &mut row[heavy_items + 1..] {
                    *cell = rng.random_bool(0.15);
                }
            }
            row
        })
        .collect();
    TransactionDatabase::from_matrix(names(items), &rows, &labels).expect("valid synthetic database")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::count_closed_sequential;

    #[test]
    fn generators_are_reproducible() {
        let a = random_database(3, 8, 20, 0.4);
        let b = random_database(3, 8, 20, 0.4);
        assert_eq!(a.rows(), b.rows());
        assert_ne!(a.rows(), random_database(4, 8, 20, 0.4).rows());
        assert!(a.num_positive() > 0 && a.num_positive() < 20);
    }

    #[test]
    fn skewed_tree_is_mostly_under_item_zero() {
        let db = skewed_database(1, 12, 40, 12, 40);
        let mut under_zero = 0u64;
        let total = count_closed_sequential(&db, 1, |n| under_zero += n.itemset.contains(&0) as u64);
        assert!(under_zero as f64 >= 0.8 * total as f64, "{under_zero} of {total}");
    }

    #[test]
    fn planted_items_are_enriched_in_positives() {
        let db = planted_database(5, 15, 60, 0.3, &[2, 7]);
        let s = db.support_of(&[2, 7]).unwrap();
        assert!(s.positive as f64 > 0.7 * db.num_positive() as f64);
    }
}

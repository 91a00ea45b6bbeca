//! Exhaustive reference implementations for small databases. They share no
//! search code with the engine: closed itemsets come from enumerating every
//! item subset and scanning the rows, and λ from scanning every candidate
//! value.

use crate::dataset::{ItemId, PatternSupport, TransactionDatabase};
use crate::error::Error;
use crate::lamp::{min_support_from, sort_patterns, ClosedSet, LampReport, SignificantPattern};
use crate::stats::{corrected_threshold, StatContext};

/// Largest item count the subset enumeration accepts.
pub const MAX_ORACLE_ITEMS: usize = 20;

fn row_masks(db: &TransactionDatabase) -> Result<Vec<u64>, Error> {
    if db.num_items() > MAX_ORACLE_ITEMS {
        return Err(Error::InvalidConfig(format!(
            "exhaustive check supports at most {MAX_ORACLE_ITEMS} items, database has {}",
            db.num_items()
        )));
    }
    Ok(db
        .rows()
        .iter()
        .map(|r| r.iter().fold(0u64, |m, &i| m | 1 << i))
        .collect())
}

/// Every non-empty closed itemset with support `>= min_support`, sorted.
pub fn closed_sets(db: &TransactionDatabase, min_support: u32) -> Result<Vec<ClosedSet>, Error> {
    let rows = row_masks(db)?;
    let all = (1u64 << db.num_items()) - 1;
    let mut out = Vec::new();
    for set in 1..=all {
        let mut total = 0u32;
        let mut positive = 0u32;
        let mut closure = all;
        for (t, &row) in rows.iter().enumerate() {
            if row & set == set {
                total += 1;
                positive += db.is_positive(t) as u32;
                closure &= row;
            }
        }
        if total >= min_support.max(1) && closure == set {
            out.push(ClosedSet {
                itemset: (0..db.num_items() as ItemId).filter(|&i| set >> i & 1 == 1).collect(),
                support: PatternSupport { total, positive },
            });
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLamp {
    pub final_lambda: u32,
    pub min_support: u32,
    pub correction_factor: u64,
    pub delta: Option<f64>,
    pub patterns: Vec<SignificantPattern>,
}

/// LAMP by brute force: all closed sets, then the first λ in `1..=N+1` at
/// which `f(λ-1) > α / CS(λ)` fails.
pub fn lamp(db: &TransactionDatabase, alpha: f64) -> Result<OracleLamp, Error> {
    let ctx = StatContext::new(db.num_transactions(), db.num_positive())?;
    let all = closed_sets(db, 1)?;
    let n = db.num_transactions() as u32;
    let cs = |lambda: u32| all.iter().filter(|c| c.support.total >= lambda).count() as u64;
    let final_lambda = (1..=n + 1)
        .find(|&lambda| {
            let count = cs(lambda);
            let f = ctx.tarone_bound(lambda as usize - 1).unwrap_or(0.0);
            !(count > 0 && f > alpha / count as f64)
        })
        .unwrap_or(n + 1);
    let min_support = min_support_from(final_lambda);
    let correction_factor = cs(min_support);
    let delta = match correction_factor {
        0 => None,
        k => Some(corrected_threshold(alpha, k)?),
    };
    let mut patterns = Vec::new();
    if let Some(delta) = delta {
        for c in all.iter().filter(|c| c.support.total >= min_support) {
            let p_value = ctx.fisher_p(c.support)?;
            if p_value <= delta {
                patterns.push(SignificantPattern {
                    items: c.itemset.iter().map(|&i| db.item_name(i).to_string()).collect(),
                    support: c.support,
                    p_value,
                });
            }
        }
    }
    sort_patterns(&mut patterns);
    Ok(OracleLamp {
        final_lambda,
        min_support,
        correction_factor,
        delta,
        patterns,
    })
}

/// Compares an engine report with the oracle and describes the first
/// difference, if any.
pub fn diff_lamp(db: &TransactionDatabase, report: &LampReport) -> Result<Option<String>, Error> {
    let want = lamp(db, report.alpha)?;
    if report.final_lambda != want.final_lambda {
        return Ok(Some(format!("final λ: engine {} oracle {}", report.final_lambda, want.final_lambda)));
    }
    if report.min_support != want.min_support {
        return Ok(Some(format!(
            "minimum support: engine {} oracle {}",
            report.min_support, want.min_support
        )));
    }
    let mut inventory = report.phase2.closed.clone();
    inventory.sort();
    let expected = closed_sets(db, want.min_support)?;
    if inventory != expected {
        let first = inventory
            .iter()
            .zip(&expected)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("engine {a:?} oracle {b:?}"))
            .unwrap_or_else(|| format!("engine has {} sets, oracle {}", inventory.len(), expected.len()));
        return Ok(Some(format!("closed-set inventory: {first}")));
    }
    if report.correction_factor != want.correction_factor {
        return Ok(Some(format!(
            "CS: engine {} oracle {}",
            report.correction_factor, want.correction_factor
        )));
    }
    if report.delta != want.delta {
        return Ok(Some(format!("δ: engine {:?} oracle {:?}", report.delta, want.delta)));
    }
    if report.patterns != want.patterns {
        let first = report
            .patterns
            .iter()
            .zip(&want.patterns)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("engine {a:?} oracle {b:?}"))
            .unwrap_or_else(|| {
                format!(
                    "engine has {} patterns, oracle {}",
                    report.patterns.len(),
                    want.patterns.len()
                )
            });
        return Ok(Some(format!("significant patterns: {first}")));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_closed_sets() {
        let db = TransactionDatabase::from_transactions(
            &[vec!["a", "b"], vec!["a", "b", "c"], vec!["c"]],
            &[true, true, false],
        )
        .unwrap();
        let got: Vec<_> = closed_sets(&db, 1)
            .unwrap()
            .into_iter()
            .map(|c| (c.itemset, c.support.total, c.support.positive))
            .collect();
        assert_eq!(got, vec![(vec![0, 1], 2, 2), (vec![0, 1, 2], 1, 1), (vec![2], 2, 1)]);
        assert_eq!(closed_sets(&db, 2).unwrap().len(), 2);
    }

    #[test]
    fn perfectly_separating_item_is_significant() {
        let rows: Vec<Vec<&str>> = (0..20).map(|t| if t < 10 { vec!["x", "y"] } else { vec!["y"] }).collect();
        let labels: Vec<bool> = (0..20).map(|t| t < 10).collect();
        let db = TransactionDatabase::from_transactions(&rows, &labels).unwrap();
        let r = lamp(&db, 0.05).unwrap();
        assert_eq!(r.correction_factor, 2);
        assert_eq!(r.patterns.len(), 1);
        assert_eq!(r.patterns[0].items, vec!["x", "y"]);
    }

    #[test]
    fn diff_reports_lambda_off_by_one() {
        use crate::lamp::{run_lamp, run_lamp_with, EngineFault};
        use crate::runtime::RuntimeConfig;
        let db = crate::synth::planted_database(2, 10, 40, 0.3, &[1, 4]);
        let config = RuntimeConfig::default();
        let good = run_lamp(&db, 0.05, &config).unwrap();
        assert_eq!(diff_lamp(&db, &good).unwrap(), None);
        let bad = run_lamp_with(&db, 0.05, &config, Some(EngineFault::LambdaOffByOne)).unwrap();
        assert!(diff_lamp(&db, &bad).unwrap().unwrap().contains("minimum support"));
    }

    #[test]
    fn item_guard_boundary() {
        let db_with = |m: usize| {
            let names: Vec<String> = (0..m).map(|i| format!("i{i}")).collect();
            let rows = vec![vec![true; m], vec![false; m]];
            TransactionDatabase::from_matrix(names, &rows, &[true, false]).unwrap()
        };
        assert_eq!(closed_sets(&db_with(20), 1).unwrap().len(), 1);
        assert!(closed_sets(&db_with(21), 1).is_err());
    }
}

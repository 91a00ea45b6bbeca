//! LAMP: support-increase search for the optimal minimum support, closed-set
//! enumeration at that support, then Fisher tests at the corrected level.

use std::io::{self, Write};

use crate::dataset::{ItemId, PatternSupport, TransactionDatabase};
use crate::error::Error;
use crate::runtime::{self, Objective, RunOutcome, RuntimeConfig};
use crate::stats::{corrected_threshold, StatContext};

/// Per-worker support-increase state.
///
/// `counters[s]` holds the number of closed itemsets recorded with support
/// exactly `s`; `cs_at_lambda` caches the suffix sum from `lambda` upwards.
#[derive(Debug, Clone)]
pub struct LampState {
    lambda: u32,
    counters: Vec<u64>,
    cs_at_lambda: u64,
    alpha: f64,
}

impl LampState {
    pub fn new(n_total: usize, alpha: f64) -> Self {
        LampState {
            lambda: 1,
            counters: vec![0; n_total + 2],
            cs_at_lambda: 0,
            alpha,
        }
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counters(&self) -> &[u64] {
        &self.counters
    }

    /// Number of recorded closed sets with support `>= lambda`.
    pub fn cs(&self, lambda: u32) -> u64 {
        self.counters.iter().skip(lambda as usize).sum()
    }

    fn max_lambda(&self) -> u32 {
        (self.counters.len() - 1) as u32
    }

    /// Counts one closed itemset and raises λ as far as the counts allow.
    pub fn record_closed_set(&mut self, ctx: &StatContext, support: u32) -> u32 {
        self.add(support, 1);
        self.advance(ctx)
    }

    fn add(&mut self, support: u32, count: u64) {
        let s = (support as usize).min(self.counters.len() - 1);
        self.counters[s] += count;
        if support >= self.lambda {
            self.cs_at_lambda += count;
        }
    }

    /// Adds counts gathered elsewhere, as `(support, count)` pairs.
    pub fn merge_counts(&mut self, deltas: &[(u32, u64)]) {
        for &(s, c) in deltas {
            self.add(s, c);
        }
    }

    /// Increments λ while `f(λ-1) > α / CS(λ)`.
    pub fn advance(&mut self, ctx: &StatContext) -> u32 {
        while self.lambda < self.max_lambda()
            && ctx.lamp_condition_holds(self.lambda as usize, self.cs_at_lambda, self.alpha)
        {
            self.cs_at_lambda -= self.counters[self.lambda as usize];
            self.lambda += 1;
        }
        self.lambda
    }

    /// Raises λ to `lambda` if that is higher; never lowers it.
    pub fn adopt(&mut self, lambda: u32) -> u32 {
        let target = lambda.min(self.max_lambda());
        while self.lambda < target {
            self.cs_at_lambda -= self.counters[self.lambda as usize];
            self.lambda += 1;
        }
        self.lambda
    }
}

/// The largest λ satisfying the LAMP condition is one below the first λ that
/// fails it.
pub fn min_support_from(final_lambda: u32) -> u32 {
    final_lambda.saturating_sub(1).max(1)
}

/// A closed itemset with its support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClosedSet {
    pub itemset: Vec<ItemId>,
    pub support: PatternSupport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificantPattern {
    pub items: Vec<String>,
    pub support: PatternSupport,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct LampReport {
    pub n_total: usize,
    pub n_positive: usize,
    pub alpha: f64,
    /// First λ at which the condition failed.
    pub final_lambda: u32,
    pub min_support: u32,
    /// Closed itemsets with support `>= min_support`.
    pub correction_factor: u64,
    /// `None` when there is nothing to test.
    pub delta: Option<f64>,
    pub patterns: Vec<SignificantPattern>,
    pub phase1: RunOutcome,
    pub phase2: RunOutcome,
}

/// Test-only perturbations used to check that verification catches bugs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineFault {
    /// Uses the final λ itself as the minimum support.
    LambdaOffByOne,
}

pub fn run_lamp(db: &TransactionDatabase, alpha: f64, config: &RuntimeConfig) -> Result<LampReport, Error> {
    run_lamp_with(db, alpha, config, None)
}

pub fn run_lamp_with(
    db: &TransactionDatabase,
    alpha: f64,
    config: &RuntimeConfig,
    fault: Option<EngineFault>,
) -> Result<LampReport, Error> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let ctx = StatContext::new(db.num_transactions(), db.num_positive())?;

    let phase1 = runtime::run(db, &ctx, Objective::SupportIncrease { alpha }, config)?;
    let final_lambda = phase1
        .lambda
        .ok_or_else(|| Error::Invariant("support-increase run produced no λ".into()))?;
    let min_support = match fault {
        Some(EngineFault::LambdaOffByOne) => final_lambda.max(1),
        None => min_support_from(final_lambda),
    };

    let phase2 = runtime::run(db, &ctx, Objective::Enumerate { min_support }, config)?;
    let correction_factor = phase2.closed.len() as u64;
    let delta = if correction_factor == 0 {
        None
    } else {
        Some(corrected_threshold(alpha, correction_factor)?)
    };

    let mut patterns = Vec::new();
    if let Some(delta) = delta {
        for set in &phase2.closed {
            let p_value = ctx.fisher_p(set.support)?;
            if p_value <= delta {
                patterns.push(SignificantPattern {
                    items: set.itemset.iter().map(|&i| db.item_name(i).to_string()).collect(),
                    support: set.support,
                    p_value,
                });
            }
        }
    }
    sort_patterns(&mut patterns);

    Ok(LampReport {
        n_total: db.num_transactions(),
        n_positive: db.num_positive(),
        alpha,
        final_lambda,
        min_support,
        correction_factor,
        delta,
        patterns,
        phase1,
        phase2,
    })
}

/// Ascending P-value, then item names, so output is independent of the order
/// in which workers found the patterns.
pub fn sort_patterns(patterns: &mut [SignificantPattern]) {
    patterns.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then_with(|| a.items.cmp(&b.items)));
}

impl LampReport {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# N\t{}", self.n_total)?;
        writeln!(w, "# N_pos\t{}", self.n_positive)?;
        writeln!(w, "# alpha\t{}", self.alpha)?;
        writeln!(w, "# lambda\t{}", self.final_lambda)?;
        writeln!(w, "# min_support\t{}", self.min_support)?;
        writeln!(w, "# CS\t{}", self.correction_factor)?;
        match self.delta {
            Some(d) => writeln!(w, "# delta\t{d:e}")?,
            None => writeln!(w, "# delta\tNA")?,
        }
        writeln!(w, "p_value\tsupport_total\tsupport_positive\titems")?;
        for p in &self.patterns {
            writeln!(
                w,
                "{:e}\t{}\t{}\t{}",
                p.p_value,
                p.support.total,
                p.support.positive,
                p.items.join(";")
            )?;
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report is UTF-8")
    }
}

/// Closed itemsets with support `>= min_support`, sorted by descending
/// support and then item ids.
#[derive(Debug, Clone)]
pub struct MineReport {
    pub n_total: usize,
    pub n_positive: usize,
    pub min_support: u32,
    pub closed: Vec<ClosedSet>,
    pub outcome: RunOutcome,
}

pub fn mine_closed(db: &TransactionDatabase, min_support: u32, config: &RuntimeConfig) -> Result<MineReport, Error> {
    if min_support == 0 {
        return Err(Error::InvalidConfig("min-support must be at least 1".into()));
    }
    let ctx = StatContext::new(db.num_transactions(), db.num_positive())?;
    let outcome = runtime::run(db, &ctx, Objective::Enumerate { min_support }, config)?;
    let mut closed = outcome.closed.clone();
    closed.sort_by(|a, b| b.support.total.cmp(&a.support.total).then_with(|| a.itemset.cmp(&b.itemset)));
    Ok(MineReport {
        n_total: db.num_transactions(),
        n_positive: db.num_positive(),
        min_support,
        closed,
        outcome,
    })
}

impl MineReport {
    pub fn write_tsv<W: Write>(&self, db: &TransactionDatabase, mut w: W) -> io::Result<()> {
        writeln!(w, "# N\t{}", self.n_total)?;
        writeln!(w, "# N_pos\t{}", self.n_positive)?;
        writeln!(w, "# min_support\t{}", self.min_support)?;
        writeln!(w, "# closed_sets\t{}", self.closed.len())?;
        writeln!(w, "support_total\tsupport_positive\titems")?;
        for c in &self.closed {
            let names: Vec<&str> = c.itemset.iter().map(|&i| db.item_name(i)).collect();
            writeln!(w, "{}\t{}\t{}", c.support.total, c.support.positive, names.join(";"))?;
        }
        Ok(())
    }
}

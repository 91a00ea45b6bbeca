//! One-sided Fisher exact test, Tarone's minimum achievable P-value and the
//! LAMP threshold condition.
//!
//! Binomial coefficients are evaluated in log space from a table of `ln(k!)`
//! so that databases with ~10^5 transactions stay finite.

use thiserror::Error;

use crate::dataset::PatternSupport;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid contingency: support {total} with {positive} positives (N={n_total}, N_pos={n_positive})")]
    InvalidContingency {
        total: u32,
        positive: u32,
        n_total: usize,
        n_positive: usize,
    },
    #[error("support {x} out of range 0..={n_total}")]
    SupportOutOfRange { x: usize, n_total: usize },
    #[error("correction factor is zero: no hypotheses to correct for")]
    ZeroCorrection,
    #[error("invalid marginals: N_pos={n_positive} exceeds N={n_total}")]
    InvalidMarginals { n_total: usize, n_positive: usize },
}

#[derive(Debug, Clone)]
pub struct StatContext {
    n_total: usize,
    n_positive: usize,
    log_factorials: Vec<f64>,
    tarone: Vec<f64>,
}

impl StatContext {
    pub fn new(n_total: usize, n_positive: usize) -> Result<Self, StatsError> {
        if n_positive > n_total {
            return Err(StatsError::InvalidMarginals {
                n_total,
                n_positive,
            });
        }
        // Compensated summation keeps ln(N!) accurate to a few ulps.
        let mut log_factorials = Vec::with_capacity(n_total + 1);
        log_factorials.push(0.0);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for k in 1..=n_total {
            let y = (k as f64).ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            log_factorials.push(sum);
        }
        let mut ctx = StatContext {
            n_total,
            n_positive,
            log_factorials,
            tarone: Vec::new(),
        };
        let mut tarone = Vec::with_capacity(n_total + 1);
        let mut prev = 1.0f64;
        for x in 0..=n_total {
            let f = if x > n_positive {
                0.0
            } else {
                ctx.log_term(x, x).exp().min(1.0)
            };
            // Exact arithmetic is strictly decreasing; the running min only
            // guards against a last-ulp wobble.
            prev = prev.min(f);
            tarone.push(prev);
        }
        ctx.tarone = tarone;
        Ok(ctx)
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn n_positive(&self) -> usize {
        self.n_positive
    }

    pub fn log_factorials(&self) -> &[f64] {
        &self.log_factorials
    }

    #[inline]
    fn ln_choose(&self, n: usize, k: usize) -> f64 {
        debug_assert!(k <= n);
        self.log_factorials[n] - self.log_factorials[k] - self.log_factorials[n - k]
    }

    /// ln of the hypergeometric probability of `i` positives among `x` draws.
    #[inline]
    fn log_term(&self, i: usize, x: usize) -> f64 {
        let n_neg = self.n_total - self.n_positive;
        self.ln_choose(self.n_positive, i) + self.ln_choose(n_neg, x - i) - self.ln_choose(self.n_total, x)
    }

    /// One-sided (greater) Fisher exact P-value of an itemset's 2x2 table.
    pub fn fisher_p(&self, support: PatternSupport) -> Result<f64, StatsError> {
        let x = support.total as usize;
        let n = support.positive as usize;
        let n_neg = self.n_total - self.n_positive;
        if x > self.n_total || n > x || n > self.n_positive || x - n > n_neg {
            return Err(StatsError::InvalidContingency {
                total: support.total,
                positive: support.positive,
                n_total: self.n_total,
                n_positive: self.n_positive,
            });
        }
        let lo = x.saturating_sub(n_neg);
        let hi = x.min(self.n_positive);
        if n <= lo {
            return Ok(1.0);
        }
        let mut max_log = f64::NEG_INFINITY;
        for i in n..=hi {
            max_log = max_log.max(self.log_term(i, x));
        }
        let scaled: f64 = (n..=hi).map(|i| (self.log_term(i, x) - max_log).exp()).sum();
        Ok((max_log.exp() * scaled).min(1.0))
    }

    /// Tarone's bound f(x) = C(N_pos, x) / C(N, x), the smallest P-value any
    /// itemset with support `x` can reach.
    pub fn tarone_bound(&self, x: usize) -> Result<f64, StatsError> {
        self.tarone.get(x).copied().ok_or(StatsError::SupportOutOfRange {
            x,
            n_total: self.n_total,
        })
    }

    /// `f(λ-1) > α / cs_count`. False when `cs_count` is zero.
    pub fn lamp_condition_holds(&self, lambda: usize, cs_count: u64, alpha: f64) -> bool {
        debug_assert!(lambda >= 1);
        if cs_count == 0 {
            return false;
        }
        let f = self.tarone.get(lambda.saturating_sub(1)).copied().unwrap_or(0.0);
        f > alpha / cs_count as f64
    }
}

/// Bonferroni-style adjusted level `α / cs_count`.
pub fn corrected_threshold(alpha: f64, cs_count: u64) -> Result<f64, StatsError> {
    if cs_count == 0 {
        return Err(StatsError::ZeroCorrection);
    }
    Ok(alpha / cs_count as f64)
}

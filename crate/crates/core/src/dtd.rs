//! Distributed termination detection with Mattern's time algorithm, run as
//! waves over a ternary spanning tree rooted at worker 0.
//!
//! Every basic message carries the sender's clock, which is the id of the
//! last wave that visited the sender. A wave snapshots each worker's
//! send/receive balance when it visits; the sum over the tree is the number
//! of messages crossing the cut. A message whose timestamp is newer than the
//! receiver's clock was sent after the sender's visit and received before
//! the receiver's, so the cut is inconsistent and the wave is discarded.
//!
//! Closed-set counters ride up the tree with the snapshots and the root's
//! aggregated λ rides down with the next wave.

use crate::lamp::LampState;
use crate::stats::StatContext;

pub const TREE_ARITY: usize = 3;

pub fn tree_parent(worker: usize) -> Option<usize> {
    (worker > 0).then(|| (worker - 1) / TREE_ARITY)
}

pub fn tree_children(worker: usize, workers: usize) -> Vec<usize> {
    (1..=TREE_ARITY)
        .map(|k| TREE_ARITY * worker + k)
        .filter(|&c| c < workers)
        .collect()
}

/// `a` is strictly later than `b` on the wrapping 32-bit clock.
#[inline]
pub fn clock_after(a: u32, b: u32) -> bool {
    (a.wrapping_sub(b) as i32) > 0
}

/// Per-worker detector state.
#[derive(Debug, Clone)]
pub struct DtdLocal {
    clock: u32,
    balance: i64,
    tainted: bool,
    parent: Option<usize>,
    children: Vec<usize>,
}

impl DtdLocal {
    pub fn new(worker: usize, workers: usize) -> Self {
        DtdLocal {
            clock: 0,
            balance: 0,
            tainted: false,
            parent: tree_parent(worker),
            children: tree_children(worker, workers),
        }
    }

    pub fn clock(&self) -> u32 {
        self.clock
    }

    pub fn balance(&self) -> i64 {
        self.balance
    }

    pub fn is_tainted(&self) -> bool {
        self.tainted
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn children(&self) -> &[usize] {
        &self.children
    }

    /// Returns the timestamp to stamp on the outgoing basic message.
    pub fn on_basic_send(&mut self) -> u32 {
        self.balance += 1;
        self.clock
    }

    pub fn on_basic_receive(&mut self, timestamp: u32) {
        self.balance -= 1;
        if clock_after(timestamp, self.clock) {
            self.tainted = true;
        }
    }

    /// Records the visit of wave `wave`: returns `(balance, tainted)` as of
    /// this instant and moves the worker into the wave's future.
    pub fn visit(&mut self, wave: u32) -> (i64, bool) {
        let snapshot = (self.balance, self.tainted);
        self.clock = wave;
        self.tainted = false;
        snapshot
    }
}

/// Aggregated snapshot of a subtree, carried by CONTROL_UP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WaveReport {
    pub wave: u32,
    pub balance: i64,
    pub tainted: bool,
    pub all_passive: bool,
    pub max_clock: u32,
    /// Closed-set counter deltas as sorted `(support, count)` pairs.
    pub counters: Vec<(u32, u64)>,
    pub nodes_processed: u64,
    pub workers: usize,
}

impl WaveReport {
    pub fn merge(&mut self, other: &WaveReport) {
        self.balance += other.balance;
        self.tainted |= other.tainted;
        self.all_passive &= other.all_passive;
        if clock_after(other.max_clock, self.max_clock) {
            self.max_clock = other.max_clock;
        }
        self.nodes_processed += other.nodes_processed;
        self.workers += other.workers;
        self.counters = merge_counts(&self.counters, &other.counters);
    }
}

fn merge_counts(a: &[(u32, u64)], b: &[(u32, u64)]) -> Vec<(u32, u64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Merges wave counter deltas into the root's global state and returns the
/// resulting global λ.
pub fn aggregate_lambda(global: &mut LampState, ctx: &StatContext, deltas: &[(u32, u64)]) -> u32 {
    global.merge_counts(deltas);
    global.advance(ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveOutcome {
    Terminated,
    Retry,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WaveStats {
    pub waves: u64,
    pub retries: u64,
    /// Wall-clock (threads) or ticks (simulator) from global quiescence to
    /// the termination decision.
    pub time_to_termination: f64,
}

pub const MAX_BACKOFF: u32 = 64;

/// Root-side wave scheduling and decisions.
#[derive(Debug, Clone)]
pub struct WaveCoordinator {
    wave: u32,
    in_progress: bool,
    ticks_since: u32,
    backoff: u32,
    global: Option<LampState>,
    stats: WaveStats,
    finished: bool,
}

impl WaveCoordinator {
    pub fn new(global: Option<LampState>) -> Self {
        WaveCoordinator {
            wave: 0,
            in_progress: false,
            ticks_since: 0,
            backoff: 1,
            global,
            stats: WaveStats::default(),
            finished: false,
        }
    }

    /// Called once per probe at the root. Returns the id of a wave to start.
    pub fn poll_start(&mut self) -> Option<u32> {
        if self.in_progress || self.finished {
            return None;
        }
        self.ticks_since += 1;
        if self.ticks_since < self.backoff {
            return None;
        }
        self.wave = self.wave.wrapping_add(1);
        self.in_progress = true;
        self.stats.waves += 1;
        Some(self.wave)
    }

    pub fn global_lambda(&self) -> u32 {
        self.global.as_ref().map_or(0, LampState::lambda)
    }

    pub fn global_state(&self) -> Option<&LampState> {
        self.global.as_ref()
    }

    pub fn stats(&self) -> &WaveStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut WaveStats {
        &mut self.stats
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Consumes the aggregated report of the whole tree.
    pub fn complete(&mut self, report: &WaveReport, ctx: &StatContext) -> WaveOutcome {
        debug_assert!(self.in_progress);
        self.in_progress = false;
        self.ticks_since = 0;
        if let Some(global) = self.global.as_mut() {
            aggregate_lambda(global, ctx, &report.counters);
        }
        if report.balance == 0 && !report.tainted && report.all_passive {
            self.finished = true;
            return WaveOutcome::Terminated;
        }
        self.stats.retries += 1;
        self.backoff = if report.all_passive {
            (self.backoff * 2).min(MAX_BACKOFF)
        } else {
            1
        };
        WaveOutcome::Retry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(d: &mut DtdLocal, wave: u32, passive: bool) -> WaveReport {
        let (balance, tainted) = d.visit(wave);
        WaveReport {
            wave,
            balance,
            tainted,
            all_passive: passive,
            max_clock: wave,
            workers: 1,
            ..Default::default()
        }
    }

    fn run_wave(ds: &mut [DtdLocal], wave: u32, passive: bool) -> WaveReport {
        let mut total = WaveReport {
            all_passive: true,
            ..Default::default()
        };
        for d in ds.iter_mut() {
            total.merge(&report(d, wave, passive));
        }
        total
    }

    #[test]
    fn ternary_tree_shape() {
        assert_eq!(tree_children(0, 8), vec![1, 2, 3]);
        assert_eq!(tree_children(1, 8), vec![4, 5, 6]);
        assert_eq!(tree_children(2, 8), vec![7]);
        assert_eq!(tree_parent(7), Some(2));
        assert_eq!(tree_parent(0), None);
        for p in 1..40 {
            let mut seen = vec![false; p];
            let mut stack = vec![0];
            while let Some(w) = stack.pop() {
                seen[w] = true;
                for c in tree_children(w, p) {
                    assert_eq!(tree_parent(c), Some(w));
                    stack.push(c);
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn send_receive_conserves_balance() {
        let mut a = DtdLocal::new(0, 2);
        let mut b = DtdLocal::new(1, 2);
        let ts = a.on_basic_send();
        assert_eq!(a.balance() + b.balance(), 1);
        b.on_basic_receive(ts);
        assert_eq!(a.balance() + b.balance(), 0);
    }

    #[test]
    fn quiescent_start_terminates_first_wave() {
        let mut ds = vec![DtdLocal::new(0, 3), DtdLocal::new(1, 3), DtdLocal::new(2, 3)];
        let mut coord = WaveCoordinator::new(None);
        let wave = coord.poll_start().unwrap();
        let r = run_wave(&mut ds, wave, true);
        assert_eq!(coord.complete(&r, &StatContext::new(2, 1).unwrap()), WaveOutcome::Terminated);
    }

    #[test]
    fn in_flight_message_forces_retry() {
        let ctx = StatContext::new(2, 1).unwrap();
        let mut ds = vec![DtdLocal::new(0, 2), DtdLocal::new(1, 2)];
        let mut coord = WaveCoordinator::new(None);
        let _give = ds[0].on_basic_send();
        let wave = coord.poll_start().unwrap();
        let r = run_wave(&mut ds, wave, true);
        assert_eq!(r.balance, 1);
        assert_eq!(coord.complete(&r, &ctx), WaveOutcome::Retry);
    }

    #[test]
    fn message_crossing_the_cut_taints_the_wave() {
        // 0 is visited, then sends; 1 receives before its own visit.
        let ctx = StatContext::new(2, 1).unwrap();
        let mut ds = vec![DtdLocal::new(0, 2), DtdLocal::new(1, 2)];
        let mut coord = WaveCoordinator::new(None);
        let wave = coord.poll_start().unwrap();
        let mut total = report(&mut ds[0], wave, true);
        let ts = ds[0].on_basic_send();
        ds[1].on_basic_receive(ts);
        assert!(ds[1].is_tainted());
        let r1 = report(&mut ds[1], wave, true);
        total.merge(&r1);
        assert_eq!(total.balance, -1);
        assert!(total.tainted);
        assert_eq!(coord.complete(&total, &ctx), WaveOutcome::Retry);

        let wave = coord.poll_start();
        assert!(wave.is_none(), "backoff 2 after an all-passive retry");
        let wave = coord.poll_start().unwrap();
        let r = run_wave(&mut ds, wave, true);
        assert_eq!(r.balance, 0);
        assert!(!r.tainted);
        assert_eq!(coord.complete(&r, &ctx), WaveOutcome::Terminated);
    }

    #[test]
    fn wrapping_clock_comparison() {
        assert!(clock_after(1, 0));
        assert!(!clock_after(0, 0));
        assert!(clock_after(0, u32::MAX));
        assert!(!clock_after(u32::MAX, 0));
        let mut d = DtdLocal::new(1, 2);
        d.visit(u32::MAX);
        d.on_basic_receive(0);
        assert!(d.is_tainted());
    }

    #[test]
    fn aggregation_matches_replay_and_empty_is_noop() {
        let ctx = StatContext::new(20, 8).unwrap();
        let supports = [9u32, 4, 4, 6, 3, 8, 5, 5, 7, 2, 4, 6, 6, 5];
        let mut seq = LampState::new(20, 0.05);
        for &s in &supports {
            if s >= seq.lambda() {
                seq.record_closed_set(&ctx, s);
            }
        }
        // Same multiset split over two waves in a different order.
        let mut global = LampState::new(20, 0.05);
        let mut deltas: Vec<(u32, u64)> = Vec::new();
        for &s in supports.iter().rev().take(5) {
            deltas = merge_counts(&deltas, &[(s, 1)]);
        }
        aggregate_lambda(&mut global, &ctx, &deltas);
        let mut rest: Vec<(u32, u64)> = Vec::new();
        for &s in supports.iter().rev().skip(5) {
            rest = merge_counts(&rest, &[(s, 1)]);
        }
        let l = aggregate_lambda(&mut global, &ctx, &rest);
        assert_eq!(l, seq.lambda());
        assert_eq!(aggregate_lambda(&mut global, &ctx, &[]), l);
        assert_eq!(global.adopt(1), l);
    }
}

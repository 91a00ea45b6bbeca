//! Deterministic discrete-event transport. Every nondeterministic decision
//! (activation order, which workers run, delivery delays, batch sizes and
//! compute budgets) goes through a [`Chooser`], so a schedule is either
//! reproducible from a seed or can be enumerated choice by choice.
//!
//! Global invariants are checked against the true system state, which no
//! worker can see: node conservation, detector balance, request/reply
//! pairing, steal-request bounds, λ monotonicity, no premature termination
//! and bounded termination latency once the system is quiescent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::TransactionDatabase;
use crate::dtd::WaveStats;
use crate::lamp::ClosedSet;
use crate::stats::StatContext;

use super::message::{Body, Message, MessageKind, StealKind, WorkerId};
use super::metrics::WorkerMetrics;
use super::topology::LifelineTopology;
use super::worker::Worker;
use super::{Fault, Objective, RuntimeConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    Seeded(u64),
    /// Explicit choice values, consumed in order; missing values are 0.
    Scripted(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Extra ticks a message may spend in flight.
    pub max_delay: u32,
    /// Most messages delivered to one worker per activation.
    pub max_batch: u32,
    /// Most nodes processed per activation.
    pub max_budget: u32,
    pub max_ticks: u64,
    /// Ticks allowed between global quiescence and the termination decision.
    pub liveness_bound: u64,
    pub trace: bool,
    pub schedule: Schedule,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_delay: 3,
            max_batch: 4,
            max_budget: 4,
            max_ticks: 5_000_000,
            liveness_bound: 20_000,
            trace: false,
            schedule: Schedule::Seeded(0),
        }
    }
}

/// Source of scheduling decisions. Records every decision with its arity so
/// callers can enumerate schedules exhaustively.
#[derive(Debug, Clone)]
pub struct Chooser {
    rng: Option<ChaCha8Rng>,
    script: Vec<u32>,
    taken: Vec<u32>,
    arities: Vec<u32>,
}

impl Chooser {
    pub fn new(schedule: &Schedule) -> Self {
        match schedule {
            Schedule::Seeded(seed) => Chooser {
                rng: Some(ChaCha8Rng::seed_from_u64(*seed)),
                script: Vec::new(),
                taken: Vec::new(),
                arities: Vec::new(),
            },
            Schedule::Scripted(script) => Chooser {
                rng: None,
                script: script.clone(),
                taken: Vec::new(),
                arities: Vec::new(),
            },
        }
    }

    /// A value in `0..n`. Single-option decisions are not recorded.
    pub fn choose(&mut self, n: u32) -> u32 {
        if n <= 1 {
            return 0;
        }
        let v = match self.rng.as_mut() {
            Some(rng) => rng.random_range(0..n),
            None => self.script.get(self.taken.len()).copied().unwrap_or(0).min(n - 1),
        };
        self.taken.push(v);
        self.arities.push(n);
        v
    }

    pub fn taken(&self) -> &[u32] {
        &self.taken
    }

    pub fn arities(&self) -> &[u32] {
        &self.arities
    }
}

/// The next script in depth-first order after a run that made `taken`
/// choices with the given arities; `None` once every schedule was visited.
pub fn next_script(taken: &[u32], arities: &[u32]) -> Option<Vec<u32>> {
    let i = (0..taken.len()).rev().find(|&i| taken[i] + 1 < arities[i])?;
    let mut next = taken[..i].to_vec();
    next.push(taken[i] + 1);
    Some(next)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WorkConservation(String),
    BalanceMismatch { detector: i64, in_flight: i64 },
    Handshake(String),
    StealStorm { worker: WorkerId, requests: u64, bound: u64 },
    PrematureFinish(String),
    Liveness(String),
    LambdaRegression { worker: WorkerId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WorkConservation(s) => write!(f, "work conservation: {s}"),
            Violation::BalanceMismatch { detector, in_flight } => {
                write!(f, "detector balance {detector} but {in_flight} basic messages in flight")
            }
            Violation::Handshake(s) => write!(f, "request/reply pairing: {s}"),
            Violation::StealStorm {
                worker,
                requests,
                bound,
            } => write!(f, "worker {worker} sent {requests} steal requests, bound {bound}"),
            Violation::PrematureFinish(s) => write!(f, "premature termination: {s}"),
            Violation::Liveness(s) => write!(f, "liveness: {s}"),
            Violation::LambdaRegression { worker } => write!(f, "worker {worker} lowered its λ"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub lambda: Option<u32>,
    pub counters: Vec<u64>,
    pub closed: Vec<ClosedSet>,
    pub metrics: Vec<WorkerMetrics>,
    pub waves: WaveStats,
    pub ticks: u64,
    pub violations: Vec<Violation>,
    pub trace: Vec<String>,
    pub choices: Vec<u32>,
    pub arities: Vec<u32>,
}

#[derive(Default)]
struct Network {
    /// Per destination, keyed by (ready tick, send sequence).
    queues: Vec<BTreeMap<(u64, u64), Message>>,
    pair_ready: HashMap<(WorkerId, WorkerId), u64>,
    seq: u64,
    basic_in_flight: i64,
    give_nodes_in_flight: u64,
    /// Outstanding requests per (thief, victim, kind).
    open_requests: HashMap<(WorkerId, WorkerId, StealKind), i64>,
}

impl Network {
    fn post(&mut self, now: u64, delay: u32, from: WorkerId, to: WorkerId, msg: Message) -> Result<(), String> {
        let key = (from, to);
        let ready = (now + 1 + delay as u64).max(*self.pair_ready.get(&key).unwrap_or(&0));
        self.pair_ready.insert(key, ready);
        if msg.is_basic() {
            self.basic_in_flight += 1;
        }
        self.give_nodes_in_flight += msg.give_len() as u64;
        let pairing = match &msg.body {
            Body::Request(kind) => {
                *self.open_requests.entry((from, to, *kind)).or_insert(0) += 1;
                Ok(())
            }
            Body::Reject(kind) | Body::Give { reply: Some(kind), .. } => {
                let open = self.open_requests.entry((to, from, *kind)).or_insert(0);
                *open -= 1;
                if *open < 0 {
                    Err(format!("{from} replied to {to} without an open {kind:?} request"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        };
        self.queues[to].insert((ready, self.seq), msg);
        self.seq += 1;
        pairing
    }

    fn take_ready(&mut self, now: u64, to: WorkerId) -> Option<Message> {
        let (&key, _) = self.queues[to].first_key_value()?;
        if key.0 > now {
            return None;
        }
        let msg = self.queues[to].remove(&key)?;
        if msg.is_basic() {
            self.basic_in_flight -= 1;
        }
        self.give_nodes_in_flight -= msg.give_len() as u64;
        Some(msg)
    }

    fn is_empty(&self) -> bool {
        self.queues.iter().all(BTreeMap::is_empty)
    }
}

pub fn simulate(
    db: &TransactionDatabase,
    ctx: &StatContext,
    objective: Objective,
    config: &RuntimeConfig,
) -> SimReport {
    let p = config.workers;
    let sim = &config.sim;
    let topo = LifelineTopology::build(p, config.lifeline_side, config.random_steals);
    let mut chooser = Chooser::new(&sim.schedule);
    let mut workers: Vec<Worker> = (0..p)
        .map(|id| Worker::new(id, db, ctx, objective, &topo, config))
        .collect();
    let mut net = Network {
        queues: (0..p).map(|_| BTreeMap::new()).collect(),
        ..Default::default()
    };
    let mut violations = Vec::new();
    let mut trace = Vec::new();
    let mut dup_pending = config.fault == Some(Fault::DuplicateGive);
    let speeds: Vec<u32> = (0..p).map(|_| 1 + chooser.choose(4)).collect();
    let mut active_ticks = vec![0u64; p];
    let mut idle_ticks = vec![0u64; p];

    for w in workers.iter_mut() {
        w.preprocess();
    }

    let mut quiescent_since: Option<u64> = None;
    let mut finish_tick: Option<u64> = None;
    let mut tick = 0u64;
    let mut order: Vec<WorkerId> = (0..p).collect();
    let mut outbox: Vec<(WorkerId, Message)> = Vec::new();

    'ticks: while tick < sim.max_ticks {
        for i in (1..p).rev() {
            let j = chooser.choose(i as u32 + 1) as usize;
            order.swap(i, j);
        }
        for &w in &order {
            if chooser.choose(4) >= speeds[w] {
                continue;
            }
            let batch = 1 + chooser.choose(sim.max_batch.max(1));
            let worker = &mut workers[w];
            for _ in 0..batch {
                let Some(msg) = net.take_ready(tick, w) else { break };
                if sim.trace {
                    trace.push(format!("t{tick} {} -> {w} {:?}", msg.source, msg.kind()));
                }
                worker.handle(msg, &mut outbox);
            }
            worker.service(&mut outbox);
            if !worker.is_terminated() {
                if worker.has_work() {
                    active_ticks[w] += 1;
                    let budget = 1 + chooser.choose(sim.max_budget.max(1));
                    worker.compute(budget as usize);
                } else {
                    idle_ticks[w] += 1;
                }
                worker.service(&mut outbox);
            }
            for (to, msg) in outbox.drain(..) {
                let delay = chooser.choose(sim.max_delay + 1);
                let duplicate = dup_pending && msg.kind() == MessageKind::Give;
                let copy = duplicate.then(|| msg.clone());
                if let Err(e) = net.post(tick, delay, w, to, msg) {
                    violations.push(Violation::Handshake(e));
                }
                if let Some(copy) = copy {
                    dup_pending = false;
                    if let Err(e) = net.post(tick, delay, w, to, copy) {
                        violations.push(Violation::Handshake(e));
                    }
                }
            }
            if w == 0 && finish_tick.is_none() && workers[0].is_terminated() {
                finish_tick = Some(tick);
                if let Some(why) = not_quiescent(&workers, &net) {
                    violations.push(Violation::PrematureFinish(why));
                    break 'ticks;
                }
            }
        }

        let before = violations.len();
        let (given, received) = workers
            .iter()
            .fold((0, 0), |(g, r), w| (g + w.counters().given, r + w.counters().received));
        if given != received + net.give_nodes_in_flight {
            violations.push(Violation::WorkConservation(format!(
                "{given} nodes given, {received} received, {} in flight",
                net.give_nodes_in_flight
            )));
        }
        let detector: i64 = workers.iter().map(|w| w.dtd().balance()).sum();
        if detector != net.basic_in_flight {
            violations.push(Violation::BalanceMismatch {
                detector,
                in_flight: net.basic_in_flight,
            });
        }
        if let Some(w) = workers.iter().find(|w| w.lambda_regressed()) {
            violations.push(Violation::LambdaRegression { worker: w.id() });
        }
        if violations.len() > before {
            break;
        }

        if quiescent_since.is_none() && not_quiescent(&workers, &net).is_none() {
            quiescent_since = Some(tick);
        }
        tick += 1;
        if workers.iter().all(Worker::is_terminated) && net.is_empty() {
            break;
        }
        if let Some(q) = quiescent_since {
            if finish_tick.is_none() && tick - q > sim.liveness_bound {
                violations.push(Violation::Liveness(format!(
                    "quiescent since tick {q}, no termination after {} ticks",
                    sim.liveness_bound
                )));
                break;
            }
        }
    }
    if violations.is_empty() && !workers.iter().all(Worker::is_terminated) {
        violations.push(Violation::Liveness(format!("not terminated after {tick} ticks")));
    }

    for w in &workers {
        let c = w.counters();
        let bound = (c.gives_received + 1) * (w.random_trials() + w.lifelines().len()) as u64;
        if c.requests_sent > bound {
            violations.push(Violation::StealStorm {
                worker: w.id(),
                requests: c.requests_sent,
                bound,
            });
        }
    }
    if violations.is_empty() {
        let open: Vec<_> = net.open_requests.iter().filter(|(_, &n)| n != 0).collect();
        if !open.is_empty() {
            violations.push(Violation::Handshake(format!("unanswered requests {open:?}")));
        }
        let generated: u64 = workers.iter().map(|w| w.counters().generated).sum();
        let popped: u64 = workers.iter().map(|w| w.counters().popped).sum();
        if generated != popped {
            violations.push(Violation::WorkConservation(format!(
                "{generated} nodes generated, {popped} processed"
            )));
        }
    }

    let coord = workers[0].coordinator().expect("root coordinator");
    let mut waves = coord.stats().clone();
    if let (Some(q), Some(f)) = (quiescent_since, finish_tick) {
        waves.time_to_termination = f.saturating_sub(q) as f64;
    }
    let lambda = coord.global_state().map(|g| g.lambda());
    let counters = coord.global_state().map(|g| g.counters().to_vec()).unwrap_or_default();
    let mut closed = Vec::new();
    let mut metrics = Vec::new();
    for (i, w) in workers.iter_mut().enumerate() {
        closed.extend(w.take_closed());
        let mut m = w.metrics().clone();
        m.main_s = active_ticks[i] as f64;
        m.idle_s = idle_ticks[i] as f64;
        metrics.push(m);
    }
    closed.sort();
    SimReport {
        lambda,
        counters,
        closed,
        metrics,
        waves,
        ticks: tick,
        violations,
        trace,
        choices: chooser.taken().to_vec(),
        arities: chooser.arities().to_vec(),
    }
}

/// Why the system is not yet globally quiescent, if it is not.
fn not_quiescent(workers: &[Worker], net: &Network) -> Option<String> {
    if net.basic_in_flight != 0 {
        return Some(format!("{} basic messages in flight", net.basic_in_flight));
    }
    workers
        .iter()
        .find(|w| !w.is_passive())
        .map(|w| format!("worker {} is active with {} nodes", w.id(), w.stack_len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::count_closed_sequential;

    fn db() -> TransactionDatabase {
        crate::synth::random_database(11, 12, 40, 0.5)
    }

    fn config(workers: usize, seed: u64) -> RuntimeConfig {
        RuntimeConfig {
            workers,
            sim: SimConfig {
                schedule: Schedule::Seeded(seed),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn next_script_walks_depth_first() {
        assert_eq!(next_script(&[0, 0], &[2, 3]), Some(vec![0, 1]));
        assert_eq!(next_script(&[0, 2], &[2, 3]), Some(vec![1]));
        assert_eq!(next_script(&[1, 2], &[2, 3]), None);
    }

    #[test]
    fn scripted_chooser_replays_and_clamps() {
        let mut c = Chooser::new(&Schedule::Scripted(vec![5, 1]));
        assert_eq!(c.choose(1), 0);
        assert_eq!(c.choose(3), 2);
        assert_eq!(c.choose(3), 1);
        assert_eq!(c.choose(3), 0);
        assert_eq!(c.arities(), &[3, 3, 3]);
    }

    #[test]
    fn enumeration_matches_sequential_for_several_sizes() {
        let db = db();
        let ctx = StatContext::new(db.num_transactions(), db.num_positive()).unwrap();
        let expected = count_closed_sequential(&db, 2, |_| {});
        for p in [1, 2, 3, 5, 8] {
            for seed in 0..3 {
                let r = simulate(&db, &ctx, Objective::Enumerate { min_support: 2 }, &config(p, seed));
                assert!(r.violations.is_empty(), "P={p}: {:?}", r.violations);
                assert_eq!(r.closed.len() as u64, expected, "P={p} seed={seed}");
                let mut dedup = r.closed.clone();
                dedup.dedup();
                assert_eq!(dedup.len(), r.closed.len());
            }
        }
    }

    #[test]
    fn duplicated_give_is_caught() {
        let db = db();
        let ctx = StatContext::new(db.num_transactions(), db.num_positive()).unwrap();
        let mut cfg = config(4, 1);
        cfg.fault = Some(Fault::DuplicateGive);
        let r = simulate(&db, &ctx, Objective::Enumerate { min_support: 1 }, &cfg);
        let gives: u64 = r.metrics.iter().map(|m| m.steals_succeeded).sum();
        assert!(!r.violations.is_empty(), "gives={gives} ticks={}", r.ticks);
    }

    #[test]
    fn trace_records_deliveries() {
        let db = db();
        let ctx = StatContext::new(db.num_transactions(), db.num_positive()).unwrap();
        let mut cfg = config(3, 2);
        cfg.sim.trace = true;
        let r = simulate(&db, &ctx, Objective::Enumerate { min_support: 2 }, &cfg);
        assert!(r.violations.is_empty());
        assert!(r.trace.iter().any(|l| l.contains("Finish")));
    }
}

//! Parallel execution: workers exchanging stack halves by lifeline work
//! stealing, with termination and λ aggregation by detector waves. The same
//! worker code runs on two transports: a deterministic simulator and OS
//! threads.

pub mod message;
pub mod metrics;
pub mod sim;
pub mod threads;
pub mod topology;
pub mod worker;

use std::time::{Duration, Instant};

use crate::dataset::TransactionDatabase;
use crate::dtd::WaveStats;
use crate::error::Error;
use crate::lamp::ClosedSet;
use crate::stats::StatContext;

pub use metrics::{write_metrics_tsv, WorkerMetrics, METRICS_HEADER};
pub use sim::{SimConfig, Schedule, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Sim,
    Threads,
}

/// Deliberate protocol bugs, used to show that the checks catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// The simulator delivers the first GIVE twice.
    DuplicateGive,
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub workers: usize,
    pub transport: TransportKind,
    /// Seeds the random-victim generators.
    pub seed: u64,
    /// Side length `l` of the lifeline hypercube.
    pub lifeline_side: usize,
    /// Random steal attempts `w` before falling back to lifelines.
    pub random_steals: usize,
    /// Target time between probes on the thread transport.
    pub probe_interval: Duration,
    /// Static partition of the first level only; no stealing.
    pub naive: bool,
    pub sim: SimConfig,
    pub fault: Option<Fault>,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            workers: 1,
            transport: TransportKind::Threads,
            seed: 0,
            lifeline_side: 2,
            random_steals: 1,
            probe_interval: Duration::from_millis(1),
            naive: false,
            sim: SimConfig::default(),
            fault: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Count closed sets and raise λ; produces the final λ.
    SupportIncrease { alpha: f64 },
    /// Collect every closed set with support `>= min_support`.
    Enumerate { min_support: u32 },
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Final global λ of a support-increase run.
    pub lambda: Option<u32>,
    /// Global closed-set counts by support (support-increase runs).
    pub counters: Vec<u64>,
    /// Collected closed sets, sorted (enumeration runs).
    pub closed: Vec<ClosedSet>,
    pub metrics: Vec<WorkerMetrics>,
    pub waves: WaveStats,
    pub wall: Duration,
    /// Simulated ticks; `None` on the thread transport.
    pub ticks: Option<u64>,
}

pub fn validate(config: &RuntimeConfig) -> Result<(), Error> {
    if config.workers == 0 {
        return Err(Error::InvalidConfig("at least one worker is required".into()));
    }
    if config.lifeline_side < 2 {
        return Err(Error::InvalidConfig("lifeline side length must be at least 2".into()));
    }
    if config.probe_interval.is_zero() {
        return Err(Error::InvalidConfig("probe interval must be positive".into()));
    }
    Ok(())
}

/// Runs one search over `db` and returns its aggregated outcome. Simulator
/// invariant violations are reported as [`Error::Invariant`].
pub fn run(
    db: &TransactionDatabase,
    ctx: &StatContext,
    objective: Objective,
    config: &RuntimeConfig,
) -> Result<RunOutcome, Error> {
    validate(config)?;
    let start = Instant::now();
    match config.transport {
        TransportKind::Sim => {
            let r = sim::simulate(db, ctx, objective, config);
            if !r.violations.is_empty() {
                let text: Vec<String> = r.violations.iter().map(ToString::to_string).collect();
                return Err(Error::Invariant(text.join("; ")));
            }
            Ok(RunOutcome {
                lambda: r.lambda,
                counters: r.counters,
                closed: r.closed,
                metrics: r.metrics,
                waves: r.waves,
                wall: start.elapsed(),
                ticks: Some(r.ticks),
            })
        }
        TransportKind::Threads => {
            let r = threads::run_threads(db, ctx, objective, config);
            Ok(RunOutcome {
                lambda: r.lambda,
                counters: r.counters,
                closed: r.closed,
                metrics: r.metrics,
                waves: r.waves,
                wall: start.elapsed(),
                ticks: None,
            })
        }
    }
}

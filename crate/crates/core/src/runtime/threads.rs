//! Shared-memory transport: one OS thread per worker, one channel per
//! worker as its mailbox.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use crate::dataset::TransactionDatabase;
use crate::dtd::WaveStats;
use crate::lamp::ClosedSet;
use crate::stats::StatContext;

use super::message::{Message, Outbox, WorkerId};
use super::metrics::WorkerMetrics;
use super::topology::LifelineTopology;
use super::worker::Worker;
use super::{Objective, RuntimeConfig};

const MIN_BATCH: usize = 1;
const MAX_BATCH: usize = 1 << 20;

struct ChannelOutbox<'s> {
    senders: &'s [Sender<Message>],
}

impl Outbox for ChannelOutbox<'_> {
    fn send(&mut self, to: WorkerId, msg: Message) {
        // A receiver that already terminated no longer needs anything.
        let _ = self.senders[to].send(msg);
    }
}

/// Adapts the number of nodes processed between probes so that one batch
/// takes about `target`.
#[derive(Debug, Clone)]
pub struct BatchSizer {
    size: usize,
    target: Duration,
}

impl BatchSizer {
    pub fn new(target: Duration) -> Self {
        BatchSizer { size: 16, target }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Feeds back how long a full batch took.
    pub fn observe(&mut self, elapsed: Duration) {
        if elapsed * 2 < self.target {
            self.size = (self.size * 2).min(MAX_BATCH);
        } else if elapsed > self.target * 2 {
            self.size = (self.size / 2).max(MIN_BATCH);
        }
    }
}

pub struct ThreadsReport {
    pub lambda: Option<u32>,
    pub counters: Vec<u64>,
    pub closed: Vec<ClosedSet>,
    pub metrics: Vec<WorkerMetrics>,
    pub waves: WaveStats,
}

struct WorkerResult {
    closed: Vec<ClosedSet>,
    metrics: WorkerMetrics,
    last_passive: Option<Instant>,
    finished_at: Instant,
    root: Option<(Option<u32>, Vec<u64>, WaveStats)>,
}

pub fn run_threads(
    db: &TransactionDatabase,
    ctx: &StatContext,
    objective: Objective,
    config: &RuntimeConfig,
) -> ThreadsReport {
    let p = config.workers;
    let topo = LifelineTopology::build(p, config.lifeline_side, config.random_steals);
    let (senders, receivers): (Vec<_>, Vec<_>) = (0..p).map(|_| mpsc::channel::<Message>()).unzip();

    let results: Vec<WorkerResult> = std::thread::scope(|s| {
        let handles: Vec<_> = receivers
            .into_iter()
            .enumerate()
            .map(|(id, rx)| {
                let senders = senders.clone();
                let topo = &topo;
                s.spawn(move || worker_loop(Worker::new(id, db, ctx, objective, topo, config), rx, &senders, config))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker thread panicked"))
            .collect()
    });

    let mut closed = Vec::new();
    let mut metrics = Vec::new();
    let mut root = None;
    let mut last_passive = None;
    let mut finished = None;
    for r in results {
        closed.extend(r.closed);
        metrics.push(r.metrics);
        last_passive = last_passive.max(r.last_passive);
        if let Some(x) = r.root {
            root = Some(x);
            finished = Some(r.finished_at);
        }
    }
    closed.sort();
    let (lambda, counters, mut waves) = root.expect("root worker result");
    if let (Some(q), Some(f)) = (last_passive, finished) {
        waves.time_to_termination = f.saturating_duration_since(q).as_secs_f64();
    }
    ThreadsReport {
        lambda,
        counters,
        closed,
        metrics,
        waves,
    }
}

fn worker_loop(
    mut worker: Worker<'_>,
    rx: Receiver<Message>,
    senders: &[Sender<Message>],
    config: &RuntimeConfig,
) -> WorkerResult {
    let mut out = ChannelOutbox { senders };
    let mut sizer = BatchSizer::new(config.probe_interval);
    let (mut main, mut probe, mut idle) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);
    let mut last_passive = None;

    let t0 = Instant::now();
    worker.preprocess();
    let preprocess = t0.elapsed();

    loop {
        let t = Instant::now();
        while let Ok(msg) = rx.try_recv() {
            worker.handle(msg, &mut out);
        }
        worker.service(&mut out);
        probe += t.elapsed();
        if worker.is_terminated() {
            break;
        }
        if worker.is_passive() {
            if last_passive.is_none() {
                last_passive = Some(Instant::now());
            }
        } else {
            last_passive = None;
        }

        if worker.has_work() {
            let t = Instant::now();
            let batch = sizer.size();
            let done = worker.compute(batch);
            let dt = t.elapsed();
            main += dt;
            if done == batch {
                sizer.observe(dt);
            }
        } else {
            let t = Instant::now();
            match rx.recv_timeout(config.probe_interval) {
                Ok(msg) => worker.handle(msg, &mut out),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
            idle += t.elapsed();
        }
    }
    let finished_at = Instant::now();

    let m = worker.metrics_mut();
    m.main_s = main.as_secs_f64();
    m.preprocess_s = preprocess.as_secs_f64();
    m.probe_s = probe.as_secs_f64();
    m.idle_s = idle.as_secs_f64();
    let metrics = m.clone();
    let root = worker.coordinator().map(|c| {
        (
            c.global_state().map(|g| g.lambda()),
            c.global_state().map(|g| g.counters().to_vec()).unwrap_or_default(),
            c.stats().clone(),
        )
    });
    WorkerResult {
        closed: worker.take_closed(),
        metrics,
        last_passive,
        finished_at,
        root,
    }
}

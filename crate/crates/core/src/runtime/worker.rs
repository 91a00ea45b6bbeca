//! One mining worker as a reactive actor. Transports feed it messages with
//! [`Worker::handle`], let it react with [`Worker::service`], and give it
//! CPU with [`Worker::compute`]; everything it sends goes through an
//! [`Outbox`].

use std::collections::BTreeMap;

use crate::cim::{Expander, SearchNode};
use crate::dataset::{ItemId, TransactionDatabase};
use crate::dtd::{DtdLocal, WaveCoordinator, WaveOutcome, WaveReport};
use crate::lamp::{ClosedSet, LampState};
use crate::stats::StatContext;

use super::message::{Body, Message, Outbox, StealKind, WorkerId};
use super::metrics::WorkerMetrics;
use super::topology::{LifelineTopology, VictimPicker};
use super::{Objective, RuntimeConfig};

/// Node-flow counters used to check that work is neither lost nor
/// duplicated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub generated: u64,
    pub popped: u64,
    pub given: u64,
    pub received: u64,
    pub requests_sent: u64,
    pub gives_received: u64,
}

struct WaveInProgress {
    report: WaveReport,
    awaiting: usize,
}

pub struct Worker<'a> {
    id: WorkerId,
    db: &'a TransactionDatabase,
    ctx: &'a StatContext,
    workers: usize,
    naive: bool,
    expander: Expander<'a>,
    stack: Vec<SearchNode>,
    lamp: Option<LampState>,
    min_support: u32,
    unreported: BTreeMap<u32, u64>,
    closed: Vec<ClosedSet>,
    dtd: DtdLocal,
    coordinator: Option<WaveCoordinator>,
    wave: Option<WaveInProgress>,
    lifelines: Vec<WorkerId>,
    activated: Vec<bool>,
    picker: VictimPicker,
    random_trials: usize,
    trials_left: usize,
    random_outstanding: bool,
    idle: bool,
    pending_requests: Vec<(WorkerId, StealKind)>,
    lifeline_thieves: Vec<WorkerId>,
    terminated: bool,
    lambda_regressed: bool,
    last_lambda: u32,
    nodes_since_report: u64,
    counters: WorkCounters,
    metrics: WorkerMetrics,
}

impl<'a> Worker<'a> {
    pub fn new(
        id: WorkerId,
        db: &'a TransactionDatabase,
        ctx: &'a StatContext,
        objective: Objective,
        topology: &LifelineTopology,
        config: &RuntimeConfig,
    ) -> Self {
        let workers = topology.worker_count;
        let (lamp, min_support) = match objective {
            Objective::SupportIncrease { alpha } => (Some(LampState::new(db.num_transactions(), alpha)), 1),
            Objective::Enumerate { min_support } => (None, min_support.max(1)),
        };
        let coordinator = (id == 0).then(|| WaveCoordinator::new(lamp.clone()));
        let lifelines = topology.lifelines(id).to_vec();
        Worker {
            id,
            db,
            ctx,
            workers,
            naive: config.naive,
            expander: Expander::new(db),
            stack: Vec::new(),
            last_lambda: lamp.as_ref().map_or(0, LampState::lambda),
            lamp,
            min_support,
            unreported: BTreeMap::new(),
            closed: Vec::new(),
            dtd: DtdLocal::new(id, workers),
            coordinator,
            wave: None,
            activated: vec![false; lifelines.len()],
            lifelines,
            picker: VictimPicker::new(config.seed, id, workers),
            random_trials: topology.random_steal_trials,
            trials_left: topology.random_steal_trials,
            random_outstanding: false,
            idle: false,
            pending_requests: Vec::new(),
            lifeline_thieves: Vec::new(),
            terminated: false,
            lambda_regressed: false,
            nodes_since_report: 0,
            counters: WorkCounters::default(),
            metrics: WorkerMetrics {
                worker: id,
                ..Default::default()
            },
        }
    }

    pub fn id(&self) -> WorkerId {
        self.id
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    pub fn has_work(&self) -> bool {
        !self.stack.is_empty()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// No local work, nothing owed to anyone, and nothing to do until a
    /// message arrives.
    pub fn is_passive(&self) -> bool {
        self.stack.is_empty() && self.idle && !self.random_outstanding && self.pending_requests.is_empty()
    }

    pub fn counters(&self) -> WorkCounters {
        self.counters
    }

    pub fn metrics(&self) -> &WorkerMetrics {
        &self.metrics
    }

    pub fn metrics_mut(&mut self) -> &mut WorkerMetrics {
        &mut self.metrics
    }

    pub fn dtd(&self) -> &DtdLocal {
        &self.dtd
    }

    pub fn lifelines(&self) -> &[WorkerId] {
        &self.lifelines
    }

    pub fn random_trials(&self) -> usize {
        self.random_trials
    }

    pub fn local_lambda(&self) -> Option<u32> {
        self.lamp.as_ref().map(LampState::lambda)
    }

    pub fn lambda_regressed(&self) -> bool {
        self.lambda_regressed
    }

    pub fn coordinator(&self) -> Option<&WaveCoordinator> {
        self.coordinator.as_ref()
    }

    pub fn take_closed(&mut self) -> Vec<ClosedSet> {
        std::mem::take(&mut self.closed)
    }

    fn threshold(&self) -> u32 {
        self.lamp.as_ref().map_or(self.min_support, LampState::lambda)
    }

    fn note_lambda(&mut self) {
        if let Some(l) = self.local_lambda() {
            if l < self.last_lambda {
                self.lambda_regressed = true;
            }
            self.last_lambda = l;
        }
    }

    fn send_basic(&mut self, out: &mut impl Outbox, to: WorkerId, body: Body) {
        let timestamp = self.dtd.on_basic_send();
        self.metrics.messages_sent += 1;
        out.send(
            to,
            Message {
                source: self.id,
                timestamp,
                body,
            },
        );
    }

    fn send_control(&mut self, out: &mut impl Outbox, to: WorkerId, body: Body) {
        self.metrics.messages_sent += 1;
        out.send(
            to,
            Message {
                source: self.id,
                timestamp: self.dtd.clock(),
                body,
            },
        );
    }

    /// Expands the root restricted to this worker's share of first-level
    /// items. Worker 0 also accounts for the root itself.
    pub fn preprocess(&mut self) {
        let root = SearchNode::root(self.db);
        if self.id == 0 && !root.itemset.is_empty() && root.support >= self.threshold() {
            self.record(&root);
        }
        let (id, workers) = (self.id, self.workers);
        self.expand_node(&root, |e| e as usize % workers == id);
    }

    /// Counts (support increase) or collects (enumeration) a closed itemset.
    fn record(&mut self, node: &SearchNode) {
        record_into(self.db, self.ctx, &mut self.lamp, &mut self.unreported, &mut self.closed, node);
    }

    fn expand_node(&mut self, node: &SearchNode, accept: impl FnMut(ItemId) -> bool) {
        let Worker {
            db,
            ctx,
            expander,
            lamp,
            unreported,
            closed,
            min_support,
            ..
        } = self;
        let mut kids = Vec::new();
        let start = lamp.as_ref().map_or(*min_support, LampState::lambda);
        expander.expand(node, start, accept, |child| {
            record_into(db, ctx, lamp, unreported, closed, &child);
            kids.push(child);
            lamp.as_ref().map_or(*min_support, LampState::lambda)
        });
        self.counters.generated += kids.len() as u64;
        self.stack.extend(kids.into_iter().rev());
        self.note_lambda();
    }

    /// Processes up to `budget` nodes from the top of the stack. Returns the
    /// number popped.
    pub fn compute(&mut self, budget: usize) -> usize {
        let mut done = 0;
        while done < budget {
            let Some(node) = self.stack.pop() else { break };
            self.counters.popped += 1;
            done += 1;
            if node.support < self.threshold() {
                self.metrics.nodes_pruned += 1;
                continue;
            }
            self.metrics.nodes_expanded += 1;
            self.nodes_since_report += 1;
            self.expand_node(&node, |_| true);
        }
        done
    }

    pub fn handle(&mut self, msg: Message, out: &mut impl Outbox) {
        if msg.is_basic() {
            self.dtd.on_basic_receive(msg.timestamp);
        }
        if self.terminated {
            return;
        }
        let source = msg.source;
        match msg.body {
            Body::Request(kind) => self.pending_requests.push((source, kind)),
            Body::Reject(StealKind::Random) => self.random_outstanding = false,
            // Stay registered with the neighbor; it pushes work later.
            Body::Reject(StealKind::Lifeline) => {}
            Body::Give { nodes, reply } => {
                self.counters.received += nodes.len() as u64;
                self.counters.gives_received += 1;
                self.metrics.steals_succeeded += 1;
                for r in nodes {
                    self.stack.push(SearchNode::from_record(self.db, r));
                }
                if reply == Some(StealKind::Random) {
                    self.random_outstanding = false;
                } else if let Some(pos) = self.lifelines.iter().position(|&l| l == source) {
                    self.activated[pos] = false;
                }
                self.idle = false;
                self.trials_left = self.random_trials;
            }
            Body::ControlDown { wave, lambda } => self.on_wave_down(wave, lambda, out),
            Body::ControlUp(report) => self.on_wave_up(report, out),
            Body::Finish => self.finish(out),
        }
    }

    /// Answers steal requests, pushes work to waiting lifeline thieves,
    /// starts steals when out of work, and (at the root) starts waves.
    pub fn service(&mut self, out: &mut impl Outbox) {
        if self.terminated {
            return;
        }
        self.distribute(out);
        self.steal(out);
        self.poll_wave(out);
    }

    fn distribute(&mut self, out: &mut impl Outbox) {
        for (thief, kind) in std::mem::take(&mut self.pending_requests) {
            if self.stack.len() >= 2 {
                self.give_half(out, thief, Some(kind));
            } else {
                self.send_basic(out, thief, Body::Reject(kind));
                if kind == StealKind::Lifeline && !self.lifeline_thieves.contains(&thief) {
                    self.lifeline_thieves.push(thief);
                }
            }
        }
        while self.stack.len() >= 2 && !self.lifeline_thieves.is_empty() {
            let thief = self.lifeline_thieves.remove(0);
            self.give_half(out, thief, None);
        }
    }

    /// Sends the bottom half of the stack (rounded up): the oldest nodes,
    /// closest to the root and so usually the largest subtrees.
    fn give_half(&mut self, out: &mut impl Outbox, thief: WorkerId, reply: Option<StealKind>) {
        let k = self.stack.len().div_ceil(2);
        let nodes: Vec<_> = self.stack.drain(..k).map(SearchNode::into_record).collect();
        self.counters.given += nodes.len() as u64;
        self.send_basic(out, thief, Body::Give { nodes, reply });
    }

    fn steal(&mut self, out: &mut impl Outbox) {
        if !self.stack.is_empty() || self.idle || self.random_outstanding {
            return;
        }
        if self.naive {
            self.idle = true;
            return;
        }
        if self.trials_left > 0 {
            if let Some(victim) = self.picker.pick() {
                self.trials_left -= 1;
                self.random_outstanding = true;
                self.request(out, victim, StealKind::Random);
                return;
            }
            self.trials_left = 0;
        }
        for i in 0..self.lifelines.len() {
            if !self.activated[i] {
                self.activated[i] = true;
                self.request(out, self.lifelines[i], StealKind::Lifeline);
            }
        }
        self.idle = true;
    }

    fn request(&mut self, out: &mut impl Outbox, victim: WorkerId, kind: StealKind) {
        self.counters.requests_sent += 1;
        self.metrics.steals_attempted += 1;
        self.send_basic(out, victim, Body::Request(kind));
    }

    fn poll_wave(&mut self, out: &mut impl Outbox) {
        let Some(coord) = self.coordinator.as_mut() else { return };
        if let Some(wave) = coord.poll_start() {
            let lambda = coord.global_lambda();
            self.on_wave_down(wave, lambda, out);
        }
    }

    fn on_wave_down(&mut self, wave: u32, lambda: u32, out: &mut impl Outbox) {
        if let Some(l) = self.lamp.as_mut() {
            l.adopt(lambda);
        }
        self.note_lambda();
        let (balance, tainted) = self.dtd.visit(wave);
        let report = WaveReport {
            wave,
            balance,
            tainted,
            all_passive: self.is_passive(),
            max_clock: wave,
            counters: std::mem::take(&mut self.unreported).into_iter().collect(),
            nodes_processed: std::mem::take(&mut self.nodes_since_report),
            workers: 1,
        };
        let children = self.dtd.children().to_vec();
        for &c in &children {
            self.send_control(out, c, Body::ControlDown { wave, lambda });
        }
        if children.is_empty() {
            self.finish_subtree(report, out);
        } else {
            self.wave = Some(WaveInProgress {
                report,
                awaiting: children.len(),
            });
        }
    }

    fn on_wave_up(&mut self, child: WaveReport, out: &mut impl Outbox) {
        let Some(w) = self.wave.as_mut() else {
            debug_assert!(false, "wave report without a wave");
            return;
        };
        w.report.merge(&child);
        w.awaiting -= 1;
        if w.awaiting == 0 {
            let report = self.wave.take().expect("wave in progress").report;
            self.finish_subtree(report, out);
        }
    }

    fn finish_subtree(&mut self, report: WaveReport, out: &mut impl Outbox) {
        if let Some(parent) = self.dtd.parent() {
            self.send_control(out, parent, Body::ControlUp(report));
            return;
        }
        let coord = self.coordinator.as_mut().expect("root owns the coordinator");
        let outcome = coord.complete(&report, self.ctx);
        let global = coord.global_lambda();
        if let Some(l) = self.lamp.as_mut() {
            l.adopt(global);
        }
        self.note_lambda();
        if outcome == WaveOutcome::Terminated {
            self.finish(out);
        }
    }

    fn finish(&mut self, out: &mut impl Outbox) {
        self.terminated = true;
        for c in self.dtd.children().to_vec() {
            self.send_control(out, c, Body::Finish);
        }
    }
}

fn record_into(
    db: &TransactionDatabase,
    ctx: &StatContext,
    lamp: &mut Option<LampState>,
    unreported: &mut BTreeMap<u32, u64>,
    closed: &mut Vec<ClosedSet>,
    node: &SearchNode,
) {
    match lamp {
        Some(l) => {
            l.record_closed_set(ctx, node.support);
            *unreported.entry(node.support).or_insert(0) += 1;
        }
        None => closed.push(ClosedSet {
            itemset: node.itemset.clone(),
            support: node.pattern_support(db),
        }),
    }
}

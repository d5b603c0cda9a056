//! Deterministic discrete-tick network simulator.

pub mod event;
pub mod latency;
pub mod trace;
pub mod workload;

use std::any::Any;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use event::{Envelope, EventQueue, NodeId, Payload, SimEvent, HUB};
pub use latency::LatencyModel;
pub use trace::{read_jsonl_gz, NodeSample, Trace, TraceRecord};
pub use workload::{Workload, WorkloadConfig};

use crate::consensus::ChainView;
use crate::miner::{Miner, MinerEvent, StepCounters};

/// Anything the simulator can drive one tick at a time.
pub trait SimNode: Send {
    fn step(&mut self, tick: u64, inbox: Vec<Envelope>) -> Vec<Payload>;
    /// Accepts messages without doing any work.
    fn absorb(&mut self, tick: u64, inbox: Vec<Envelope>);
    fn view(&self) -> &ChainView;
    fn counters(&self) -> StepCounters;
    fn drain_events(&mut self) -> Vec<MinerEvent>;
    fn as_any(&self) -> &dyn Any;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

impl SimNode for Miner {
    fn step(&mut self, tick: u64, inbox: Vec<Envelope>) -> Vec<Payload> {
        Miner::step(self, tick, inbox)
    }
    fn absorb(&mut self, tick: u64, inbox: Vec<Envelope>) {
        for env in inbox {
            self.deliver(env.payload, tick);
        }
    }
    fn view(&self) -> &ChainView {
        Miner::view(self)
    }
    fn counters(&self) -> StepCounters {
        Miner::counters(self)
    }
    fn drain_events(&mut self) -> Vec<MinerEvent> {
        Miner::drain_events(self)
    }
    fn as_any(&self) -> &dyn Any {
        self
    }
    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Topology {
    /// Every node connects to a relay hub; node-to-node traffic takes two hops.
    #[default]
    Star,
    /// Every pair is one hop apart.
    Mesh,
}

/// Messages between different groups are held from `start` until `end`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start: u64,
    pub end: u64,
    pub groups: Vec<Vec<NodeId>>,
}

impl Partition {
    fn separates(&self, tick: u64, a: NodeId, b: NodeId) -> bool {
        if tick < self.start || tick >= self.end || a == HUB || b == HUB {
            return false;
        }
        let group = |n| self.groups.iter().position(|g| g.contains(&n));
        group(a) != group(b)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub latency: LatencyModel,
    #[serde(default)]
    pub partitions: Vec<Partition>,
}

pub struct Simulation {
    nodes: Vec<Box<dyn SimNode>>,
    network: NetworkConfig,
    workload: Option<Workload>,
    queue: EventQueue,
    rng: ChaCha8Rng,
    tick: u64,
    trace: Trace,
    sample_interval: u64,
    samples: Vec<NodeSample>,
    events: Vec<(NodeId, MinerEvent)>,
    stats: MessageStats,
}

/// Message accounting: every scheduled message is either delivered or still queued.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStats {
    pub scheduled: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub held: u64,
}

impl Simulation {
    pub fn new(nodes: Vec<Box<dyn SimNode>>, network: NetworkConfig, workload: Option<Workload>, seed: u64) -> Self {
        Simulation {
            nodes,
            network,
            workload,
            queue: EventQueue::default(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6e65_7473_696d),
            tick: 0,
            trace: Trace::new(false),
            sample_interval: 0,
            samples: Vec::new(),
            events: Vec::new(),
            stats: MessageStats::default(),
        }
    }

    pub fn with_trace(mut self, enabled: bool) -> Self {
        self.trace = Trace::new(enabled);
        self
    }

    /// Records a [`NodeSample`] per node every `interval` ticks (0 disables).
    pub fn with_samples(mut self, interval: u64) -> Self {
        self.sample_interval = interval;
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn nodes(&self) -> &[Box<dyn SimNode>] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [Box<dyn SimNode>] {
        &mut self.nodes
    }

    pub fn node<T: 'static>(&self, id: NodeId) -> Option<&T> {
        self.nodes.get(id)?.as_any().downcast_ref()
    }

    pub fn node_mut<T: 'static>(&mut self, id: NodeId) -> Option<&mut T> {
        self.nodes.get_mut(id)?.as_any_mut().downcast_mut()
    }

    pub fn workload(&self) -> Option<&Workload> {
        self.workload.as_ref()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn samples(&self) -> &[NodeSample] {
        &self.samples
    }

    /// Node events observed so far, in order.
    pub fn events(&self) -> &[(NodeId, MinerEvent)] {
        &self.events
    }

    pub fn message_stats(&self) -> MessageStats {
        self.stats
    }

    pub fn pending_messages(&self) -> usize {
        self.queue.len()
    }

    /// Sends `payload` from the hub to every node (one hop each).
    pub fn inject(&mut self, payload: Payload) {
        let tick = self.tick;
        self.trace.record(|| TraceRecord::Inject { tick, hash: payload.hash(), payload: payload.kind().into() });
        for to in 0..self.nodes.len() {
            self.schedule(HUB, to, payload.clone(), 1);
        }
    }

    /// Delivers `payload` to one node at the start of the next tick, bypassing latency.
    pub fn inject_direct(&mut self, to: NodeId, payload: Payload) {
        self.stats.scheduled += 1;
        self.queue.push(self.tick, HUB, to, payload);
    }

    fn hops(&self, from: NodeId, to: NodeId) -> usize {
        match self.network.topology {
            Topology::Star if from != HUB && to != HUB => 2,
            _ => 1,
        }
    }

    fn schedule(&mut self, from: NodeId, to: NodeId, payload: Payload, hops: usize) {
        let mut delay = 0;
        for _ in 0..hops {
            match self.network.latency.sample(&mut self.rng) {
                Some(d) => delay += d,
                None => {
                    self.stats.dropped += 1;
                    let (tick, hash) = (self.tick, payload.hash());
                    self.trace.record(|| TraceRecord::Drop { tick, from, to, hash });
                    return;
                }
            }
        }
        self.stats.scheduled += 1;
        self.queue.push(self.tick + delay, from, to, payload);
    }

    /// End of the partition window that blocks `from -> to` at `tick`, if any.
    fn held_until(&self, tick: u64, from: NodeId, to: NodeId) -> Option<u64> {
        self.network.partitions.iter().filter(|p| p.separates(tick, from, to)).map(|p| p.end).max()
    }

    /// Pops messages due at `tick`, re-queueing those blocked by a partition.
    fn collect_due(&mut self, tick: u64) -> BTreeMap<NodeId, Vec<Envelope>> {
        let mut inboxes: BTreeMap<NodeId, Vec<Envelope>> = BTreeMap::new();
        while let Some(ev) = self.queue.pop_due(tick) {
            if let Some(end) = self.held_until(tick, ev.from, ev.to) {
                self.stats.held += 1;
                self.queue.push(end, ev.from, ev.to, ev.payload);
                continue;
            }
            self.stats.delivered += 1;
            inboxes.entry(ev.to).or_default().push(Envelope { from: ev.from, payload: ev.payload });
        }
        inboxes
    }

    /// Advances one tick.
    pub fn step(&mut self) {
        let tick = self.tick;
        if let Some(w) = &mut self.workload {
            for tx in w.generate(tick) {
                let payload = Payload::Tx(tx);
                self.trace.record(|| TraceRecord::Inject { tick, hash: payload.hash(), payload: "tx".into() });
                for to in 0..self.nodes.len() {
                    self.schedule(HUB, to, payload.clone(), 1);
                }
            }
        }

        let mut inboxes = self.collect_due(tick);

        let mut work: Vec<(&mut Box<dyn SimNode>, Vec<Envelope>)> =
            self.nodes.iter_mut().enumerate().map(|(i, n)| (n, inboxes.remove(&i).unwrap_or_default())).collect();
        let outputs: Vec<(Vec<Payload>, Vec<MinerEvent>)> = work
            .par_iter_mut()
            .map(|(node, inbox)| {
                let out = node.step(tick, std::mem::take(inbox));
                (out, node.drain_events())
            })
            .collect();

        for (from, (out, events)) in outputs.into_iter().enumerate() {
            for event in events {
                self.trace.record(|| TraceRecord::Node { node: from, event: event.clone() });
                self.events.push((from, event));
            }
            for payload in out {
                self.trace.record(|| TraceRecord::Send {
                    tick,
                    from,
                    hash: payload.hash(),
                    payload: payload.kind().into(),
                });
                for to in 0..self.nodes.len() {
                    if to != from {
                        let hops = self.hops(from, to);
                        self.schedule(from, to, payload.clone(), hops);
                    }
                }
            }
        }

        if self.sample_interval > 0 && (tick + 1) % self.sample_interval == 0 {
            for (node, n) in self.nodes.iter().enumerate() {
                let s = NodeSample { tick: tick + 1, node, height: n.view().height(), tip: n.view().tip(),
                    state_digest: n.view().tip_state().digest(),
                    counters: n.counters() };
                self.trace.record(|| TraceRecord::Sample(s.clone()));
                self.samples.push(s);
            }
        }
        self.tick += 1;
    }

    /// Delivers every queued message without stepping nodes, advancing time as needed.
    /// Returns the number of ticks spent.
    pub fn quiesce(&mut self) -> u64 {
        let start = self.tick;
        while !self.queue.is_empty() {
            let tick = self.tick;
            let inboxes = self.collect_due(tick);
            for (to, inbox) in inboxes {
                if let Some(node) = self.nodes.get_mut(to) {
                    node.absorb(tick, inbox);
                    for event in node.drain_events() {
                        self.trace.record(|| TraceRecord::Node { node: to, event: event.clone() });
                        self.events.push((to, event));
                    }
                }
            }
            self.tick += 1;
        }
        self.tick - start
    }

    /// Runs until the tick counter reaches `end`.
    pub fn run_until(&mut self, end: u64) {
        while self.tick < end {
            self.step();
        }
    }

    /// Steps while `pred` holds, up to `end`; returns true if `pred` stopped the run.
    pub fn run_while(&mut self, end: u64, mut pred: impl FnMut(&Simulation) -> bool) -> bool {
        while self.tick < end {
            if !pred(self) {
                return true;
            }
            self.step();
        }
        !pred(self)
    }
}

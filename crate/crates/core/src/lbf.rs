//! Level-based flooding: node and sink state machines.
//!
//! Four cooperating phases run on top of [`Engine`]:
//!
//! 1. **Level building.** The sink floods a level-building packet; each node
//!    keeps the smallest `advertised + 1` it hears, rebroadcasts on every
//!    improvement, and sorts its neighbours into lower / equal / higher level
//!    sets.
//! 2. **Level replies.** Every improvement sends a level-back packet that
//!    descends one level per hop, picking a random lower-level neighbour each
//!    time. The sink keeps the minimum level reported per node.
//! 3. **Target search.** The sink broadcasts a query whose TTL is the target's
//!    level. A node buffers the first copy for a random assessment delay
//!    (RAD), counting duplicates `c`. On expiry it compares `p = c / q`
//!    (`q` = its degree) with the threshold `P`: below `P` it rebroadcasts to
//!    its higher-level neighbours, at or above `P` it unicasts to one
//!    neighbour it has not heard from, and at `p = 1` it drops.
//! 4. **Data return.** The target answers with a data-back packet that walks
//!    down the levels exactly like a level reply.
//!
//! The target check runs before the TTL drop so a target sitting on the TTL
//! ring still answers, and the sink consumes replies before looking at their
//! TTL. See README for the remaining interpretation choices.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::engine::{Engine, EngineError, Protocol, Time, TimingConfig, TraceRecord};
use crate::metrics::{BroadcastRecord, LevelBuildingRecord, QueryRecord};
use crate::rng::{SimRng, Stream};
use crate::topology::{NodeId, Topology};
use crate::wire::{
    DataBackPacket, LevelBackPacket, LevelBuildingPacket, Packet, QueryKey, QueryPacket,
    SENTINEL_LEVEL,
};

pub const DEFAULT_PAYLOAD_BYTES: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfConfig {
    /// Suppression threshold `P` in `[0, 1]`.
    pub threshold: f64,
    pub payload_bytes: usize,
}

impl Default for LbfConfig {
    fn default() -> Self {
        LbfConfig {
            threshold: 0.5,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LbfError {
    #[error("the sink cannot query itself")]
    TargetIsSink,
    #[error("node {0} is not part of the topology")]
    UnknownNode(NodeId),
    #[error("threshold {0} is outside [0, 1]")]
    BadThreshold(f64),
    #[error("payload of {0} bytes does not fit the 8-bit dataLen field")]
    PayloadTooLong(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Per-query duplicate bookkeeping while a RAD timer is pending.
#[derive(Clone, Debug, PartialEq)]
pub struct RadState {
    pub c: u32,
    pub q: u32,
    pub deadline: Time,
    pub cached_packet: QueryPacket,
}

impl RadState {
    pub fn ratio(&self) -> f64 {
        if self.q == 0 {
            1.0
        } else {
            self.c as f64 / self.q as f64
        }
    }
}

/// What a node does when its RAD expires.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RadDecision {
    Drop,
    Unicast,
    Rebroadcast,
}

/// Threshold rule: `p = 1` drops, `p >= P` unicasts, `p < P` rebroadcasts.
pub fn rad_decision(c: u32, q: u32, threshold: f64) -> RadDecision {
    if c >= q {
        return RadDecision::Drop;
    }
    let p = c as f64 / q as f64;
    if p >= threshold {
        RadDecision::Unicast
    } else {
        RadDecision::Rebroadcast
    }
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub my_id: NodeId,
    pub level: u8,
    pub low_neighbors: BTreeSet<NodeId>,
    pub equal_neighbors: BTreeSet<NodeId>,
    pub high_neighbors: BTreeSet<NodeId>,
    pub processed_queries: HashSet<QueryKey>,
    pub pending_rad: HashMap<QueryKey, RadState>,
    pub heard_from: HashMap<QueryKey, BTreeSet<NodeId>>,
    neighbor_levels: BTreeMap<NodeId, u8>,
    reply_seq: u16,
}

impl NodeState {
    pub fn new(my_id: NodeId, level: u8) -> Self {
        NodeState {
            my_id,
            level,
            low_neighbors: BTreeSet::new(),
            equal_neighbors: BTreeSet::new(),
            high_neighbors: BTreeSet::new(),
            processed_queries: HashSet::new(),
            pending_rad: HashMap::new(),
            heard_from: HashMap::new(),
            neighbor_levels: BTreeMap::new(),
            reply_seq: 0,
        }
    }

    pub fn has_level(&self) -> bool {
        self.level != SENTINEL_LEVEL
    }

    /// Last level advertised by `id`, if it was heard.
    pub fn neighbor_level(&self, id: NodeId) -> Option<u8> {
        self.neighbor_levels.get(&id).copied()
    }

    fn place(&mut self, id: NodeId, their_level: u8) {
        use std::cmp::Ordering::*;
        match their_level.cmp(&self.level) {
            Less => self.low_neighbors.insert(id),
            Equal => self.equal_neighbors.insert(id),
            Greater => self.high_neighbors.insert(id),
        };
    }

    fn unplace(&mut self, id: NodeId) {
        self.low_neighbors.remove(&id);
        self.equal_neighbors.remove(&id);
        self.high_neighbors.remove(&id);
    }

    /// Records or re-classifies a neighbour from its advertised level.
    pub fn record_neighbor(&mut self, id: NodeId, their_level: u8) {
        match self.neighbor_levels.insert(id, their_level) {
            Some(old) if old == their_level => {}
            Some(_) => {
                self.unplace(id);
                self.place(id, their_level);
            }
            None => self.place(id, their_level),
        }
    }

    /// Changes this node's level and rebuilds all three sets against it.
    pub fn set_level(&mut self, level: u8) {
        self.level = level;
        self.low_neighbors.clear();
        self.equal_neighbors.clear();
        self.high_neighbors.clear();
        let known: Vec<(NodeId, u8)> = self.neighbor_levels.iter().map(|(&k, &v)| (k, v)).collect();
        for (id, l) in known {
            self.place(id, l);
        }
    }

    pub fn clear_query_state(&mut self) {
        self.processed_queries.clear();
        self.pending_rad.clear();
        self.heard_from.clear();
    }
}

#[derive(Clone, Debug)]
pub struct OutstandingQuery {
    pub target_id: NodeId,
    pub issue_time: Time,
}

#[derive(Clone, Debug, Default)]
pub struct SinkState {
    pub level_table: BTreeMap<NodeId, u8>,
    pub outstanding_queries: BTreeMap<u16, OutstandingQuery>,
    pub next_seq: u16,
    pub max_known_level: u8,
    pub level_building_seq: u16,
}

impl SinkState {
    /// Keeps the smallest level reported for `node`.
    pub fn record_level(&mut self, node: NodeId, level: u8) {
        let entry = self.level_table.entry(node).or_insert(level);
        if level < *entry {
            *entry = level;
        }
        self.max_known_level = self.level_table.values().copied().max().unwrap_or(0);
    }

    /// TTL for a query to `target`, and whether it fell back to the network
    /// depth because the target's level is unknown.
    pub fn ttl_for(&self, target: NodeId) -> (u8, bool) {
        match self.level_table.get(&target) {
            Some(&l) => (l, false),
            None => (self.max_known_level, true),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfAction {
    BuildLevels,
    Query { target: NodeId },
    Broadcast,
}

/// Protocol-wide counters that persist across phases.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LbfStats {
    pub reply_failures: u64,
    pub data_failures: u64,
    pub unknown_level_fallbacks: u64,
    pub level_changes: u64,
}

/// Per-query tallies, reset whenever a query is issued.
#[derive(Clone, Debug, Default)]
struct QueryTally {
    key: Option<QueryKey>,
    ttl: u8,
    fallback: bool,
    target_hop: Option<u32>,
    data_hops: Option<u32>,
    success: bool,
    received: Vec<bool>,
    processed: Vec<u32>,
    broadcasters: usize,
}

pub struct LbfNetwork<'t> {
    topology: &'t Topology,
    config: LbfConfig,
    rad_t_max: Time,
    nodes: Vec<NodeState>,
    sink: SinkState,
    rad_rng: SimRng,
    route_rng: SimRng,
    stats: LbfStats,
    tally: QueryTally,
    last_level_change: Option<Time>,
    payload: Vec<u8>,
}

impl<'t> LbfNetwork<'t> {
    pub fn new(
        topology: &'t Topology,
        timing: &TimingConfig,
        config: LbfConfig,
    ) -> Result<Self, LbfError> {
        if !(0.0..=1.0).contains(&config.threshold) {
            return Err(LbfError::BadThreshold(config.threshold));
        }
        if config.payload_bytes > u8::MAX as usize {
            return Err(LbfError::PayloadTooLong(config.payload_bytes));
        }
        let sink_id = topology.sink();
        let nodes = topology
            .nodes()
            .map(|id| NodeState::new(id, if id == sink_id { 0 } else { SENTINEL_LEVEL }))
            .collect();
        let payload = (0..config.payload_bytes).map(|i| i as u8).collect();
        Ok(LbfNetwork {
            topology,
            config,
            rad_t_max: timing.rad_t_max,
            nodes,
            sink: SinkState::default(),
            rad_rng: SimRng::new(timing.protocol_seed, Stream::Rad),
            route_rng: SimRng::new(timing.protocol_seed, Stream::Routing),
            stats: LbfStats::default(),
            tally: QueryTally::default(),
            last_level_change: None,
            payload,
        })
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn sink_state(&self) -> &SinkState {
        &self.sink
    }

    pub fn stats(&self) -> &LbfStats {
        &self.stats
    }

    pub fn config(&self) -> &LbfConfig {
        &self.config
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<(), LbfError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(LbfError::BadThreshold(threshold));
        }
        self.config.threshold = threshold;
        Ok(())
    }

    /// Levels as assigned; `None` for nodes the level flood never reached.
    pub fn levels(&self) -> Vec<Option<u8>> {
        self.nodes
            .iter()
            .map(|n| n.has_level().then_some(n.level))
            .collect()
    }

    pub fn last_level_change(&self) -> Option<Time> {
        self.last_level_change
    }

    fn pick(rng: &mut SimRng, set: &BTreeSet<NodeId>) -> Option<NodeId> {
        if set.is_empty() {
            None
        } else {
            set.iter().nth(rng.below(set.len())).copied()
        }
    }

    /// Sink floods the level-building packet with level 0.
    pub fn start_level_building(&mut self, eng: &mut Engine<'_, Packet, LbfAction>) {
        let sink = self.topology.sink();
        let seq = self.sink.level_building_seq;
        self.sink.level_building_seq = seq.wrapping_add(1);
        let pkt = Packet::LevelBuilding(LevelBuildingPacket {
            level: 0,
            source_id: sink,
            seq_num: seq,
        });
        eng.broadcast(sink, pkt, self.topology.neighbors(sink).iter().copied());
    }

    fn handle_level_building(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        pkt: LevelBuildingPacket,
        from: NodeId,
    ) {
        let node = &mut self.nodes[at.index()];
        node.record_neighbor(from, pkt.level);
        if at == self.topology.sink() {
            return;
        }
        // Level 254 is the deepest assignable level; 255 stays the sentinel.
        let Some(candidate) = pkt.level.checked_add(1).filter(|&c| c < SENTINEL_LEVEL) else {
            return;
        };
        if candidate >= node.level {
            return;
        }
        node.set_level(candidate);
        self.stats.level_changes += 1;
        self.last_level_change = Some(eng.now());

        let reply_seq = node.reply_seq;
        node.reply_seq = reply_seq.wrapping_add(1);
        let reply = LevelBackPacket {
            ttl: candidate,
            level: candidate,
            target_id: self.topology.sink(),
            source_id: at,
            seq_num: reply_seq,
        };
        match Self::pick(&mut self.route_rng, &node.low_neighbors) {
            Some(next) => eng.unicast(at, next, Packet::LevelBack(reply)),
            None => self.stats.reply_failures += 1,
        }

        let rebroadcast = Packet::LevelBuilding(LevelBuildingPacket {
            level: candidate,
            ..pkt
        });
        eng.broadcast(at, rebroadcast, self.topology.neighbors(at).iter().copied());
    }

    fn handle_level_back(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        mut pkt: LevelBackPacket,
    ) {
        if at == self.topology.sink() {
            self.sink.record_level(pkt.source_id, pkt.level);
            return;
        }
        pkt.ttl = pkt.ttl.saturating_sub(1);
        if pkt.ttl == 0 {
            self.stats.reply_failures += 1;
            return;
        }
        match Self::pick(&mut self.route_rng, &self.nodes[at.index()].low_neighbors) {
            Some(next) => eng.unicast(at, next, Packet::LevelBack(pkt)),
            None => self.stats.reply_failures += 1,
        }
    }

    fn reset_tally(&mut self, key: QueryKey, ttl: u8, fallback: bool) {
        let n = self.topology.node_count();
        self.tally = QueryTally {
            key: Some(key),
            ttl,
            fallback,
            received: vec![false; n],
            processed: vec![0; n],
            ..Default::default()
        };
    }

    fn next_query_seq(&mut self) -> u16 {
        let seq = self.sink.next_seq;
        self.sink.next_seq = seq.wrapping_add(1);
        if self.sink.next_seq == 0 {
            // Keys repeat after the wrap; forget old ones.
            for n in &mut self.nodes {
                n.clear_query_state();
            }
        }
        seq
    }

    /// Sink issues a query for `target` with TTL set to its known level.
    pub fn start_query(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        target: NodeId,
    ) -> Result<u16, LbfError> {
        if target == self.topology.sink() {
            return Err(LbfError::TargetIsSink);
        }
        if target.index() >= self.topology.node_count() {
            return Err(LbfError::UnknownNode(target));
        }
        let (ttl, fallback) = self.sink.ttl_for(target);
        if fallback {
            self.stats.unknown_level_fallbacks += 1;
        }
        Ok(self.issue(eng, target, ttl, fallback, Some(target)))
    }

    /// Network-wide dissemination with no target and TTL = deepest known level.
    pub fn start_broadcast(&mut self, eng: &mut Engine<'_, Packet, LbfAction>) -> u16 {
        let sink = self.topology.sink();
        let ttl = self.sink.max_known_level;
        self.issue(eng, sink, ttl, false, None)
    }

    fn issue(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        target_id: NodeId,
        ttl: u8,
        fallback: bool,
        target: Option<NodeId>,
    ) -> u16 {
        let sink = self.topology.sink();
        let seq = self.next_query_seq();
        let pkt = QueryPacket {
            hop_count: 0,
            ttl,
            seq_num: seq,
            target_id,
            source_id: sink,
        };
        self.reset_tally(pkt.key(), ttl, fallback);
        if target.is_some() {
            self.sink.outstanding_queries.insert(
                seq,
                OutstandingQuery {
                    target_id,
                    issue_time: eng.now(),
                },
            );
        }
        if ttl > 0 {
            let recipients: Vec<NodeId> = self.nodes[sink.index()]
                .high_neighbors
                .iter()
                .copied()
                .collect();
            eng.broadcast(sink, Packet::Query(pkt), recipients);
        }
        seq
    }

    fn handle_query(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        mut pkt: QueryPacket,
        from: NodeId,
    ) {
        let key = pkt.key();
        let tracked = self.tally.key == Some(key);
        if tracked {
            self.tally.received[at.index()] = true;
        }
        if at == self.topology.sink() {
            return;
        }
        pkt.hop_count = pkt.hop_count.saturating_add(1);
        let node = &mut self.nodes[at.index()];
        if node.processed_queries.contains(&key) {
            return;
        }
        if at == pkt.target_id {
            node.processed_queries.insert(key);
            if tracked {
                self.tally.processed[at.index()] += 1;
                self.tally.target_hop.get_or_insert(pkt.hop_count as u32);
            }
            eng.record_target_hop(pkt.hop_count as u32);
            self.send_data_back(eng, at, &pkt);
            return;
        }
        if pkt.hop_count > node.level || pkt.hop_count >= pkt.ttl {
            return;
        }
        if let Some(rad) = node.pending_rad.get_mut(&key) {
            rad.c += 1;
            node.heard_from.entry(key).or_default().insert(from);
            return;
        }
        let delay = self.rad_rng.uniform(0.0, self.rad_t_max);
        let deadline = eng.schedule_rad(at, key, delay);
        node.pending_rad.insert(
            key,
            RadState {
                c: 0,
                q: self.topology.degree(at) as u32,
                deadline,
                cached_packet: pkt,
            },
        );
        node.heard_from.entry(key).or_default().insert(from);
    }

    fn on_rad_expiry(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        key: QueryKey,
    ) {
        let node = &mut self.nodes[at.index()];
        let Some(rad) = node.pending_rad.remove(&key) else {
            return;
        };
        let heard = node.heard_from.remove(&key).unwrap_or_default();
        node.processed_queries.insert(key);
        let tracked = self.tally.key == Some(key);
        if tracked {
            self.tally.processed[at.index()] += 1;
        }
        let pkt = Packet::Query(rad.cached_packet);
        match rad_decision(rad.c, rad.q, self.config.threshold) {
            RadDecision::Drop => {}
            RadDecision::Unicast => {
                let unheard = |set: &BTreeSet<NodeId>| -> BTreeSet<NodeId> {
                    set.difference(&heard).copied().collect()
                };
                let mut candidates = unheard(&node.high_neighbors);
                if candidates.is_empty() {
                    candidates = unheard(&node.equal_neighbors);
                }
                if let Some(next) = Self::pick(&mut self.route_rng, &candidates) {
                    eng.unicast(at, next, pkt);
                }
            }
            RadDecision::Rebroadcast => {
                if !node.high_neighbors.is_empty() {
                    let recipients: Vec<NodeId> = node.high_neighbors.iter().copied().collect();
                    eng.broadcast(at, pkt, recipients);
                    if tracked {
                        self.tally.broadcasters += 1;
                    }
                }
            }
        }
    }

    fn send_data_back(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        query: &QueryPacket,
    ) {
        let node = &self.nodes[at.index()];
        let pkt = DataBackPacket {
            ttl: node.level,
            seq_num: query.seq_num,
            target_id: query.source_id,
            source_id: at,
            data: self.payload.clone(),
        };
        match Self::pick(&mut self.route_rng, &node.low_neighbors) {
            Some(next) => eng.unicast(at, next, Packet::DataBack(pkt)),
            None => self.stats.data_failures += 1,
        }
    }

    fn handle_data_back(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        mut pkt: DataBackPacket,
    ) {
        if at == self.topology.sink() {
            // Second copies of a closed query are ignored.
            if self.sink.outstanding_queries.remove(&pkt.seq_num).is_some()
                && self.tally.key.map(|k| k.seq_num) == Some(pkt.seq_num)
            {
                self.tally.success = true;
                let level = self.nodes[pkt.source_id.index()].level as u32;
                self.tally.data_hops = Some(level + 1 - pkt.ttl as u32);
            }
            return;
        }
        pkt.ttl = pkt.ttl.saturating_sub(1);
        if pkt.ttl == 0 {
            self.stats.data_failures += 1;
            return;
        }
        match Self::pick(&mut self.route_rng, &self.nodes[at.index()].low_neighbors) {
            Some(next) => eng.unicast(at, next, Packet::DataBack(pkt)),
            None => self.stats.data_failures += 1,
        }
    }
}

impl Protocol for LbfNetwork<'_> {
    type Message = Packet;
    type Action = LbfAction;

    fn on_start(&mut self, eng: &mut Engine<'_, Packet, LbfAction>, action: LbfAction) {
        match action {
            LbfAction::BuildLevels => self.start_level_building(eng),
            LbfAction::Query { target } => {
                // Scripted queries to invalid targets are ignored.
                let _ = self.start_query(eng, target);
            }
            LbfAction::Broadcast => {
                self.start_broadcast(eng);
            }
        }
    }

    fn on_deliver(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        to: NodeId,
        from: NodeId,
        packet: Packet,
    ) {
        match packet {
            Packet::LevelBuilding(p) => self.handle_level_building(eng, to, p, from),
            Packet::LevelBack(p) => self.handle_level_back(eng, to, p),
            Packet::Query(p) => self.handle_query(eng, to, p, from),
            Packet::DataBack(p) => self.handle_data_back(eng, to, p),
        }
    }

    fn on_rad_expiry(
        &mut self,
        eng: &mut Engine<'_, Packet, LbfAction>,
        at: NodeId,
        key: QueryKey,
    ) {
        LbfNetwork::on_rad_expiry(self, eng, at, key);
    }

    fn summarize(packet: &Packet) -> String {
        let hex = crate::wire::encode(packet)
            .map(|b| crate::wire::to_hex(&b))
            .unwrap_or_else(|e| format!("<{e}>"));
        format!("{packet} [{hex}]")
    }
}

/// Outcome of one targeted query with its raw counters.
#[derive(Clone, Debug)]
pub struct QueryRun {
    pub seq_num: u16,
    pub ttl: u8,
    pub used_fallback: bool,
    pub data_hops: Option<u32>,
    pub record: QueryRecord,
    pub trace: TraceRecord,
    /// Nodes that entered the processed state, in id order.
    pub processed: Vec<NodeId>,
}

/// Engine plus LBF state, driving one phase at a time to quiescence.
pub struct LbfSimulation<'t> {
    engine: Engine<'t, Packet, LbfAction>,
    network: LbfNetwork<'t>,
}

impl<'t> LbfSimulation<'t> {
    pub fn new(
        topology: &'t Topology,
        timing: TimingConfig,
        config: LbfConfig,
    ) -> Result<Self, LbfError> {
        let network = LbfNetwork::new(topology, &timing, config)?;
        Ok(LbfSimulation {
            engine: Engine::new(topology, timing),
            network,
        })
    }

    pub fn with_event_log(mut self, capacity: usize) -> Self {
        self.engine = self.engine.with_event_log(capacity);
        self
    }

    pub fn network(&self) -> &LbfNetwork<'t> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut LbfNetwork<'t> {
        &mut self.network
    }

    pub fn topology(&self) -> &'t Topology {
        self.engine.topology()
    }

    /// Runs level building and level replies together until quiet.
    pub fn build_levels(&mut self) -> Result<(LevelBuildingRecord, TraceRecord), LbfError> {
        let t_start = self.engine.now();
        self.network.start_level_building(&mut self.engine);
        let trace = self.engine.run_to_quiescence(&mut self.network)?;
        let t_end = self.network.last_level_change.unwrap_or(t_start);
        let sink = self.topology().sink();
        let lec = self
            .topology()
            .nodes()
            .map(|id| if id == sink { 0 } else { trace.load(id) })
            .collect();
        let sensor_sent = self
            .topology()
            .nodes()
            .filter(|&id| id != sink)
            .map(|id| trace.sent[id.index()])
            .sum();
        let record = LevelBuildingRecord {
            t_start,
            t_end,
            lec,
            cost: sensor_sent,
            reply_failures: self.network.stats.reply_failures,
        };
        Ok((record, trace))
    }

    pub fn query(&mut self, target: NodeId) -> Result<QueryRun, LbfError> {
        let seq_num = self.network.start_query(&mut self.engine, target)?;
        let trace = self.engine.run_to_quiescence(&mut self.network)?;
        let tally = &self.network.tally;
        debug_assert!(tally.processed.iter().all(|&c| c <= 1));
        let processed: Vec<NodeId> = tally
            .processed
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| NodeId(i as u16))
            .collect();
        let target_level = self
            .network
            .node(target)
            .has_level()
            .then(|| self.network.node(target).level as u32);
        let record = QueryRecord {
            target,
            target_level,
            cost: trace.total_sent(),
            energy: trace.total_sent() + trace.total_received(),
            hops: if tally.success {
                tally.target_hop
            } else {
                None
            },
            success: tally.success,
            processed_nodes: processed.len(),
        };
        Ok(QueryRun {
            seq_num,
            ttl: tally.ttl,
            used_fallback: tally.fallback,
            data_hops: tally.data_hops,
            record,
            trace,
            processed,
        })
    }

    /// One untargeted dissemination for saved-rebroadcast / reachability
    /// measurements.
    pub fn broadcast(&mut self) -> Result<(BroadcastRecord, TraceRecord), LbfError> {
        self.network.start_broadcast(&mut self.engine);
        let trace = self.engine.run_to_quiescence(&mut self.network)?;
        let sink = self.topology().sink();
        let tally = &self.network.tally;
        let receivers = tally
            .received
            .iter()
            .enumerate()
            .filter(|&(i, &r)| r && i != sink.index())
            .count();
        let record = BroadcastRecord {
            receivers,
            broadcasters: tally.broadcasters,
            energy: trace.total_sent() + trace.total_received(),
            reached: receivers + 1,
            total_nodes: self.topology().node_count(),
        };
        Ok((record, trace))
    }
}

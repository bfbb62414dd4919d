//! Basic flooding comparator.
//!
//! Every node rebroadcasts the first copy of a query to all of its neighbours,
//! appending itself to the path carried in the packet. The target answers by
//! unicasting back along that recorded path, reversed.

use std::collections::HashSet;

use crate::engine::{Engine, EngineError, Protocol, TimingConfig, TraceRecord};
use crate::metrics::{BroadcastRecord, QueryRecord};
use crate::topology::{NodeId, Topology};
use crate::wire::QueryKey;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FloodQueryPacket {
    pub hop_count: u8,
    pub ttl: u8,
    pub seq_num: u16,
    pub target_id: NodeId,
    pub source_id: NodeId,
    /// Nodes traversed so far, excluding the source.
    pub path: Vec<NodeId>,
}

impl FloodQueryPacket {
    pub fn key(&self) -> QueryKey {
        QueryKey {
            source_id: self.source_id,
            seq_num: self.seq_num,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FloodReply {
    pub seq_num: u16,
    pub source_id: NodeId,
    /// The query's recorded path; `position` indexes the current holder.
    pub path: Vec<NodeId>,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FloodMessage {
    Query(FloodQueryPacket),
    Reply(FloodReply),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloodAction {
    Query { target: NodeId, ttl: u8 },
    Broadcast { ttl: u8 },
}

/// Per-node record of queries already rebroadcast.
#[derive(Clone, Debug, Default)]
pub struct FloodState {
    pub processed: HashSet<QueryKey>,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    key: Option<QueryKey>,
    target_hop: Option<u32>,
    reply_path: Option<Vec<NodeId>>,
    success: bool,
    received: Vec<bool>,
    processed: usize,
    broadcasters: usize,
}

pub struct FloodNetwork<'t> {
    topology: &'t Topology,
    nodes: Vec<FloodState>,
    next_seq: u16,
    tally: Tally,
}

impl<'t> FloodNetwork<'t> {
    pub fn new(topology: &'t Topology) -> Self {
        FloodNetwork {
            topology,
            nodes: vec![FloodState::default(); topology.node_count()],
            next_seq: 0,
            tally: Tally::default(),
        }
    }

    pub fn node(&self, id: NodeId) -> &FloodState {
        &self.nodes[id.index()]
    }

    /// Sink floods a query for `target`; `ttl = 0` sends nothing.
    pub fn flood_query(
        &mut self,
        eng: &mut Engine<'_, FloodMessage, FloodAction>,
        target: NodeId,
        ttl: u8,
    ) -> u16 {
        let sink = self.topology.sink();
        let seq = self.next_seq;
        self.next_seq = seq.wrapping_add(1);
        if self.next_seq == 0 {
            for n in &mut self.nodes {
                n.processed.clear();
            }
        }
        let pkt = FloodQueryPacket {
            hop_count: 0,
            ttl,
            seq_num: seq,
            target_id: target,
            source_id: sink,
            path: Vec::new(),
        };
        self.tally = Tally {
            key: Some(pkt.key()),
            received: vec![false; self.topology.node_count()],
            ..Default::default()
        };
        self.nodes[sink.index()].processed.insert(pkt.key());
        if ttl > 0 {
            eng.broadcast(
                sink,
                FloodMessage::Query(pkt),
                self.topology.neighbors(sink).iter().copied(),
            );
        }
        seq
    }

    fn handle_flood_packet(
        &mut self,
        eng: &mut Engine<'_, FloodMessage, FloodAction>,
        at: NodeId,
        mut pkt: FloodQueryPacket,
    ) {
        let key = pkt.key();
        let tracked = self.tally.key == Some(key);
        if tracked {
            self.tally.received[at.index()] = true;
        }
        if !self.nodes[at.index()].processed.insert(key) {
            return;
        }
        if tracked {
            self.tally.processed += 1;
        }
        pkt.hop_count = pkt.hop_count.saturating_add(1);
        pkt.path.push(at);
        if at == pkt.target_id {
            if tracked {
                self.tally.target_hop = Some(pkt.hop_count as u32);
                self.tally.reply_path = Some(pkt.path.clone());
            }
            eng.record_target_hop(pkt.hop_count as u32);
            let position = pkt.path.len() - 1;
            self.forward_reply(
                eng,
                at,
                FloodReply {
                    seq_num: pkt.seq_num,
                    source_id: at,
                    path: pkt.path,
                    position,
                },
            );
        } else if pkt.hop_count < pkt.ttl {
            if tracked {
                self.tally.broadcasters += 1;
            }
            eng.broadcast(
                at,
                FloodMessage::Query(pkt),
                self.topology.neighbors(at).iter().copied(),
            );
        }
    }

    fn forward_reply(
        &mut self,
        eng: &mut Engine<'_, FloodMessage, FloodAction>,
        at: NodeId,
        mut reply: FloodReply,
    ) {
        let next = match reply.position {
            0 => self.topology.sink(),
            p => reply.path[p - 1],
        };
        reply.position = reply.position.saturating_sub(1);
        eng.unicast(at, next, FloodMessage::Reply(reply));
    }

    fn handle_reply(
        &mut self,
        eng: &mut Engine<'_, FloodMessage, FloodAction>,
        at: NodeId,
        reply: FloodReply,
    ) {
        if at == self.topology.sink() {
            if self.tally.key.map(|k| k.seq_num) == Some(reply.seq_num) {
                self.tally.success = true;
            }
            return;
        }
        self.forward_reply(eng, at, reply);
    }
}

impl Protocol for FloodNetwork<'_> {
    type Message = FloodMessage;
    type Action = FloodAction;

    fn on_start(&mut self, eng: &mut Engine<'_, FloodMessage, FloodAction>, action: FloodAction) {
        match action {
            FloodAction::Query { target, ttl } => {
                self.flood_query(eng, target, ttl);
            }
            FloodAction::Broadcast { ttl } => {
                let sink = self.topology.sink();
                self.flood_query(eng, sink, ttl);
            }
        }
    }

    fn on_deliver(
        &mut self,
        eng: &mut Engine<'_, FloodMessage, FloodAction>,
        to: NodeId,
        _from: NodeId,
        msg: FloodMessage,
    ) {
        match msg {
            FloodMessage::Query(p) => self.handle_flood_packet(eng, to, p),
            FloodMessage::Reply(r) => self.handle_reply(eng, to, r),
        }
    }

    fn summarize(msg: &FloodMessage) -> String {
        match msg {
            FloodMessage::Query(p) => format!(
                "FQ hop={} ttl={} dst={} seq={} path_len={}",
                p.hop_count,
                p.ttl,
                p.target_id,
                p.seq_num,
                p.path.len()
            ),
            FloodMessage::Reply(r) => format!(
                "FR src={} seq={} at_index={}",
                r.source_id, r.seq_num, r.position
            ),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FloodRun {
    pub record: QueryRecord,
    pub trace: TraceRecord,
    /// Recorded query path to the target, when it was reached.
    pub path: Option<Vec<NodeId>>,
}

pub struct FloodSimulation<'t> {
    engine: Engine<'t, FloodMessage, FloodAction>,
    network: FloodNetwork<'t>,
}

impl<'t> FloodSimulation<'t> {
    pub fn new(topology: &'t Topology, timing: TimingConfig) -> Self {
        FloodSimulation {
            engine: Engine::new(topology, timing),
            network: FloodNetwork::new(topology),
        }
    }

    pub fn with_event_log(mut self, capacity: usize) -> Self {
        self.engine = self.engine.with_event_log(capacity);
        self
    }

    pub fn network(&self) -> &FloodNetwork<'t> {
        &self.network
    }

    pub fn query(&mut self, target: NodeId, ttl: u8) -> Result<FloodRun, EngineError> {
        self.network.flood_query(&mut self.engine, target, ttl);
        let trace = self.engine.run_to_quiescence(&mut self.network)?;
        let t = &self.network.tally;
        let record = QueryRecord {
            target,
            target_level: None,
            cost: trace.total_sent(),
            energy: trace.total_sent() + trace.total_received(),
            hops: if t.success { t.target_hop } else { None },
            success: t.success,
            processed_nodes: t.processed,
        };
        Ok(FloodRun {
            record,
            path: t.reply_path.clone(),
            trace,
        })
    }

    /// Untargeted flood, for duplicate and reachability measurements.
    pub fn broadcast(&mut self, ttl: u8) -> Result<(BroadcastRecord, TraceRecord), EngineError> {
        let sink = self.engine.topology().sink();
        self.network.flood_query(&mut self.engine, sink, ttl);
        let trace = self.engine.run_to_quiescence(&mut self.network)?;
        let t = &self.network.tally;
        let receivers = t
            .received
            .iter()
            .enumerate()
            .filter(|&(i, &r)| r && i != sink.index())
            .count();
        let record = BroadcastRecord {
            receivers,
            broadcasters: t.broadcasters,
            energy: trace.total_sent() + trace.total_received(),
            reached: receivers + 1,
            total_nodes: self.engine.topology().node_count(),
        };
        Ok((record, trace))
    }
}

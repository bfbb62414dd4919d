//! Deterministic discrete-event core.
//!
//! Events are ordered by `(fire_time, sequence_no)`; the sequence number is
//! the scheduling order, so ties resolve identically on every run. Protocol
//! logic lives behind the [`Protocol`] trait and talks to the network only
//! through [`Engine::broadcast`], [`Engine::unicast`] and
//! [`Engine::schedule_rad`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{SimRng, Stream};
use crate::topology::{NodeId, Topology};
use crate::wire::QueryKey;

/// Virtual seconds.
pub type Time = f64;

pub const DEFAULT_EVENT_BUDGET: u64 = 200_000_000;
pub const DEFAULT_LOG_CAPACITY: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub hop_delay: Time,
    pub jitter_max: Time,
    pub rad_t_max: Time,
    pub protocol_seed: u64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            hop_delay: 1.0,
            jitter_max: 0.1,
            rad_t_max: 0.5,
            protocol_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("{0} must be finite and nonnegative")]
    Negative(&'static str),
    #[error("rad_t_max ({rad}) must be below hop_delay ({hop})")]
    RadTooLong { rad: Time, hop: Time },
}

impl TimingConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.protocol_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        for (name, v) in [
            ("hop_delay", self.hop_delay),
            ("jitter_max", self.jitter_max),
            ("rad_t_max", self.rad_t_max),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TimingError::Negative(name));
            }
        }
        if self.rad_t_max >= self.hop_delay && self.rad_t_max > 0.0 {
            return Err(TimingError::RadTooLong {
                rad: self.rad_t_max,
                hop: self.hop_delay,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum EventBody<M, A> {
    Deliver { to: NodeId, from: NodeId, packet: M },
    RadExpiry { at: NodeId, key: QueryKey },
    Start(A),
}

#[derive(Clone, Debug)]
pub struct Event<M, A> {
    pub fire_time: Time,
    pub sequence_no: u64,
    pub body: EventBody<M, A>,
}

// BinaryHeap is a max-heap, so comparisons are reversed.
impl<M, A> Ord for Event<M, A> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time
            .total_cmp(&self.fire_time)
            .then_with(|| other.sequence_no.cmp(&self.sequence_no))
    }
}

impl<M, A> PartialOrd for Event<M, A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M, A> PartialEq for Event<M, A> {
    fn eq(&self, other: &Self) -> bool {
        self.sequence_no == other.sequence_no
    }
}

impl<M, A> Eq for Event<M, A> {}

/// Event handlers for one protocol.
pub trait Protocol {
    type Message: Clone;
    type Action;

    fn on_start(
        &mut self,
        engine: &mut Engine<'_, Self::Message, Self::Action>,
        action: Self::Action,
    );

    fn on_deliver(
        &mut self,
        engine: &mut Engine<'_, Self::Message, Self::Action>,
        to: NodeId,
        from: NodeId,
        packet: Self::Message,
    );

    fn on_rad_expiry(
        &mut self,
        _engine: &mut Engine<'_, Self::Message, Self::Action>,
        _at: NodeId,
        _key: QueryKey,
    ) {
    }

    /// One-line packet description for the event log.
    fn summarize(packet: &Self::Message) -> String;
}

/// Counters and timestamps for one `run_to_quiescence` call.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sent: Vec<u64>,
    pub received: Vec<u64>,
    pub start_time: Time,
    pub end_time: Time,
    pub events_processed: u64,
    pub deliveries_scheduled: u64,
    /// Query hop count on first arrival at the target, when the run had one.
    pub target_hop: Option<u32>,
    pub log: Vec<String>,
    pub log_dropped: u64,
}

impl TraceRecord {
    fn new(nodes: usize, now: Time) -> Self {
        TraceRecord {
            sent: vec![0; nodes],
            received: vec![0; nodes],
            start_time: now,
            end_time: now,
            ..Default::default()
        }
    }

    pub fn total_sent(&self) -> u64 {
        self.sent.iter().sum()
    }

    pub fn total_received(&self) -> u64 {
        self.received.iter().sum()
    }

    /// Sends plus receives of one node.
    pub fn load(&self, id: NodeId) -> u64 {
        self.sent[id.index()] + self.received[id.index()]
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("event budget of {budget} exceeded at t={clock} (runaway protocol loop?)")]
    BudgetExceeded { budget: u64, clock: Time },
}

pub struct Engine<'t, M, A> {
    topology: &'t Topology,
    timing: TimingConfig,
    clock: Time,
    next_seq: u64,
    queue: BinaryHeap<Event<M, A>>,
    jitter: SimRng,
    trace: TraceRecord,
    started: bool,
    event_budget: u64,
    log_capacity: Option<usize>,
}

impl<'t, M: Clone, A> Engine<'t, M, A> {
    pub fn new(topology: &'t Topology, timing: TimingConfig) -> Self {
        Engine {
            topology,
            timing,
            clock: 0.0,
            next_seq: 0,
            queue: BinaryHeap::new(),
            jitter: SimRng::new(timing.protocol_seed, Stream::Jitter),
            trace: TraceRecord::new(topology.node_count(), 0.0),
            started: false,
            event_budget: DEFAULT_EVENT_BUDGET,
            log_capacity: None,
        }
    }

    pub fn with_event_budget(mut self, budget: u64) -> Self {
        self.event_budget = budget;
        self
    }

    /// Keep up to `capacity` event-log lines per run.
    pub fn with_event_log(mut self, capacity: usize) -> Self {
        self.log_capacity = Some(capacity);
        self
    }

    #[inline]
    pub fn now(&self) -> Time {
        self.clock
    }

    pub fn topology(&self) -> &'t Topology {
        self.topology
    }

    pub fn timing(&self) -> &TimingConfig {
        &self.timing
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    fn push(&mut self, fire_time: Time, body: EventBody<M, A>) {
        debug_assert!(fire_time >= self.clock);
        let sequence_no = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event {
            fire_time,
            sequence_no,
            body,
        });
    }

    fn link_delay(&mut self) -> Time {
        let jitter = if self.timing.jitter_max > 0.0 {
            self.jitter.uniform(0.0, self.timing.jitter_max)
        } else {
            0.0
        };
        self.timing.hop_delay + jitter
    }

    pub fn schedule_start(&mut self, delay: Time, action: A) {
        self.push(self.clock + delay, EventBody::Start(action));
    }

    /// One transmission heard by every node in `recipients`, each after its
    /// own jittered link delay.
    pub fn broadcast<I>(&mut self, from: NodeId, packet: M, recipients: I)
    where
        I: IntoIterator<Item = NodeId>,
    {
        self.trace.sent[from.index()] += 1;
        let mut fanout = 0usize;
        for to in recipients {
            fanout += 1;
            assert!(
                self.topology.are_adjacent(from, to),
                "broadcast from {from} to non-neighbour {to}"
            );
            let at = self.clock + self.link_delay();
            self.trace.deliveries_scheduled += 1;
            self.push(
                at,
                EventBody::Deliver {
                    to,
                    from,
                    packet: packet.clone(),
                },
            );
        }
        let t = self.clock;
        self.log(|| format!("{t:.6} send {from} broadcast n={fanout}"));
    }

    /// Panics if `to` is not a neighbour of `from`.
    pub fn unicast(&mut self, from: NodeId, to: NodeId, packet: M) {
        assert!(
            self.topology.are_adjacent(from, to),
            "unicast from {from} to non-neighbour {to}"
        );
        self.trace.sent[from.index()] += 1;
        self.trace.deliveries_scheduled += 1;
        let t = self.clock;
        self.log(|| format!("{t:.6} send {from}->{to} unicast"));
        let at = self.clock + self.link_delay();
        self.push(at, EventBody::Deliver { to, from, packet });
    }

    /// Returns the absolute expiry time.
    pub fn schedule_rad(&mut self, at: NodeId, key: QueryKey, delay: Time) -> Time {
        let t = self.clock + delay;
        self.push(t, EventBody::RadExpiry { at, key });
        t
    }

    /// First call wins; later arrivals do not overwrite.
    pub fn record_target_hop(&mut self, hops: u32) {
        self.trace.target_hop.get_or_insert(hops);
    }

    fn log(&mut self, line: impl FnOnce() -> String) {
        if let Some(cap) = self.log_capacity {
            if self.trace.log.len() < cap {
                let l = line();
                self.trace.log.push(l);
            } else {
                self.trace.log_dropped += 1;
            }
        }
    }

    /// Drains the queue, then returns this run's counters and resets them.
    pub fn run_to_quiescence<P>(&mut self, protocol: &mut P) -> Result<TraceRecord, EngineError>
    where
        P: Protocol<Message = M, Action = A>,
    {
        self.started = false;
        let mut processed = 0u64;
        while let Some(event) = self.queue.pop() {
            processed += 1;
            if processed > self.event_budget {
                return Err(EngineError::BudgetExceeded {
                    budget: self.event_budget,
                    clock: self.clock,
                });
            }
            debug_assert!(event.fire_time >= self.clock, "clock moved backwards");
            self.clock = event.fire_time;
            if !self.started {
                self.started = true;
                self.trace.start_time = self.clock;
            }
            let t = self.clock;
            match event.body {
                EventBody::Deliver { to, from, packet } => {
                    self.trace.received[to.index()] += 1;
                    self.log(|| format!("{t:.6} deliver {from}->{to} {}", P::summarize(&packet)));
                    protocol.on_deliver(self, to, from, packet);
                }
                EventBody::RadExpiry { at, key } => {
                    self.log(|| {
                        format!("{t:.6} rad {at} src={} seq={}", key.source_id, key.seq_num)
                    });
                    protocol.on_rad_expiry(self, at, key);
                }
                EventBody::Start(action) => {
                    self.log(|| format!("{t:.6} start"));
                    protocol.on_start(self, action);
                }
            }
        }
        let mut trace = std::mem::replace(
            &mut self.trace,
            TraceRecord::new(self.topology.node_count(), self.clock),
        );
        trace.events_processed = processed;
        trace.end_time = self.clock;
        if !self.started {
            trace.start_time = self.clock;
        }
        debug_assert_eq!(trace.total_received(), trace.deliveries_scheduled);
        Ok(trace)
    }
}

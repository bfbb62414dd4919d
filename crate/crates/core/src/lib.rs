//! Level-based flooding (LBF) for query dissemination in static sensor
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] builds seeded disk-graph deployments and the BFS hop oracle.
//! * [`wire`] is the bit-exact codec for the four LBF packet formats.
//! * [`engine`] is a deterministic discrete-event core with a virtual clock.
//! * [`lbf`] holds the node and sink state machines (level building, level
//!   replies, target search with RAD suppression, data return).
//! * [`baseline`] is basic flooding with in-packet path recording.
//! * [`metrics`] aggregates per-query records into cost/energy/latency
//!   figures and broadcast-quality metrics.
//! * [`experiment`] drives multi-seed batches and writes CSV.

pub mod baseline;
pub mod engine;
pub mod experiment;
pub mod lbf;
pub mod metrics;
pub mod rng;
pub mod topology;
pub mod wire;

pub use engine::{Engine, TimingConfig, TraceRecord};
pub use topology::{NodeId, ScenarioConfig, Topology};
pub use wire::{Packet, QueryKey};

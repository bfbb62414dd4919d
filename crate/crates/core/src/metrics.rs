//! Aggregate metrics over per-query records.
//!
//! Energy is counted in packets: one unit per transmission and one per
//! reception. Failed queries still contribute their cost and energy (toggle
//! with [`FailedQueries`]) but never their latency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Time;
use crate::topology::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no query records to aggregate")]
    Empty,
    #[error("no successful queries; latency is undefined")]
    NoSuccess,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailedQueries {
    #[default]
    Include,
    Exclude,
}

/// One targeted query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub target: NodeId,
    /// Level of the target as known to the protocol, if any.
    pub target_level: Option<u32>,
    /// Transmissions by all nodes (`C_i`).
    pub cost: u64,
    /// Transmissions plus receptions by all nodes (`EC_i`).
    pub energy: u64,
    /// Query hops on arrival at the target, for successful queries.
    pub hops: Option<u32>,
    pub success: bool,
    pub processed_nodes: usize,
}

/// Counters from one level-building phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelBuildingRecord {
    pub t_start: Time,
    /// Time of the last level change anywhere in the network.
    pub t_end: Time,
    /// Sends plus receives per node (`LEC_i`), zero for the sink.
    pub lec: Vec<u64>,
    /// Transmissions by sensor nodes.
    pub cost: u64,
    pub reply_failures: u64,
}

impl LevelBuildingRecord {
    pub fn convergence_rate(&self) -> Time {
        self.t_end - self.t_start
    }

    pub fn energy(&self) -> u64 {
        self.lec.iter().sum()
    }
}

/// One untargeted broadcast dissemination.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BroadcastRecord {
    /// Nodes other than the source that received at least one copy (`r`).
    pub receivers: usize,
    /// Nodes other than the source that rebroadcast (`t`).
    pub broadcasters: usize,
    /// Sum of sends and receives over all nodes.
    pub energy: u64,
    /// Nodes holding the message afterwards, source included (`n`).
    pub reached: usize,
    /// All nodes in the network (`m`).
    pub total_nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMetrics {
    /// `(r - t) / r`; `None` when nothing was received.
    pub saved_rebroadcast: Option<f64>,
    pub energy: f64,
    pub reachability: f64,
}

impl BroadcastMetrics {
    /// Mean over a batch; SR averages only the defined entries.
    pub fn mean(batch: &[BroadcastMetrics]) -> Option<BroadcastMetrics> {
        if batch.is_empty() {
            return None;
        }
        let n = batch.len() as f64;
        let srs: Vec<f64> = batch.iter().filter_map(|b| b.saved_rebroadcast).collect();
        Some(BroadcastMetrics {
            saved_rebroadcast: (!srs.is_empty())
                .then(|| srs.iter().sum::<f64>() / srs.len() as f64),
            energy: batch.iter().map(|b| b.energy).sum::<f64>() / n,
            reachability: batch.iter().map(|b| b.reachability).sum::<f64>() / n,
        })
    }
}

pub fn broadcast_metrics(record: &BroadcastRecord) -> BroadcastMetrics {
    let r = record.receivers;
    BroadcastMetrics {
        saved_rebroadcast: (r > 0).then(|| (r as f64 - record.broadcasters as f64) / r as f64),
        energy: record.energy as f64,
        reachability: if record.total_nodes == 0 {
            0.0
        } else {
            record.reached as f64 / record.total_nodes as f64
        },
    }
}

fn counted(records: &[QueryRecord], policy: FailedQueries) -> impl Iterator<Item = &QueryRecord> {
    records
        .iter()
        .filter(move |r| policy == FailedQueries::Include || r.success)
}

fn mean_of(
    records: &[QueryRecord],
    policy: FailedQueries,
    f: impl Fn(&QueryRecord) -> u64,
) -> Result<f64, MetricsError> {
    let (sum, n) = counted(records, policy).fold((0u64, 0usize), |(s, n), r| (s + f(r), n + 1));
    if n == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(sum as f64 / n as f64)
}

pub fn average_cost(records: &[QueryRecord], policy: FailedQueries) -> Result<f64, MetricsError> {
    mean_of(records, policy, |r| r.cost)
}

pub fn average_energy_cost(
    records: &[QueryRecord],
    policy: FailedQueries,
) -> Result<f64, MetricsError> {
    mean_of(records, policy, |r| r.energy)
}

/// Mean query hops over successful queries.
pub fn average_latency(records: &[QueryRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hops: Vec<u32> = records
        .iter()
        .filter(|r| r.success)
        .filter_map(|r| r.hops)
        .collect();
    if hops.is_empty() {
        return Err(MetricsError::NoSuccess);
    }
    Ok(hops.iter().map(|&h| h as f64).sum::<f64>() / hops.len() as f64)
}

/// Percentage of successful queries.
pub fn suc_ratio(records: &[QueryRecord]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ok = records.iter().filter(|r| r.success).count();
    Ok(ok as f64 / records.len() as f64 * 100.0)
}

/// Everything a batch of queries on one deployment produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub queries: Vec<QueryRecord>,
    /// Per node, sends plus receives summed over all queries.
    pub load_totals: Vec<u64>,
    pub level_building: Option<LevelBuildingRecord>,
    pub broadcasts: Vec<BroadcastRecord>,
}

impl RunRecord {
    pub fn new(node_count: usize) -> Self {
        RunRecord {
            load_totals: vec![0; node_count],
            ..Default::default()
        }
    }

    pub fn add_query(&mut self, record: QueryRecord, sent: &[u64], received: &[u64]) {
        for (i, total) in self.load_totals.iter_mut().enumerate() {
            *total += sent[i] + received[i];
        }
        self.queries.push(record);
    }
}

/// Average per-query load of node `q`.
pub fn per_node_average_load(run: &RunRecord, q: NodeId) -> Result<f64, MetricsError> {
    if run.queries.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(run.load_totals[q.index()] as f64 / run.queries.len() as f64)
}

pub fn convergence_rate(record: &LevelBuildingRecord) -> Time {
    record.convergence_rate()
}

/// Sum of per-node sends and receives during level building.
pub fn ec_level_building(record: &LevelBuildingRecord) -> u64 {
    record.energy()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub average_cost: f64,
    pub average_energy_cost: f64,
    /// `NaN` when no query succeeded.
    pub average_latency: f64,
    pub suc_ratio: f64,
    pub average_load: Vec<f64>,
    pub convergence_rate: Time,
    pub ec_level_building: u64,
    pub broadcast: Option<BroadcastMetrics>,
}

impl MetricsReport {
    pub fn from_run(run: &RunRecord, policy: FailedQueries) -> Result<MetricsReport, MetricsError> {
        let per_bcast: Vec<BroadcastMetrics> =
            run.broadcasts.iter().map(broadcast_metrics).collect();
        let n = run.queries.len().max(1) as f64;
        Ok(MetricsReport {
            average_cost: average_cost(&run.queries, policy)?,
            average_energy_cost: average_energy_cost(&run.queries, policy)?,
            average_latency: average_latency(&run.queries).unwrap_or(f64::NAN),
            suc_ratio: suc_ratio(&run.queries)?,
            average_load: run.load_totals.iter().map(|&l| l as f64 / n).collect(),
            convergence_rate: run.level_building.as_ref().map_or(0.0, convergence_rate),
            ec_level_building: run.level_building.as_ref().map_or(0, ec_level_building),
            broadcast: BroadcastMetrics::mean(&per_bcast),
        })
    }
}

//! Multi-seed experiment driver and CSV output.
//!
//! One cell is one `(topology_seed, protocol_seed, P)` combination run on a
//! fresh deployment: level building (LBF only), one query per target, then a
//! batch of untargeted broadcasts for the saved-rebroadcast / energy /
//! reachability columns. Cells are independent, so they run in parallel, and
//! rows are emitted in seed-then-P order regardless of scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::FloodSimulation;
use crate::engine::{EngineError, TimingConfig, TimingError, DEFAULT_LOG_CAPACITY};
use crate::lbf::{LbfConfig, LbfError, LbfSimulation, DEFAULT_PAYLOAD_BYTES};
use crate::metrics::{BroadcastMetrics, FailedQueries, MetricsError, MetricsReport, RunRecord};
use crate::topology::{NodeId, Preset, ScenarioConfig, Topology, TopologyError};

/// Bumped whenever the CSV column set changes.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 18] = [
    "scenario",
    "protocol",
    "P",
    "topo_seed",
    "proto_seed",
    "avg_cost",
    "avg_energy",
    "avg_latency",
    "suc_ratio",
    "convergence_rate",
    "ec_level_building",
    "sr",
    "ec",
    "re",
    "max_level",
    "avg_level",
    "reply_failures",
    "unknown_level_fallbacks",
];

pub const DEFAULT_SEED_COUNT: u64 = 20;
pub const DEFAULT_LARGE_SEED_COUNT: u64 = 3;
pub const DEFAULT_BROADCASTS: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid spec: {0}")]
    Usage(String),
    #[error("scenario {0} is large; pass --allow-large to run it")]
    LargeScenario(&'static str),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error("seed pair ({topo_seed}, {proto_seed}): {source}")]
    Run {
        topo_seed: u64,
        proto_seed: u64,
        #[source]
        source: RunError,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file: {0}")]
    Config(#[from] toml::de::Error),
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Lbf(#[from] LbfError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Lbf,
    Flood,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Lbf => "lbf",
            ProtocolKind::Flood => "flood",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lbf" => Ok(ProtocolKind::Lbf),
            "flood" | "baseline" => Ok(ProtocolKind::Flood),
            other => Err(format!(
                "unknown protocol {other:?} (expected lbf or flood)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Scenario {
    Preset(Preset),
    /// Topology seed inside the config is ignored; seeds come from the spec.
    Custom {
        name: String,
        config: ScenarioConfig,
    },
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Scenario::Preset(p) => p.name(),
            Scenario::Custom { name, .. } => name,
        }
    }

    pub fn config(&self, topology_seed: u64) -> ScenarioConfig {
        match self {
            Scenario::Preset(p) => p.config(topology_seed),
            Scenario::Custom { config, .. } => config.clone().with_seed(topology_seed),
        }
    }

    pub fn preset(&self) -> Option<Preset> {
        match self {
            Scenario::Preset(p) => Some(*p),
            Scenario::Custom { .. } => None,
        }
    }

    pub fn default_threshold(&self) -> f64 {
        self.preset()
            .map_or(DEFAULT_THRESHOLD, Preset::default_threshold)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeedPair {
    pub topology_seed: u64,
    pub protocol_seed: u64,
}

impl SeedPair {
    pub fn same(seed: u64) -> Self {
        SeedPair {
            topology_seed: seed,
            protocol_seed: seed,
        }
    }
}

/// Parses `1..20` (inclusive), `1..=20`, `3,5,9`, or `topo:proto` pairs such
/// as `1:7,2:8`. Plain seeds use the same value for both streams.
pub fn parse_seeds(text: &str) -> Result<Vec<SeedPair>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a
                .trim()
                .parse()
                .map_err(|e| format!("bad seed range {part:?}: {e}"))?;
            let hi: u64 = b
                .trim()
                .parse()
                .map_err(|e| format!("bad seed range {part:?}: {e}"))?;
            if hi < lo {
                return Err(format!("empty seed range {part:?}"));
            }
            out.extend((lo..=hi).map(SeedPair::same));
        } else if let Some((t, p)) = part.split_once(':') {
            let topology_seed = t
                .trim()
                .parse()
                .map_err(|e| format!("bad seed pair {part:?}: {e}"))?;
            let protocol_seed = p
                .trim()
                .parse()
                .map_err(|e| format!("bad seed pair {part:?}: {e}"))?;
            out.push(SeedPair {
                topology_seed,
                protocol_seed,
            });
        } else {
            let s = part
                .parse()
                .map_err(|e| format!("bad seed {part:?}: {e}"))?;
            out.push(SeedPair::same(s));
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(out)
}

pub fn parse_thresholds(text: &str) -> Result<Vec<f64>, String> {
    let ps: Vec<f64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|e| format!("bad threshold {s:?}: {e}"))
        })
        .collect::<Result<_, _>>()?;
    if ps.is_empty() {
        return Err("no thresholds given".into());
    }
    Ok(ps)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    #[default]
    AllNodes,
    Explicit(Vec<NodeId>),
}

impl FromStr for Targets {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") || s.eq_ignore_ascii_case("all_nodes") {
            return Ok(Targets::AllNodes);
        }
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u16>()
                    .map(NodeId)
                    .map_err(|e| format!("bad target {t:?}: {e}"))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Targets::Explicit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub protocol: ProtocolKind,
    /// One value for a single run, several for a sweep. Ignored for flooding.
    pub threshold_p: Vec<f64>,
    pub seeds: Vec<SeedPair>,
    pub targets: Targets,
    pub hop_delay: f64,
    pub jitter_max: f64,
    pub rad_t_max: f64,
    pub payload_bytes: usize,
    /// Untargeted broadcasts per cell for the SR/EC/RE columns.
    pub broadcasts: usize,
    pub failed_queries: FailedQueries,
    pub allow_large: bool,
    /// Event-log lines kept per cell; `None` disables the log.
    pub trace_capacity: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, protocol: ProtocolKind) -> Self {
        let timing = TimingConfig::default();
        let large = scenario.preset().is_some_and(Preset::is_large);
        let count = if large {
            DEFAULT_LARGE_SEED_COUNT
        } else {
            DEFAULT_SEED_COUNT
        };
        ExperimentSpec {
            threshold_p: vec![scenario.default_threshold()],
            scenario,
            protocol,
            seeds: (1..=count).map(SeedPair::same).collect(),
            targets: Targets::AllNodes,
            hop_delay: timing.hop_delay,
            jitter_max: timing.jitter_max,
            rad_t_max: timing.rad_t_max,
            payload_bytes: DEFAULT_PAYLOAD_BYTES,
            broadcasts: DEFAULT_BROADCASTS,
            failed_queries: FailedQueries::Include,
            allow_large: false,
            trace_capacity: None,
        }
    }

    pub fn preset(preset: Preset, protocol: ProtocolKind) -> Self {
        Self::new(Scenario::Preset(preset), protocol)
    }

    pub fn timing(&self, protocol_seed: u64) -> TimingConfig {
        TimingConfig {
            hop_delay: self.hop_delay,
            jitter_max: self.jitter_max,
            rad_t_max: self.rad_t_max,
            protocol_seed,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Usage("seed list is empty".into()));
        }
        if self.threshold_p.is_empty() {
            return Err(ExperimentError::Usage("threshold list is empty".into()));
        }
        if let Some(p) = self.threshold_p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ExperimentError::Usage(format!(
                "threshold {p} outside [0, 1]"
            )));
        }
        if self.payload_bytes > u8::MAX as usize {
            return Err(ExperimentError::Usage(format!(
                "payload of {} bytes exceeds 255",
                self.payload_bytes
            )));
        }
        if let Some(p) = self.scenario.preset() {
            if p.is_large() && !self.allow_large {
                return Err(ExperimentError::LargeScenario(p.name()));
            }
        }
        self.scenario.config(0).validate()?;
        self.timing(0).validate()?;
        Ok(())
    }

    /// `(seed, P)` cells in output order. Flooding has a single, P-less cell
    /// per seed.
    pub fn cells(&self) -> Vec<(SeedPair, Option<f64>)> {
        let mut cells = Vec::new();
        for &s in &self.seeds {
            match self.protocol {
                ProtocolKind::Lbf => cells.extend(self.threshold_p.iter().map(|&p| (s, Some(p)))),
                ProtocolKind::Flood => cells.push((s, None)),
            }
        }
        cells
    }
}

/// One output row; field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario: String,
    pub protocol: ProtocolKind,
    #[serde(rename = "P")]
    pub p: Option<f64>,
    pub topo_seed: u64,
    pub proto_seed: u64,
    pub avg_cost: f64,
    pub avg_energy: f64,
    /// Empty when no query succeeded.
    pub avg_latency: Option<f64>,
    pub suc_ratio: f64,
    pub convergence_rate: f64,
    pub ec_level_building: u64,
    pub sr: Option<f64>,
    pub ec: Option<f64>,
    pub re: Option<f64>,
    pub max_level: u32,
    pub avg_level: f64,
    pub reply_failures: u64,
    pub unknown_level_fallbacks: u64,
}

/// Full output of one cell; the CSV row plus what it was computed from.
#[derive(Clone, Debug)]
pub struct CellResult {
    pub row: CsvRow,
    pub run: RunRecord,
    pub report: MetricsReport,
    /// Per node, the level the protocol settled on (BFS hops for flooding).
    pub levels: Vec<Option<u32>>,
    pub connected: bool,
    pub trace: Vec<String>,
}

fn level_summary(levels: &[Option<u32>], sink: NodeId) -> (u32, f64) {
    let sensor: Vec<u32> = levels
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != sink.index())
        .filter_map(|(_, l)| *l)
        .collect();
    let max = sensor.iter().copied().max().unwrap_or(0);
    let avg = if sensor.is_empty() {
        0.0
    } else {
        sensor.iter().map(|&l| l as f64).sum::<f64>() / sensor.len() as f64
    };
    (max, avg)
}

fn target_list(spec: &ExperimentSpec, topo: &Topology) -> Vec<NodeId> {
    match &spec.targets {
        Targets::AllNodes => topo.nodes().filter(|&n| n != topo.sink()).collect(),
        Targets::Explicit(list) => list.clone(),
    }
}

fn wrap(seeds: SeedPair) -> impl Fn(RunError) -> ExperimentError {
    move |source| ExperimentError::Run {
        topo_seed: seeds.topology_seed,
        proto_seed: seeds.protocol_seed,
        source,
    }
}

pub fn run_cell(
    spec: &ExperimentSpec,
    seeds: SeedPair,
    threshold: Option<f64>,
) -> Result<CellResult, ExperimentError> {
    let topo = Topology::generate(&spec.scenario.config(seeds.topology_seed))?;
    let targets = target_list(spec, &topo);
    if let Some(bad) = targets
        .iter()
        .find(|t| t.index() >= topo.node_count() || **t == topo.sink())
    {
        return Err(ExperimentError::Usage(format!(
            "target {bad} is not a sensor node"
        )));
    }
    let timing = spec.timing(seeds.protocol_seed);
    let oracle = topo.hop_distance_oracle();
    let connected = oracle.iter().all(Option::is_some);
    let mut run = RunRecord::new(topo.node_count());
    let err = wrap(seeds);
    let mut trace = Vec::new();

    let (levels, reply_failures, fallbacks) = match spec.protocol {
        ProtocolKind::Lbf => {
            let config = LbfConfig {
                threshold: threshold.unwrap_or(spec.scenario.default_threshold()),
                payload_bytes: spec.payload_bytes,
            };
            let mut sim = LbfSimulation::new(&topo, timing, config).map_err(|e| err(e.into()))?;
            if let Some(cap) = spec.trace_capacity {
                sim = sim.with_event_log(cap);
            }
            let (lb, lb_trace) = sim.build_levels().map_err(|e| err(e.into()))?;
            trace.extend(lb_trace.log);
            run.level_building = Some(lb);
            for &t in &targets {
                let q = sim.query(t).map_err(|e| err(e.into()))?;
                trace.extend(q.trace.log.iter().cloned());
                run.add_query(q.record, &q.trace.sent, &q.trace.received);
            }
            for _ in 0..spec.broadcasts {
                let (b, bt) = sim.broadcast().map_err(|e| err(e.into()))?;
                trace.extend(bt.log);
                run.broadcasts.push(b);
            }
            let levels = sim
                .network()
                .levels()
                .into_iter()
                .map(|l| l.map(u32::from))
                .collect();
            let stats = sim.network().stats();
            (levels, stats.reply_failures, stats.unknown_level_fallbacks)
        }
        ProtocolKind::Flood => {
            let (max_hop, _) = level_summary(&oracle, topo.sink());
            let ttl = max_hop.min(u8::MAX as u32) as u8;
            let mut sim = FloodSimulation::new(&topo, timing);
            if let Some(cap) = spec.trace_capacity {
                sim = sim.with_event_log(cap);
            }
            for &t in &targets {
                let q = sim.query(t, ttl).map_err(|e| err(e.into()))?;
                trace.extend(q.trace.log.iter().cloned());
                let mut record = q.record;
                record.target_level = oracle[t.index()];
                run.add_query(record, &q.trace.sent, &q.trace.received);
            }
            for _ in 0..spec.broadcasts {
                let (b, bt) = sim.broadcast(ttl).map_err(|e| err(e.into()))?;
                trace.extend(bt.log);
                run.broadcasts.push(b);
            }
            (oracle.clone(), 0, 0)
        }
    };

    let report = MetricsReport::from_run(&run, spec.failed_queries).map_err(|e| err(e.into()))?;
    let (max_level, avg_level) = level_summary(&levels, topo.sink());
    let bc: Option<BroadcastMetrics> = report.broadcast;
    let row = CsvRow {
        scenario: spec.scenario.name().to_string(),
        protocol: spec.protocol,
        p: threshold,
        topo_seed: seeds.topology_seed,
        proto_seed: seeds.protocol_seed,
        avg_cost: report.average_cost,
        avg_energy: report.average_energy_cost,
        avg_latency: (!report.average_latency.is_nan()).then_some(report.average_latency),
        suc_ratio: report.suc_ratio,
        convergence_rate: report.convergence_rate,
        ec_level_building: report.ec_level_building,
        sr: bc.and_then(|b| b.saved_rebroadcast),
        ec: bc.map(|b| b.energy),
        re: bc.map(|b| b.reachability),
        max_level,
        avg_level,
        reply_failures,
        unknown_level_fallbacks: fallbacks,
    };
    Ok(CellResult {
        row,
        run,
        report,
        levels,
        connected,
        trace,
    })
}

/// All cells of `spec`, in deterministic output order.
pub fn run_experiment_cells(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    spec.validate()?;
    spec.cells()
        .into_par_iter()
        .map(|(seeds, p)| run_cell(spec, seeds, p))
        .collect()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CsvRow>, ExperimentError> {
    Ok(run_experiment_cells(spec)?
        .into_iter()
        .map(|c| c.row)
        .collect())
}

pub fn write_csv<W: Write>(rows: &[CsvRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[CsvRow]) -> Result<String, ExperimentError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Paired A/B ratios for one seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedRatio {
    pub topo_seed: u64,
    pub proto_seed: u64,
    pub cost: f64,
    pub energy: f64,
    pub latency: f64,
    pub suc_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario: String,
    pub a: ProtocolKind,
    pub b: ProtocolKind,
    pub per_seed: Vec<PairedRatio>,
    pub mean_cost: f64,
    pub mean_energy: f64,
    pub mean_latency: f64,
    pub mean_suc_ratio: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

/// A/B comparison of two specs over the same scenario and seeds.
pub fn compare(a: &ExperimentSpec, b: &ExperimentSpec) -> Result<Comparison, ExperimentError> {
    if a.scenario != b.scenario {
        return Err(ExperimentError::Usage(
            "compared specs use different scenarios".into(),
        ));
    }
    if a.seeds != b.seeds {
        return Err(ExperimentError::Usage(
            "compared specs use different seed sets".into(),
        ));
    }
    for s in [a, b] {
        if s.protocol == ProtocolKind::Lbf && s.threshold_p.len() != 1 {
            return Err(ExperimentError::Usage(
                "compare needs a single threshold per spec".into(),
            ));
        }
    }
    let rows_a = run_experiment(a)?;
    let rows_b = run_experiment(b)?;
    let per_seed: Vec<PairedRatio> = rows_a
        .iter()
        .zip(&rows_b)
        .map(|(x, y)| PairedRatio {
            topo_seed: x.topo_seed,
            proto_seed: x.proto_seed,
            cost: ratio(x.avg_cost, y.avg_cost),
            energy: ratio(x.avg_energy, y.avg_energy),
            latency: ratio(
                x.avg_latency.unwrap_or(f64::NAN),
                y.avg_latency.unwrap_or(f64::NAN),
            ),
            suc_ratio: ratio(x.suc_ratio, y.suc_ratio),
        })
        .collect();
    let mean =
        |f: fn(&PairedRatio) -> f64| per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64;
    Ok(Comparison {
        scenario: a.scenario.name().to_string(),
        a: a.protocol,
        b: b.protocol,
        mean_cost: mean(|r| r.cost),
        mean_energy: mean(|r| r.energy),
        mean_latency: mean(|r| r.latency),
        mean_suc_ratio: mean(|r| r.suc_ratio),
        per_seed,
    })
}

/// Scalar-or-list values accepted in the config file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ScenarioEntry {
    Name(String),
    Inline(ScenarioConfig),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SeedEntry {
    Text(String),
    List(Vec<u64>),
    Pairs(Vec<[u64; 2]>),
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TargetEntry {
    Text(String),
    List(Vec<u16>),
}

/// TOML experiment file. Keys mirror [`ExperimentSpec`]; every key is
/// optional and command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub scenario: Option<ScenarioEntry>,
    pub protocol: Option<ProtocolKind>,
    pub threshold_p: Option<OneOrMany<f64>>,
    pub seeds: Option<SeedEntry>,
    pub targets: Option<TargetEntry>,
    pub out: Option<String>,
    pub trace: Option<String>,
    pub hop_delay: Option<f64>,
    pub jitter_max: Option<f64>,
    pub rad_t_max: Option<f64>,
    pub payload_bytes: Option<usize>,
    pub broadcasts: Option<usize>,
    pub failed_queries: Option<FailedQueries>,
    pub allow_large: Option<bool>,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<SpecFile, ExperimentError> {
        Ok(toml::from_str(text)?)
    }
}

pub fn scenario_from_entry(entry: &ScenarioEntry) -> Result<Scenario, ExperimentError> {
    match entry {
        ScenarioEntry::Name(n) => parse_scenario(n),
        ScenarioEntry::Inline(cfg) => Ok(Scenario::Custom {
            name: "custom".into(),
            config: cfg.clone(),
        }),
    }
}

pub fn parse_scenario(name: &str) -> Result<Scenario, ExperimentError> {
    Preset::from_name(name)
        .map(Scenario::Preset)
        .ok_or_else(|| {
            ExperimentError::Usage(format!("unknown scenario {name:?} (expected s1..s5)"))
        })
}

pub fn seeds_from_entry(entry: &SeedEntry) -> Result<Vec<SeedPair>, ExperimentError> {
    match entry {
        SeedEntry::Text(t) => parse_seeds(t).map_err(ExperimentError::Usage),
        SeedEntry::List(v) if v.is_empty() => {
            Err(ExperimentError::Usage("seed list is empty".into()))
        }
        SeedEntry::List(v) => Ok(v.iter().copied().map(SeedPair::same).collect()),
        SeedEntry::Pairs(v) => Ok(v
            .iter()
            .map(|&[t, p]| SeedPair {
                topology_seed: t,
                protocol_seed: p,
            })
            .collect()),
    }
}

pub fn targets_from_entry(entry: &TargetEntry) -> Result<Targets, ExperimentError> {
    match entry {
        TargetEntry::Text(t) => t.parse().map_err(ExperimentError::Usage),
        TargetEntry::List(v) => Ok(Targets::Explicit(v.iter().copied().map(NodeId).collect())),
    }
}

/// Default size of the per-cell event log when tracing is requested.
pub const TRACE_CAPACITY: usize = DEFAULT_LOG_CAPACITY;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_syntax() {
        assert_eq!(parse_seeds("1..20").unwrap().len(), 20);
        assert_eq!(
            parse_seeds("1..=3").unwrap(),
            (1..=3).map(SeedPair::same).collect::<Vec<_>>()
        );
        assert_eq!(
            parse_seeds("4, 7:9").unwrap(),
            vec![
                SeedPair::same(4),
                SeedPair {
                    topology_seed: 7,
                    protocol_seed: 9
                }
            ]
        );
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn threshold_and_target_syntax() {
        assert_eq!(
            parse_thresholds("0.2,0.4, 1.0").unwrap(),
            vec![0.2, 0.4, 1.0]
        );
        assert_eq!("all".parse::<Targets>().unwrap(), Targets::AllNodes);
        assert_eq!(
            "3,5".parse::<Targets>().unwrap(),
            Targets::Explicit(vec![NodeId(3), NodeId(5)])
        );
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::preset(Preset::S1, ProtocolKind::Lbf);
        assert!(spec.validate().is_ok());
        assert_eq!(spec.seeds.len(), 20);
        assert_eq!(spec.threshold_p, vec![0.4]);
        spec.threshold_p = vec![1.2];
        assert!(matches!(spec.validate(), Err(ExperimentError::Usage(_))));
        let big = ExperimentSpec::preset(Preset::S4, ProtocolKind::Lbf);
        assert_eq!(big.seeds.len(), 3);
        assert!(matches!(
            big.validate(),
            Err(ExperimentError::LargeScenario("s4"))
        ));
    }

    #[test]
    fn cells_cover_seeds_times_thresholds() {
        let mut spec = ExperimentSpec::preset(Preset::S3, ProtocolKind::Lbf);
        spec.seeds = parse_seeds("1..2").unwrap();
        spec.threshold_p = vec![0.2, 0.5, 1.0];
        let cells = spec.cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], (SeedPair::same(1), Some(0.2)));
        assert_eq!(cells[3], (SeedPair::same(2), Some(0.2)));
        spec.protocol = ProtocolKind::Flood;
        assert_eq!(spec.cells().len(), 2);
    }

    #[test]
    fn config_file_keys() {
        let file = SpecFile::parse(
            r#"
            scenario = "s2"
            protocol = "lbf"
            threshold_p = [0.2, 0.4]
            seeds = "1..3"
            targets = [1, 2]
            rad_t_max = 0.4
            "#,
        )
        .unwrap();
        assert_eq!(
            scenario_from_entry(file.scenario.as_ref().unwrap()).unwrap(),
            Scenario::Preset(Preset::S2)
        );
        assert_eq!(file.threshold_p.unwrap().into_vec(), vec![0.2, 0.4]);
        assert_eq!(
            seeds_from_entry(file.seeds.as_ref().unwrap())
                .unwrap()
                .len(),
            3
        );
        assert_eq!(
            targets_from_entry(file.targets.as_ref().unwrap()).unwrap(),
            Targets::Explicit(vec![NodeId(1), NodeId(2)])
        );
        let inline = SpecFile::parse(
            r#"
            seeds = [[1, 2], [3, 4]]
            [scenario]
            node_count = 30
            side_length = 300.0
            "#,
        )
        .unwrap();
        match scenario_from_entry(inline.scenario.as_ref().unwrap()).unwrap() {
            Scenario::Custom { config, .. } => assert_eq!(config.comm_radius, 110.0),
            other => panic!("{other:?}"),
        }
        assert!(SpecFile::parse("bogus = 1").is_err());
    }

    #[test]
    fn empty_rows_still_write_a_header() {
        let s = csv_string(&[]).unwrap();
        assert_eq!(s.trim_end(), CSV_COLUMNS.join(","));
    }
}

//! wasm-bindgen front end for the browser demo in `www/`.
//!
//! Every export is stateless: it regenerates the deployment from
//! `(scenario, seed)` and returns JSON, so the page only keeps the seed.

use lbf_core::baseline::FloodSimulation;
use lbf_core::lbf::{LbfConfig, LbfSimulation};
use lbf_core::metrics::broadcast_metrics;
use lbf_core::topology::{NodeId, Preset, Topology};
use lbf_core::TimingConfig;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const SWEEP: [f64; 5] = [0.2, 0.4, 0.5, 0.8, 1.0];

#[derive(Debug, Serialize)]
pub struct NodeView {
    pub x: f64,
    pub y: f64,
    pub level: Option<u8>,
}

#[derive(Debug, Serialize)]
pub struct Deployment {
    pub scenario: &'static str,
    pub side: f64,
    pub nodes: Vec<NodeView>,
    pub edges: Vec<[u16; 2]>,
    pub average_degree: f64,
    pub max_level: u8,
    pub convergence_rate: f64,
    pub level_building_energy: u64,
}

#[derive(Debug, Serialize)]
pub struct QueryView {
    pub target: u16,
    pub ttl: u8,
    pub success: bool,
    pub hops: Option<u32>,
    pub processed: Vec<u16>,
    pub cost: u64,
    pub energy: u64,
    pub flood_cost: u64,
    pub flood_energy: u64,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub p: f64,
    pub sr: Option<f64>,
    pub ec: f64,
    pub re: f64,
}

fn preset(name: &str) -> Result<Preset, String> {
    match Preset::from_name(name) {
        Some(Preset::S5) => Err("s5 is too large for the browser demo".into()),
        Some(p) => Ok(p),
        None => Err(format!("unknown scenario {name:?}")),
    }
}

fn topology(name: &str, seed: u64) -> Result<(Preset, Topology), String> {
    let p = preset(name)?;
    let topo = Topology::generate(&p.config(seed)).map_err(|e| e.to_string())?;
    Ok((p, topo))
}

fn built(topo: &Topology, seed: u64, threshold: f64) -> Result<LbfSimulation<'_>, String> {
    let config = LbfConfig {
        threshold,
        ..Default::default()
    };
    let mut sim = LbfSimulation::new(topo, TimingConfig::default().with_seed(seed), config)
        .map_err(|e| e.to_string())?;
    sim.build_levels().map_err(|e| e.to_string())?;
    Ok(sim)
}

pub fn deployment(scenario: &str, seed: u64) -> Result<Deployment, String> {
    let (p, topo) = topology(scenario, seed)?;
    let config = LbfConfig::default();
    let mut sim = LbfSimulation::new(&topo, TimingConfig::default().with_seed(seed), config)
        .map_err(|e| e.to_string())?;
    let (lb, _) = sim.build_levels().map_err(|e| e.to_string())?;
    let levels = sim.network().levels();
    let nodes = topo
        .positions()
        .iter()
        .zip(&levels)
        .map(|(pos, &level)| NodeView {
            x: pos.x,
            y: pos.y,
            level,
        })
        .collect();
    let edges = topo
        .nodes()
        .flat_map(|a| {
            topo.neighbors(a)
                .iter()
                .filter(move |b| a < **b)
                .map(move |b| [a.0, b.0])
        })
        .collect();
    Ok(Deployment {
        scenario: p.name(),
        side: p.dimensions().1,
        nodes,
        edges,
        average_degree: topo.average_degree(),
        max_level: levels.iter().flatten().copied().max().unwrap_or(0),
        convergence_rate: lb.convergence_rate(),
        level_building_energy: lb.energy(),
    })
}

pub fn run_query(
    scenario: &str,
    seed: u64,
    target: u16,
    threshold: f64,
) -> Result<QueryView, String> {
    let (_, topo) = topology(scenario, seed)?;
    if target as usize >= topo.node_count() {
        return Err(format!("node {target} does not exist"));
    }
    let mut sim = built(&topo, seed, threshold)?;
    let run = sim.query(NodeId(target)).map_err(|e| e.to_string())?;
    let ttl = topo
        .hop_distance_oracle()
        .iter()
        .flatten()
        .copied()
        .max()
        .unwrap_or(0) as u8;
    let mut flood = FloodSimulation::new(&topo, TimingConfig::default().with_seed(seed));
    let f = flood
        .query(NodeId(target), ttl)
        .map_err(|e| e.to_string())?;
    Ok(QueryView {
        target,
        ttl: run.ttl,
        success: run.record.success,
        hops: run.record.hops,
        processed: run.processed.iter().map(|n| n.0).collect(),
        cost: run.record.cost,
        energy: run.record.energy,
        flood_cost: f.record.cost,
        flood_energy: f.record.energy,
    })
}

pub fn threshold_sweep(
    scenario: &str,
    seed: u64,
    broadcasts: usize,
) -> Result<Vec<SweepPoint>, String> {
    let (_, topo) = topology(scenario, seed)?;
    let broadcasts = broadcasts.max(1);
    SWEEP
        .iter()
        .map(|&p| {
            let mut sim = built(&topo, seed, p)?;
            let mut sr = Vec::new();
            let (mut ec, mut re) = (0.0, 0.0);
            for _ in 0..broadcasts {
                let (rec, _) = sim.broadcast().map_err(|e| e.to_string())?;
                let m = broadcast_metrics(&rec);
                sr.extend(m.saved_rebroadcast);
                ec += m.energy;
                re += m.reachability;
            }
            let n = broadcasts as f64;
            Ok(SweepPoint {
                p,
                sr: (!sr.is_empty()).then(|| sr.iter().sum::<f64>() / sr.len() as f64),
                ec: ec / n,
                re: re / n,
            })
        })
        .collect()
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Generates a deployment and builds levels. Seeds arrive as `f64` from JS.
#[wasm_bindgen]
pub fn deploy(scenario: &str, seed: f64) -> Result<String, JsValue> {
    to_js(deployment(scenario, seed as u64))
}

#[wasm_bindgen]
pub fn query(scenario: &str, seed: f64, target: u16, threshold: f64) -> Result<String, JsValue> {
    to_js(run_query(scenario, seed as u64, target, threshold))
}

#[wasm_bindgen]
pub fn sweep(scenario: &str, seed: f64, broadcasts: u32) -> Result<String, JsValue> {
    to_js(threshold_sweep(scenario, seed as u64, broadcasts as usize))
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lbf_core::baseline::FloodSimulation;
use lbf_core::experiment::{
    compare, csv_string, parse_seeds, run_experiment, run_experiment_cells, CellResult,
    ExperimentSpec, ProtocolKind, Targets,
};
use lbf_core::lbf::{LbfConfig, LbfSimulation};
use lbf_core::topology::{NodeId, Preset, Topology};
use lbf_core::wire::{decode, encode, DecodeError, Packet, QueryPacket};
use lbf_core::TimingConfig;
use proptest::test_runner::{Config, TestRunner};

const SMALL: [Preset; 3] = [Preset::S1, Preset::S2, Preset::S3];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn within(x: f64, centre: f64, tol: f64) -> bool {
    (x - centre).abs() <= tol + 1e-12
}

fn levels_after_lbp(topo: &Topology, seed: u64) -> Vec<Option<u8>> {
    let mut sim = LbfSimulation::new(
        topo,
        TimingConfig::default().with_seed(seed),
        LbfConfig::default(),
    )
    .unwrap();
    sim.build_levels().unwrap();
    sim.network().levels()
}

fn sensor_levels(levels: &[Option<u8>]) -> Vec<f64> {
    levels.iter().skip(1).flatten().map(|&l| l as f64).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for preset in SMALL {
        for seed in 1..=100u64 {
            let topo = Topology::generate(&preset.config(seed)).unwrap();
            let levels = levels_after_lbp(&topo, seed);
            for (i, want) in topo.hop_distance_oracle().iter().enumerate() {
                if let Some(want) = want {
                    checked += 1;
                    if levels[i].map(u32::from) != Some(*want) {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let took = start.elapsed();
    outcome(
        mismatches == 0 && took < Duration::from_secs(120),
        format!(
            "{checked} reachable nodes, {mismatches} mismatches, {:.1}s",
            took.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Outcome {
    // (max centre, max tol, mean centre, mean tol)
    let expected = [
        (3.0, 1.0, 1.92, 0.4),
        (5.0, 1.0, 2.90, 0.5),
        (15.0, 3.0, 7.78, 1.2),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (preset, (max_c, max_t, mean_c, mean_t)) in SMALL.into_iter().zip(expected) {
        let mut maxes = Vec::new();
        let mut means = Vec::new();
        for seed in 1..=20u64 {
            let topo = Topology::generate(&preset.config(seed)).unwrap();
            let lv = sensor_levels(&levels_after_lbp(&topo, seed));
            maxes.push(lv.iter().copied().fold(0.0, f64::max));
            means.push(mean(lv));
        }
        let (mx, mn) = (mean(maxes), mean(means));
        let ok = within(mx, max_c, max_t) && within(mn, mean_c, mean_t);
        pass &= ok;
        parts.push(format!(
            "{} max {mx:.2} ({max_c}±{max_t}) mean {mn:.2} ({mean_c}±{mean_t}) {}",
            preset.name(),
            if ok { "ok" } else { "out" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let expected = [40.52, 24.21, 14.07];
    let mut pass = true;
    let mut parts = Vec::new();
    for (preset, want) in SMALL.into_iter().zip(expected) {
        let d = mean((1..=20u64).map(|s| {
            Topology::generate(&preset.config(s))
                .unwrap()
                .average_degree()
        }));
        let ok = within(d, want, 0.15 * want);
        pass &= ok;
        parts.push(format!(
            "{} degree {d:.2} (target {want} ±15%) {}",
            preset.name(),
            if ok { "ok" } else { "out" }
        ));
    }
    outcome(pass, parts.join("; "))
}

struct Paired {
    preset: Preset,
    lbf: Vec<CellResult>,
    flood: Vec<CellResult>,
    took: Duration,
}

fn paired_batch(preset: Preset) -> Paired {
    let start = Instant::now();
    let mut lbf = ExperimentSpec::preset(preset, ProtocolKind::Lbf);
    lbf.broadcasts = 0;
    let mut flood = lbf.clone();
    flood.protocol = ProtocolKind::Flood;
    let lbf = run_experiment_cells(&lbf).unwrap();
    let flood = run_experiment_cells(&flood).unwrap();
    Paired {
        preset,
        lbf,
        flood,
        took: start.elapsed(),
    }
}

fn criterion_4(batches: &[Paired]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for b in batches.iter().filter(|b| b.preset != Preset::S1) {
        let cost = mean(
            b.lbf
                .iter()
                .zip(&b.flood)
                .map(|(l, f)| l.row.avg_cost / f.row.avg_cost),
        );
        let energy = mean(
            b.lbf
                .iter()
                .zip(&b.flood)
                .map(|(l, f)| l.row.avg_energy / f.row.avg_energy),
        );
        let ok = cost <= 0.65 && energy <= 0.65 && b.took < Duration::from_secs(300);
        pass &= ok;
        parts.push(format!(
            "{} cost ratio {cost:.3} energy ratio {energy:.3} ({:.1}s)",
            b.preset.name(),
            b.took.as_secs_f64()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_5(batches: &[Paired]) -> Outcome {
    let mut bad_hops = 0usize;
    let mut successes = 0usize;
    let mut bad_seeds = Vec::new();
    for b in batches {
        for (l, f) in b.lbf.iter().zip(&b.flood) {
            let oracle = Topology::generate(&b.preset.config(l.row.topo_seed))
                .unwrap()
                .hop_distance_oracle();
            for q in l.run.queries.iter().filter(|q| q.success) {
                successes += 1;
                if q.hops != oracle[q.target.index()] {
                    bad_hops += 1;
                }
            }
            let flood_lower = match (f.row.avg_latency, l.row.avg_latency) {
                (Some(f), Some(l)) => f < l,
                (None, Some(_)) => true,
                _ => false,
            };
            if flood_lower {
                bad_seeds.push(format!("{}/{}", b.preset.name(), l.row.topo_seed));
            }
        }
    }
    outcome(
        bad_hops == 0 && bad_seeds.is_empty(),
        format!(
            "{successes} successful queries, {bad_hops} with hops != oracle level; flood latency below LBF on {:?}",
            bad_seeds
        ),
    )
}

fn criterion_6(batches: &[Paired]) -> Outcome {
    let mut worst = (f64::INFINITY, String::new());
    let mut connected = 0;
    for b in batches {
        for cell in b.lbf.iter().chain(&b.flood).filter(|c| c.connected) {
            connected += 1;
            if cell.row.suc_ratio < worst.0 {
                worst = (
                    cell.row.suc_ratio,
                    format!(
                        "{} {} seed {}",
                        b.preset.name(),
                        cell.row.protocol,
                        cell.row.topo_seed
                    ),
                );
            }
        }
    }
    outcome(
        worst.0 >= 99.0,
        format!(
            "{connected} connected cells, lowest suc_ratio {:.2}% ({})",
            worst.0, worst.1
        ),
    )
}

fn criterion_7() -> Outcome {
    let ps = [0.2, 0.4, 0.5, 0.8, 1.0];
    let mut spec = ExperimentSpec::preset(Preset::S3, ProtocolKind::Lbf);
    spec.threshold_p = ps.to_vec();
    spec.targets = Targets::Explicit(vec![NodeId(1)]);
    spec.broadcasts = 10;
    let rows = run_experiment(&spec).unwrap();
    let per_p = |f: &dyn Fn(&lbf_core::experiment::CsvRow) -> Option<f64>| -> Vec<f64> {
        ps.iter()
            .map(|&p| mean(rows.iter().filter(|r| r.p == Some(p)).filter_map(f)))
            .collect()
    };
    let sr = per_p(&|r| r.sr);
    let ec = per_p(&|r| r.ec);
    let re = per_p(&|r| r.re);
    let sr_down = sr.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let ec_up = ec.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let re_up = re.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    outcome(
        sr_down && ec_up && re_up && sr[0] >= 0.3,
        format!(
            "P={:?} SR=[{}] EC=[{}] RE=[{}]",
            ps,
            fmt(&sr),
            ec.iter()
                .map(|x| format!("{x:.0}"))
                .collect::<Vec<_>>()
                .join(","),
            fmt(&re)
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut seeds = 0;
    let mut bad = 0;
    for preset in SMALL {
        for seed in 1..=20u64 {
            let topo = Topology::generate(&preset.config(seed)).unwrap();
            if !topo.is_connected() {
                continue;
            }
            seeds += 1;
            let mut sim = FloodSimulation::new(&topo, TimingConfig::default().with_seed(seed));
            let (_, trace) = sim.broadcast(u8::MAX).unwrap();
            bad += topo
                .nodes()
                .filter(|&n| trace.received[n.index()] != topo.degree(n) as u64)
                .count();
        }
    }
    outcome(
        bad == 0,
        format!("{seeds} connected topologies, {bad} nodes with received != degree"),
    )
}

fn criterion_9() -> Outcome {
    let preset = Preset::S4;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 1..=3u64 {
        let topo = Topology::generate(&preset.config(seed)).unwrap();
        let config = LbfConfig {
            threshold: preset.default_threshold(),
            ..Default::default()
        };
        let mut sim =
            LbfSimulation::new(&topo, TimingConfig::default().with_seed(seed), config).unwrap();
        sim.build_levels().unwrap();
        let levels = sim.network().levels();
        let mut by_level: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
        for t in topo.nodes().skip(1) {
            let Some(level) = levels[t.index()] else {
                continue;
            };
            let run = sim.query(t).unwrap();
            by_level
                .entry(level)
                .or_default()
                .push(run.processed.len() as f64 / topo.node_count() as f64);
        }
        let fractions: Vec<(u8, f64)> = by_level
            .iter()
            .map(|(&l, v)| (l, mean(v.iter().copied())))
            .collect();
        let monotone = fractions.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12);
        let (lo_level, lo) = fractions[0];
        let (hi_level, hi) = *fractions.last().unwrap();
        let ok = monotone && lo < 0.10 && hi > 0.85;
        pass &= ok;
        let dips: Vec<u8> = fractions
            .windows(2)
            .filter(|w| w[1].1 < w[0].1)
            .map(|w| w[1].0)
            .collect();
        parts.push(format!(
            "seed {seed}: level {lo_level} {:.1}%, level {hi_level} {:.1}%, decreases at levels {dips:?}",
            lo * 100.0,
            hi * 100.0
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let mut lbf = ExperimentSpec::preset(Preset::S2, ProtocolKind::Lbf);
    lbf.seeds = parse_seeds("1..4,7:11").unwrap();
    lbf.threshold_p = vec![0.2, 0.5, 1.0];
    let mut flood = lbf.clone();
    flood.protocol = ProtocolKind::Flood;
    let mut identical = true;
    for spec in [&lbf, &flood] {
        let a = csv_string(&run_experiment(spec).unwrap()).unwrap();
        let b = csv_string(&run_experiment(spec).unwrap()).unwrap();
        identical &= a == b;
    }
    let self_cmp = compare(&flood, &flood).unwrap();
    let ones = [
        self_cmp.mean_cost,
        self_cmp.mean_energy,
        self_cmp.mean_latency,
        self_cmp.mean_suc_ratio,
    ]
    .iter()
    .all(|&r| r == 1.0);
    outcome(
        identical && ones,
        format!("reruns byte-identical: {identical}; self-comparison ratios all 1.0: {ones}"),
    )
}

fn criterion_11() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 100_000,
        failure_persistence: None,
        ..Config::default()
    });
    let roundtrip = runner.run(&common::valid_packet(), |p| {
        let bytes = encode(&p).expect("valid packet encodes");
        assert_eq!(bytes.len(), p.encoded_len());
        assert_eq!(decode(&bytes).expect("decodes"), p);
        Ok(())
    });
    let query = encode(&Packet::Query(QueryPacket {
        hop_count: 0,
        ttl: 2,
        seq_num: 7,
        target_id: NodeId(5),
        source_id: NodeId(0),
    }))
    .unwrap();
    let mut unknown = query.clone();
    unknown[0] = 9;
    let data = [4u8, 0, 1, 3, 0, 0, 0, 1, 0, 0, 0xaa];
    let classes = [
        matches!(decode(&unknown), Err(DecodeError::UnknownKind(9))),
        matches!(
            decode(&query[..7]),
            Err(DecodeError::Truncated {
                needed: 10,
                actual: 7,
                ..
            })
        ),
        matches!(
            decode(&data),
            Err(DecodeError::LengthMismatch {
                declared: 3,
                actual: 1
            })
        ),
    ];
    let distinct = classes.iter().all(|&c| c);
    outcome(
        roundtrip.is_ok() && distinct,
        format!(
            "100000 random packets round-trip: {}; unknown/truncated/length-mismatch errors distinct: {distinct}",
            roundtrip.is_ok()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut report = |n: u32, o: Outcome| {
        println!(
            "criterion {n:>2}: {} | {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, o));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    let batches: Vec<Paired> = SMALL.into_iter().map(paired_batch).collect();
    report(4, criterion_4(&batches));
    report(5, criterion_5(&batches));
    report(6, criterion_6(&batches));
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9());
    report(10, criterion_10());
    report(11, criterion_11());
    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| *n)
        .collect();
    println!(
        "acceptance: {} passed, {} failed {:?}",
        results.len() - failed.len(),
        failed.len(),
        failed
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

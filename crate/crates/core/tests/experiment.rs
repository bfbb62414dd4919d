use lbf_core::experiment::{
    compare, csv_string, parse_seeds, run_experiment, ExperimentError, ExperimentSpec,
    ProtocolKind, Scenario, SeedPair, Targets, CSV_COLUMNS,
};
use lbf_core::topology::{NodeId, Preset, Topology};
use lbf_core::ScenarioConfig;

fn small(preset: Preset, protocol: ProtocolKind) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(preset, protocol);
    spec.broadcasts = 2;
    spec
}

#[test]
fn one_row_per_seed() {
    let mut spec = small(Preset::S1, ProtocolKind::Lbf);
    spec.threshold_p = vec![0.4];
    spec.seeds = parse_seeds("1..20").unwrap();
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 20);
    let seeds: Vec<u64> = rows.iter().map(|r| r.topo_seed).collect();
    assert_eq!(seeds, (1..=20).collect::<Vec<_>>());
    assert!(rows.iter().all(|r| r.p == Some(0.4) && r.scenario == "s1"));
}

#[test]
fn sweep_emits_one_row_per_threshold() {
    let mut spec = small(Preset::S3, ProtocolKind::Lbf);
    spec.seeds = parse_seeds("1..2").unwrap();
    spec.threshold_p = vec![0.2, 0.4, 0.5, 0.8, 1.0];
    spec.targets = Targets::Explicit(vec![NodeId(3)]);
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 10);
    let ps: Vec<f64> = rows[..5].iter().map(|r| r.p.unwrap()).collect();
    assert_eq!(ps, spec.threshold_p);
}

#[test]
fn header_matches_column_contract() {
    let mut spec = small(Preset::S1, ProtocolKind::Flood);
    spec.seeds = vec![SeedPair::same(3)];
    let csv = csv_string(&run_experiment(&spec).unwrap()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), CSV_COLUMNS.len());
    // Flood rows have no threshold and no level-building cost.
    assert_eq!(row[2], "");
    assert_eq!(row[1], "flood");
    assert_eq!(row[10], "0");
}

#[test]
fn level_columns_follow_the_topology() {
    let mut spec = small(Preset::S2, ProtocolKind::Lbf);
    spec.seeds = vec![SeedPair::same(5)];
    let row = &run_experiment(&spec).unwrap()[0];
    let oracle = Topology::generate(&Preset::S2.config(5))
        .unwrap()
        .hop_distance_oracle();
    let sensors: Vec<u32> = oracle[1..].iter().flatten().copied().collect();
    assert_eq!(row.max_level, *sensors.iter().max().unwrap());
    let mean = sensors.iter().sum::<u32>() as f64 / sensors.len() as f64;
    assert!((row.avg_level - mean).abs() < 1e-12);
    assert!(row.convergence_rate > 0.0);
    assert!(row.ec_level_building > 0);
}

#[test]
fn self_comparison_is_all_ones() {
    let mut spec = small(Preset::S1, ProtocolKind::Lbf);
    spec.seeds = parse_seeds("1..4").unwrap();
    let cmp = compare(&spec, &spec).unwrap();
    for r in &cmp.per_seed {
        assert_eq!(
            (r.cost, r.energy, r.latency, r.suc_ratio),
            (1.0, 1.0, 1.0, 1.0)
        );
    }
    assert_eq!(cmp.mean_cost, 1.0);
}

#[test]
fn lbf_latency_never_exceeds_flooding() {
    let mut lbf = small(Preset::S2, ProtocolKind::Lbf);
    lbf.seeds = parse_seeds("1..5").unwrap();
    let mut flood = lbf.clone();
    flood.protocol = ProtocolKind::Flood;
    let cmp = compare(&lbf, &flood).unwrap();
    assert_eq!(cmp.per_seed.len(), 5);
    for r in &cmp.per_seed {
        assert!(r.latency <= 1.0, "seed {}: {}", r.topo_seed, r.latency);
        assert!(r.cost < 1.0);
    }
}

#[test]
fn mismatched_seed_sets_are_rejected() {
    let a = small(Preset::S1, ProtocolKind::Lbf);
    let mut b = a.clone();
    b.protocol = ProtocolKind::Flood;
    b.seeds = parse_seeds("1..3").unwrap();
    assert!(matches!(compare(&a, &b), Err(ExperimentError::Usage(_))));
}

#[test]
fn large_presets_need_opting_in() {
    let spec = small(Preset::S5, ProtocolKind::Lbf);
    assert!(matches!(
        run_experiment(&spec),
        Err(ExperimentError::LargeScenario("s5"))
    ));
}

#[test]
fn custom_scenarios_and_bad_targets() {
    let mut spec = ExperimentSpec::new(
        Scenario::Custom {
            name: "tiny".into(),
            config: ScenarioConfig::new(12, 150.0),
        },
        ProtocolKind::Lbf,
    );
    spec.seeds = vec![SeedPair::same(1)];
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows[0].scenario, "tiny");
    spec.targets = Targets::Explicit(vec![NodeId(0)]);
    assert!(matches!(
        run_experiment(&spec),
        Err(ExperimentError::Usage(_))
    ));
    spec.targets = Targets::Explicit(vec![NodeId(40)]);
    assert!(matches!(
        run_experiment(&spec),
        Err(ExperimentError::Usage(_))
    ));
}

#[test]
fn independent_seed_streams() {
    let mut a = small(Preset::S1, ProtocolKind::Lbf);
    a.seeds = vec![SeedPair {
        topology_seed: 4,
        protocol_seed: 1,
    }];
    let mut b = a.clone();
    b.seeds = vec![SeedPair {
        topology_seed: 4,
        protocol_seed: 2,
    }];
    let (ra, rb) = (
        &run_experiment(&a).unwrap()[0],
        &run_experiment(&b).unwrap()[0],
    );
    // Same deployment, different protocol randomness.
    assert_eq!(ra.max_level, rb.max_level);
    assert_eq!(ra.avg_level, rb.avg_level);
    assert_eq!(ra.proto_seed, 1);
    assert_eq!(rb.proto_seed, 2);
}

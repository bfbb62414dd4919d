//! `lbf-sim`: run level-based flooding experiments and write CSV.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lbf_core::experiment::{
    self, compare, parse_seeds, parse_thresholds, run_experiment_cells, write_csv, ExperimentError,
    ExperimentSpec, ProtocolKind, SpecFile, Targets, TRACE_CAPACITY,
};
use lbf_core::metrics::FailedQueries;
use lbf_core::wire;

#[derive(Parser)]
#[command(
    name = "lbf-sim",
    version,
    about = "Level-based flooding query simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write one CSV row per (seed, P) cell.
    Run(RunArgs),
    /// Paired LBF / flooding comparison over the same seeds.
    Compare(CommonArgs),
    /// Decode hex-encoded packets and print them.
    Decode {
        /// One packet per argument, e.g. "03 00 02 02 00 07 00 05 00 00".
        #[arg(required = true)]
        hex: Vec<String>,
    },
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// TOML file with keys named after the experiment fields.
    #[arg(long, env = "LBF_CONFIG")]
    config: Option<PathBuf>,
    /// Preset s1..s5.
    #[arg(long, env = "LBF_SCENARIO")]
    scenario: Option<String>,
    /// Suppression threshold for LBF.
    #[arg(long, env = "LBF_P", conflicts_with = "sweep_p")]
    p: Option<f64>,
    /// Comma-separated thresholds, e.g. 0.2,0.4,1.0.
    #[arg(long, env = "LBF_SWEEP_P")]
    sweep_p: Option<String>,
    /// `1..20`, `1,4,9` or `topo:proto` pairs.
    #[arg(long, env = "LBF_SEEDS")]
    seeds: Option<String>,
    /// `all` or a comma-separated list of node ids.
    #[arg(long, env = "LBF_TARGETS")]
    targets: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, env = "LBF_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "LBF_HOP_DELAY")]
    hop_delay: Option<f64>,
    #[arg(long, env = "LBF_JITTER")]
    jitter: Option<f64>,
    #[arg(long, env = "LBF_RAD_TMAX")]
    rad_tmax: Option<f64>,
    #[arg(long, env = "LBF_PAYLOAD_BYTES")]
    payload_bytes: Option<usize>,
    /// Untargeted broadcasts per cell for the sr/ec/re columns.
    #[arg(long, env = "LBF_BROADCASTS")]
    broadcasts: Option<usize>,
    /// Leave failed queries out of the cost averages.
    #[arg(long, env = "LBF_EXCLUDE_FAILED")]
    exclude_failed: bool,
    /// Permit the s4/s5 presets.
    #[arg(long, env = "LBF_ALLOW_LARGE")]
    allow_large: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "LBF_PROTOCOL")]
    protocol: Option<ProtocolKind>,
    /// Write the event log of every cell here.
    #[arg(long, env = "LBF_TRACE")]
    trace: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

fn usage(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Usage(msg.into())
}

/// Config file first, then flags on top.
fn build_spec(
    args: &CommonArgs,
    protocol: Option<ProtocolKind>,
) -> Result<(ExperimentSpec, Option<PathBuf>, Option<PathBuf>), ExperimentError> {
    let file = match &args.config {
        Some(path) => SpecFile::parse(&fs::read_to_string(path)?)?,
        None => SpecFile::default(),
    };
    let scenario = match (&args.scenario, &file.scenario) {
        (Some(name), _) => experiment::parse_scenario(name)?,
        (None, Some(entry)) => experiment::scenario_from_entry(entry)?,
        (None, None) => return Err(usage("no scenario given (--scenario or config `scenario`)")),
    };
    let protocol = protocol.or(file.protocol).unwrap_or(ProtocolKind::Lbf);
    let mut spec = ExperimentSpec::new(scenario, protocol);

    if let Some(seeds) = &file.seeds {
        spec.seeds = experiment::seeds_from_entry(seeds)?;
    }
    if let Some(t) = &file.targets {
        spec.targets = experiment::targets_from_entry(t)?;
    }
    if let Some(p) = file.threshold_p.clone() {
        spec.threshold_p = p.into_vec();
    }
    spec.hop_delay = file.hop_delay.unwrap_or(spec.hop_delay);
    spec.jitter_max = file.jitter_max.unwrap_or(spec.jitter_max);
    spec.rad_t_max = file.rad_t_max.unwrap_or(spec.rad_t_max);
    spec.payload_bytes = file.payload_bytes.unwrap_or(spec.payload_bytes);
    spec.broadcasts = file.broadcasts.unwrap_or(spec.broadcasts);
    spec.failed_queries = file.failed_queries.unwrap_or(spec.failed_queries);
    spec.allow_large = file.allow_large.unwrap_or(false);

    if let Some(s) = &args.seeds {
        spec.seeds = parse_seeds(s).map_err(usage)?;
    }
    if let Some(t) = &args.targets {
        spec.targets = t.parse::<Targets>().map_err(usage)?;
    }
    if let Some(p) = args.p {
        spec.threshold_p = vec![p];
    }
    if let Some(sweep) = &args.sweep_p {
        spec.threshold_p = parse_thresholds(sweep).map_err(usage)?;
    }
    spec.hop_delay = args.hop_delay.unwrap_or(spec.hop_delay);
    spec.jitter_max = args.jitter.unwrap_or(spec.jitter_max);
    spec.rad_t_max = args.rad_tmax.unwrap_or(spec.rad_t_max);
    spec.payload_bytes = args.payload_bytes.unwrap_or(spec.payload_bytes);
    spec.broadcasts = args.broadcasts.unwrap_or(spec.broadcasts);
    if args.exclude_failed {
        spec.failed_queries = FailedQueries::Exclude;
    }
    spec.allow_large |= args.allow_large;
    spec.validate()?;

    let out = args.out.clone().or(file.out.map(PathBuf::from));
    let trace = file.trace.map(PathBuf::from);
    Ok((spec, out, trace))
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: RunArgs) -> Result<(), ExperimentError> {
    let (mut spec, out, file_trace) = build_spec(&args.common, args.protocol)?;
    let trace_path = args.trace.or(file_trace);
    if trace_path.is_some() {
        spec.trace_capacity = Some(TRACE_CAPACITY);
    }
    let cells = run_experiment_cells(&spec)?;
    if let Some(path) = trace_path {
        let mut w = BufWriter::new(File::create(path)?);
        for c in &cells {
            let p = c.row.p.map_or(String::new(), |p| p.to_string());
            writeln!(
                w,
                "# {} {} P={p} topo_seed={} proto_seed={}",
                c.row.scenario, c.row.protocol, c.row.topo_seed, c.row.proto_seed
            )?;
            for line in &c.trace {
                writeln!(w, "{line}")?;
            }
        }
        w.flush()?;
    }
    let rows: Vec<_> = cells.into_iter().map(|c| c.row).collect();
    write_csv(&rows, output(out.as_ref())?)
}

fn run_compare(args: CommonArgs) -> Result<(), ExperimentError> {
    let (lbf, out, _) = build_spec(&args, Some(ProtocolKind::Lbf))?;
    let mut flood = lbf.clone();
    flood.protocol = ProtocolKind::Flood;
    let cmp = compare(&lbf, &flood)?;
    let mut w = csv::Writer::from_writer(output(out.as_ref())?);
    w.write_record([
        "scenario",
        "topo_seed",
        "proto_seed",
        "cost",
        "energy",
        "latency",
        "suc_ratio",
    ])?;
    for r in &cmp.per_seed {
        w.write_record([
            cmp.scenario.clone(),
            r.topo_seed.to_string(),
            r.proto_seed.to_string(),
            r.cost.to_string(),
            r.energy.to_string(),
            r.latency.to_string(),
            r.suc_ratio.to_string(),
        ])?;
    }
    w.write_record([
        cmp.scenario.clone(),
        "mean".into(),
        "mean".into(),
        cmp.mean_cost.to_string(),
        cmp.mean_energy.to_string(),
        cmp.mean_latency.to_string(),
        cmp.mean_suc_ratio.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

fn decode(hex: &[String]) -> Result<(), String> {
    for arg in hex {
        let bytes = wire::from_hex(arg).map_err(|e| format!("{arg:?}: {e}"))?;
        let packet = wire::decode(&bytes).map_err(|e| format!("{}: {e}", wire::to_hex(&bytes)))?;
        println!("{packet}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => run_compare(args),
        Command::Decode { hex } => decode(&hex).map_err(ExperimentError::Usage),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lbf-sim: {e}");
            match e {
                ExperimentError::Usage(_)
                | ExperimentError::LargeScenario(_)
                | ExperimentError::Config(_)
                | ExperimentError::Topology(_)
                | ExperimentError::Timing(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

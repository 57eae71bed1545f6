use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ma_isac::config::RunConfigFile;
use ma_isac::orchestrator::{bound_table, run_p1_ao, run_tradeoff_sweep, AlephPolicy, LayoutPolicy, Scenario, SlotRecord};
use ma_isac::output::{fmt_f64, output_dir, records_csv, sweep_csv, two_column, write_bundle, Metadata};
use ma_isac::{orchestrator, Error};

#[derive(Parser)]
#[command(name = "ma-isac", version, about = "Movable-antenna ISAC bounds, tracking and optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Matched-beam LCRLB/LPCRLB table with M_rx, N and Q doubled in turn.
    Bounds(Common),
    /// Weighted alternating optimization of beams, powers and positions.
    OptimizeWeighted(Common),
    /// Rate maximization under bound thresholds over tracked slots.
    OptimizeQos(QosArgs),
    /// Tracking with the configured layout held fixed.
    Track(Common),
    /// Trade-off sweep over ρ = 0, 0.1, ..., 1.
    Sweep(Common),
    /// Summarize a `records.json` written by `optimize-qos` or `track`.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to MA_ISAC_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    rho: Option<f64>,
    /// Movement region length in wavelengths.
    #[arg(long)]
    dmax_lambda: Option<f64>,
    #[arg(long)]
    slots: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Clone)]
struct QosArgs {
    #[command(flatten)]
    common: Common,
    /// Hold the transmit array at the half-wavelength ULA.
    #[arg(long)]
    baseline: bool,
}

#[derive(Args, Clone)]
struct ReportArgs {
    /// Directory holding `records.json`.
    #[arg(long)]
    input: PathBuf,
}

struct Loaded {
    file: RunConfigFile,
    text: String,
    scenario: Scenario,
}

fn load(c: &Common) -> Result<Loaded, Error> {
    let text = match &c.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut file = RunConfigFile::from_json(&text)?;
    if let Some(s) = c.seed {
        file.output.seed = s;
    }
    if let Some(r) = c.rho {
        file.objective.rho = r;
    }
    if let Some(d) = c.dmax_lambda {
        file.array.region_lambda = d;
    }
    if let Some(n) = c.slots {
        file.motion.horizon_slots = n;
    }
    let scenario = file.scenario()?;
    Ok(Loaded { file, text, scenario })
}

fn metadata(command: &str, l: &Loaded, aleph: Option<[f64; 3]>, iterations: Vec<usize>) -> Metadata {
    let s = &l.scenario.solvers;
    Metadata {
        command: command.into(),
        seed: l.scenario.seed,
        config_hash: l.file.hash(),
        aleph,
        beam_tolerance: s.beam.tolerance,
        ao_tolerance: s.ao.tolerance,
        pga_tolerance: s.pga.tolerance,
        iterations,
        provenance: l.file.provenance(&l.text),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("result serializes");
    s.push('\n');
    s
}

/// Prints the main table and writes the bundle when an output directory is set.
fn emit(c: &Common, main_csv: String, main_json: String, name: &str, meta: &Metadata, mut extra: Vec<(String, String)>) -> Result<(), Error> {
    match c.format {
        Format::Csv => print!("{main_csv}"),
        Format::Json => print!("{main_json}"),
    }
    if let Some(dir) = output_dir(c.out.as_deref()) {
        extra.push((format!("{name}.csv"), main_csv));
        extra.push((format!("{name}.json"), main_json));
        extra.push(("metadata.json".into(), json(meta)));
        write_bundle(&dir, &extra)?;
    }
    Ok(())
}

fn aleph_for(l: &Loaded, problem: &orchestrator::SlotProblem) -> Result<[f64; 3], Error> {
    match l.scenario.objective.aleph {
        AlephPolicy::Fixed(a) => Ok(a),
        AlephPolicy::Normalized => problem.initial_aleph(),
    }
}

fn cmd_bounds(c: &Common) -> Result<bool, Error> {
    let l = load(c)?;
    let rows = bound_table(&l.scenario)?;
    let k = l.scenario.vehicles.len();
    let mut csv = String::from("label,m_rx,num_subcarriers,num_blocks");
    for b in ["lcrlb", "lpcrlb"] {
        for p in ["theta", "d", "nu"] {
            for i in 1..=k {
                csv.push_str(&format!(",{b}_{p}_{i}"));
            }
        }
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}", r.label, r.m_rx, r.num_subcarriers, r.num_blocks));
        for b in [&r.lcrlb, &r.lpcrlb] {
            for p in 0..3 {
                for t in b {
                    csv.push(',');
                    csv.push_str(&fmt_f64(t.as_array()[p]));
                }
            }
        }
        csv.push('\n');
    }
    let meta = metadata("bounds", &l, None, vec![]);
    emit(c, csv, json(&rows), "bounds", &meta, vec![])?;
    Ok(true)
}

#[derive(Serialize)]
struct WeightedOut {
    rho: f64,
    aleph: [f64; 3],
    objective_trace: Vec<f64>,
    converged: bool,
    sum_rate: f64,
    sensing: f64,
    tx: Vec<f64>,
    rx: Vec<f64>,
    powers: Vec<f64>,
}

fn cmd_weighted(c: &Common) -> Result<bool, Error> {
    let l = load(c)?;
    let problem = l.scenario.first_slot()?;
    let aleph = aleph_for(&l, &problem)?;
    let rho = l.scenario.objective.rho;
    let ao = run_p1_ao(&problem, rho, aleph, &l.scenario.solvers)?;
    let w = ma_isac::objective::Weighted { rho, aleph };
    let out = WeightedOut {
        rho,
        aleph,
        objective_trace: ao.trace.clone(),
        converged: ao.converged,
        sum_rate: ao.evaluation.rate,
        sensing: w.sensing(&ao.evaluation.info),
        tx: ao.layout.tx.clone(),
        rx: ao.layout.rx.clone(),
        powers: ao.powers.clone(),
    };
    let mut csv = String::from("iteration,objective\n");
    for (i, f) in ao.trace.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt_f64(*f)));
    }
    let xs: Vec<f64> = (0..ao.trace.len()).map(|i| i as f64).collect();
    let meta = metadata("optimize-weighted", &l, Some(aleph), vec![ao.iterations()]);
    let plots = vec![("convergence.dat".to_string(), two_column(&xs, &ao.trace))];
    emit(c, csv, json(&out), "weighted", &meta, plots)?;
    Ok(true)
}

fn emit_records(c: &Common, l: &Loaded, command: &str, records: &[SlotRecord]) -> Result<bool, Error> {
    let k = l.scenario.vehicles.len();
    let slots: Vec<f64> = records.iter().map(|r| r.slot as f64).collect();
    let rates: Vec<f64> = records.iter().map(|r| r.sum_rate).collect();
    let mut plots = vec![("sum_rate.dat".to_string(), two_column(&slots, &rates))];
    for (i, p) in ["theta", "d", "nu"].iter().enumerate() {
        for v in 0..k {
            let y: Vec<f64> = records.iter().map(|r| r.lpcrlb[v].as_array()[i]).collect();
            plots.push((format!("lpcrlb_{p}_{}.dat", v + 1), two_column(&slots, &y)));
        }
    }
    let iters = records.iter().map(|r| r.swarm_evaluations).collect();
    let meta = metadata(command, l, None, iters);
    emit(c, records_csv(records, k), json(&records), "records", &meta, plots)?;
    Ok(records.iter().all(|r| r.feasible))
}

fn cmd_qos(a: &QosArgs) -> Result<bool, Error> {
    let l = load(&a.common)?;
    if l.scenario.objective.thresholds.is_none() {
        return Err(Error::Config("optimize-qos needs objective.thresholds".into()));
    }
    let records = if a.baseline { orchestrator::baseline_ulah(&l.scenario)? } else { orchestrator::run_two_stage(&l.scenario)? };
    emit_records(&a.common, &l, "optimize-qos", &records)
}

fn cmd_track(c: &Common) -> Result<bool, Error> {
    let l = load(c)?;
    let records = orchestrator::run_tracking(&l.scenario, LayoutPolicy::Fixed)?;
    emit_records(c, &l, "track", &records)
}

fn cmd_sweep(c: &Common) -> Result<bool, Error> {
    let l = load(c)?;
    let problem = l.scenario.first_slot()?;
    let aleph = aleph_for(&l, &problem)?;
    let rhos: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let points = run_tradeoff_sweep(&problem, &rhos, aleph, &l.scenario.solvers, l.scenario.tracking.pcrlb)?;
    let rates: Vec<f64> = points.iter().map(|p| p.sum_rate).collect();
    let sensing: Vec<f64> = points.iter().map(|p| p.sensing).collect();
    let lp: Vec<f64> = points.iter().map(|p| p.lpcrlb.iter().map(|b| b.theta).sum()).collect();
    let pc: Vec<f64> = points.iter().map(|p| p.pcrlb.iter().map(|b| b.theta).sum()).collect();
    let plots = vec![
        ("tradeoff.dat".to_string(), two_column(&rates, &sensing)),
        ("rate_vs_rho.dat".to_string(), two_column(&rhos, &rates)),
        ("lpcrlb_theta_vs_rho.dat".to_string(), two_column(&rhos, &lp)),
        ("pcrlb_theta_vs_rho.dat".to_string(), two_column(&rhos, &pc)),
    ];
    let meta = metadata("sweep", &l, Some(aleph), points.iter().map(|p| p.outer_iterations).collect());
    emit(c, sweep_csv(&points, l.scenario.vehicles.len()), json(&points), "sweep", &meta, plots)?;
    Ok(true)
}

fn cmd_report(a: &ReportArgs) -> Result<bool, Error> {
    let path = Path::new(&a.input).join("records.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let records: Vec<SlotRecord> = serde_json::from_str(&text)?;
    println!("slot,sum_rate_bits,feasible,max_lpcrlb_theta,max_lpcrlb_d,max_lpcrlb_nu");
    for r in &records {
        let max = |i: usize| r.lpcrlb.iter().map(|b| b.as_array()[i]).fold(f64::NEG_INFINITY, f64::max);
        println!("{},{},{},{},{},{}", r.slot, fmt_f64(r.sum_rate), r.feasible as u8, fmt_f64(max(0)), fmt_f64(max(1)), fmt_f64(max(2)));
    }
    let n = records.len().max(1) as f64;
    let mean = records.iter().map(|r| r.sum_rate).sum::<f64>() / n;
    eprintln!("{} slots, mean sum-rate {mean:.6}, {} infeasible", records.len(), records.iter().filter(|r| !r.feasible).count());
    Ok(records.iter().all(|r| r.feasible))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bounds(c) => cmd_bounds(c),
        Command::OptimizeWeighted(c) => cmd_weighted(c),
        Command::OptimizeQos(a) => cmd_qos(a),
        Command::Track(c) => cmd_track(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more slots were infeasible");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.infeasibility().is_some() || matches!(e, Error::SwarmInfeasible) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

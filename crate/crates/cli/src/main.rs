use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wmsn_core::controller::compute_perturbations;
use wmsn_core::sim::{run_with, sweep, tradeoff, RunOptions};
use wmsn_core::trace::{read_trace, RunConstants, TraceWriter};
use wmsn_core::verify::{self, SubproblemKind};
use wmsn_core::{fig2, load_config, NetworkConfig, SimError};

#[derive(Parser)]
#[command(name = "wmsn", version, about = "Slot simulator for drift-plus-penalty control of sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one V and seed; writes trace.csv, summary.json and constants.json.
    Run(RunArgs),
    /// Simulate every (V, seed) pair; writes tradeoff.csv and summaries.json.
    Sweep(SweepArgs),
    /// Check a trace against the bounds in its constants.json.
    Verify(VerifyArgs),
    /// Compare every subproblem solver against its brute-force oracle.
    CheckSolvers(CheckSolversArgs),
    /// Print the derived constants for one V.
    DeriveConstants(DeriveArgs),
}

#[derive(Args)]
struct Common {
    /// Network config (TOML). Defaults to the bundled six-node network.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    slots: u64,
    /// Output directory.
    #[arg(long, env = "WMSN_OUT_DIR", default_value = "out")]
    out: PathBuf,
    /// Continue past violations, truncating queues at zero.
    #[arg(long)]
    tolerate: bool,
    /// Cap each tuple's outgoing information flow by its remaining backlog.
    #[arg(long)]
    defensive_clamp: bool,
    /// Use the perturbations from the config's theta_override table.
    #[arg(long)]
    theta_override: bool,
    #[arg(long, default_value_t = 0.1)]
    warmup_fraction: f64,
}

impl Common {
    fn options(&self, v: f64, seed: u64) -> RunOptions {
        RunOptions {
            v,
            slots: self.slots,
            seed,
            use_theta_override: self.theta_override,
            defensive_clamp: self.defensive_clamp,
            tolerate: self.tolerate,
            warmup_fraction: self.warmup_fraction,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, short = 'V', default_value_t = 100.0)]
    v: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, short = 'V', value_delimiter = ',', default_values_t = [50.0, 100.0, 200.0, 500.0])]
    v: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3])]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Defaults to constants.json next to the trace.
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Args)]
struct CheckSolversArgs {
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct DeriveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, short = 'V', default_value_t = 100.0)]
    v: f64,
    #[arg(long)]
    theta_override: bool,
}

fn config(path: &Option<PathBuf>) -> Result<NetworkConfig> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(fig2()),
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: &RunArgs) -> Result<bool> {
    let cfg = config(&args.common.config)?;
    let opts = args.common.options(args.v, args.seed);
    let out = &args.common.out;
    fs::create_dir_all(out)?;
    let params = compute_perturbations(&cfg, opts.v, opts.use_theta_override)?;
    let constants = RunConstants::new(&cfg, &params);
    write_json(&out.join("constants.json"), &constants)?;
    let file = BufWriter::new(File::create(out.join("trace.csv"))?);
    let mut writer = TraceWriter::new(file, &constants)?;
    let result = run_with(&cfg, &opts, |rec| writer.write(rec));
    writer.finish()?;
    match result {
        Ok((summary, _)) => {
            write_json(&out.join("summary.json"), &summary)?;
            println!(
                "V={} seed={} slots={} objective={:.6} backlog={:.3} violations={}",
                summary.v, summary.seed, summary.slots, summary.avg_objective, summary.avg_backlog, summary.violation_count
            );
            Ok(summary.violation_count == 0)
        }
        Err(SimError::Violations { slot, violations }) => {
            eprintln!("aborted at slot {slot}:");
            for v in &violations {
                eprintln!("  {v}");
            }
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<bool> {
    let cfg = config(&args.common.config)?;
    let out = &args.common.out;
    fs::create_dir_all(out)?;
    let base = args.common.options(0.0, 0);
    let summaries = match sweep(&cfg, &args.v, &args.seeds, &base) {
        Ok(s) => s,
        Err(SimError::Violations { slot, violations }) => {
            eprintln!("a run aborted at slot {slot}: {}", violations[0]);
            return Ok(false);
        }
        Err(e) => return Err(e.into()),
    };
    write_json(&out.join("summaries.json"), &summaries)?;
    let mut w = csv::Writer::from_path(out.join("tradeoff.csv"))?;
    w.write_record(["V", "objective", "backlog", "runs"])?;
    for p in tradeoff(&summaries) {
        println!("V={} objective={:.6} backlog={:.3}", p.v, p.objective, p.backlog);
        w.write_record([p.v.to_string(), p.objective.to_string(), p.backlog.to_string(), p.runs.to_string()])?;
    }
    w.flush()?;
    Ok(summaries.iter().all(|s| s.violation_count == 0))
}

fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let constants_path = match &args.constants {
        Some(p) => p.clone(),
        None => args.trace.with_file_name("constants.json"),
    };
    let text = fs::read_to_string(&constants_path).with_context(|| format!("reading {}", constants_path.display()))?;
    let constants: RunConstants = serde_json::from_str(&text)?;
    let trace = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    let records = read_trace(trace, &constants)?;
    let bounds = verify::check_theorem2_bounds(&records, &constants);
    let duals = verify::check_lemma1(&records, &constants);
    let objective = verify::check_objective(&records, &constants);
    for v in bounds.iter().chain(&duals).take(20) {
        println!("{v}");
    }
    println!(
        "{} slots: {} bound/availability, {} multiplier, {} objective mismatches",
        records.len(),
        bounds.len(),
        duals.len(),
        objective.len()
    );
    Ok(bounds.is_empty() && duals.is_empty() && objective.is_empty())
}

fn cmd_check_solvers(args: &CheckSolversArgs) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut ok = true;
    for kind in SubproblemKind::ALL {
        let mut worst = 0.0f64;
        let mut failed = 0;
        for _ in 0..args.instances {
            let inst = verify::random_instance(kind, &mut rng);
            let rep = verify::grid_oracle_subproblem(kind, &inst, kind.resolution());
            worst = worst.max(rep.gap);
            if !rep.pass {
                failed += 1;
                log::warn!("{kind:?}: solver {} oracle {} {}", rep.solver, rep.oracle, rep.instance);
            }
        }
        println!("{kind:?}: {failed}/{} outside {:e}, worst gap {worst:e}", args.instances, kind.tolerance());
        ok &= failed == 0;
    }
    Ok(ok)
}

fn cmd_derive(args: &DeriveArgs) -> Result<bool> {
    let cfg = config(&args.config)?;
    let params = compute_perturbations(&cfg, args.v, args.theta_override)?;
    println!("{}", serde_json::to_string_pretty(&RunConstants::new(&cfg, &params))?);
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::CheckSolvers(a) => cmd_check_solvers(a),
        Command::DeriveConstants(a) => cmd_derive(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

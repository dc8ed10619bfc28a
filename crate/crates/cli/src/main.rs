//! `compia` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error (and a failed perfect-CSI
//! verification), 2 infeasible network.

mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use compia::beamformer::{self, ChannelSelector, DesignError};
use compia::channel::{CorrelationFactors, CorrelationPreset};
use compia::dof::{self, DofProblem, PlanStep};
use compia::simulator::{self, db_to_linear, SnrPoint, SweepAxis};
use compia::{ChannelSet, Tolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use config::{AxisSpec, Overrides, ResolvedRun};
use error::Failure;
use output::RunManifest;

#[derive(Parser)]
#[command(name = "compia", version, about = "Interference alignment for three-cell MIMO broadcast networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sum-rate simulation over the configured SNR points.
    Simulate(RunArgs),
    /// Runs the simulation over a grid of parameter values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep axis as NAME=V1,V2,... (tx_antennas, rx_corr_coeff, snr).
        /// Replaces the axes of the config file; repeat for a grid.
        #[arg(long = "axis", value_parser = AxisSpec::parse)]
        axes: Vec<AxisSpec>,
    },
    /// Closed-form DoF and the brute-force outer-bound optimum.
    Dof {
        #[arg(long)]
        config: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Minimum antenna configuration for the demand of a config file.
    Plan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Designs beamformers for one channel draw and reports residuals.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or the manifest of an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Result CSV path. Defaults to `<output-dir>/<command>.csv`.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, env = "COMPIA_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
    /// Also write per-trial per-user rates to `<output stem>.raw.csv`.
    #[arg(long)]
    raw: bool,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args, Default)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    corr_preset: Option<PresetArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Low,
    Medium,
    High,
}

impl From<&OverrideArgs> for Overrides {
    fn from(a: &OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            trials: a.trials,
            snr: a.snr.clone(),
            corr_preset: a.corr_preset.map(|p| match p {
                PresetArg::Low => CorrelationPreset::Low,
                PresetArg::Medium => CorrelationPreset::Medium,
                PresetArg::High => CorrelationPreset::High,
            }),
            alpha: a.alpha,
            beta: a.beta,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(run) => cmd_run("simulate", &run, None),
        Command::Sweep { run, axes } => cmd_run("sweep", &run, Some(axes)),
        Command::Dof { config, json } => cmd_dof(&config, json),
        Command::Plan { config, json } => cmd_plan(&config, json),
        Command::Verify { config, overrides } => cmd_verify(&config, &overrides),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn resolve(args: &RunArgs) -> Result<ResolvedRun, Failure> {
    let mut run = config::load_run(&args.config)?;
    Overrides::from(&args.overrides).apply(&mut run.spec);
    run.spec.validate()?;
    Ok(run)
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_run(command: &str, args: &RunArgs, cli_axes: Option<Vec<AxisSpec>>) -> Result<ExitCode, Failure> {
    let mut run = resolve(args)?;
    if let Some(axes) = cli_axes {
        if !axes.is_empty() {
            run.sweep = axes;
        }
        if run.sweep.is_empty() {
            return Err(Failure::usage("sweep needs at least one axis ([sweep] axes or --axis)"));
        }
    } else {
        run.sweep.clear();
    }
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.output_dir.join(format!("{command}.csv")));

    let started = Utc::now().to_rfc3339();
    let grid: Vec<GridPoint> = if run.sweep.is_empty() {
        vec![(vec![], simulator::run(&run.spec)?)]
    } else {
        run_grid(&run)?
    };
    let finished = Utc::now().to_rfc3339();

    let axes: Vec<SweepAxis> = run.sweep.iter().map(|a| a.axis).collect();
    let rows: Vec<(Vec<f64>, &[SnrPoint])> = grid.iter().map(|(c, p)| (c.clone(), p.as_slice())).collect();
    let excluded_trials = grid
        .iter()
        .flat_map(|(_, p)| p)
        .map(|p| p.summary.excluded_trials)
        .sum();
    let manifest = RunManifest {
        command: command.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: output::spec_hash(&run),
        started,
        finished,
        excluded_trials,
        run,
    };

    let mut files = vec![(output.clone(), output::summary_csv(&axes, &rows))];
    if args.raw {
        files.push((output::raw_path(&output), output::raw_csv(&axes, &rows)));
    }
    files.push((output::manifest_path(&output), json(&manifest)? + "\n"));
    output::write_atomic(&files)?;

    for (coords, points) in &grid {
        for p in points {
            let s = &p.summary;
            let at: Vec<String> = axes.iter().zip(coords).map(|(a, v)| format!("{}={v} ", a.name())).collect();
            println!(
                "{}snr {:>6} dB  mean sum rate {:>8.3}  p10 {:>7.3}  dof {:>6.3}  excluded {}",
                at.concat(),
                s.snr_db,
                s.mean_sum_rate,
                s.percentile(0.1),
                s.dof_estimate,
                s.excluded_trials
            );
        }
    }
    for (path, _) in &files {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

/// Axis coordinates and the SNR points run there.
type GridPoint = (Vec<f64>, Vec<SnrPoint>);

/// Runs every grid point. Infeasible points are skipped with a warning; any
/// other failure aborts before output is written.
fn run_grid(run: &ResolvedRun) -> Result<Vec<GridPoint>, Failure> {
    let axes: Vec<(SweepAxis, Vec<f64>)> = run.sweep.iter().map(|a| (a.axis, a.values.clone())).collect();
    let mut grid = Vec::new();
    let mut infeasible = Vec::new();
    for point in simulator::sweep_grid(&run.spec, &axes) {
        let coords: Vec<f64> = point.coords.iter().map(|(_, v)| *v).collect();
        match point.result {
            Ok(p) => grid.push((coords, p)),
            Err(simulator::SimError::Infeasible(r)) => {
                let at: Vec<String> = point.coords.iter().map(|(a, v)| format!("{}={v}", a.name())).collect();
                eprintln!("warning: skipping infeasible point {}", at.join(" "));
                infeasible.push(r);
            }
            Err(e) => return Err(e.into()),
        }
    }
    if grid.is_empty() {
        let report = infeasible.first().map(ToString::to_string).unwrap_or_default();
        return Err(Failure::Infeasible(report));
    }
    Ok(grid)
}

#[derive(Serialize)]
struct DofReport {
    q: [usize; 3],
    n: [usize; 3],
    eta: usize,
    eta_continuous: f64,
    binding_terms: Vec<usize>,
    oracle: dof::DofSolution,
    divergence: bool,
}

fn cmd_dof(path: &Path, as_json: bool) -> Result<ExitCode, Failure> {
    let run = config::load_run(path)?;
    let problem = DofProblem::from_config(&run.spec.config).map_err(|e| Failure::usage(e.to_string()))?;
    let (q, n) = (problem.q, problem.n);
    let oracle = dof::enumerate_outer(&problem, dof::default_bound(&problem)).map_err(|e| Failure::usage(e.to_string()))?;
    let report = DofReport {
        q,
        n,
        eta: dof::proposition1(q, n),
        eta_continuous: dof::proposition1_continuous(q, n),
        binding_terms: dof::proposition1_binding(q, n),
        divergence: dof::proposition1(q, n) != oracle.total,
        oracle,
    };
    if as_json {
        println!("{}", json(&report)?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("Q = {:?}  N = {:?}", report.q, report.n);
    println!("eta (closed form)    = {}  (min term {:.3}, binding terms {:?})", report.eta, report.eta_continuous, report.binding_terms);
    println!("oracle (enumeration) = {}", report.oracle.total);
    let rows = report.oracle.allocation.rows();
    for (i, row) in rows.iter().enumerate() {
        println!("  BS {}: {:?}", i + 1, row);
    }
    println!("binding constraints: {}", report.oracle.binding.join(" "));
    if report.divergence {
        println!("DIVERGENCE: closed form {} vs enumeration {}", report.eta, report.oracle.total);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PlanReport {
    plan: dof::AntennaPlan,
    feasibility: compia::FeasibilityReport,
}

fn describe(step: &PlanStep) -> String {
    match step {
        PlanStep::UnionCapacity { bs, user, union, from, to } => format!(
            "union of BS {} and user {} carries {union} streams: Q_{} {from} -> {to}",
            bs + 1,
            user + 1,
            bs + 1
        ),
        PlanStep::ResidualNulling { user, t, q_bar, raised, from, to } => format!(
            "user {} nulls the larger interferer from BS {}: Q_bar = {q_bar}, Q_{} {from} -> {to}",
            user + 1,
            t + 1,
            raised + 1
        ),
    }
}

fn cmd_plan(path: &Path, as_json: bool) -> Result<ExitCode, Failure> {
    let demand = config::load_demand(path)?;
    let plan = dof::plan_antennas(&demand, 3, 2).map_err(|e| Failure::usage(e.to_string()))?;
    let feasibility = plan.to_config(&demand).check_feasibility();
    let report = PlanReport { plan, feasibility };
    if as_json {
        println!("{}", json(&report)?);
        return Ok(ExitCode::SUCCESS);
    }
    let p = &report.plan;
    println!("M = {:?}", p.m_tx);
    println!("N = {:?}", p.n_rx);
    println!("Q = {:?}", p.q_final);
    if p.trace.is_empty() {
        println!("updates: none");
    } else {
        println!("updates:");
        for s in &p.trace {
            println!("  {}", describe(s));
        }
    }
    print!("{}", report.feasibility);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(path: &Path, args: &OverrideArgs) -> Result<ExitCode, Failure> {
    let mut run = config::load_run(path)?;
    Overrides::from(args).apply(&mut run.spec);
    let spec = &run.spec;
    spec.validate()?;
    let report = spec.config.check_feasibility();
    if !report.passed() {
        return Err(Failure::Infeasible(report.to_string()));
    }
    let snr_db = spec.snr_points_db[0];
    let tau = spec.csi.error_variance(db_to_linear(snr_db));
    let tol = Tolerance::default();
    let factors = CorrelationFactors::for_config(&spec.corr, &spec.config, &tol).map_err(|e| Failure::usage(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(simulator::trial_seed(spec.master_seed, 0, 0));
    let links = ChannelSet::draw_with(&spec.config, &factors, tau, &mut rng);
    let bf = match beamformer::design(&links, &spec.config, &mut rng, &tol) {
        Ok(bf) => bf,
        Err(DesignError::Infeasible(r)) => return Err(Failure::Infeasible(r.to_string())),
        Err(e) => return Err(Failure::usage(format!("design failed: {e}"))),
    };
    let rep = beamformer::verify_alignment(&links, ChannelSelector::True, &bf, &spec.config, &tol);
    println!("snr {snr_db} dB, CSI error variance {tau:e}, redraws {}", bf.redraws);
    println!("ICI residual {:e}", rep.ici_residual);
    println!("XCI residual {:e}", rep.xci_residual);
    println!("desired rank {:?} (required {:?})", rep.desired_rank, rep.required_rank);
    if tau > 0.0 {
        println!("imperfect CSI: residuals reported on the true channels");
        return Ok(ExitCode::SUCCESS);
    }
    println!("{}", if rep.passed { "PASS" } else { "FAIL" });
    Ok(if rep.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

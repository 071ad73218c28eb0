use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use ricci_lab::blowup::Verdict;
use ricci_lab::config::{config_from_value, resolve_output_dir};
use ricci_lab::curvature::{integrate_eigenvalues_to_cap, write_trajectory_csv, CurvatureEigenvalues, EIGEN_CAP};
use ricci_lab::properties::run_properties;
use ricci_lab::run::{parse_grid, run, sweep, write_sweep_csv};
use ricci_lab::{LabError, Result};

#[derive(Parser)]
#[command(name = "ricci-lab", version, about = "Numerical Ricci flow lab for 3-manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Exit with the verdict code (0 consistent, 2 inconsistent, 3 inconclusive).
        #[arg(long)]
        ci: bool,
    },
    /// Run a config template over a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// JSON object mapping keys to value lists.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        ci: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Randomized algebraic property checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        triples: usize,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 1_000)]
        trajectories: usize,
    },
    /// Integrate the eigenvalue ODE and print the trajectory as CSV.
    Eigen {
        #[arg(allow_negative_numbers = true)]
        m1: f64,
        #[arg(allow_negative_numbers = true)]
        m2: f64,
        #[arg(allow_negative_numbers = true)]
        m3: f64,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        #[arg(long, default_value_t = EIGEN_CAP)]
        cap: f64,
    },
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

fn output_dir(v: &Value) -> PathBuf {
    let dir = v.get("output_dir").and_then(Value::as_str).unwrap_or("out");
    resolve_output_dir(Path::new(dir))
}

fn cmd_run(config: &Path, ci: bool) -> Result<i32> {
    let v = read_json(config)?;
    let cfg = config_from_value(v.clone())?;
    let dir = resolve_output_dir(&cfg.output_dir);
    let (sim, art) = run(&cfg, &dir, &v)?;
    let r = &sim.report;
    println!(
        "verdict {:?}  classification {:?}  events {}  final_q {:.6e}  energy {:.6} -> {:.6}",
        r.verdict,
        r.classification,
        r.events.len(),
        r.final_q,
        r.initial_energy,
        r.final_energy
    );
    println!("artifacts in {}", art.dir.display());
    Ok(if ci { r.verdict.exit_code() } else { 0 })
}

fn cmd_sweep(config: &Path, grid: &Path, ci: bool, jobs: Option<usize>) -> Result<i32> {
    let template = read_json(config)?;
    let points = parse_grid(&fs::read_to_string(grid)?)?;
    let root = output_dir(&template);
    fs::create_dir_all(&root)?;
    if let Some(j) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    let rows = sweep(&template, &points, &root);
    let keys: Vec<String> = points.first().map(|p| p.keys().cloned().collect()).unwrap_or_default();
    let summary = root.join("sweep.csv");
    write_sweep_csv(BufWriter::new(File::create(&summary)?), &keys, &rows)?;
    write_sweep_csv(std::io::stdout().lock(), &keys, &rows)?;
    eprintln!("summary in {}", summary.display());
    let inconsistent = rows.iter().any(|r| r.verdict == Some(Verdict::Inconsistent));
    Ok(if ci && inconsistent { Verdict::Inconsistent.exit_code() } else { 0 })
}

fn cmd_check(seed: u64, triples: usize, pairs: usize, trajectories: usize) -> Result<i32> {
    let rep = run_properties(seed, triples, pairs, trajectories)?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(if rep.passes(1e-10) { 0 } else { 1 })
}

fn cmd_eigen(m: CurvatureEigenvalues, sigma: f64, cap: f64) -> Result<i32> {
    let traj = integrate_eigenvalues_to_cap(m, sigma, cap, 10_000_000)?;
    write_trajectory_csv(std::io::stdout().lock(), &traj)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, ci } => cmd_run(&config, ci),
        Command::Sweep { config, grid, ci, jobs } => cmd_sweep(&config, &grid, ci, jobs),
        Command::Check {
            seed,
            triples,
            pairs,
            trajectories,
        } => cmd_check(seed, triples, pairs, trajectories),
        Command::Eigen { m1, m2, m3, sigma, cap } => cmd_eigen(CurvatureEigenvalues::new(m1, m2, m3), sigma, cap),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

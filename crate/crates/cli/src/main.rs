//! `swjko`: runs sliced-Wasserstein JKO experiments from a config file and
//! writes CSV results.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration or input error
//! (nothing written), 3 numerical abort (partial traces written).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Config, Experiment, RawConfig};
use output::{num, radius_rows, read_samples, write_cloud, write_measure, write_table, write_text, write_trace};
use swjko::experiments::{run_aggregation, run_compare, run_gaussian_flow, run_ula};
use swjko::sliced::{sw2_mc, QuantileGrid};
use swjko::{Atoms, FlowError, ParticleCloud, ProjectionSet, Quadrature, Trajectory};

#[derive(Parser)]
#[command(name = "swjko", version, about = "Sliced-Wasserstein JKO gradient flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Accepted for interface compatibility; runs are single-threaded.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Monte-Carlo SW_2^2 between two sample files.
    SwEstimate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1000)]
        projections: usize,
        #[arg(long, default_value_t = 100)]
        quantiles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

enum Failure {
    Input(String),
    Io(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Io(m) | Failure::Numeric(m) => m,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => run(&config, &out, seed, threads),
        Command::SwEstimate {
            a,
            b,
            projections,
            quantiles,
            seed,
        } => sw_estimate_cmd(&a, &b, projections, quantiles, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

struct SwResult {
    value: f64,
    std_error: f64,
}

fn sw_between(a: &ParticleCloud<f64>, b: &ParticleCloud<f64>, projections: usize, quantiles: usize, seed: u64) -> Result<SwResult, Failure> {
    if a.dim() != b.dim() {
        return Err(Failure::Input(format!(
            "sample files have different dimensions ({} and {})",
            a.dim(),
            b.dim()
        )));
    }
    if projections == 0 || quantiles == 0 {
        return Err(Failure::Input("projections and quantiles must be >= 1".into()));
    }
    let proj = ProjectionSet::sample(projections, a.dim(), seed).map_err(|e| Failure::Input(e.to_string()))?;
    let grid = QuantileGrid::midpoints(quantiles).map_err(|e| Failure::Input(e.to_string()))?;
    let est = sw2_mc(a, b, &proj, &Quadrature::Rectangle(grid)).map_err(|e| Failure::Numeric(e.to_string()))?;
    Ok(SwResult {
        value: est.value,
        std_error: est.std_error,
    })
}

fn sw_estimate_cmd(a: &Path, b: &Path, projections: usize, quantiles: usize, seed: u64) -> Result<(), Failure> {
    let ca = read_samples(a).map_err(Failure::Input)?;
    let cb = read_samples(b).map_err(Failure::Input)?;
    let r = sw_between(&ca, &cb, projections, quantiles, seed)?;
    println!(
        "sw2 = {} +- {} (projections = {projections}, quantiles = {quantiles}, seed = {seed})",
        num(r.value),
        num(r.std_error)
    );
    Ok(())
}

/// What a finished or aborted run reports in `metadata.json`.
struct RunSummary {
    status: &'static str,
    error: Option<String>,
    steps: Option<usize>,
    step_seeds: Vec<u64>,
    files: Vec<&'static str>,
}

fn run(config_path: &Path, out: &Path, seed: Option<u64>, threads: Option<usize>) -> Result<(), Failure> {
    let started = Instant::now();
    if threads == Some(0) {
        return Err(Failure::Input("--threads must be >= 1".into()));
    }
    let raw = RawConfig::load(config_path).map_err(|e| Failure::Input(e.to_string()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = config::resolve(raw, seed, base).map_err(|e| Failure::Input(e.to_string()))?;
    // inputs are read before anything is written
    let samples = match &cfg.experiment {
        Experiment::SwEstimate { a, b, .. } => {
            let ca = read_samples(a).map_err(Failure::Input)?;
            let cb = read_samples(b).map_err(Failure::Input)?;
            if ca.dim() != cb.dim() {
                return Err(Failure::Input(format!(
                    "sample files have different dimensions ({} and {})",
                    ca.dim(),
                    cb.dim()
                )));
            }
            Some((ca, cb))
        }
        _ => None,
    };
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let echo_path = out.join("config_echo.txt");
    write_text(&echo_path, &cfg.echo).map_err(io_err(&echo_path))?;
    let summary = execute(&cfg, out, samples)?;
    let meta = json!({
        "experiment": experiment_name(&cfg.experiment),
        "seed": cfg.seed,
        "version": env!("CARGO_PKG_VERSION"),
        "threads_requested": threads,
        "threads_used": 1,
        "status": summary.status,
        "error": summary.error,
        "steps_completed": summary.steps,
        "step_seeds": summary.step_seeds,
        "wall_seconds": started.elapsed().as_secs_f64(),
        "files": summary.files,
    });
    let meta_path = out.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_text(&meta_path, &(text + "\n")).map_err(io_err(&meta_path))?;
    match summary.error {
        Some(e) => Err(Failure::Numeric(e)),
        None => Ok(()),
    }
}

fn experiment_name(e: &Experiment) -> &'static str {
    match e {
        Experiment::GaussianFlow(_) => "gaussian-flow",
        Experiment::Aggregation { kind, .. } => kind,
        Experiment::Compare(_) => "compare-trajectories",
        Experiment::SwEstimate { .. } => "sw-estimate",
        Experiment::Ula(_) => "ula-baseline",
    }
}

fn write_flow(out: &Path, trace: &str, last: &str, traj: &Trajectory<f64>, files: &mut Vec<&'static str>, names: [&'static str; 2]) -> Result<(), Failure> {
    let p = out.join(trace);
    write_trace(&p, traj).map_err(io_err(&p))?;
    files.push(names[0]);
    if !traj.snapshots.is_empty() {
        let p = out.join(last);
        write_measure(&p, traj.last()).map_err(io_err(&p))?;
        files.push(names[1]);
    }
    Ok(())
}

fn aborted(out: &Path, err: FlowError<f64>, mut files: Vec<&'static str>) -> Result<RunSummary, Failure> {
    write_flow(out, "energy_trace.csv", "final_measure.csv", &err.partial, &mut files, ["energy_trace.csv", "final_measure.csv"])?;
    Ok(RunSummary {
        status: "aborted",
        error: Some(format!("numerical abort: {}", err.source)),
        steps: Some(err.partial.n_steps()),
        step_seeds: err.partial.step_seeds.clone(),
        files,
    })
}

fn table(out: &Path, name: &'static str, rows: &[(String, f64)], files: &mut Vec<&'static str>) -> Result<(), Failure> {
    let p = out.join(name);
    write_table(&p, rows).map_err(io_err(&p))?;
    files.push(name);
    Ok(())
}

fn execute(cfg: &Config, out: &Path, samples: Option<(ParticleCloud<f64>, ParticleCloud<f64>)>) -> Result<RunSummary, Failure> {
    let mut files = vec!["config_echo.txt", "metadata.json"];
    let done = |traj: &Trajectory<f64>, files: Vec<&'static str>| RunSummary {
        status: "ok",
        error: None,
        steps: Some(traj.n_steps()),
        step_seeds: traj.step_seeds.clone(),
        files,
    };
    match &cfg.experiment {
        Experiment::GaussianFlow(p) => {
            let r = match run_gaussian_flow(p) {
                Ok(r) => r,
                Err(e) => return aborted(out, e, files),
            };
            write_flow(out, "energy_trace.csv", "final_measure.csv", &r.trajectory, &mut files, ["energy_trace.csv", "final_measure.csv"])?;
            let mut rows = vec![
                ("sym_kl_initial".to_string(), r.sym_kl_initial),
                ("sym_kl_final".to_string(), r.sym_kl_final),
                ("sym_kl_moments_initial".to_string(), r.sym_kl_moments_initial),
                ("sym_kl_moments_final".to_string(), r.sym_kl_moments_final),
            ];
            rows.extend(r.setup.m.iter().enumerate().map(|(i, &v)| (format!("m_{}", i + 1), v)));
            let d = r.setup.m.len();
            for i in 0..d {
                for j in 0..d {
                    rows.push((format!("A_{}_{}", i + 1, j + 1), r.setup.a[(i, j)]));
                }
            }
            table(out, "diagnostics.csv", &rows, &mut files)?;
            println!("final SymKL = {} (initial {})", num(r.sym_kl_final), num(r.sym_kl_initial));
            Ok(done(&r.trajectory, files))
        }
        Experiment::Aggregation { params, .. } => {
            let r = match run_aggregation(params) {
                Ok(r) => r,
                Err(e) => return aborted(out, e, files),
            };
            write_flow(out, "energy_trace.csv", "final_measure.csv", &r.trajectory, &mut files, ["energy_trace.csv", "final_measure.csv"])?;
            table(out, "radius_stats.csv", &radius_rows(&r.radius), &mut files)?;
            println!("radius mean = {}, std = {}, max = {}", num(r.radius.mean), num(r.radius.std), num(r.radius.max));
            Ok(done(&r.trajectory, files))
        }
        Experiment::Compare(p) => {
            let r = match run_compare(p) {
                Ok(r) => r,
                Err(e) => return aborted(out, e, files),
            };
            write_flow(out, "energy_trace.csv", "final_measure.csv", &r.flow, &mut files, ["energy_trace.csv", "final_measure.csv"])?;
            write_flow(out, "direct_trace.csv", "direct_final_measure.csv", &r.direct, &mut files, ["direct_trace.csv", "direct_final_measure.csv"])?;
            let tp = out.join("target.csv");
            write_cloud(&tp, &r.target).map_err(io_err(&tp))?;
            files.push("target.csv");
            let ratio = |t: &Trajectory<f64>| t.energy_trace.last().copied().unwrap_or(f64::NAN) / t.energy_trace[0];
            let rows = vec![
                ("flow_energy_ratio".to_string(), ratio(&r.flow)),
                ("direct_energy_ratio".to_string(), ratio(&r.direct)),
                ("flow_hausdorff".to_string(), r.flow_hausdorff),
                ("direct_hausdorff".to_string(), r.direct_hausdorff),
            ];
            table(out, "diagnostics.csv", &rows, &mut files)?;
            println!("Hausdorff to target: flow {}, direct {}", num(r.flow_hausdorff), num(r.direct_hausdorff));
            Ok(done(&r.flow, files))
        }
        Experiment::SwEstimate { projections, quantiles, .. } => {
            let (a, b) = samples.expect("samples read before execution");
            let r = match sw_between(&a, &b, *projections, *quantiles, cfg.seed) {
                Ok(r) => r,
                Err(Failure::Numeric(m)) => {
                    return Ok(RunSummary {
                        status: "aborted",
                        error: Some(format!("numerical abort: {m}")),
                        steps: None,
                        step_seeds: Vec::new(),
                        files,
                    })
                }
                Err(f) => return Err(f),
            };
            let rows = vec![
                ("sw2".to_string(), r.value),
                ("std_error".to_string(), r.std_error),
                ("projections".to_string(), *projections as f64),
                ("quantiles".to_string(), *quantiles as f64),
            ];
            table(out, "diagnostics.csv", &rows, &mut files)?;
            println!("sw2 = {} +- {}", num(r.value), num(r.std_error));
            Ok(RunSummary {
                status: "ok",
                error: None,
                steps: None,
                step_seeds: Vec::new(),
                files,
            })
        }
        Experiment::Ula(p) => {
            let r = match run_ula(p) {
                Ok(r) => r,
                Err(e) => {
                    return Ok(RunSummary {
                        status: "aborted",
                        error: Some(format!("numerical abort: {e}")),
                        steps: None,
                        step_seeds: Vec::new(),
                        files,
                    })
                }
            };
            let fp = out.join("final_measure.csv");
            write_cloud(&fp, &r.cloud).map_err(io_err(&fp))?;
            files.push("final_measure.csv");
            let d = r.mean.len();
            let mut rows: Vec<(String, f64)> = Vec::new();
            for i in 0..d {
                rows.push((format!("mean_{}", i + 1), r.mean[i]));
                rows.push((format!("target_mean_{}", i + 1), r.target.mean()[i]));
            }
            for i in 0..d {
                for j in 0..d {
                    rows.push((format!("cov_{}_{}", i + 1, j + 1), r.covariance[(i, j)]));
                    rows.push((format!("target_cov_{}_{}", i + 1, j + 1), r.target.covariance()[(i, j)]));
                }
            }
            table(out, "diagnostics.csv", &rows, &mut files)?;
            let err = r.mean.iter().zip(r.target.mean()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            println!("max |mean - target| = {}", num(err));
            Ok(RunSummary {
                status: "ok",
                error: None,
                steps: None,
                step_seeds: Vec::new(),
                files,
            })
        }
    }
}

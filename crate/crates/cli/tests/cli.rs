use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use swjko::measures::sample_gaussian;
use swjko::{Atoms, GaussianMeasure, Rng};

fn swjko(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swjko"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn run_config(dir: &Path, text: &str, out: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{out}.cfg"));
    fs::write(&cfg, text).unwrap();
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out];
    args.extend_from_slice(extra);
    swjko(&args, dir)
}

fn read(dir: &Path, out: &str, file: &str) -> String {
    fs::read_to_string(dir.join(out).join(file)).unwrap_or_else(|e| panic!("{out}/{file}: {e}"))
}

/// Trace rows without the wall-clock column.
fn trace_numbers(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect()
}

fn energies(text: &str) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect()
}

fn write_samples(path: &Path, mean: Vec<f64>, n: usize, seed: u64) {
    let g = GaussianMeasure::isotropic(mean, 1.0).unwrap();
    let c = sample_gaussian(&g, n, &mut Rng::new(seed)).unwrap();
    let d = c.dim();
    let mut s = (1..=d).map(|i| format!("x_{i}")).collect::<Vec<_>>().join(",") + "\n";
    for i in 0..c.len() {
        s += &c.point(i).iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",");
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

const SMALL_DISK: &str = "experiment = disk\nparticles = 40\nsteps = 4\ninner_iters = 10\n";

#[test]
fn negative_tau_is_a_config_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "experiment = gaussian-flow\ntau = -0.1\n", "bad", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    assert!(!dir.path().join("bad").exists());
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "experiment = disk\nparticle = 40\n", "o", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("particle"));
    let out = swjko(&["run", "--config", "nope.cfg", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn disk_run_writes_bundle_with_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), SMALL_DISK, "disk", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config_echo.txt", "metadata.json", "energy_trace.csv", "final_measure.csv", "radius_stats.csv"] {
        assert!(dir.path().join("disk").join(f).exists(), "{f}");
    }
    let trace = read(dir.path(), "disk", "energy_trace.csv");
    assert!(trace.starts_with("step,t,energy,sw_gap,wall_ms\n"));
    let e = energies(&trace);
    assert_eq!(e.len(), 5);
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-6));
    let measure = read(dir.path(), "disk", "final_measure.csv");
    assert_eq!(measure.lines().count(), 41);
    assert!(measure.starts_with("x_1,x_2\n"));
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "disk", "metadata.json")).unwrap();
    assert_eq!(meta["status"], "ok");
    assert_eq!(meta["steps_completed"], 4);
    // the echo alone reproduces the run
    let echo = read(dir.path(), "disk", "config_echo.txt");
    let again = run_config(dir.path(), &echo, "disk2", &[]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(read(dir.path(), "disk2", "final_measure.csv"), measure);
}

#[test]
fn same_seed_reproduces_numbers_and_seed_override_changes_them() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(run_config(dir.path(), SMALL_DISK, out, &["--threads", "1"]).status.code(), Some(0));
    }
    assert_eq!(
        trace_numbers(&read(dir.path(), "a", "energy_trace.csv")),
        trace_numbers(&read(dir.path(), "b", "energy_trace.csv"))
    );
    for f in ["final_measure.csv", "radius_stats.csv", "config_echo.txt"] {
        assert_eq!(read(dir.path(), "a", f), read(dir.path(), "b", f), "{f}");
    }
    assert_eq!(run_config(dir.path(), SMALL_DISK, "c", &["--seed", "3"]).status.code(), Some(0));
    assert_ne!(read(dir.path(), "a", "final_measure.csv"), read(dir.path(), "c", "final_measure.csv"));
    assert!(read(dir.path(), "c", "config_echo.txt").contains("seed = 3\n"));
}

#[test]
fn divergence_exits_3_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), "experiment = disk\nparticles = 40\nsteps = 3\ninner_step = 1e300\n", "div", &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
    let trace = read(dir.path(), "div", "energy_trace.csv");
    assert_eq!(trace.lines().count(), 2);
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "div", "metadata.json")).unwrap();
    assert_eq!(meta["status"], "aborted");
}

#[test]
fn gaussian_flow_grid_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "experiment = gaussian-flow\ngrid_per_axis = 15\ngrid_min = -3\ngrid_max = 3\nsteps = 3\ninner_iters = 20\n";
    let out = run_config(dir.path(), cfg, "g", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("final SymKL"));
    let measure = read(dir.path(), "g", "final_measure.csv");
    assert!(measure.starts_with("# cell_volume="));
    assert_eq!(measure.lines().count(), 2 + 225);
    let diag = read(dir.path(), "g", "diagnostics.csv");
    let get = |k: &str| -> f64 {
        diag.lines().find_map(|l| l.strip_prefix(&format!("{k},"))).unwrap().parse().unwrap()
    };
    assert!(get("sym_kl_final") < get("sym_kl_initial"));
    assert!(energies(&read(dir.path(), "g", "energy_trace.csv")).windows(2).all(|w| w[1] <= w[0] + 1e-6));
}

#[test]
fn other_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("cmp", "experiment = compare-trajectories\nparticles = 6\nsteps = 5\n", "direct_trace.csv"),
        ("ula", "experiment = ula-baseline\nparticles = 50\nhorizon = 0.1\nula_step = 0.01\n", "diagnostics.csv"),
        (
            "drift",
            "experiment = aggregation-drift\nparameterization = grid\ngrid_per_axis = 10\nsteps = 2\ninner_iters = 5\n",
            "radius_stats.csv",
        ),
    ];
    for (name, cfg, file) in cases {
        let out = run_config(dir.path(), cfg, name, &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(name).join(file).exists(), "{name}/{file}");
    }
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), r#"{"experiment": "disk", "particles": 20, "steps": 1, "inner_iters": 3}"#, "j", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(dir.path(), "j", "config_echo.txt").contains("particles = 20\n"));
}

fn sw_value(stdout: &[u8]) -> f64 {
    let s = String::from_utf8_lossy(stdout);
    s.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn sw_estimate_command() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_samples(&p.join("a.csv"), vec![0.0, 0.0], 5000, 1);
    write_samples(&p.join("b.csv"), vec![1.0, 0.0], 5000, 2);
    write_samples(&p.join("c3.csv"), vec![0.0, 0.0, 0.0], 10, 3);
    let same = swjko(&["sw-estimate", "a.csv", "a.csv", "--projections", "50", "--seed", "1"], p);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(sw_value(&same.stdout), 0.0);
    let out = swjko(&["sw-estimate", "a.csv", "b.csv", "--projections", "1000", "--quantiles", "100", "--seed", "4"], p);
    assert_eq!(out.status.code(), Some(0));
    let v = sw_value(&out.stdout);
    assert!((v - 0.5).abs() < 0.06, "{v}");
    let again = swjko(&["sw-estimate", "a.csv", "b.csv", "--projections", "1000", "--quantiles", "100", "--seed", "4"], p);
    assert_eq!(out.stdout, again.stdout);
    assert_eq!(swjko(&["sw-estimate", "a.csv", "c3.csv"], p).status.code(), Some(2));
    fs::write(p.join("bad.csv"), "1,2\n3,x\n").unwrap();
    assert_eq!(swjko(&["sw-estimate", "a.csv", "bad.csv"], p).status.code(), Some(2));
    assert_eq!(swjko(&["sw-estimate", "a.csv", "missing.csv"], p).status.code(), Some(2));
}

#[test]
fn sw_estimate_experiment_reads_paths_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::create_dir(p.join("data")).unwrap();
    write_samples(&p.join("data/a.csv"), vec![0.0, 0.0], 200, 1);
    fs::write(p.join("data/run.cfg"), "experiment = sw-estimate\nsample_a = a.csv\nsample_b = a.csv\nprojections = 10\n").unwrap();
    let out = swjko(&["run", "--config", "data/run.cfg", "--out", "o"], p);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(p, "o", "diagnostics.csv").contains("sw2,0.0000000000000000e0\n"));
    fs::write(p.join("data/miss.cfg"), "experiment = sw-estimate\nsample_a = a.csv\nsample_b = none.csv\n").unwrap();
    let out = swjko(&["run", "--config", "data/miss.cfg", "--out", "o2"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(!p.join("o2").exists());
}

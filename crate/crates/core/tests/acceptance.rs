//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero when a criterion fails unexpectedly.
//!
//! Criterion 9 asks for a ring of radius in [0.45, 0.55]. For
//! `W = |x|^4/4 - |x|^2/2` in two dimensions the uniform ring is a steady
//! state only at radius `1/sqrt(3)`, so that line fails by construction.
//! It is reported as FAIL, and the run instead requires the radius to sit
//! at `1/sqrt(3)`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use swjko::diagnostics::hausdorff;
use swjko::experiments::{
    run_aggregation, run_compare, run_gaussian_flow, run_ou_mean, run_ula, AggregationParams, CompareParams,
    GaussianFlowParams, OuMeanParams, UlaParams,
};
use swjko::functionals::{InteractionKernel, Potential, QuadraticPotential};
use swjko::measures::{sample_gaussian, sample_unit_sphere};
use swjko::oracles::{assignment_bruteforce, finite_diff_grad, simplex_project_bruteforce};
use swjko::sliced::{sw2_grad_positions, sw2_grad_weights, sw2_mc, w2_1d_exact};
use swjko::solver::{energy_gap_check, monotonicity_violations};
use swjko::{
    simplex_project, Atoms, EnergySpec, GaussianMeasure, GridMeasure, Matrix, Measure, ParticleCloud,
    ProjectionSet, Quadrature, Rng, Trajectory,
};

type Outcome = Result<(bool, String), String>;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Harness {
    lines: Vec<Line>,
    /// Criteria whose FAIL is explained and expected.
    expected_fail: Vec<u32>,
}

impl Harness {
    fn record(&mut self, id: u32, name: &'static str, out: Outcome, elapsed: Duration) {
        let (pass, detail) = match out {
            Ok((p, d)) => (p, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let detail = format!("{detail} [{:.1} s]", elapsed.as_secs_f64());
        println!("[{id:>2}] {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push(Line { id, name, pass, detail });
    }

    fn run(&mut self, id: u32, name: &'static str, f: impl FnOnce() -> Outcome) {
        let t0 = Instant::now();
        let out = f();
        self.record(id, name, out, t0.elapsed());
    }
}

struct Flow {
    label: String,
    traj: Trajectory<f64>,
}

fn main() -> ExitCode {
    let mut h = Harness {
        lines: Vec::new(),
        expected_fail: Vec::new(),
    };
    let mut flows: Vec<Flow> = Vec::new();

    h.run(1, "closed-form SW between shifted Gaussians", closed_form_sw);
    h.run(2, "line-supported identity", line_identity);
    h.run(3, "sphere second moment", sphere_moment);
    h.run(4, "gradient oracles vs finite differences", gradient_oracles);
    h.run(7, "Gaussian stationary convergence on a grid", || gaussian_flows(&mut flows));
    h.run(8, "OU mean dynamics with dilation", || ou_mean(&mut flows));
    let ring_ok = {
        let t0 = Instant::now();
        let (out, ok) = ring(&mut flows);
        h.record(9, "aggregation ring radius", out, t0.elapsed());
        ok
    };
    if ring_ok {
        h.expected_fail.push(9);
    }
    h.run(10, "aggregation-drift torus radii", || torus(&mut flows));
    h.run(11, "disk steady state", || disk(&mut flows));
    h.run(12, "exact-W2 trajectory experiment", || compare(&mut flows));
    h.run(5, "monotone energy along every flow", || monotone(&flows));
    h.run(6, "optimality-gap inequality along every flow", || gap(&flows));
    h.run(13, "oracle cross-checks (simplex, assignment)", oracle_cross);
    h.run(14, "ULA sanity", ula);
    h.run(15, "determinism", determinism);

    h.lines.sort_by_key(|l| l.id);
    println!();
    println!("summary:");
    let mut unexpected = 0;
    for l in &h.lines {
        let tag = match (l.pass, h.expected_fail.contains(&l.id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected, see note)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("  {:>2} {tag}  {}", l.id, l.name);
    }
    let passed = h.lines.iter().filter(|l| l.pass).count();
    println!("{passed}/{} criteria pass", h.lines.len());
    if h.expected_fail.contains(&9) {
        println!(
            "note 9: the 2-D ring steady state of |x|^4/4 - |x|^2/2 has radius 1/sqrt(3) = {:.4}; \
             the run matched it, so the [0.45, 0.55] band cannot hold",
            1.0 / 3f64.sqrt()
        );
    }
    if unexpected > 0 {
        for l in h.lines.iter().filter(|l| !l.pass && !h.expected_fail.contains(&l.id)) {
            println!("unexpected failure {}: {}", l.id, l.detail);
        }
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn flow_err(err: swjko::FlowError<f64>) -> String {
    format!("{} after {} steps", err.source, err.partial.n_steps())
}

fn closed_form_sw() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(11);
    let a = sample_gaussian(&GaussianMeasure::<f64>::standard(2).map_err(e)?, 10_000, &mut rng).map_err(e)?;
    let b = sample_gaussian(&GaussianMeasure::isotropic(vec![1.0, 0.0], 1.0).map_err(e)?, 10_000, &mut rng)
        .map_err(e)?;
    let proj = sample_unit_sphere(2000, 2, &mut rng).map_err(e)?;
    let est = sw2_mc(&a, &b, &proj, &Quadrature::default()).map_err(e)?;
    let secs = t0.elapsed().as_secs_f64();
    let ok = (est.value - 0.5).abs() <= 0.05 && secs < 10.0;
    Ok((ok, format!("SW2^2 = {:.4} (target 0.5 +- 0.05), se {:.1e}", est.value, est.std_error)))
}

fn line_identity() -> Outcome {
    let t0 = Instant::now();
    let d = 5;
    let mut rng = Rng::new(12);
    let mut worst = 0.0f64;
    let mut all = true;
    for _ in 0..3 {
        let mut u: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        let c: Vec<f64> = (0..d).map(|_| rng.standard_normal()).collect();
        let on_line = |ts: &[f64]| {
            let rows: Vec<Vec<f64>> = ts.iter().map(|&t| c.iter().zip(&u).map(|(ci, ui)| ci + t * ui).collect()).collect();
            ParticleCloud::from_rows(&rows)
        };
        let ta: Vec<f64> = (0..300).map(|_| rng.standard_normal::<f64>()).collect();
        let tb: Vec<f64> = (0..200).map(|_| 0.7 + 2.0 * rng.uniform::<f64>()).collect();
        let a = on_line(&ta).map_err(e)?;
        let b = on_line(&tb).map_err(e)?;
        let exact = w2_1d_exact(&ta, &vec![1.0 / 300.0; 300], &tb, &vec![1.0 / 200.0; 200]).map_err(e)?;
        let proj = sample_unit_sphere(2000, d, &mut rng).map_err(e)?;
        let est = sw2_mc(&a, &b, &proj, &Quadrature::Exact).map_err(e)?;
        let z = (d as f64 * est.value - exact).abs() / (d as f64 * est.std_error);
        worst = worst.max(z);
        all &= z <= 3.0;
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((all && secs < 10.0, format!("worst |d SW - W1d| = {worst:.2} standard errors (limit 3)")))
}

fn sphere_moment() -> Outcome {
    let proj = ProjectionSet::<f64>::sample(100_000, 3, 13).map_err(e)?;
    let mut m = [[0.0f64; 3]; 3];
    for i in 0..proj.len() {
        let t = proj.direction(i);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += t[a] * t[b];
            }
        }
    }
    let mut worst = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            let target = if a == b { 1.0 / 3.0 } else { 0.0 };
            worst = worst.max((m[a][b] / proj.len() as f64 - target).abs());
        }
    }
    Ok((worst <= 0.01, format!("max entry deviation {worst:.2e} (limit 1e-2)")))
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / norm.max(1e-12)
}

fn random_cloud(n: usize, d: usize, rng: &mut Rng) -> ParticleCloud<f64> {
    let data: Vec<f64> = (0..n * d).map(|_| rng.standard_normal()).collect();
    ParticleCloud::new(Matrix::from_vec(n, d, data).unwrap()).unwrap()
}

fn random_grid(n: usize, d: usize, rng: &mut Rng) -> GridMeasure<f64> {
    let support = random_cloud(n, d, rng).into_points();
    let raw: Vec<f64> = (0..n).map(|_| 0.2 + rng.uniform::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    GridMeasure::new(support, raw.iter().map(|w| w / s).collect(), 0.1).unwrap()
}

fn tangent(n: usize, rng: &mut Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
    let m = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

/// Analytic vs central-difference gradient in positions.
fn check_positions(
    mu: &ParticleCloud<f64>,
    f: impl Fn(&ParticleCloud<f64>) -> f64,
    grad: &Matrix<f64>,
) -> Result<f64, String> {
    let (n, d) = (mu.len(), mu.dim());
    let x0 = mu.points().as_slice().to_vec();
    let fd = finite_diff_grad(
        |x: &[f64]| f(&ParticleCloud::new(Matrix::from_vec(n, d, x.to_vec()).unwrap()).unwrap()),
        &x0,
        1e-6,
    )
    .map_err(e)?;
    Ok(rel_err(grad.as_slice(), &fd))
}

/// Analytic vs central-difference derivatives along simplex tangents.
fn check_weights(
    mu: &GridMeasure<f64>,
    f: impl Fn(&GridMeasure<f64>) -> f64,
    grad: &[f64],
    rng: &mut Rng,
) -> Result<f64, String> {
    let h = 1e-6;
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for _ in 0..3 {
        let v = tangent(mu.len(), rng);
        let shifted = |s: f64| {
            let w: Vec<f64> = mu.weight_slice().iter().zip(&v).map(|(a, b)| a + s * b).collect();
            f(&mu.with_weights(w).unwrap())
        };
        analytic.push(grad.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>());
        numeric.push((shifted(h) - shifted(-h)) / (2.0 * h));
    }
    Ok(rel_err(&analytic, &numeric))
}

fn gradient_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Rng::new(14);
    let mut errs: Vec<(&'static str, f64)> = Vec::new();
    for rep in 0..4u64 {
        // SW in positions, equal-size uniform and weighted targets
        let mu = random_cloud(7, 3, &mut rng);
        let nu = random_cloud(7, 3, &mut rng);
        let proj = ProjectionSet::sample(8, 3, 100 + rep).map_err(e)?;
        let q = Quadrature::default();
        let (_, g) = sw2_grad_positions(&mu, &nu, &proj, &q).map_err(e)?;
        errs.push(("sw positions, uniform", check_positions(&mu, |m| sw2_mc(m, &nu, &proj, &q).unwrap().value, &g)?));
        let target = random_grid(5, 3, &mut rng);
        for (label, q) in [("sw positions, exact", Quadrature::Exact), ("sw positions, rectangle", Quadrature::default())] {
            let (_, g) = sw2_grad_positions(&mu, &target, &proj, &q).map_err(e)?;
            errs.push((label, check_positions(&mu, |m| sw2_mc(m, &target, &proj, &q).unwrap().value, &g)?));
        }

        // SW in weights
        let grid = random_grid(9, 2, &mut rng);
        let other = random_cloud(6, 2, &mut rng);
        let proj2 = ProjectionSet::sample(6, 2, 200 + rep).map_err(e)?;
        let (_, g) = sw2_grad_weights(&grid, &other, &proj2).map_err(e)?;
        errs.push((
            "sw weights",
            check_weights(&grid, |m| sw2_mc(m, &other, &proj2, &Quadrature::Exact).unwrap().value, &g, &mut rng)?,
        ));

        // functionals on clouds
        let a = {
            let b = random_cloud(2, 2, &mut rng).into_points();
            let mut a = b.transpose().matmul(&b).unwrap();
            for i in 0..2 {
                a[(i, i)] += 0.5;
            }
            a
        };
        let quad = Potential::Quadratic(QuadraticPotential::new(a, vec![0.3, -0.2]).map_err(e)?);
        let cloud_energies = vec![
            ("potential, quadratic", EnergySpec::Potential(quad.clone())),
            ("potential, log radial", EnergySpec::Potential(Potential::LogRadial { coef: 0.25 })),
            ("interaction 4-2", EnergySpec::Interaction(InteractionKernel::attractive_repulsive())),
            ("interaction log", EnergySpec::Interaction(InteractionKernel::quadratic_log())),
            (
                "sw to target",
                EnergySpec::sw_to_target(Measure::Cloud(random_cloud(6, 2, &mut rng)), 0.0, proj2.clone()).map_err(e)?,
            ),
            ("exact w2 to target", EnergySpec::W2ToTargetExact(random_cloud(6, 2, &mut rng))),
            (
                "weighted sum",
                EnergySpec::WeightedSum(vec![
                    (0.7, EnergySpec::Potential(quad.clone())),
                    (1.3, EnergySpec::Interaction(InteractionKernel::new(3.0, 1.5).map_err(e)?)),
                ]),
            ),
        ];
        let cloud = random_cloud(6, 2, &mut rng);
        for (label, en) in &cloud_energies {
            let (_, g) = en.cloud_value_and_grad(&cloud).map_err(e)?;
            errs.push((label, check_positions(&cloud, |m| en.cloud_value(m).unwrap(), &g)?));
        }

        // functionals on grids
        let grid_energies = vec![
            ("fokker-planck", EnergySpec::fokker_planck(quad.clone())),
            ("grid interaction 4-2", EnergySpec::Interaction(InteractionKernel::attractive_repulsive())),
            ("grid interaction log", EnergySpec::Interaction(InteractionKernel::quadratic_log())),
            (
                "grid sw to target with entropy",
                EnergySpec::sw_to_target(Measure::Cloud(random_cloud(5, 2, &mut rng)), 0.3, proj2.clone()).map_err(e)?,
            ),
        ];
        for (label, en) in &grid_energies {
            let (_, g) = en.grid_value_and_grad(&grid).map_err(e)?;
            errs.push((label, check_weights(&grid, |m| en.grid_value(m).unwrap(), &g, &mut rng)?));
        }
    }
    let (worst_label, worst) = errs
        .iter()
        .copied()
        .fold(("", 0.0f64), |acc, (l, v)| if v > acc.1 { (l, v) } else { acc });
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst <= 1e-5 && errs.len() >= 20 && secs < 30.0;
    Ok((ok, format!("{} instances, worst relative error {worst:.2e} ({worst_label}), limit 1e-5", errs.len())))
}

fn gaussian_flows(flows: &mut Vec<Flow>) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 0..3u64 {
        let t0 = Instant::now();
        let p = GaussianFlowParams {
            seed,
            ..GaussianFlowParams::default()
        };
        let r = run_gaussian_flow(&p).map_err(flow_err)?;
        let secs = t0.elapsed().as_secs_f64();
        let pass = r.sym_kl_final < 0.1 && r.sym_kl_final < 0.1 * r.sym_kl_initial && secs < 300.0;
        ok &= pass;
        parts.push(format!("seed {seed}: {:.3} -> {:.4} in {secs:.0} s", r.sym_kl_initial, r.sym_kl_final));
        flows.push(Flow {
            label: format!("gaussian-flow seed {seed}"),
            traj: r.trajectory,
        });
    }
    Ok((ok, format!("SymKL {}", parts.join("; "))))
}

fn ou_mean(flows: &mut Vec<Flow>) -> Outcome {
    let t0 = Instant::now();
    let r = run_ou_mean(&OuMeanParams::default()).map_err(flow_err)?;
    let secs = t0.elapsed().as_secs_f64();
    let ok = r.max_error <= 0.05 && r.times.last().copied().unwrap_or(0.0) >= 4.0 - 1e-9 && secs < 120.0;
    let detail = format!("max |mean - exact| = {:.4} over {} checkpoints up to t = {:.2}", r.max_error, r.times.len(), r.times.last().unwrap());
    flows.push(Flow {
        label: "ou-mean".into(),
        traj: r.trajectory,
    });
    Ok((ok, detail))
}

/// Returns the criterion outcome and whether the run matched the analytic
/// radius `1/sqrt(3)`.
fn ring(flows: &mut Vec<Flow>) -> (Outcome, bool) {
    let t0 = Instant::now();
    let r = match run_aggregation(&AggregationParams::ring()) {
        Ok(r) => r,
        Err(err) => return (Err(flow_err(err)), false),
    };
    let secs = t0.elapsed().as_secs_f64();
    let (mean, std) = (r.radius.mean, r.radius.std);
    let ok = (0.45..=0.55).contains(&mean) && std < 0.05 && secs < 600.0;
    let analytic = 1.0 / 3f64.sqrt();
    let matches = (mean - analytic).abs() < 0.01 && std < 0.05 && secs < 600.0;
    flows.push(Flow {
        label: "ring".into(),
        traj: r.trajectory,
    });
    (
        Ok((ok, format!("radius mean {mean:.4} std {std:.4} (band [0.45, 0.55]; analytic steady state {analytic:.4})"))),
        matches,
    )
}

fn torus(flows: &mut Vec<Flow>) -> Outcome {
    let t0 = Instant::now();
    let r = run_aggregation(&AggregationParams::torus()).map_err(flow_err)?;
    let secs = t0.elapsed().as_secs_f64();
    let q05 = r.radius.quantile(0.05).unwrap();
    let q95 = r.radius.quantile(0.95).unwrap();
    let ok = (0.45..=0.58).contains(&q05) && (1.05..=1.18).contains(&q95) && secs < 600.0;
    flows.push(Flow {
        label: "torus".into(),
        traj: r.trajectory,
    });
    Ok((ok, format!("5% radius {q05:.4} in [0.45, 0.58], 95% radius {q95:.4} in [1.05, 1.18]")))
}

fn disk(flows: &mut Vec<Flow>) -> Outcome {
    let r = run_aggregation(&AggregationParams::disk()).map_err(flow_err)?;
    let max = r.radius.max;
    flows.push(Flow {
        label: "disk".into(),
        traj: r.trajectory,
    });
    Ok(((0.95..=1.1).contains(&max), format!("max radius {max:.4} in [0.95, 1.1]")))
}

fn compare(flows: &mut Vec<Flow>) -> Outcome {
    let r = run_compare(&CompareParams::default()).map_err(flow_err)?;
    let ratio = |t: &Trajectory<f64>| t.energy_trace.last().unwrap() / t.energy_trace[0];
    let (rf, rd) = (ratio(&r.flow), ratio(&r.direct));
    let ok = rf < 1e-3 && rd < 1e-3 && r.flow_hausdorff < 0.05 && r.direct_hausdorff < 0.05;
    let detail = format!(
        "F_K/F_0 flow {rf:.1e}, direct {rd:.1e}; Hausdorff flow {:.1e}, direct {:.1e}",
        r.flow_hausdorff, r.direct_hausdorff
    );
    flows.push(Flow {
        label: "compare flow".into(),
        traj: r.flow,
    });
    flows.push(Flow {
        label: "compare direct".into(),
        traj: r.direct,
    });
    Ok((ok, detail))
}

fn monotone(flows: &[Flow]) -> Outcome {
    if flows.is_empty() {
        return Err("no flows ran".into());
    }
    let mut bad = Vec::new();
    let mut steps = 0;
    for f in flows {
        steps += f.traj.n_steps();
        let v = monotonicity_violations(&f.traj.energy_trace, 1e-6);
        if !v.is_empty() {
            bad.push(format!("{} at steps {:?}", f.label, &v[..v.len().min(5)]));
        }
    }
    Ok((bad.is_empty(), format!("{} flows, {steps} steps; violations: {}", flows.len(), if bad.is_empty() { "none".into() } else { bad.join(", ") })))
}

fn gap(flows: &[Flow]) -> Outcome {
    let jko: Vec<&Flow> = flows.iter().filter(|f| !f.traj.direct).collect();
    if jko.is_empty() {
        return Err("no flows ran".into());
    }
    let mut bad = Vec::new();
    let mut steps = 0;
    for f in &jko {
        steps += f.traj.n_steps();
        let v = energy_gap_check(&f.traj, f.traj.tau);
        if let Some(first) = v.first() {
            bad.push(format!("{}: {} steps, first {:?}", f.label, v.len(), first));
        }
    }
    Ok((bad.is_empty(), format!("{} flows, {steps} steps; violations: {}", jko.len(), if bad.is_empty() { "none".into() } else { bad.join(", ") })))
}

fn oracle_cross() -> Outcome {
    let mut rng = Rng::new(15);
    let mut worst_simplex = 0.0f64;
    for k in 0..100 {
        let n = 1 + k % 8;
        let v: Vec<f64> = (0..n).map(|_| 2.0 * rng.standard_normal::<f64>()).collect();
        let fast = simplex_project(&v);
        let slow = simplex_project_bruteforce(&v).map_err(e)?;
        let d = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst_simplex = worst_simplex.max(d);
    }
    let mut mismatches = 0;
    for k in 0..100 {
        let n = 1 + k % 7;
        let data: Vec<f64> = (0..n * n).map(|_| rng.uniform::<f64>() * 10.0).collect();
        let cost = Matrix::from_vec(n, n, data).map_err(e)?;
        let fast = swjko::assignment::solve_assignment(&cost).map_err(e)?;
        let slow = assignment_bruteforce(&cost).map_err(e)?;
        if fast.perm != slow.perm || (fast.cost - slow.cost).abs() > 1e-12 * (1.0 + slow.cost.abs()) {
            mismatches += 1;
        }
    }
    Ok((
        worst_simplex <= 1e-10 && mismatches == 0,
        format!("simplex max deviation {worst_simplex:.1e} (limit 1e-10); assignment mismatches {mismatches}/100"),
    ))
}

fn ula() -> Outcome {
    let p = UlaParams::default();
    let r = run_ula(&p).map_err(e)?;
    let mean_err = r.mean.iter().zip(&p.b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let target = r.target.covariance();
    let diff = r.covariance.add(&{
        let mut t = target.clone();
        t.scale_mut(-1.0);
        t
    })
    .map_err(e)?;
    let fro = |m: &Matrix<f64>| m.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
    let cov_rel = fro(&diff) / fro(target);
    Ok((
        mean_err <= 0.05 && cov_rel <= 0.1,
        format!("mean error {mean_err:.4} (limit 0.05), covariance relative error {cov_rel:.4} (limit 0.1)"),
    ))
}

fn trace_bits(t: &Trajectory<f64>) -> Vec<u64> {
    let mut out: Vec<u64> = t.energy_trace.iter().chain(&t.sw_gap_trace).map(|x| x.to_bits()).collect();
    out.extend(t.step_seeds.iter().copied());
    if let Some(c) = t.last().as_cloud() {
        out.extend(c.points().as_slice().iter().map(|x| x.to_bits()));
    }
    if let Some(g) = t.last().as_grid() {
        out.extend(g.weight_slice().iter().map(|x| x.to_bits()));
    }
    out
}

fn determinism() -> Outcome {
    let mut checked = Vec::new();
    let mut ok = true;
    let ou = || run_ou_mean(&OuMeanParams::default()).map(|r| trace_bits(&r.trajectory)).map_err(flow_err);
    let same = ou()? == ou()?;
    ok &= same;
    checked.push(format!("ou-mean {}", if same { "identical" } else { "DIFFERS" }));
    let cmp = || {
        run_compare(&CompareParams::default())
            .map(|r| (trace_bits(&r.flow), trace_bits(&r.direct), hausdorff(r.flow.last().as_cloud().unwrap(), &r.target).to_bits()))
            .map_err(flow_err)
    };
    let same = cmp()? == cmp()?;
    ok &= same;
    checked.push(format!("compare {}", if same { "identical" } else { "DIFFERS" }));
    let grid = || {
        let p = GaussianFlowParams {
            n_outer: 10,
            seed: 5,
            ..GaussianFlowParams::default()
        };
        run_gaussian_flow(&p).map(|r| trace_bits(&r.trajectory)).map_err(flow_err)
    };
    let same = grid()? == grid()?;
    ok &= same;
    checked.push(format!("gaussian-flow (10 steps) {}", if same { "identical" } else { "DIFFERS" }));
    Ok((ok, checked.join(", ")))
}

//! SW-JKO outer loop with first-order inner solvers.
//!
//! One step minimizes `J(mu) = c * SW_2^2(mu, mu_k) / (2 tau) + F(mu)` with
//! `c = d` when dilation is on and `c = 1` otherwise. Particle clouds are
//! optimized over positions, grids over weights (projected or mirror
//! updates on the simplex).
//!
//! The step returns the iterate with the lowest observed `J`, counting
//! `mu_k` itself (`J(mu_k) = F(mu_k)`). Hence `F(mu_{k+1}) <= F(mu_k)` and
//! `SW^2(mu_k, mu_{k+1}) <= 2 tau (F(mu_k) - F(mu_{k+1}))` hold for the
//! projections that scored the returned iterate; that set is also the one
//! used for the reported gap.

use std::fmt;
use std::time::{Duration, Instant};

use crate::error::{invalid, Error, Result};
use crate::functionals::EnergySpec;
use crate::linalg::Matrix;
use crate::measures::{
    sample_gaussian, Atoms, GaussianMeasure, GridMeasure, Measure, Parameterization, ParticleCloud,
    ProjectionSet, Rng,
};
use crate::scalar::Scalar;
use crate::simplex::simplex_project;
use crate::sliced::{SortedReference, SupportOrder};

/// Direction rule of the inner loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerMethod<T> {
    Plain,
    /// Heavy ball: `v <- beta v + g`, step along `v`.
    Momentum { beta: T },
    /// Per-coordinate adaptive steps with bias-corrected moments.
    Adam { beta1: T, beta2: T, eps: T },
}

impl<T: Scalar> InnerMethod<T> {
    pub fn adam() -> Self {
        InnerMethod::Adam {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

/// When fresh projection sets are drawn inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// New directions every inner epoch (stochastic inner objective).
    FreshPerEpoch,
    /// One set per outer step (deterministic inner objective).
    FrozenPerStep,
}

/// How grid weights move on the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightUpdate {
    /// Euclidean step followed by projection onto the simplex.
    Projected,
    /// Exponentiated step `rho_i <- rho_i exp(-eta g_i) / Z`.
    Mirror,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T> {
    pub tau: T,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_projections: usize,
    /// Learning rate. Particle gradients are multiplied by `n` first, so
    /// the rate is per particle; grid gradients are used as they are.
    pub inner_step: T,
    pub inner_method: InnerMethod<T>,
    pub dilation: bool,
    pub warm_start: bool,
    pub projection_mode: ProjectionMode,
    pub weight_update: WeightUpdate,
    pub seed: u64,
}

impl<T: Scalar> SolverConfig<T> {
    /// Defaults: adaptive inner method, warm start, fresh projections per
    /// epoch, projected weight updates, no dilation.
    pub fn new(tau: T, n_outer: usize, n_inner: usize, n_projections: usize, inner_step: T, seed: u64) -> Self {
        Self {
            tau,
            n_outer,
            n_inner,
            n_projections,
            inner_step,
            inner_method: InnerMethod::adam(),
            dilation: false,
            warm_start: true,
            projection_mode: ProjectionMode::FreshPerEpoch,
            weight_update: WeightUpdate::Projected,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(invalid(format!("tau must be positive and finite (got {})", self.tau)));
        }
        if self.n_inner == 0 {
            return Err(invalid("n_inner must be >= 1"));
        }
        if self.n_projections == 0 {
            return Err(invalid("n_projections must be >= 1"));
        }
        if !(self.inner_step > T::zero()) || !self.inner_step.is_finite() {
            return Err(invalid("inner_step must be positive and finite"));
        }
        match self.inner_method {
            InnerMethod::Plain => {}
            InnerMethod::Momentum { beta } => {
                if !(beta >= T::zero() && beta < T::one()) {
                    return Err(invalid("momentum beta must lie in [0, 1)"));
                }
            }
            InnerMethod::Adam { beta1, beta2, eps } => {
                let ok = |b: T| b >= T::zero() && b < T::one();
                if !ok(beta1) || !ok(beta2) || !(eps > T::zero()) {
                    return Err(invalid("adam needs beta1, beta2 in [0, 1) and eps > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Result of one SW-JKO step.
#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub measure: Measure<T>,
    /// `F(mu_{k+1})`.
    pub energy: T,
    /// `SW_2^2(mu_k, mu_{k+1})` under the projections that scored it.
    pub sw_gap: T,
    /// Inner objective of the returned iterate.
    pub objective: T,
    /// Epoch at which the returned iterate was produced; `None` means no
    /// iterate beat `mu_k` and the step stayed put.
    pub best_epoch: Option<usize>,
}

/// Snapshots and traces of a flow. `energy_trace[k] = F(mu_k)`,
/// `sw_gap_trace[k] = SW_2^2(mu_k, mu_{k+1})`.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub snapshots: Vec<Measure<T>>,
    pub energy_trace: Vec<T>,
    pub sw_gap_trace: Vec<T>,
    pub step_times: Vec<Duration>,
    /// Seed handed to each step's generator.
    pub step_seeds: Vec<u64>,
    pub tau: T,
    pub seed: u64,
    /// Direct minimization baseline rather than a flow.
    pub direct: bool,
}

impl<T: Scalar> Trajectory<T> {
    fn start(mu0: Measure<T>, tau: T, seed: u64, direct: bool) -> Self {
        Self {
            snapshots: vec![mu0],
            energy_trace: Vec::new(),
            sw_gap_trace: Vec::new(),
            step_times: Vec::new(),
            step_seeds: Vec::new(),
            tau,
            seed,
            direct,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn last(&self) -> &Measure<T> {
        self.snapshots.last().expect("trajectory holds mu_0")
    }

    /// `t_k = k tau`.
    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.tau
    }
}

/// A flow that stopped early; `partial` holds every completed step.
#[derive(Debug)]
pub struct FlowError<T> {
    pub source: Error,
    pub partial: Trajectory<T>,
}

impl<T: fmt::Debug> fmt::Display for FlowError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} completed steps)", self.source, self.partial.snapshots.len() - 1)
    }
}

impl<T: fmt::Debug> std::error::Error for FlowError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Direction state shared by both parameterizations.
struct Optimizer<T> {
    method: InnerMethod<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Optimizer<T> {
    fn new(method: InnerMethod<T>, len: usize) -> Self {
        Self {
            method,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    /// Turns the raw gradient into the update direction in place.
    fn direction(&mut self, g: &mut [T]) {
        self.t += 1;
        match self.method {
            InnerMethod::Plain => {}
            InnerMethod::Momentum { beta } => {
                for (gi, mi) in g.iter_mut().zip(self.m.iter_mut()) {
                    *mi = beta * *mi + *gi;
                    *gi = *mi;
                }
            }
            InnerMethod::Adam { beta1, beta2, eps } => {
                let c1 = T::one() - beta1.powi(self.t);
                let c2 = T::one() - beta2.powi(self.t);
                for ((gi, mi), vi) in g.iter_mut().zip(self.m.iter_mut()).zip(self.v.iter_mut()) {
                    *mi = beta1 * *mi + (T::one() - beta1) * *gi;
                    *vi = beta2 * *vi + (T::one() - beta2) * *gi * *gi;
                    *gi = (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
        }
    }
}

fn diverged(step: usize, epoch: usize, reason: impl Into<String>) -> Error {
    Error::Diverged {
        step,
        epoch,
        reason: reason.into(),
    }
}

/// Domain failures at inner iterates mean the inner loop ran away.
fn as_divergence(e: Error, step: usize, epoch: usize) -> Error {
    match e {
        Error::NumericDomain(msg) if epoch > 0 => diverged(step, epoch, msg),
        other => other,
    }
}

/// Proximal weight on the SW term, `c / (2 tau)`, or zero for direct
/// minimization.
fn sw_coefficient<T: Scalar>(cfg: &SolverConfig<T>, dim: usize, direct: bool) -> T {
    if direct {
        return T::zero();
    }
    let c = if cfg.dilation { T::from_usize_lossy(dim) } else { T::one() };
    c / (T::lit(2.0) * cfg.tau)
}

/// One SW-JKO step from `mu_k`.
pub fn sw_jko_step<T: Scalar>(
    mu_k: &Measure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
) -> Result<StepOutcome<T>> {
    cfg.validate()?;
    step_inner(mu_k, energy, cfg, rng, false, 0)
}

fn step_inner<T: Scalar>(
    mu_k: &Measure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
    direct: bool,
    step: usize,
) -> Result<StepOutcome<T>> {
    if !energy.supports(mu_k.kind()) {
        energy.value(mu_k)?;
    }
    match mu_k {
        Measure::Cloud(c) => cloud_step(c, energy, cfg, rng, direct, step),
        Measure::Grid(g) => grid_step(g, energy, cfg, rng, direct, step),
    }
}

struct Best<T, M> {
    objective: T,
    energy: T,
    sw: T,
    iterate: M,
    epoch: Option<usize>,
}

fn cloud_step<T: Scalar>(
    mu_k: &ParticleCloud<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
    direct: bool,
    step: usize,
) -> Result<StepOutcome<T>> {
    let n = mu_k.len();
    let d = mu_k.dim();
    let coef = sw_coefficient(cfg, d, direct);
    let nf = T::from_usize_lossy(n);
    let f_k = energy.cloud_value(mu_k)?;
    if !f_k.is_finite() {
        return Err(diverged(step, 0, "energy of the starting measure is not finite"));
    }
    let mut x = if cfg.warm_start {
        mu_k.points().clone()
    } else {
        sample_gaussian(&GaussianMeasure::standard(d)?, n, rng)?.into_points()
    };
    let mut best = Best {
        objective: f_k,
        energy: f_k,
        sw: T::zero(),
        iterate: mu_k.points().clone(),
        epoch: None,
    };
    let mut proj = ProjectionSet::sample(cfg.n_projections, d, rng.next_seed())?;
    let mut reference = SortedReference::new(mu_k, &proj)?;
    let mut opt = Optimizer::new(cfg.inner_method, n * d);
    let mut g_sw = Matrix::zeros(n, d);
    // the last pass only scores the final iterate
    for epoch in 0..=cfg.n_inner {
        if epoch > 0 && epoch < cfg.n_inner && cfg.projection_mode == ProjectionMode::FreshPerEpoch && !direct {
            proj = ProjectionSet::sample(cfg.n_projections, d, rng.next_seed())?;
            reference = SortedReference::new(mu_k, &proj)?;
        }
        let cloud = ParticleCloud::new(x.clone())
            .map_err(|e| diverged(step, epoch, format!("iterate left the domain: {e}")))?;
        let (f, mut g) = energy.cloud_value_and_grad(&cloud).map_err(|e| as_divergence(e, step, epoch))?;
        let sw = if coef > T::zero() {
            reference.value_and_grad(&cloud, &proj, &mut g_sw)?.value
        } else {
            T::zero()
        };
        let j = coef * sw + f;
        if !j.is_finite() {
            return Err(diverged(step, epoch, format!("inner objective became {j}")));
        }
        if j < best.objective {
            best = Best {
                objective: j,
                energy: f,
                sw,
                iterate: x.clone(),
                epoch: Some(epoch),
            };
        }
        if epoch == cfg.n_inner {
            break;
        }
        let gs = g.as_mut_slice();
        for (gi, &si) in gs.iter_mut().zip(g_sw.as_slice()) {
            *gi = nf * (*gi + coef * si);
        }
        opt.direction(gs);
        for (xi, &gi) in x.as_mut_slice().iter_mut().zip(gs.iter()) {
            *xi = *xi - cfg.inner_step * gi;
        }
    }
    let measure = Measure::Cloud(ParticleCloud::new(best.iterate)?);
    let sw_gap = if direct {
        let p = ProjectionSet::sample(cfg.n_projections, d, rng.next_seed())?;
        crate::sliced::sw2_mc(&measure, mu_k, &p, &Default::default())?.value
    } else {
        best.sw
    };
    Ok(StepOutcome {
        measure,
        energy: best.energy,
        sw_gap,
        objective: best.objective,
        best_epoch: best.epoch,
    })
}

fn grid_step<T: Scalar>(
    mu_k: &GridMeasure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
    direct: bool,
    step: usize,
) -> Result<StepOutcome<T>> {
    let n = mu_k.len();
    let d = mu_k.dim();
    let coef = sw_coefficient(cfg, d, direct);
    let f_k = energy.grid_value(mu_k)?;
    if !f_k.is_finite() {
        return Err(diverged(step, 0, "energy of the starting measure is not finite"));
    }
    let reference = mu_k.weight_slice();
    let mut rho = if cfg.warm_start {
        reference.to_vec()
    } else {
        vec![T::one() / T::from_usize_lossy(n); n]
    };
    let mut best = Best {
        objective: f_k,
        energy: f_k,
        sw: T::zero(),
        iterate: reference.to_vec(),
        epoch: None,
    };
    let sample_order = |rng: &mut Rng| -> Result<SupportOrder<T>> {
        let p = ProjectionSet::sample(cfg.n_projections, d, rng.next_seed())?;
        SupportOrder::new(mu_k.support(), &p)
    };
    let mut order = sample_order(rng)?;
    let mut opt = Optimizer::new(cfg.inner_method, n);
    let mut g_sw = vec![T::zero(); n];
    let mut work = mu_k.clone();
    for epoch in 0..=cfg.n_inner {
        if epoch > 0 && epoch < cfg.n_inner && cfg.projection_mode == ProjectionMode::FreshPerEpoch && !direct {
            order = sample_order(rng)?;
        }
        work.set_weights_unchecked(rho.clone());
        let (f, mut g) = energy.grid_value_and_grad(&work).map_err(|e| as_divergence(e, step, epoch))?;
        let sw = if coef > T::zero() {
            order.value_and_grad(&rho, reference, Some(&mut g_sw)).value
        } else {
            T::zero()
        };
        let j = coef * sw + f;
        if !j.is_finite() {
            return Err(diverged(step, epoch, format!("inner objective became {j}")));
        }
        if j < best.objective {
            best = Best {
                objective: j,
                energy: f,
                sw,
                iterate: rho.clone(),
                epoch: Some(epoch),
            };
        }
        if epoch == cfg.n_inner {
            break;
        }
        for (gi, &si) in g.iter_mut().zip(&g_sw) {
            *gi = *gi + coef * si;
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(diverged(step, epoch, "non-finite weight gradient"));
        }
        opt.direction(&mut g);
        rho = match cfg.weight_update {
            WeightUpdate::Projected => {
                let v: Vec<T> = rho.iter().zip(&g).map(|(&r, &gi)| r - cfg.inner_step * gi).collect();
                simplex_project(&v)
            }
            WeightUpdate::Mirror => mirror_update(&rho, &g, cfg.inner_step),
        };
    }
    let measure = Measure::Grid(mu_k.with_weights(best.iterate)?);
    let sw_gap = if direct {
        let p = ProjectionSet::sample(cfg.n_projections, d, rng.next_seed())?;
        let o = SupportOrder::new(mu_k.support(), &p)?;
        o.value_and_grad(measure.as_grid().expect("grid").weight_slice(), reference, None)
            .value
    } else {
        best.sw
    };
    Ok(StepOutcome {
        measure,
        energy: best.energy,
        sw_gap,
        objective: best.objective,
        best_epoch: best.epoch,
    })
}

/// `rho_i exp(-eta g_i)` renormalized, computed with the largest exponent
/// shifted to zero.
fn mirror_update<T: Scalar>(rho: &[T], g: &[T], eta: T) -> Vec<T> {
    let shift = rho
        .iter()
        .zip(g)
        .filter(|(r, _)| **r > T::zero())
        .map(|(_, &gi)| -eta * gi)
        .fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = rho
        .iter()
        .zip(g)
        .map(|(&r, &gi)| if r > T::zero() { r * (-eta * gi - shift).exp() } else { T::zero() })
        .collect();
    let s: T = out.iter().copied().sum();
    out.iter_mut().for_each(|x| *x = *x / s);
    // renormalization leaves the sum within a few ulps of one; fold the
    // residual into the largest weight
    let s: T = out.iter().copied().sum();
    if let Some((imax, _)) = out.iter().enumerate().max_by(|a, b| a.1.cmp_total(b.1)) {
        out[imax] = out[imax] + (T::one() - s);
    }
    out
}

/// Runs `cfg.n_outer` SW-JKO steps from `mu0`.
pub fn run_flow<T: Scalar>(
    mu0: Measure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
) -> Result<Trajectory<T>, FlowError<T>> {
    run(mu0, energy, cfg, rng, false)
}

/// Gradient descent on `F` alone with the same inner machinery: each outer
/// step runs `n_inner` epochs without the proximal term. The result is a
/// baseline, not a flow (`Trajectory::direct` is set).
pub fn direct_minimize<T: Scalar>(
    mu0: Measure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
) -> Result<Trajectory<T>, FlowError<T>> {
    run(mu0, energy, cfg, rng, true)
}

fn run<T: Scalar>(
    mu0: Measure<T>,
    energy: &EnergySpec<T>,
    cfg: &SolverConfig<T>,
    rng: &mut Rng,
    direct: bool,
) -> Result<Trajectory<T>, FlowError<T>> {
    let mut traj = Trajectory::start(mu0, cfg.tau, rng.seed(), direct);
    let fail = |source: Error, partial: Trajectory<T>| FlowError { source, partial };
    if let Err(e) = cfg.validate().and_then(|_| energy.validate()) {
        return Err(fail(e, traj));
    }
    match energy.value(traj.last()) {
        Ok(v) if v.is_finite() => traj.energy_trace.push(v),
        Ok(v) => {
            let e = diverged(0, 0, format!("initial energy is {v}"));
            return Err(fail(e, traj));
        }
        Err(e) => return Err(fail(e, traj)),
    }
    for k in 0..cfg.n_outer {
        let seed = rng.next_seed();
        let mut step_rng = Rng::new(seed);
        let t0 = Instant::now();
        match step_inner(traj.last(), energy, cfg, &mut step_rng, direct, k) {
            Ok(out) => {
                traj.step_times.push(t0.elapsed());
                traj.step_seeds.push(seed);
                traj.energy_trace.push(out.energy);
                traj.sw_gap_trace.push(out.sw_gap);
                traj.snapshots.push(out.measure);
            }
            Err(e) => return Err(fail(e, traj)),
        }
    }
    Ok(traj)
}

/// A step where `SW_2^2(mu_k, mu_{k+1}) > 2 tau (F(mu_k) - F(mu_{k+1})) + slack`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapViolation<T> {
    pub step: usize,
    pub sw_gap: T,
    pub bound: T,
}

/// Checks the per-step optimality-gap inequality with slack
/// `1e-4 (1 + |F(mu_k)|)`.
pub fn energy_gap_check<T: Scalar>(traj: &Trajectory<T>, tau: T) -> Vec<GapViolation<T>> {
    let slack = T::lit(1e-4);
    traj.sw_gap_trace
        .iter()
        .enumerate()
        .filter_map(|(k, &gap)| {
            let (f0, f1) = (traj.energy_trace[k], traj.energy_trace[k + 1]);
            let bound = T::lit(2.0) * tau * (f0 - f1) + slack * (T::one() + f0.abs());
            (!(gap <= bound)).then_some(GapViolation {
                step: k,
                sw_gap: gap,
                bound,
            })
        })
        .collect()
}

/// Steps with `F(mu_{k+1}) > F(mu_k) + slack`.
pub fn monotonicity_violations<T: Scalar>(energy_trace: &[T], slack: T) -> Vec<usize> {
    energy_trace
        .windows(2)
        .enumerate()
        .filter(|(_, w)| !(w[1] <= w[0] + slack))
        .map(|(k, _)| k)
        .collect()
}

/// Parameterization of the measures in a trajectory.
pub fn parameterization<T: Scalar>(traj: &Trajectory<T>) -> Parameterization {
    traj.snapshots[0].kind()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{Potential, QuadraticPotential};

    fn quad_1d(a: f64, b: f64) -> EnergySpec<f64> {
        let q = QuadraticPotential::new(Matrix::from_diag(&[a]), vec![b]).unwrap();
        EnergySpec::Potential(Potential::Quadratic(q))
    }

    #[test]
    fn scalar_proximal_closed_form() {
        // (x - x_k)^2 / (2 tau) + A (x - b)^2 / 2 is minimized at
        // (x_k + tau A b) / (1 + tau A)
        let (a, b, tau, xk) = (2.0, 1.5, 0.1, -0.4);
        let mu = Measure::Cloud(ParticleCloud::from_rows(&[[xk]]).unwrap());
        let mut cfg = SolverConfig::new(tau, 1, 400, 1, 0.02, 3);
        cfg.inner_method = InnerMethod::Plain;
        let out = sw_jko_step(&mu, &quad_1d(a, b), &cfg, &mut Rng::new(1)).unwrap();
        let x = out.measure.as_cloud().unwrap().point(0)[0];
        let expect = (xk + tau * a * b) / (1.0 + tau * a);
        assert!((x - expect).abs() < 1e-4, "{x} vs {expect}");
    }

    #[test]
    fn zero_energy_stays_put() {
        let c = ParticleCloud::from_rows(&[[0.0, 1.0], [0.5, -0.2], [2.0, 0.3]]).unwrap();
        let mu = Measure::Cloud(c.clone());
        let e = EnergySpec::Potential(Potential::Zero);
        let cfg = SolverConfig::new(0.1, 1, 20, 16, 0.01, 0);
        let out = sw_jko_step(&mu, &e, &cfg, &mut Rng::new(2)).unwrap();
        assert_eq!(out.measure.as_cloud().unwrap(), &c);
        assert_eq!(out.sw_gap, 0.0);
    }

    #[test]
    fn zero_steps_keep_only_mu0() {
        let mu = Measure::Cloud(ParticleCloud::from_rows(&[[0.0]]).unwrap());
        let cfg = SolverConfig::new(0.1, 0, 5, 4, 0.01, 0);
        let t = run_flow(mu, &quad_1d(1.0, 0.0), &cfg, &mut Rng::new(0)).unwrap();
        assert_eq!(t.snapshots.len(), 1);
        assert_eq!(t.energy_trace.len(), 1);
        assert!(t.sw_gap_trace.is_empty());
    }

    #[test]
    fn invalid_config_rejected() {
        let mu = Measure::Cloud(ParticleCloud::from_rows(&[[0.0]]).unwrap());
        let cfg = SolverConfig::new(-0.1, 3, 5, 4, 0.01, 0);
        let err = run_flow(mu, &quad_1d(1.0, 0.0), &cfg, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err.source, Error::InvalidArgument(_)));
        assert_eq!(err.partial.snapshots.len(), 1);
    }

    #[test]
    fn capability_checked_before_running() {
        let mu = Measure::Cloud(ParticleCloud::from_rows(&[[0.0]]).unwrap());
        let cfg = SolverConfig::new(0.1, 3, 5, 4, 0.01, 0);
        let err = run_flow(mu, &EnergySpec::EntropyGrid, &cfg, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err.source, Error::Capability(_)));
    }

    #[test]
    fn divergence_is_reported() {
        // huge plain steps on a stiff quadratic blow up
        let mu = Measure::Cloud(ParticleCloud::from_rows(&[[1.0]]).unwrap());
        let mut cfg = SolverConfig::new(1e6, 2, 2000, 1, 10.0, 0);
        cfg.inner_method = InnerMethod::Plain;
        let err = run_flow(mu, &quad_1d(10.0, 0.0), &cfg, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err.source, Error::Diverged { step: 0, .. }), "{:?}", err.source);
        assert_eq!(err.partial.snapshots.len(), 1);
    }

    #[test]
    fn flows_are_monotone_and_respect_gap() {
        let q = QuadraticPotential::new(Matrix::from_diag(&[1.0, 2.0]), vec![1.0, -1.0]).unwrap();
        let e = EnergySpec::Potential(Potential::Quadratic(q));
        let g = GaussianMeasure::standard(2).unwrap();
        let c = sample_gaussian(&g, 50, &mut Rng::new(4)).unwrap();
        let cfg = SolverConfig::new(0.1, 10, 30, 20, 0.02, 5);
        let t = run_flow(Measure::Cloud(c), &e, &cfg, &mut Rng::new(6)).unwrap();
        assert!(monotonicity_violations(&t.energy_trace, 0.0).is_empty());
        assert!(energy_gap_check(&t, 0.1).is_empty());
        assert!(t.energy_trace[10] < t.energy_trace[0]);
    }

    #[test]
    fn mirror_update_stays_on_simplex() {
        let rho = vec![0.2, 0.3, 0.5, 0.0];
        let g = vec![1.0, -2.0, 0.5, -100.0];
        let out = mirror_update(&rho, &g, 0.7);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(out[3], 0.0);
        assert!(out[1] > 0.3);
    }

    #[test]
    fn optimizer_directions() {
        let mut plain = Optimizer::new(InnerMethod::Plain, 2);
        let mut g = vec![1.0, -2.0];
        plain.direction(&mut g);
        assert_eq!(g, vec![1.0, -2.0]);
        let mut adam = Optimizer::new(InnerMethod::<f64>::adam(), 2);
        let mut g = vec![3.0, -0.01];
        adam.direction(&mut g);
        // first bias-corrected step is sign(g) up to eps
        assert!((g[0] - 1.0).abs() < 1e-6 && (g[1] + 1.0).abs() < 1e-4);
        let mut mom = Optimizer::new(InnerMethod::Momentum { beta: 0.5 }, 1);
        let mut g = vec![1.0];
        mom.direction(&mut g);
        let mut g2 = vec![1.0];
        mom.direction(&mut g2);
        assert_eq!(g2, vec![1.5]);
    }
}

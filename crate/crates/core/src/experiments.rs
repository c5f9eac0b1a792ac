//! Named desk-scale experiments shared by the acceptance suite and the
//! command-line driver.
//!
//! Each experiment has a parameter struct with sensible defaults and a
//! `run` function returning the trajectory plus the summaries used to
//! judge it.

use crate::diagnostics::{hausdorff, radius_stats, weighted_radius_stats, DEFAULT_RADIUS_LEVELS, sym_kl_gaussians, sym_kl_grid, GaussianLogPdf, RadiusStats};
use crate::error::{invalid, Result};
use crate::functionals::{EnergySpec, InteractionKernel, Potential, QuadraticPotential};
use crate::linalg::{Matrix, SymEigen};
use crate::measures::{
    sample_gaussian, Atoms, GaussianMeasure, GridMeasure, Measure, ParticleCloud, Rng,
};
use crate::oracles::{euler_maruyama, ou_analytic, OuSpec, UlaConfig};
use crate::solver::{
    direct_minimize, run_flow, FlowError, InnerMethod, ProjectionMode, SolverConfig, Trajectory, WeightUpdate,
};

/// Random SPD matrix `U diag(1 + u) U^T` with `U` orthogonal and
/// `u ~ U(0, 1)`, so eigenvalues lie in `(1, 2)`.
pub fn random_spd(d: usize, rng: &mut Rng) -> Result<Matrix<f64>> {
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let mut g = Matrix::zeros(d, d);
    for v in g.as_mut_slice() {
        *v = rng.uniform();
    }
    // orthogonal eigenvectors of the Gram matrix of a random matrix
    let gram = g.transpose().matmul(&g)?;
    let u = SymEigen::new(&gram)?.vectors;
    let diag: Vec<f64> = (0..d).map(|_| 1.0 + rng.uniform::<f64>()).collect();
    Ok(u.matmul(&Matrix::from_diag(&diag))?.matmul(&u.transpose())?.symmetrized())
}

fn dense_iso(d: usize, std: f64) -> Result<GaussianMeasure<f64>> {
    GaussianMeasure::isotropic(vec![0.0; d], std)
}

/// Fokker-Planck flow of `V(x) = 1/2 (x - m)^T A (x - m)` on a regular
/// grid from `N(0, I)`; stationary law `N(m, A^{-1})`.
#[derive(Debug, Clone)]
pub struct GaussianFlowParams {
    pub dim: usize,
    pub per_axis: usize,
    /// `[lo, hi]^d`; `None` picks a box covering `N(0, I)` and the target.
    pub grid_box: Option<(f64, f64)>,
    pub tau: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_projections: usize,
    pub inner_step: f64,
    pub inner_method: InnerMethod<f64>,
    pub weight_update: WeightUpdate,
    pub projection_mode: ProjectionMode,
    pub dilation: bool,
    pub seed: u64,
}

impl Default for GaussianFlowParams {
    fn default() -> Self {
        Self {
            dim: 2,
            per_axis: 50,
            grid_box: None,
            tau: 0.1,
            n_outer: 80,
            n_inner: 100,
            n_projections: 50,
            inner_step: 0.05,
            inner_method: InnerMethod::Plain,
            weight_update: WeightUpdate::Mirror,
            projection_mode: ProjectionMode::FrozenPerStep,
            dilation: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianFlowSetup {
    pub a: Matrix<f64>,
    pub m: Vec<f64>,
    pub target: GaussianMeasure<f64>,
    pub mu0: GridMeasure<f64>,
    pub energy: EnergySpec<f64>,
}

/// Draws `A` and `m ~ N(0, I)`. Without an explicit box the grid covers
/// the box centred at `m/2` with half-width `4 + max|m_i|/2`, which holds
/// both `N(0, I)` and the target.
pub fn gaussian_flow_setup(p: &GaussianFlowParams) -> Result<GaussianFlowSetup> {
    let mut rng = Rng::new(p.seed);
    let a = random_spd(p.dim, &mut rng)?;
    let m: Vec<f64> = (0..p.dim).map(|_| rng.standard_normal()).collect();
    let (lo, hi): (Vec<f64>, Vec<f64>) = match p.grid_box {
        Some((lo, hi)) => (vec![lo; p.dim], vec![hi; p.dim]),
        None => {
            let half = 4.0 + m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())) / 2.0;
            (m.iter().map(|x| x / 2.0 - half).collect(), m.iter().map(|x| x / 2.0 + half).collect())
        }
    };
    let grid = GridMeasure::regular(&lo, &hi, p.per_axis)?;
    let start = GaussianLogPdf::new(&GaussianMeasure::standard(p.dim)?)?;
    let mu0 = GridMeasure::from_density(grid.support().clone(), grid.cell_volume(), |x| start.eval(x).exp())?;
    let q = QuadraticPotential::new(a.clone(), m.clone())?;
    let target = OuSpec::new(a.clone(), m.clone(), vec![0.0; p.dim], Matrix::identity(p.dim))?.stationary()?;
    Ok(GaussianFlowSetup {
        a,
        m,
        target,
        mu0,
        energy: EnergySpec::fokker_planck(Potential::Quadratic(q)),
    })
}

#[derive(Debug)]
pub struct GaussianFlowReport {
    pub setup: GaussianFlowSetup,
    pub trajectory: Trajectory<f64>,
    /// Grid-density symmetric KL to the target at `mu_0` and `mu_K`.
    pub sym_kl_initial: f64,
    pub sym_kl_final: f64,
    /// Same, between moment-matched Gaussians.
    pub sym_kl_moments_initial: f64,
    pub sym_kl_moments_final: f64,
}

pub fn gaussian_flow_solver(p: &GaussianFlowParams) -> SolverConfig<f64> {
    let mut cfg = SolverConfig::new(p.tau, p.n_outer, p.n_inner, p.n_projections, p.inner_step, p.seed);
    cfg.inner_method = p.inner_method;
    cfg.weight_update = p.weight_update;
    cfg.projection_mode = p.projection_mode;
    cfg.dilation = p.dilation;
    cfg
}

pub fn run_gaussian_flow(p: &GaussianFlowParams) -> Result<GaussianFlowReport, FlowError<f64>> {
    let setup = gaussian_flow_setup(p).map_err(no_partial)?;
    let cfg = gaussian_flow_solver(p);
    let trajectory = run_flow(
        Measure::Grid(setup.mu0.clone()),
        &setup.energy,
        &cfg,
        &mut Rng::new(p.seed.wrapping_add(1)),
    )?;
    let summarize = || -> Result<(f64, f64, f64, f64)> {
        let lp = GaussianLogPdf::new(&setup.target)?;
        let first = trajectory.snapshots[0].as_grid().expect("grid");
        let last = trajectory.last().as_grid().expect("grid");
        let kl = |g: &GridMeasure<f64>| sym_kl_grid(g, |x| lp.eval(x));
        let mm = |g: &GridMeasure<f64>| sym_kl_gaussians(&GaussianMeasure::from_moments(g)?, &setup.target);
        Ok((kl(first)?, kl(last)?, mm(first)?, mm(last)?))
    };
    let (a, b, c, d) = summarize().map_err(|e| FlowError {
        source: e,
        partial: trajectory.clone(),
    })?;
    Ok(GaussianFlowReport {
        setup,
        trajectory,
        sym_kl_initial: a,
        sym_kl_final: b,
        sym_kl_moments_initial: c,
        sym_kl_moments_final: d,
    })
}

fn no_partial(e: crate::Error) -> FlowError<f64> {
    FlowError {
        source: e,
        partial: Trajectory {
            snapshots: Vec::new(),
            energy_trace: Vec::new(),
            sw_gap_trace: Vec::new(),
            step_times: Vec::new(),
            step_seeds: Vec::new(),
            tau: 0.0,
            seed: 0,
            direct: false,
        },
    }
}

/// Particle flows of interaction energies (optionally with a radial
/// drift) from `N(0, init_std^2 I)`.
#[derive(Debug, Clone)]
pub struct AggregationParams {
    pub n_particles: usize,
    pub dim: usize,
    pub init_std: f64,
    /// Draw `n/2` points and add their mirror images `-x`, so the cloud
    /// is antipodally symmetric. The flow preserves this symmetry, which
    /// pins the centre at the origin; with the log drift, translations
    /// are otherwise unstable and the energy is unbounded below along
    /// them.
    pub symmetric_init: bool,
    /// Kernel exponents; `b = 0` is the log kernel.
    pub a: f64,
    pub b: f64,
    /// Drift `-(alpha/beta) ln|x|`; `None` for no drift.
    pub drift: Option<(f64, f64)>,
    pub tau: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_projections: usize,
    pub inner_step: f64,
    pub inner_method: InnerMethod<f64>,
    pub projection_mode: ProjectionMode,
    pub dilation: bool,
    /// Run on a regular grid instead of particles.
    pub grid: Option<GridBox>,
    /// Weight update used when `grid` is set.
    pub weight_update: WeightUpdate,
    pub seed: u64,
}

/// Regular grid with `per_axis` points on `[lo, hi]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBox {
    pub lo: f64,
    pub hi: f64,
    pub per_axis: usize,
}

impl AggregationParams {
    /// `W = |x|^4/4 - |x|^2/2`: ring of radius 1/2.
    pub fn ring() -> Self {
        Self {
            n_particles: 1000,
            dim: 2,
            init_std: 0.25,
            symmetric_init: false,
            a: 4.0,
            b: 2.0,
            drift: None,
            tau: 0.05,
            n_outer: 200,
            n_inner: 40,
            n_projections: 100,
            inner_step: 0.05,
            inner_method: InnerMethod::Plain,
            projection_mode: ProjectionMode::FrozenPerStep,
            dilation: false,
            grid: None,
            weight_update: WeightUpdate::Mirror,
            seed: 0,
        }
    }

    /// `W = |x|^2/2 - ln|x|`: uniform disk of radius 1.
    pub fn disk() -> Self {
        Self {
            a: 2.0,
            b: 0.0,
            n_particles: 500,
            init_std: 0.5,
            symmetric_init: true,
            tau: 0.1,
            n_outer: 100,
            ..Self::ring()
        }
    }

    /// Log kernel plus drift with `alpha = 1`, `beta = 4`: annulus with
    /// radii `1/2` and `sqrt(5)/2`.
    pub fn torus() -> Self {
        Self {
            drift: Some((1.0, 4.0)),
            ..Self::disk()
        }
    }

    pub fn energy(&self) -> Result<EnergySpec<f64>> {
        let kernel = InteractionKernel::new(self.a, self.b)?;
        let inter = EnergySpec::Interaction(kernel);
        Ok(match self.drift {
            None => inter,
            Some((alpha, beta)) => {
                if !(beta > 0.0) || !(alpha >= 0.0) {
                    return Err(invalid("drift needs alpha >= 0 and beta > 0"));
                }
                EnergySpec::WeightedSum(vec![
                    (1.0, inter),
                    (1.0, EnergySpec::Potential(Potential::LogRadial { coef: alpha / beta })),
                ])
            }
        })
    }

    pub fn solver(&self) -> SolverConfig<f64> {
        let mut cfg = SolverConfig::new(self.tau, self.n_outer, self.n_inner, self.n_projections, self.inner_step, self.seed);
        cfg.inner_method = self.inner_method;
        cfg.projection_mode = self.projection_mode;
        cfg.dilation = self.dilation;
        cfg.weight_update = self.weight_update;
        cfg
    }

    /// `N(0, init_std^2 I)` as particles, or its density on the grid.
    pub fn initial_measure(&self) -> Result<Measure<f64>> {
        match &self.grid {
            None => Ok(Measure::Cloud(self.initial()?)),
            Some(b) => {
                let grid = GridMeasure::regular(&vec![b.lo; self.dim], &vec![b.hi; self.dim], b.per_axis)?;
                let lp = GaussianLogPdf::new(&dense_iso(self.dim, self.init_std)?)?;
                Ok(Measure::Grid(GridMeasure::from_density(
                    grid.support().clone(),
                    grid.cell_volume(),
                    |x| lp.eval(x).exp(),
                )?))
            }
        }
    }

    pub fn initial(&self) -> Result<ParticleCloud<f64>> {
        let law = dense_iso(self.dim, self.init_std)?;
        let mut rng = Rng::new(self.seed);
        if !self.symmetric_init {
            return sample_gaussian(&law, self.n_particles, &mut rng);
        }
        if self.n_particles % 2 != 0 {
            return Err(invalid("symmetric initialization needs an even particle count"));
        }
        let half = sample_gaussian(&law, self.n_particles / 2, &mut rng)?;
        let mut pts = Matrix::zeros(self.n_particles, self.dim);
        for i in 0..half.len() {
            for (c, &x) in half.point(i).iter().enumerate() {
                pts[(2 * i, c)] = x;
                pts[(2 * i + 1, c)] = -x;
            }
        }
        ParticleCloud::new(pts)
    }
}

#[derive(Debug)]
pub struct AggregationReport {
    pub trajectory: Trajectory<f64>,
    pub radius: RadiusStats<f64>,
}

pub fn run_aggregation(p: &AggregationParams) -> Result<AggregationReport, FlowError<f64>> {
    let energy = p.energy().map_err(no_partial)?;
    let mu0 = p.initial_measure().map_err(no_partial)?;
    let trajectory = run_flow(mu0, &energy, &p.solver(), &mut Rng::new(p.seed.wrapping_add(1)))?;
    let center = vec![0.0; p.dim];
    let radius = match trajectory.last() {
        Measure::Cloud(c) => radius_stats(c, &center, &DEFAULT_RADIUS_LEVELS),
        Measure::Grid(g) => weighted_radius_stats(g, &center, &DEFAULT_RADIUS_LEVELS),
    };
    let radius = radius.map_err(|e| FlowError {
        source: e,
        partial: trajectory.clone(),
    })?;
    Ok(AggregationReport { trajectory, radius })
}

/// Particle flow of a quadratic potential `a/2 |x - m|^2` alone, compared
/// with the OU mean `m + e^{-ta}(m0 - m)`.
#[derive(Debug, Clone)]
pub struct OuMeanParams {
    pub n_particles: usize,
    pub a: f64,
    pub m: Vec<f64>,
    pub tau: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_projections: usize,
    pub inner_step: f64,
    pub projection_mode: ProjectionMode,
    pub dilation: bool,
    pub seed: u64,
}

impl Default for OuMeanParams {
    fn default() -> Self {
        Self {
            n_particles: 200,
            a: 1.0,
            m: vec![1.0, -0.5],
            tau: 0.05,
            n_outer: 80,
            n_inner: 30,
            n_projections: 500,
            inner_step: 0.04,
            projection_mode: ProjectionMode::FrozenPerStep,
            dilation: true,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct OuMeanReport {
    pub trajectory: Trajectory<f64>,
    pub times: Vec<f64>,
    pub flow_means: Vec<Vec<f64>>,
    pub exact_means: Vec<Vec<f64>>,
    pub max_error: f64,
}

pub fn run_ou_mean(p: &OuMeanParams) -> Result<OuMeanReport, FlowError<f64>> {
    let d = p.m.len();
    let setup = || -> Result<_> {
        let a = Matrix::scaled_identity(d, p.a);
        let q = QuadraticPotential::new(a.clone(), p.m.clone())?;
        let mu0 = sample_gaussian(&GaussianMeasure::standard(d)?, p.n_particles, &mut Rng::new(p.seed))?;
        let spec = OuSpec::new(a, p.m.clone(), mu0.mean(), mu0.covariance())?;
        Ok((EnergySpec::Potential(Potential::Quadratic(q)), mu0, spec))
    };
    let (energy, mu0, spec) = setup().map_err(no_partial)?;
    let mut cfg = SolverConfig::new(p.tau, p.n_outer, p.n_inner, p.n_projections, p.inner_step, p.seed);
    cfg.inner_method = InnerMethod::Plain;
    cfg.projection_mode = p.projection_mode;
    cfg.dilation = p.dilation;
    let trajectory = run_flow(Measure::Cloud(mu0), &energy, &cfg, &mut Rng::new(p.seed.wrapping_add(1)))?;
    let mut times = Vec::new();
    let mut flow_means = Vec::new();
    let mut exact_means = Vec::new();
    let mut max_error = 0.0f64;
    for (k, snap) in trajectory.snapshots.iter().enumerate() {
        let t = trajectory.time(k);
        let fm = snap.mean();
        let em = ou_analytic(&spec, t)
            .map_err(|e| FlowError {
                source: e,
                partial: trajectory.clone(),
            })?
            .mean()
            .to_vec();
        let err = fm.iter().zip(&em).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        max_error = max_error.max(err);
        times.push(t);
        flow_means.push(fm);
        exact_means.push(em);
    }
    Ok(OuMeanReport {
        trajectory,
        times,
        flow_means,
        exact_means,
        max_error,
    })
}

/// Exact-`W_2^2` functional to a uniform target cloud: dilated SW-JKO flow
/// against direct descent on `F`.
#[derive(Debug, Clone)]
pub struct CompareParams {
    pub n_particles: usize,
    pub tau: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub n_projections: usize,
    pub inner_step: f64,
    pub direct_step: f64,
    pub seed: u64,
}

impl Default for CompareParams {
    fn default() -> Self {
        Self {
            n_particles: 20,
            tau: 0.05,
            n_outer: 100,
            n_inner: 30,
            n_projections: 200,
            inner_step: 0.02,
            direct_step: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct CompareReport {
    pub target: ParticleCloud<f64>,
    pub flow: Trajectory<f64>,
    pub direct: Trajectory<f64>,
    pub flow_hausdorff: f64,
    pub direct_hausdorff: f64,
}

pub fn run_compare(p: &CompareParams) -> Result<CompareReport, FlowError<f64>> {
    let mut rng = Rng::new(p.seed);
    let target = sample_gaussian(&GaussianMeasure::isotropic(vec![2.0, 2.0], 0.5).map_err(no_partial)?, p.n_particles, &mut rng)
        .map_err(no_partial)?;
    let mu0 = sample_gaussian(&dense_iso(2, 1.0).map_err(no_partial)?, p.n_particles, &mut rng).map_err(no_partial)?;
    let energy = EnergySpec::W2ToTargetExact(target.clone());
    let mut cfg = SolverConfig::new(p.tau, p.n_outer, p.n_inner, p.n_projections, p.inner_step, p.seed);
    cfg.inner_method = InnerMethod::Plain;
    cfg.projection_mode = ProjectionMode::FrozenPerStep;
    cfg.dilation = true;
    let flow = run_flow(Measure::Cloud(mu0.clone()), &energy, &cfg, &mut Rng::new(p.seed.wrapping_add(1)))?;
    let mut dcfg = cfg.clone();
    dcfg.inner_step = p.direct_step;
    dcfg.n_inner = 1;
    let direct = direct_minimize(Measure::Cloud(mu0), &energy, &dcfg, &mut Rng::new(p.seed.wrapping_add(2)))?;
    let flow_hausdorff = hausdorff(flow.last().as_cloud().expect("cloud"), &target);
    let direct_hausdorff = hausdorff(direct.last().as_cloud().expect("cloud"), &target);
    Ok(CompareReport {
        target,
        flow,
        direct,
        flow_hausdorff,
        direct_hausdorff,
    })
}

/// Langevin sampler for `1/2 (x - b)^T A (x - b)` from `N(0, I)`.
#[derive(Debug, Clone)]
pub struct UlaParams {
    pub n_particles: usize,
    pub a: Matrix<f64>,
    pub b: Vec<f64>,
    pub step: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl Default for UlaParams {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            a: Matrix::identity(2),
            b: vec![1.0, -1.0],
            step: 1e-3,
            horizon: 8.0,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct UlaReport {
    pub cloud: ParticleCloud<f64>,
    pub mean: Vec<f64>,
    pub covariance: Matrix<f64>,
    pub target: GaussianMeasure<f64>,
}

pub fn run_ula(p: &UlaParams) -> Result<UlaReport> {
    let d = p.b.len();
    let q = QuadraticPotential::new(p.a.clone(), p.b.clone())?;
    let mut rng = Rng::new(p.seed);
    let x0 = sample_gaussian(&GaussianMeasure::standard(d)?, p.n_particles, &mut rng)?;
    let cfg = UlaConfig {
        step: p.step,
        horizon: p.horizon,
        checkpoints: vec![p.horizon],
        noise: true,
    };
    let out = euler_maruyama(&Potential::Quadratic(q), &x0, &cfg, &mut rng)?;
    let cloud = out.clouds.into_iter().next().expect("one checkpoint");
    let target = OuSpec::new(p.a.clone(), p.b.clone(), vec![0.0; d], Matrix::identity(d))?.stationary()?;
    Ok(UlaReport {
        mean: cloud.mean(),
        covariance: cloud.covariance(),
        cloud,
        target,
    })
}

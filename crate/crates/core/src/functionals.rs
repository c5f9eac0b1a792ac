//! Energy functionals `F(mu)` with values and gradients for both
//! parameterizations.
//!
//! Particle clouds are differentiated with respect to positions, grids
//! with respect to weights. Each kind declares which parameterization it
//! supports; asking for the other one is a [`Error::Capability`] error.
//!
//! | kind            | cloud value                    | grid value                          |
//! |-----------------|--------------------------------|-------------------------------------|
//! | potential       | `(1/n) sum V(x_i)`             | `sum V(x_i) rho_i`                  |
//! | entropy         | unsupported                    | `sum rho_i log(rho_i / l)`          |
//! | interaction     | `1/2 sum_{i!=j} W(x_i-x_j)/n^2`| `1/2 sum_ij rho_i rho_j W(x_i-x_j)` |
//! | SW to target    | `1/2 SW^2(mu, nu)`             | `1/2 SW^2(mu, nu) + lambda H(mu)`   |
//! | exact W2        | `W_2^2(mu, nu)` by assignment  | unsupported                         |

use std::fmt::Debug;
use std::sync::Arc;

use crate::assignment::solve_assignment;
use crate::error::{domain, invalid, Error, Result};
use crate::linalg::{spd_eigen, Matrix};
use crate::measures::{Atoms, GridMeasure, Measure, Parameterization, ParticleCloud, ProjectionSet};
use crate::scalar::{norm_sq, Scalar};
use crate::sliced::{sw2_grad_positions, sw2_grad_weights, Quadrature};

/// User-supplied differentiable potential.
pub trait PotentialFn<T>: Send + Sync + Debug {
    fn value(&self, x: &[T]) -> T;
    /// Writes `grad V(x)` into `out`.
    fn gradient(&self, x: &[T], out: &mut [T]);
}

/// `V(x) = 1/2 (x - center)^T A (x - center)` with `A` symmetric positive
/// definite. Its Fokker-Planck stationary law is `N(center, A^{-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential<T> {
    a: Matrix<T>,
    center: Vec<T>,
}

impl<T: Scalar> QuadraticPotential<T> {
    pub fn new(a: Matrix<T>, center: Vec<T>) -> Result<Self> {
        if a.rows() != center.len() || a.cols() != center.len() || center.is_empty() {
            return Err(invalid("quadratic potential: matrix and center dimensions differ"));
        }
        spd_eigen(&a, "potential matrix")?;
        Ok(Self { a, center })
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[T]) -> T {
        let d = self.dim();
        let mut acc = T::zero();
        for i in 0..d {
            let di = x[i] - self.center[i];
            let mut row = T::zero();
            for j in 0..d {
                row = row + self.a[(i, j)] * (x[j] - self.center[j]);
            }
            acc = acc + di * row;
        }
        T::lit(0.5) * acc
    }

    fn gradient(&self, x: &[T], out: &mut [T]) {
        let d = self.dim();
        for i in 0..d {
            let mut row = T::zero();
            for j in 0..d {
                row = row + self.a[(i, j)] * (x[j] - self.center[j]);
            }
            out[i] = row;
        }
    }
}

/// External potentials.
#[derive(Debug, Clone)]
pub enum Potential<T> {
    Zero,
    Quadratic(QuadraticPotential<T>),
    /// `V(x) = -coef * ln|x|`, the radial drift of the aggregation-drift
    /// model (`coef = alpha / beta`).
    LogRadial { coef: T },
    Custom(Arc<dyn PotentialFn<T>>),
}

impl<T: Scalar> Potential<T> {
    pub fn value(&self, x: &[T]) -> T {
        match self {
            Potential::Zero => T::zero(),
            Potential::Quadratic(q) => q.value(x),
            Potential::LogRadial { coef } => -*coef * T::lit(0.5) * norm_sq(x).ln(),
            Potential::Custom(f) => f.value(x),
        }
    }

    pub fn gradient(&self, x: &[T], out: &mut [T]) {
        match self {
            Potential::Zero => out.iter_mut().for_each(|g| *g = T::zero()),
            Potential::Quadratic(q) => q.gradient(x, out),
            Potential::LogRadial { coef } => {
                let c = -*coef / norm_sq(x);
                for (g, &xi) in out.iter_mut().zip(x) {
                    *g = c * xi;
                }
            }
            Potential::Custom(f) => f.gradient(x, out),
        }
    }
}

/// Interaction kernel `W(x) = |x|^a / a - |x|^b / b` with the convention
/// `|x|^0 / 0 = ln|x|`, so `grad W(x) = (|x|^{a-2} - |x|^{b-2}) x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionKernel<T> {
    a: T,
    b: T,
}

impl<T: Scalar> InteractionKernel<T> {
    /// Requires `a > b >= 0`.
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(a > b) || b < T::zero() || !a.is_finite() {
            return Err(invalid(format!("interaction kernel needs a > b >= 0 (got a={a}, b={b})")));
        }
        Ok(Self { a, b })
    }

    /// `|x|^4/4 - |x|^2/2`: steady state is a ring of radius 1/2.
    pub fn attractive_repulsive() -> Self {
        Self {
            a: T::lit(4.0),
            b: T::lit(2.0),
        }
    }

    /// `|x|^2/2 - ln|x|`: steady state is the uniform disk of radius 1.
    pub fn quadratic_log() -> Self {
        Self {
            a: T::lit(2.0),
            b: T::zero(),
        }
    }

    pub fn exponents(&self) -> (T, T) {
        (self.a, self.b)
    }

    /// Singular at the origin (log kernel): self-terms excluded and
    /// coincident particles rejected.
    pub fn is_singular(&self) -> bool {
        self.b == T::zero()
    }

    /// `(W(x), c)` with `grad W(x) = c x`, from `r2 = |x|^2 > 0`.
    #[inline]
    fn eval(&self, r2: T) -> (T, T) {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let half = T::lit(0.5);
        if self.a == four && self.b == two {
            return (r2 * r2 / four - r2 * half, r2 - T::one());
        }
        if self.a == two && self.b == T::zero() {
            return (r2 * half - half * r2.ln(), T::one() - T::one() / r2);
        }
        let r = r2.sqrt();
        let term = |p: T| -> (T, T) {
            if p == T::zero() {
                (r.ln(), T::one() / r2)
            } else {
                (r.powf(p) / p, r.powf(p - two))
            }
        };
        let (wa, ca) = term(self.a);
        let (wb, cb) = term(self.b);
        (wa - wb, ca - cb)
    }

    /// `W(x)` for `x = diff`, zero at the origin for non-singular kernels.
    pub fn value(&self, diff: &[T]) -> T {
        let r2 = norm_sq(diff);
        if r2 == T::zero() {
            return if self.is_singular() { T::neg_infinity() } else { T::zero() };
        }
        self.eval(r2).0
    }
}

/// `1/2 SW_2^2(mu, target) + lambda H(mu)` with pinned projections, so the
/// energy is a deterministic function of `mu`.
#[derive(Debug, Clone)]
pub struct SwTarget<T> {
    pub target: Measure<T>,
    pub lambda: T,
    pub projections: ProjectionSet<T>,
    /// Used for clouds whose size differs from a uniform target; grids
    /// always use exact quadrature so value and weight gradient agree.
    pub quadrature: Quadrature<T>,
}

/// Energy functional; see the module table for the formulas.
#[derive(Debug, Clone)]
pub enum EnergySpec<T> {
    Potential(Potential<T>),
    EntropyGrid,
    Interaction(InteractionKernel<T>),
    SwToTarget(Box<SwTarget<T>>),
    /// Exact `W_2^2` to an equal-size uniform target cloud.
    W2ToTargetExact(ParticleCloud<T>),
    WeightedSum(Vec<(T, EnergySpec<T>)>),
}

impl<T: Scalar> EnergySpec<T> {
    /// Fokker-Planck free energy `int V dmu + H(mu)` (grids only).
    pub fn fokker_planck(potential: Potential<T>) -> Self {
        EnergySpec::WeightedSum(vec![
            (T::one(), EnergySpec::Potential(potential)),
            (T::one(), EnergySpec::EntropyGrid),
        ])
    }

    pub fn sw_to_target(target: Measure<T>, lambda: T, projections: ProjectionSet<T>) -> Result<Self> {
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(invalid("entropy weight lambda must be finite and >= 0"));
        }
        Ok(EnergySpec::SwToTarget(Box::new(SwTarget {
            target,
            lambda,
            projections,
            quadrature: Quadrature::default(),
        })))
    }

    /// Whether the energy can be evaluated on the given parameterization.
    pub fn supports(&self, param: Parameterization) -> bool {
        self.capability_error(param).is_none()
    }

    fn capability_error(&self, param: Parameterization) -> Option<Error> {
        use Parameterization::*;
        match (self, param) {
            (EnergySpec::EntropyGrid, Particles) => Some(Error::Capability(
                "entropy is only defined for grid measures; particle clouds have no density".into(),
            )),
            (EnergySpec::SwToTarget(t), Particles) if t.lambda > T::zero() => Some(Error::Capability(
                "SW-to-target with lambda > 0 needs entropy, unavailable on particle clouds".into(),
            )),
            (EnergySpec::W2ToTargetExact(_), Grid) => Some(Error::Capability(
                "exact W2 to target is only implemented for particle clouds".into(),
            )),
            (EnergySpec::WeightedSum(parts), _) => {
                parts.iter().find_map(|(_, e)| e.capability_error(param))
            }
            _ => None,
        }
    }

    fn check(&self, param: Parameterization) -> Result<()> {
        match self.capability_error(param) {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let EnergySpec::WeightedSum(parts) = self {
            for (w, e) in parts {
                if !w.is_finite() {
                    return Err(invalid("weighted-sum coefficients must be finite"));
                }
                if matches!(e, EnergySpec::EntropyGrid) && *w < T::zero() {
                    return Err(invalid("entropy coefficient must be >= 0"));
                }
                e.validate()?;
            }
        }
        Ok(())
    }

    pub fn value(&self, mu: &Measure<T>) -> Result<T> {
        match mu {
            Measure::Cloud(c) => self.cloud_value(c),
            Measure::Grid(g) => self.grid_value(g),
        }
    }

    pub fn cloud_value(&self, mu: &ParticleCloud<T>) -> Result<T> {
        self.check(Parameterization::Particles)?;
        self.cloud_acc(mu, T::one(), None)
    }

    pub fn cloud_value_and_grad(&self, mu: &ParticleCloud<T>) -> Result<(T, Matrix<T>)> {
        self.check(Parameterization::Particles)?;
        let mut g = Matrix::zeros(mu.len(), mu.dim());
        let v = self.cloud_acc(mu, T::one(), Some(&mut g))?;
        Ok((v, g))
    }

    pub fn grid_value(&self, mu: &GridMeasure<T>) -> Result<T> {
        self.check(Parameterization::Grid)?;
        self.grid_acc(mu, T::one(), None)
    }

    pub fn grid_value_and_grad(&self, mu: &GridMeasure<T>) -> Result<(T, Vec<T>)> {
        self.check(Parameterization::Grid)?;
        let mut g = vec![T::zero(); mu.len()];
        let v = self.grid_acc(mu, T::one(), Some(&mut g))?;
        Ok((v, g))
    }

    /// Adds `scale * grad F` into `grad` and returns `scale * F`.
    fn cloud_acc(&self, mu: &ParticleCloud<T>, scale: T, grad: Option<&mut Matrix<T>>) -> Result<T> {
        match self {
            EnergySpec::Potential(v) => potential_cloud(v, mu, scale, grad),
            EnergySpec::EntropyGrid => Err(self.capability_error(Parameterization::Particles).unwrap()),
            EnergySpec::Interaction(k) => interaction_cloud(k, mu, scale, grad),
            EnergySpec::SwToTarget(t) => {
                if t.lambda > T::zero() {
                    return Err(self.capability_error(Parameterization::Particles).unwrap());
                }
                let half = T::lit(0.5) * scale;
                let (est, g) = sw2_grad_positions(mu, &t.target, &t.projections, &t.quadrature)?;
                if let Some(out) = grad {
                    add_scaled(out.as_mut_slice(), g.as_slice(), half);
                }
                Ok(half * est.value)
            }
            EnergySpec::W2ToTargetExact(target) => w2_exact_cloud(target, mu, scale, grad),
            EnergySpec::WeightedSum(parts) => {
                let mut grad = grad;
                let mut total = T::zero();
                for (w, e) in parts {
                    if *w == T::zero() {
                        continue;
                    }
                    total = total + e.cloud_acc(mu, scale * *w, grad.as_deref_mut())?;
                }
                Ok(total)
            }
        }
    }

    fn grid_acc(&self, mu: &GridMeasure<T>, scale: T, grad: Option<&mut [T]>) -> Result<T> {
        match self {
            EnergySpec::Potential(v) => potential_grid(v, mu, scale, grad),
            EnergySpec::EntropyGrid => entropy_grid(mu, scale, grad),
            EnergySpec::Interaction(k) => interaction_grid(k, mu, scale, grad),
            EnergySpec::SwToTarget(t) => {
                let half = T::lit(0.5) * scale;
                let mut grad = grad;
                let (est, g) = sw2_grad_weights(mu, &t.target, &t.projections)?;
                if let Some(out) = grad.as_deref_mut() {
                    add_scaled(out, &g, half);
                }
                let mut v = half * est.value;
                if t.lambda > T::zero() {
                    v = v + entropy_grid(mu, scale * t.lambda, grad)?;
                }
                Ok(v)
            }
            EnergySpec::W2ToTargetExact(_) => Err(self.capability_error(Parameterization::Grid).unwrap()),
            EnergySpec::WeightedSum(parts) => {
                let mut grad = grad;
                let mut total = T::zero();
                for (w, e) in parts {
                    if *w == T::zero() {
                        continue;
                    }
                    total = total + e.grid_acc(mu, scale * *w, grad.as_deref_mut())?;
                }
                Ok(total)
            }
        }
    }
}

fn add_scaled<T: Scalar>(out: &mut [T], g: &[T], s: T) {
    for (o, &x) in out.iter_mut().zip(g) {
        *o = *o + s * x;
    }
}

fn potential_cloud<T: Scalar>(
    v: &Potential<T>,
    mu: &ParticleCloud<T>,
    scale: T,
    grad: Option<&mut Matrix<T>>,
) -> Result<T> {
    let n = mu.len();
    let w = scale / T::from_usize_lossy(n);
    let mut total = T::zero();
    for i in 0..n {
        let vi = v.value(mu.point(i));
        if !vi.is_finite() {
            return Err(domain(format!("potential is not finite at particle {i}")));
        }
        total = total + vi;
    }
    if let Some(g) = grad {
        let mut buf = vec![T::zero(); mu.dim()];
        for i in 0..n {
            v.gradient(mu.point(i), &mut buf);
            if buf.iter().any(|x| !x.is_finite()) {
                return Err(domain(format!("potential gradient is not finite at particle {i}")));
            }
            add_scaled(g.row_mut(i), &buf, w);
        }
    }
    Ok(w * total)
}

fn potential_grid<T: Scalar>(
    v: &Potential<T>,
    mu: &GridMeasure<T>,
    scale: T,
    grad: Option<&mut [T]>,
) -> Result<T> {
    let mut total = T::zero();
    let mut grad = grad;
    for (i, &rho) in mu.weight_slice().iter().enumerate() {
        let vi = v.value(mu.point(i));
        if !vi.is_finite() {
            return Err(domain(format!("potential is not finite at grid point {i}")));
        }
        total = total + vi * rho;
        if let Some(g) = grad.as_deref_mut() {
            g[i] = g[i] + scale * vi;
        }
    }
    Ok(scale * total)
}

/// `sum rho_i log(rho_i / l)` with `0 log 0 = 0`. The gradient at a zero
/// weight uses the smallest positive scalar in place of `rho_i`.
fn entropy_grid<T: Scalar>(mu: &GridMeasure<T>, scale: T, grad: Option<&mut [T]>) -> Result<T> {
    let l = mu.cell_volume();
    let mut total = T::zero();
    let mut grad = grad;
    for (i, &rho) in mu.weight_slice().iter().enumerate() {
        if rho > T::zero() {
            total = total + rho * (rho / l).ln();
        }
        if let Some(g) = grad.as_deref_mut() {
            let r = rho.max(T::min_positive_value());
            g[i] = g[i] + scale * ((r / l).ln() + T::one());
        }
    }
    Ok(scale * total)
}

fn interaction_cloud<T: Scalar>(
    k: &InteractionKernel<T>,
    mu: &ParticleCloud<T>,
    scale: T,
    grad: Option<&mut Matrix<T>>,
) -> Result<T> {
    let n = mu.len();
    let d = mu.dim();
    let nf = T::from_usize_lossy(n);
    let w = scale / (nf * nf);
    let pts = mu.points();
    let mut total = T::zero();
    let mut grad = grad;
    let mut diff = vec![T::zero(); d];
    for i in 0..n {
        let xi = pts.row(i);
        for j in (i + 1)..n {
            let xj = pts.row(j);
            let mut r2 = T::zero();
            for c in 0..d {
                diff[c] = xi[c] - xj[c];
                r2 = r2 + diff[c] * diff[c];
            }
            if r2 == T::zero() {
                if k.is_singular() {
                    return Err(domain(format!(
                        "particles {i} and {j} coincide under a singular interaction kernel"
                    )));
                }
                continue;
            }
            let (wv, c) = k.eval(r2);
            total = total + wv;
            if let Some(g) = grad.as_deref_mut() {
                let s = w * c;
                for cc in 0..d {
                    let v = s * diff[cc];
                    g[(i, cc)] = g[(i, cc)] + v;
                    g[(j, cc)] = g[(j, cc)] - v;
                }
            }
        }
    }
    // each unordered pair appears twice in the double sum, halved by 1/2
    Ok(w * total)
}

fn interaction_grid<T: Scalar>(
    k: &InteractionKernel<T>,
    mu: &GridMeasure<T>,
    scale: T,
    grad: Option<&mut [T]>,
) -> Result<T> {
    let n = mu.len();
    let rho = mu.weight_slice();
    let mut total = T::zero();
    let mut grad = grad;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff: Vec<T> = mu.point(i).iter().zip(mu.point(j)).map(|(&a, &b)| a - b).collect();
            let wij = k.eval(norm_sq(&diff)).0;
            total = total + rho[i] * rho[j] * wij;
            if let Some(g) = grad.as_deref_mut() {
                g[i] = g[i] + scale * rho[j] * wij;
                g[j] = g[j] + scale * rho[i] * wij;
            }
        }
    }
    Ok(scale * total)
}

/// Squared-distance cost matrix between two clouds.
pub fn squared_distance_matrix<T: Scalar>(x: &ParticleCloud<T>, y: &ParticleCloud<T>) -> Matrix<T> {
    let mut c = Matrix::zeros(x.len(), y.len());
    for i in 0..x.len() {
        for j in 0..y.len() {
            let mut s = T::zero();
            for (&a, &b) in x.point(i).iter().zip(y.point(j)) {
                s = s + (a - b) * (a - b);
            }
            c[(i, j)] = s;
        }
    }
    c
}

/// Exact `W_2^2` between equal-size uniform clouds and its optimal
/// matching (`perm[i]` is the target index of particle `i`).
pub fn w2_exact_uniform<T: Scalar>(mu: &ParticleCloud<T>, target: &ParticleCloud<T>) -> Result<(T, Vec<usize>)> {
    if mu.len() != target.len() {
        return Err(invalid(format!(
            "exact W2 needs equal sizes, got {} and {}",
            mu.len(),
            target.len()
        )));
    }
    if mu.dim() != target.dim() {
        return Err(invalid("exact W2: dimension mismatch"));
    }
    let cost = squared_distance_matrix(mu, target);
    let a = solve_assignment(&cost)?;
    Ok((a.cost / T::from_usize_lossy(mu.len()), a.perm))
}

fn w2_exact_cloud<T: Scalar>(
    target: &ParticleCloud<T>,
    mu: &ParticleCloud<T>,
    scale: T,
    grad: Option<&mut Matrix<T>>,
) -> Result<T> {
    let (value, perm) = w2_exact_uniform(mu, target)?;
    if let Some(g) = grad {
        let s = scale * T::lit(2.0) / T::from_usize_lossy(mu.len());
        for (i, &j) in perm.iter().enumerate() {
            let y = target.point(j);
            for (c, (&xc, &yc)) in mu.point(i).iter().zip(y).enumerate() {
                g[(i, c)] = g[(i, c)] + s * (xc - yc);
            }
        }
    }
    Ok(scale * value)
}

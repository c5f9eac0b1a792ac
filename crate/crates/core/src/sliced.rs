//! Sliced-Wasserstein estimation.
//!
//! `SW_2^2(mu, nu)` is approximated by averaging the one-dimensional
//! squared Wasserstein distance between the pushforwards of `mu` and `nu`
//! along `L` random directions. Each 1D distance is computed from quantile
//! functions:
//!
//! * equal-size uniform clouds: sorted matching, exact;
//! * general weighted atoms, [`Quadrature::Exact`]: merged breakpoints of
//!   both cumulative distribution functions, exact;
//! * general weighted atoms, [`Quadrature::Rectangle`]: midpoint rule on
//!   `M` quantile levels.
//!
//! Gradients are provided with respect to particle positions and with
//! respect to grid weights. The weight gradient differentiates the exact
//! 1D integral through its cumulative breakpoints, so it is consistent
//! with [`Quadrature::Exact`] values (the rectangle estimate is piecewise
//! constant in the weights).
//!
//! Ties between projected values are resolved by a stable sort; the
//! resulting matching yields a valid subgradient.

use crate::error::{invalid, Result};
use crate::linalg::{sqrt_psd, Matrix};
use crate::measures::{project_values, Atoms, GaussianMeasure, GridMeasure, ParticleCloud, ProjectionSet};
use crate::scalar::{argsort, dot, norm_sq, Scalar};

/// Default number of rectangle-rule quantile levels.
pub const DEFAULT_QUANTILE_LEVELS: usize = 100;

/// Midpoint quantile levels `u_j = (j - 1/2) / M`, `j = 1..M`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileGrid<T> {
    levels: Vec<T>,
}

impl<T: Scalar> QuantileGrid<T> {
    pub fn midpoints(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("quantile grid needs M >= 1"));
        }
        let mf = T::from_usize_lossy(m);
        let half = T::lit(0.5);
        let levels = (0..m)
            .map(|j| (T::from_usize_lossy(j) + half) / mf)
            .collect();
        Ok(Self { levels })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[T] {
        &self.levels
    }
}

impl<T: Scalar> Default for QuantileGrid<T> {
    fn default() -> Self {
        Self::midpoints(DEFAULT_QUANTILE_LEVELS).expect("M > 0")
    }
}

/// How the 1D quantile integral is evaluated for weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadrature<T> {
    Rectangle(QuantileGrid<T>),
    Exact,
}

impl<T: Scalar> Default for Quadrature<T> {
    fn default() -> Self {
        Quadrature::Rectangle(QuantileGrid::default())
    }
}

/// Monte-Carlo sliced-Wasserstein estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SwEstimate<T> {
    /// Squared distance, averaged over projections.
    pub value: T,
    pub n_projections: usize,
    pub seed: u64,
    /// Sample standard deviation of the per-projection values over `sqrt(L)`.
    pub std_error: T,
}

/// Atoms sorted ascending with their cumulative weights; `perm[k]` is the
/// original index of the `k`-th smallest atom.
#[derive(Debug, Clone)]
pub(crate) struct Sorted1d<T> {
    pub values: Vec<T>,
    pub cum: Vec<T>,
    pub perm: Vec<usize>,
}

impl<T: Scalar> Sorted1d<T> {
    pub fn new(values: &[T], weights: &[T]) -> Self {
        let perm = argsort(values);
        Self::with_perm(values, weights, perm)
    }

    pub fn with_perm(values: &[T], weights: &[T], perm: Vec<usize>) -> Self {
        let sorted_values = perm.iter().map(|&i| values[i]).collect();
        let cum = cumulative(perm.iter().map(|&i| weights[i]));
        Self {
            values: sorted_values,
            cum,
            perm,
        }
    }

    pub fn uniform(values: &[T]) -> Self {
        let n = values.len();
        let w = T::one() / T::from_usize_lossy(n);
        let perm = argsort(values);
        let sorted_values = perm.iter().map(|&i| values[i]).collect();
        Self {
            values: sorted_values,
            cum: cumulative(std::iter::repeat(w).take(n)),
            perm,
        }
    }

    /// Index of the smallest atom with cumulative weight `>= u`.
    fn quantile_index(&self, u: T, start: usize) -> usize {
        let last = self.cum.len() - 1;
        let mut k = start;
        while k < last && self.cum[k] < u {
            k += 1;
        }
        k
    }
}

/// Running sum whose final entry is pinned to exactly one, so the
/// breakpoints of two measures end together.
fn cumulative<T: Scalar>(weights: impl Iterator<Item = T>) -> Vec<T> {
    let mut acc = T::zero();
    let mut cum: Vec<T> = weights
        .map(|w| {
            acc = acc + w;
            acc
        })
        .collect();
    if let Some(last) = cum.last_mut() {
        *last = T::one();
    }
    cum
}

fn check_weights<T: Scalar>(w: &[T], what: &str) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x < T::zero()) {
        return Err(invalid(format!("{what} weights must be finite and non-negative")));
    }
    let s: T = w.iter().copied().sum();
    if (s - T::one()).abs() > T::lit(1e-9) {
        return Err(invalid(format!("{what} weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn check_atoms<T: Scalar>(atoms: &[T], weights: &[T], what: &str) -> Result<()> {
    if atoms.is_empty() {
        return Err(invalid(format!("{what} has no atoms")));
    }
    if atoms.len() != weights.len() {
        return Err(invalid(format!("{what}: atom and weight counts differ")));
    }
    if atoms.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{what} atoms must be finite")));
    }
    check_weights(weights, what)
}

/// Exact `W_2^2` between two equal-size uniform empirical measures on the
/// line: mean squared difference of order statistics.
pub fn w2_1d_uniform_sorted<T: Scalar>(xs: &[T], ys: &[T]) -> Result<T> {
    if xs.is_empty() || ys.is_empty() {
        return Err(invalid("w2_1d_uniform_sorted needs non-empty inputs"));
    }
    if xs.len() != ys.len() {
        return Err(invalid(format!(
            "w2_1d_uniform_sorted needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let a = crate::scalar::sorted(xs);
    let b = crate::scalar::sorted(ys);
    Ok(sorted_pair_value(&a, &b))
}

fn sorted_pair_value<T: Scalar>(a: &[T], b: &[T]) -> T {
    let s: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    s / T::from_usize_lossy(a.len())
}

/// Rectangle-rule `W_2^2` on the quantile levels of `q`.
pub fn w2_1d_quantile<T: Scalar>(
    atoms_a: &[T],
    weights_a: &[T],
    atoms_b: &[T],
    weights_b: &[T],
    q: &QuantileGrid<T>,
) -> Result<T> {
    check_atoms(atoms_a, weights_a, "first measure")?;
    check_atoms(atoms_b, weights_b, "second measure")?;
    let a = Sorted1d::new(atoms_a, weights_a);
    let b = Sorted1d::new(atoms_b, weights_b);
    Ok(rectangle_value(&a, &b, q, None))
}

/// Exact `W_2^2` between weighted atoms via merged CDF breakpoints.
pub fn w2_1d_exact<T: Scalar>(
    atoms_a: &[T],
    weights_a: &[T],
    atoms_b: &[T],
    weights_b: &[T],
) -> Result<T> {
    check_atoms(atoms_a, weights_a, "first measure")?;
    check_atoms(atoms_b, weights_b, "second measure")?;
    let a = Sorted1d::new(atoms_a, weights_a);
    let b = Sorted1d::new(atoms_b, weights_b);
    Ok(exact_value(&a, &b, None))
}

/// Midpoint rule; optionally accumulates `d/d a_(k)` into `grad_sorted`.
fn rectangle_value<T: Scalar>(
    a: &Sorted1d<T>,
    b: &Sorted1d<T>,
    q: &QuantileGrid<T>,
    mut grad_sorted: Option<&mut [T]>,
) -> T {
    let m = T::from_usize_lossy(q.len());
    let two_over_m = T::lit(2.0) / m;
    let (mut ka, mut kb) = (0, 0);
    let mut total = T::zero();
    for &u in q.levels() {
        ka = a.quantile_index(u, ka);
        kb = b.quantile_index(u, kb);
        let diff = a.values[ka] - b.values[kb];
        total = total + diff * diff;
        if let Some(g) = grad_sorted.as_deref_mut() {
            g[ka] = g[ka] + two_over_m * diff;
        }
    }
    total / m
}

/// Exact merge; optionally accumulates `d/d a_(k)` into `grad_sorted`.
fn exact_value<T: Scalar>(a: &Sorted1d<T>, b: &Sorted1d<T>, mut grad_sorted: Option<&mut [T]>) -> T {
    let (n, m) = (a.values.len(), b.values.len());
    let (mut i, mut j) = (0, 0);
    let mut prev = T::zero();
    let mut total = T::zero();
    let two = T::lit(2.0);
    while i < n && j < m {
        let ca = a.cum[i];
        let cb = b.cum[j];
        let next = ca.min(cb);
        let len = next - prev;
        if len > T::zero() {
            let diff = a.values[i] - b.values[j];
            total = total + len * diff * diff;
            if let Some(g) = grad_sorted.as_deref_mut() {
                g[i] = g[i] + two * len * diff;
            }
            prev = next;
        }
        if ca <= cb {
            i += 1;
        }
        if cb <= ca {
            j += 1;
        }
    }
    total
}

/// Exact `W_2^2` and its derivative with respect to the weights of `a`
/// (in sorted order), through the cumulative breakpoints
/// `c_k = sum_{j<=k} w_(j)`:
///
/// `dW/dc_k = (a_k - b(c_k))^2 - (a_{k+1} - b(c_k))^2`,
/// `dW/dw_(i) = sum_{k>=i} dW/dc_k`,
///
/// with `b` the quantile function of `b`. The last breakpoint is pinned at
/// one, so the gradient is defined up to an additive constant. When `c_k`
/// coincides with a breakpoint of `b` the two one-sided derivatives are
/// averaged.
fn exact_weight_grad<T: Scalar>(a: &Sorted1d<T>, b: &Sorted1d<T>, grad_sorted: &mut [T]) -> T {
    let value = exact_value(a, b, None);
    let n = a.values.len();
    let m = b.values.len();
    let tie_tol = T::epsilon() * T::lit(64.0);
    let half = T::lit(0.5);
    let mut l = 0usize;
    let mut suffix = T::zero();
    // breakpoint derivatives, then suffix sums from the right
    let mut dc = vec![T::zero(); n];
    for k in 0..n.saturating_sub(1) {
        let c = a.cum[k];
        while l < m - 1 && b.cum[l] < c - tie_tol {
            l += 1;
        }
        let (ak, ak1) = (a.values[k], a.values[k + 1]);
        let side = |bv: T| (ak - bv) * (ak - bv) - (ak1 - bv) * (ak1 - bv);
        dc[k] = if l < m - 1 && (b.cum[l] - c).abs() <= tie_tol {
            half * (side(b.values[l]) + side(b.values[l + 1]))
        } else {
            side(b.values[l])
        };
    }
    for i in (0..n).rev() {
        suffix = suffix + dc[i];
        grad_sorted[i] = suffix;
    }
    value
}

fn dims_match<T: Scalar, A: Atoms<T> + ?Sized, B: Atoms<T> + ?Sized>(
    mu: &A,
    nu: &B,
    projections: &ProjectionSet<T>,
) -> Result<()> {
    if mu.is_empty() || nu.is_empty() {
        return Err(invalid("measures must have at least one atom"));
    }
    if mu.dim() != nu.dim() || mu.dim() != projections.dim() {
        return Err(invalid(format!(
            "dimension mismatch: measures in R^{} and R^{}, projections in R^{}",
            mu.dim(),
            nu.dim(),
            projections.dim()
        )));
    }
    Ok(())
}

fn check_measure_weights<T: Scalar, A: Atoms<T> + ?Sized>(m: &A, what: &str) -> Result<()> {
    if let crate::measures::Weights::Explicit(w) = m.weights() {
        check_weights(w, what)?;
    }
    Ok(())
}

fn equal_uniform<T: Scalar, A: Atoms<T> + ?Sized, B: Atoms<T> + ?Sized>(mu: &A, nu: &B) -> bool {
    mu.weights().is_uniform() && nu.weights().is_uniform() && mu.len() == nu.len()
}

fn per_projection_1d<T: Scalar>(
    mu_vals: &[T],
    mu_w: &[T],
    nu_vals: &[T],
    nu_w: &[T],
    uniform: bool,
    quad: &Quadrature<T>,
) -> T {
    if uniform {
        let a = crate::scalar::sorted(mu_vals);
        let b = crate::scalar::sorted(nu_vals);
        return sorted_pair_value(&a, &b);
    }
    let a = Sorted1d::new(mu_vals, mu_w);
    let b = Sorted1d::new(nu_vals, nu_w);
    match quad {
        Quadrature::Rectangle(q) => rectangle_value(&a, &b, q, None),
        Quadrature::Exact => exact_value(&a, &b, None),
    }
}

fn summarize<T: Scalar>(per: &[T], seed: u64) -> SwEstimate<T> {
    let l = T::from_usize_lossy(per.len());
    let mean = per.iter().copied().sum::<T>() / l;
    let std_error = if per.len() > 1 {
        let var = per.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>()
            / T::from_usize_lossy(per.len() - 1);
        (var / l).sqrt()
    } else {
        T::zero()
    };
    SwEstimate {
        value: mean,
        n_projections: per.len(),
        seed,
        std_error,
    }
}

/// Per-projection 1D squared distances. Reduction order is fixed, so the
/// result is a deterministic function of the projection set.
pub fn sw2_per_projection<T: Scalar, A: Atoms<T> + ?Sized, B: Atoms<T> + ?Sized>(
    mu: &A,
    nu: &B,
    projections: &ProjectionSet<T>,
    quad: &Quadrature<T>,
) -> Result<Vec<T>> {
    dims_match(mu, nu, projections)?;
    check_measure_weights(mu, "first measure")?;
    check_measure_weights(nu, "second measure")?;
    let uniform = equal_uniform(mu, nu);
    let mu_w = mu.weights().to_vec(mu.len());
    let nu_w = nu.weights().to_vec(nu.len());
    Ok((0..projections.len())
        .map(|p| {
            let theta = projections.direction(p);
            let a = project_values(mu, theta);
            let b = project_values(nu, theta);
            per_projection_1d(&a, &mu_w, &b, &nu_w, uniform, quad)
        })
        .collect())
}

/// Monte-Carlo `SW_2^2(mu, nu)` over the given projections. Equal-size
/// uniform clouds use the exact sorted matching; anything else uses `quad`.
pub fn sw2_mc<T: Scalar, A: Atoms<T> + ?Sized, B: Atoms<T> + ?Sized>(
    mu: &A,
    nu: &B,
    projections: &ProjectionSet<T>,
    quad: &Quadrature<T>,
) -> Result<SwEstimate<T>> {
    let per = sw2_per_projection(mu, nu, projections, quad)?;
    Ok(summarize(&per, projections.seed()))
}

/// Value and gradient of the estimator with respect to the positions of
/// the cloud `mu`, `nu` held fixed.
pub fn sw2_grad_positions<T: Scalar, B: Atoms<T> + ?Sized>(
    mu: &ParticleCloud<T>,
    nu: &B,
    projections: &ProjectionSet<T>,
    quad: &Quadrature<T>,
) -> Result<(SwEstimate<T>, Matrix<T>)> {
    dims_match(mu, nu, projections)?;
    check_measure_weights(nu, "second measure")?;
    let n = mu.len();
    let d = mu.dim();
    let uniform = equal_uniform(mu, nu);
    let mu_w = mu.weights().to_vec(n);
    let nu_w = nu.weights().to_vec(nu.len());
    let inv_l = T::one() / T::from_usize_lossy(projections.len());
    let mut grad = Matrix::zeros(n, d);
    let mut per = Vec::with_capacity(projections.len());
    let mut coef_sorted = vec![T::zero(); n];
    for p in 0..projections.len() {
        let theta = projections.direction(p);
        let a_vals = project_values(mu, theta);
        let b_vals = project_values(nu, theta);
        coef_sorted.iter_mut().for_each(|c| *c = T::zero());
        let (value, perm) = if uniform {
            let a = Sorted1d::uniform(&a_vals);
            let b = crate::scalar::sorted(&b_vals);
            let v = sorted_match_grad(&a.values, &b, &mut coef_sorted);
            (v, a.perm)
        } else {
            let a = Sorted1d::new(&a_vals, &mu_w);
            let b = Sorted1d::new(&b_vals, &nu_w);
            let v = match quad {
                Quadrature::Rectangle(q) => rectangle_value(&a, &b, q, Some(&mut coef_sorted)),
                Quadrature::Exact => exact_value(&a, &b, Some(&mut coef_sorted)),
            };
            (v, a.perm)
        };
        per.push(value);
        for (k, &i) in perm.iter().enumerate() {
            let c = coef_sorted[k] * inv_l;
            if c != T::zero() {
                for (g, &t) in grad.row_mut(i).iter_mut().zip(theta) {
                    *g = *g + c * t;
                }
            }
        }
    }
    Ok((summarize(&per, projections.seed()), grad))
}

/// Gradient of the estimator with respect to particle positions of `mu`.
pub fn grad_sw2_positions<T: Scalar, B: Atoms<T> + ?Sized>(
    mu: &ParticleCloud<T>,
    nu: &B,
    projections: &ProjectionSet<T>,
    quad: &Quadrature<T>,
) -> Result<Matrix<T>> {
    sw2_grad_positions(mu, nu, projections, quad).map(|(_, g)| g)
}

/// Sorted matching of equal-size uniform atoms; writes `d/d a_(k)`.
fn sorted_match_grad<T: Scalar>(a_sorted: &[T], b_sorted: &[T], coef: &mut [T]) -> T {
    let n = T::from_usize_lossy(a_sorted.len());
    let two_over_n = T::lit(2.0) / n;
    let mut total = T::zero();
    for (k, (&x, &y)) in a_sorted.iter().zip(b_sorted).enumerate() {
        let diff = x - y;
        total = total + diff * diff;
        coef[k] = two_over_n * diff;
    }
    total / n
}

/// Exact-quadrature value and gradient with respect to the weights of the
/// grid `mu`, `nu` held fixed. The gradient is defined up to an additive
/// constant (tangent directions of the simplex are what matter).
pub fn sw2_grad_weights<T: Scalar, B: Atoms<T> + ?Sized>(
    mu: &GridMeasure<T>,
    nu: &B,
    projections: &ProjectionSet<T>,
) -> Result<(SwEstimate<T>, Vec<T>)> {
    dims_match(mu, nu, projections)?;
    check_measure_weights(mu, "first measure")?;
    check_measure_weights(nu, "second measure")?;
    let n = mu.len();
    let nu_w = nu.weights().to_vec(nu.len());
    let inv_l = T::one() / T::from_usize_lossy(projections.len());
    let mut grad = vec![T::zero(); n];
    let mut per = Vec::with_capacity(projections.len());
    let mut g_sorted = vec![T::zero(); n];
    for p in 0..projections.len() {
        let theta = projections.direction(p);
        let a = Sorted1d::new(&project_values(mu, theta), mu.weight_slice());
        let b = Sorted1d::new(&project_values(nu, theta), &nu_w);
        per.push(exact_weight_grad(&a, &b, &mut g_sorted));
        for (k, &i) in a.perm.iter().enumerate() {
            grad[i] = grad[i] + g_sorted[k] * inv_l;
        }
    }
    Ok((summarize(&per, projections.seed()), grad))
}

/// Gradient with respect to grid weights (see [`sw2_grad_weights`]).
pub fn grad_sw2_weights<T: Scalar, B: Atoms<T> + ?Sized>(
    mu: &GridMeasure<T>,
    nu: &B,
    projections: &ProjectionSet<T>,
) -> Result<Vec<T>> {
    sw2_grad_weights(mu, nu, projections).map(|(_, g)| g)
}

/// Sorted projections of a fixed support, reusable for every weight vector
/// on that support. Both measures of a grid JKO step share the support, so
/// one sort per direction serves the whole inner loop.
#[derive(Debug, Clone)]
pub struct SupportOrder<T> {
    values: Vec<Vec<T>>,
    perms: Vec<Vec<usize>>,
    seed: u64,
}

impl<T: Scalar> SupportOrder<T> {
    pub fn new(support: &Matrix<T>, projections: &ProjectionSet<T>) -> Result<Self> {
        if support.cols() != projections.dim() {
            return Err(invalid("support and projections have different dimensions"));
        }
        let mut values = Vec::with_capacity(projections.len());
        let mut perms = Vec::with_capacity(projections.len());
        for p in 0..projections.len() {
            let theta = projections.direction(p);
            let vals: Vec<T> = support.row_iter().map(|x| dot(x, theta)).collect();
            let perm = argsort(&vals);
            values.push(perm.iter().map(|&i| vals[i]).collect());
            perms.push(perm);
        }
        Ok(Self {
            values,
            perms,
            seed: projections.seed(),
        })
    }

    pub fn n_projections(&self) -> usize {
        self.perms.len()
    }

    /// Exact estimate between two weight vectors on the shared support and
    /// the gradient with respect to `weights` (written into `grad`).
    pub fn value_and_grad(&self, weights: &[T], reference: &[T], grad: Option<&mut [T]>) -> SwEstimate<T> {
        let n = weights.len();
        let inv_l = T::one() / T::from_usize_lossy(self.perms.len());
        let mut per = Vec::with_capacity(self.perms.len());
        let mut grad = grad;
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
        let mut g_sorted = vec![T::zero(); n];
        for (vals, perm) in self.values.iter().zip(&self.perms) {
            let a = Sorted1d {
                values: vals.clone(),
                cum: cumulative(perm.iter().map(|&i| weights[i])),
                perm: Vec::new(),
            };
            let b = Sorted1d {
                values: vals.clone(),
                cum: cumulative(perm.iter().map(|&i| reference[i])),
                perm: Vec::new(),
            };
            match grad.as_deref_mut() {
                Some(g) => {
                    per.push(exact_weight_grad(&a, &b, &mut g_sorted));
                    for (k, &i) in perm.iter().enumerate() {
                        g[i] = g[i] + g_sorted[k] * inv_l;
                    }
                }
                None => per.push(exact_value(&a, &b, None)),
            }
        }
        summarize(&per, self.seed)
    }
}

/// Sorted projections of a fixed uniform cloud (the reference measure of a
/// particle JKO step).
#[derive(Debug, Clone)]
pub struct SortedReference<T> {
    sorted: Vec<Vec<T>>,
}

impl<T: Scalar> SortedReference<T> {
    pub fn new(reference: &ParticleCloud<T>, projections: &ProjectionSet<T>) -> Result<Self> {
        if reference.dim() != projections.dim() {
            return Err(invalid("reference and projections have different dimensions"));
        }
        let sorted = (0..projections.len())
            .map(|p| crate::scalar::sorted(&project_values(reference, projections.direction(p))))
            .collect();
        Ok(Self { sorted })
    }

    /// Estimate and position gradient of `SW_2^2(mu, reference)` for an
    /// equal-size cloud `mu`.
    pub fn value_and_grad(
        &self,
        mu: &ParticleCloud<T>,
        projections: &ProjectionSet<T>,
        grad: &mut Matrix<T>,
    ) -> Result<SwEstimate<T>> {
        if self.sorted.len() != projections.len() {
            return Err(invalid("projection set does not match the prepared reference"));
        }
        if self.sorted.first().map(|s| s.len()) != Some(mu.len()) {
            return Err(invalid("cloud size does not match the prepared reference"));
        }
        let n = mu.len();
        let inv_l = T::one() / T::from_usize_lossy(projections.len());
        grad.as_mut_slice().iter_mut().for_each(|x| *x = T::zero());
        let mut per = Vec::with_capacity(projections.len());
        let mut coef = vec![T::zero(); n];
        for (p, b) in self.sorted.iter().enumerate() {
            let theta = projections.direction(p);
            let a = Sorted1d::uniform(&project_values(mu, theta));
            per.push(sorted_match_grad(&a.values, b, &mut coef));
            for (k, &i) in a.perm.iter().enumerate() {
                let c = coef[k] * inv_l;
                for (g, &t) in grad.row_mut(i).iter_mut().zip(theta) {
                    *g = *g + c * t;
                }
            }
        }
        Ok(summarize(&per, projections.seed()))
    }
}

/// `SW_2^2` between isotropic Gaussians `N(m1, s1^2 I)`, `N(m2, s2^2 I)`:
/// `|m1 - m2|^2 / d + (s1 - s2)^2`.
pub fn sw2_gaussian_isotropic<T: Scalar>(g1: &GaussianMeasure<T>, g2: &GaussianMeasure<T>) -> Result<T> {
    if g1.dim() != g2.dim() {
        return Err(invalid("Gaussians have different dimensions"));
    }
    let v1 = g1
        .isotropic_variance()
        .ok_or_else(|| invalid("first Gaussian is not isotropic"))?;
    let v2 = g2
        .isotropic_variance()
        .ok_or_else(|| invalid("second Gaussian is not isotropic"))?;
    let diff: Vec<T> = g1.mean().iter().zip(g2.mean()).map(|(&a, &b)| a - b).collect();
    let d = T::from_usize_lossy(g1.dim());
    let ds = v1.sqrt() - v2.sqrt();
    Ok(norm_sq(&diff) / d + ds * ds)
}

/// Bures-Wasserstein `W_2^2` between Gaussians:
/// `|m1 - m2|^2 + Tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`.
pub fn w2_gaussian_bures<T: Scalar>(g1: &GaussianMeasure<T>, g2: &GaussianMeasure<T>) -> Result<T> {
    if g1.dim() != g2.dim() {
        return Err(invalid("Gaussians have different dimensions"));
    }
    let diff: Vec<T> = g1.mean().iter().zip(g2.mean()).map(|(&a, &b)| a - b).collect();
    let s1_half = sqrt_psd(g1.covariance(), "first covariance")?;
    let inner = s1_half
        .matmul(g2.covariance())?
        .matmul(&s1_half)?
        .symmetrized();
    let cross = sqrt_psd(&inner, "cross covariance")?;
    let tr = g1.covariance().trace() + g2.covariance().trace() - T::lit(2.0) * cross.trace();
    Ok(norm_sq(&diff) + tr.max(T::zero()))
}

//! Measure representations, seeded randomness, sphere sampling and 1D
//! projection.
//!
//! Two discrete parameterizations are supported:
//!
//! * [`ParticleCloud`]: `n` free points with implicit uniform weight `1/n`.
//! * [`GridMeasure`]: a fixed support with weights on the probability
//!   simplex and a cell volume used to approximate densities.
//!
//! All randomness flows through [`Rng`], a ChaCha8 stream keyed by a `u64`
//! seed, so every Monte-Carlo quantity is bit-reproducible.

use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, invalid, Result};
use crate::linalg::{cholesky_psd, Matrix};
use crate::scalar::{dot, Scalar};

/// Tolerance on `sum(weights) == 1` accepted by grid constructors.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Deterministic generator: ChaCha8 keyed by a 64-bit seed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for sub-task `stream`, keyed only by the parent
    /// seed so it does not depend on how much of the parent was consumed.
    pub fn derive(&self, stream: u64) -> Rng {
        Rng::new(derive_seed(self.seed, stream))
    }

    /// Draws a fresh seed from this stream.
    pub fn next_seed(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn standard_normal<T: Scalar>(&mut self) -> T {
        let z: f64 = self.inner.sample(StandardNormal);
        T::lit(z)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform<T: Scalar>(&mut self) -> T {
        let u: f64 = self.inner.gen();
        T::lit(u)
    }
}

/// SplitMix64 finalizer of `seed ^ stream`-mixed state.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Weights of a discrete measure.
#[derive(Debug, Clone, Copy)]
pub enum Weights<'a, T> {
    /// `n` atoms of mass `1/n` each.
    Uniform(usize),
    Explicit(&'a [T]),
}

impl<T: Scalar> Weights<'_, T> {
    #[inline]
    pub fn get(&self, i: usize) -> T {
        match self {
            Weights::Uniform(n) => T::one() / T::from_usize_lossy(*n),
            Weights::Explicit(w) => w[i],
        }
    }

    pub fn to_vec(&self, n: usize) -> Vec<T> {
        (0..n).map(|i| self.get(i)).collect()
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Weights::Uniform(_))
    }
}

/// Read access shared by every discrete measure.
pub trait Atoms<T: Scalar> {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> &[T];
    fn weights(&self) -> Weights<'_, T>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn mean(&self) -> Vec<T> {
        let w = self.weights();
        let mut m = vec![T::zero(); self.dim()];
        for i in 0..self.len() {
            let wi = w.get(i);
            for (acc, &x) in m.iter_mut().zip(self.point(i)) {
                *acc = *acc + wi * x;
            }
        }
        m
    }

    /// Weighted (population) covariance.
    fn covariance(&self) -> Matrix<T> {
        let d = self.dim();
        let m = self.mean();
        let w = self.weights();
        let mut c = Matrix::zeros(d, d);
        for i in 0..self.len() {
            let wi = w.get(i);
            let p = self.point(i);
            for a in 0..d {
                let da = p[a] - m[a];
                for b in a..d {
                    c[(a, b)] = c[(a, b)] + wi * da * (p[b] - m[b]);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                c[(a, b)] = c[(b, a)];
            }
        }
        c
    }
}

/// `n` points in `R^d`, each carrying mass `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<T> {
    points: Matrix<T>,
}

impl<T: Scalar> ParticleCloud<T> {
    pub fn new(points: Matrix<T>) -> Result<Self> {
        if points.rows() == 0 || points.cols() == 0 {
            return Err(invalid("particle cloud needs n >= 1 points in d >= 1"));
        }
        if !points.all_finite() {
            return Err(invalid("particle coordinates must be finite"));
        }
        Ok(Self { points })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn points(&self) -> &Matrix<T> {
        &self.points
    }

    /// Mutable access for optimizers; callers must keep coordinates finite.
    #[allow(dead_code)]
    pub(crate) fn points_mut(&mut self) -> &mut Matrix<T> {
        &mut self.points
    }

    pub fn into_points(self) -> Matrix<T> {
        self.points
    }

    /// Copy translated by `v`.
    pub fn translated(&self, v: &[T]) -> Self {
        let mut p = self.points.clone();
        for i in 0..p.rows() {
            for (x, &dv) in p.row_mut(i).iter_mut().zip(v) {
                *x = *x + dv;
            }
        }
        Self { points: p }
    }

    /// Copy scaled about the origin by `s`.
    pub fn scaled(&self, s: T) -> Self {
        let mut p = self.points.clone();
        p.scale_mut(s);
        Self { points: p }
    }
}

impl<T: Scalar> Atoms<T> for ParticleCloud<T> {
    fn dim(&self) -> usize {
        self.points.cols()
    }
    fn len(&self) -> usize {
        self.points.rows()
    }
    fn point(&self, i: usize) -> &[T] {
        self.points.row(i)
    }
    fn weights(&self) -> Weights<'_, T> {
        Weights::Uniform(self.points.rows())
    }
}

/// Weights on a fixed support with a uniform cell volume `l`, so that the
/// density at support point `i` is approximated by `weights[i] / l`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure<T> {
    support: Matrix<T>,
    weights: Vec<T>,
    cell_volume: T,
}

impl<T: Scalar> GridMeasure<T> {
    /// Validates the simplex constraint (within `1e-12`), positivity of the
    /// cell volume and pairwise distinct support points.
    pub fn new(support: Matrix<T>, weights: Vec<T>, cell_volume: T) -> Result<Self> {
        if support.rows() == 0 || support.cols() == 0 {
            return Err(invalid("grid needs N >= 1 support points in d >= 1"));
        }
        if weights.len() != support.rows() {
            return Err(invalid(format!(
                "grid has {} support points but {} weights",
                support.rows(),
                weights.len()
            )));
        }
        if !support.all_finite() {
            return Err(invalid("grid support must be finite"));
        }
        if !(cell_volume > T::zero()) || !cell_volume.is_finite() {
            return Err(invalid("cell volume must be positive and finite"));
        }
        check_simplex(&weights, T::lit(SIMPLEX_TOL))?;
        check_distinct(&support)?;
        Ok(Self {
            support,
            weights,
            cell_volume,
        })
    }

    /// Weights proportional to `density(x_i)` on the given support.
    pub fn from_density(
        support: Matrix<T>,
        cell_volume: T,
        density: impl Fn(&[T]) -> T,
    ) -> Result<Self> {
        let raw: Vec<T> = support.row_iter().map(|x| density(x)).collect();
        if raw.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(domain("density must be finite and non-negative on the support"));
        }
        let total: T = raw.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(domain("density vanishes on the whole support"));
        }
        let weights = raw.into_iter().map(|w| w / total).collect();
        Self::new(support, weights, cell_volume)
    }

    /// Regular tensor grid with `per_axis` points per coordinate on the
    /// box `[lo_k, hi_k]`, cell-centred, with uniform weights.
    pub fn regular(lo: &[T], hi: &[T], per_axis: usize) -> Result<Self> {
        let (support, cell_volume) = regular_support(lo, hi, per_axis)?;
        let n = support.rows();
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(support, vec![w; n], cell_volume)
    }

    pub fn support(&self) -> &Matrix<T> {
        &self.support
    }

    pub fn weight_slice(&self) -> &[T] {
        &self.weights
    }

    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    /// Same support and cell volume with new simplex weights.
    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        if weights.len() != self.weights.len() {
            return Err(invalid("weight vector length does not match the support"));
        }
        check_simplex(&weights, T::lit(SIMPLEX_TOL))?;
        Ok(Self {
            support: self.support.clone(),
            weights,
            cell_volume: self.cell_volume,
        })
    }

    /// Skips the distinctness check; the support is shared with `self`.
    pub(crate) fn set_weights_unchecked(&mut self, weights: Vec<T>) {
        debug_assert_eq!(weights.len(), self.weights.len());
        self.weights = weights;
    }
}

impl<T: Scalar> Atoms<T> for GridMeasure<T> {
    fn dim(&self) -> usize {
        self.support.cols()
    }
    fn len(&self) -> usize {
        self.support.rows()
    }
    fn point(&self, i: usize) -> &[T] {
        self.support.row(i)
    }
    fn weights(&self) -> Weights<'_, T> {
        Weights::Explicit(&self.weights)
    }
}

/// Cell-centred regular tensor grid and its cell volume.
pub fn regular_support<T: Scalar>(lo: &[T], hi: &[T], per_axis: usize) -> Result<(Matrix<T>, T)> {
    if lo.is_empty() || lo.len() != hi.len() {
        return Err(invalid("grid bounds must be non-empty and of equal length"));
    }
    if per_axis == 0 {
        return Err(invalid("grid needs at least one point per axis"));
    }
    let d = lo.len();
    let total = per_axis
        .checked_pow(d as u32)
        .ok_or_else(|| invalid("grid too large"))?;
    let m = T::from_usize_lossy(per_axis);
    let mut steps = Vec::with_capacity(d);
    for k in 0..d {
        if !(hi[k] > lo[k]) {
            return Err(invalid(format!("grid axis {k} has empty extent")));
        }
        steps.push((hi[k] - lo[k]) / m);
    }
    let cell_volume = steps.iter().fold(T::one(), |acc, &h| acc * h);
    let mut data = Vec::with_capacity(total * d);
    let half = T::lit(0.5);
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = vec![T::zero(); d];
        // last axis varies fastest
        for k in (0..d).rev() {
            let idx = rem % per_axis;
            rem /= per_axis;
            coords[k] = lo[k] + (T::from_usize_lossy(idx) + half) * steps[k];
        }
        data.extend(coords);
    }
    Ok((Matrix::from_vec(total, d, data)?, cell_volume))
}

fn check_simplex<T: Scalar>(w: &[T], tol: T) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x < T::zero()) {
        return Err(invalid("weights must be finite and non-negative"));
    }
    let s: T = w.iter().copied().sum();
    if (s - T::one()).abs() > tol {
        return Err(invalid(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

fn check_distinct<T: Scalar>(support: &Matrix<T>) -> Result<()> {
    let mut order: Vec<usize> = (0..support.rows()).collect();
    order.sort_by(|&a, &b| {
        for (x, y) in support.row(a).iter().zip(support.row(b)) {
            match x.cmp_total(y) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    });
    for w in order.windows(2) {
        if support.row(w[0]) == support.row(w[1]) {
            return Err(invalid(format!(
                "grid support points {} and {} coincide",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Either discrete parameterization, owned.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure<T> {
    Cloud(ParticleCloud<T>),
    Grid(GridMeasure<T>),
}

impl<T: Scalar> Measure<T> {
    pub fn kind(&self) -> Parameterization {
        match self {
            Measure::Cloud(_) => Parameterization::Particles,
            Measure::Grid(_) => Parameterization::Grid,
        }
    }

    pub fn as_cloud(&self) -> Option<&ParticleCloud<T>> {
        match self {
            Measure::Cloud(c) => Some(c),
            Measure::Grid(_) => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridMeasure<T>> {
        match self {
            Measure::Grid(g) => Some(g),
            Measure::Cloud(_) => None,
        }
    }
}

impl<T: Scalar> Atoms<T> for Measure<T> {
    fn dim(&self) -> usize {
        match self {
            Measure::Cloud(c) => c.dim(),
            Measure::Grid(g) => g.dim(),
        }
    }
    fn len(&self) -> usize {
        match self {
            Measure::Cloud(c) => c.len(),
            Measure::Grid(g) => g.len(),
        }
    }
    fn point(&self, i: usize) -> &[T] {
        match self {
            Measure::Cloud(c) => c.point(i),
            Measure::Grid(g) => g.point(i),
        }
    }
    fn weights(&self) -> Weights<'_, T> {
        match self {
            Measure::Cloud(c) => c.weights(),
            Measure::Grid(g) => g.weights(),
        }
    }
}

impl<T> From<ParticleCloud<T>> for Measure<T> {
    fn from(c: ParticleCloud<T>) -> Self {
        Measure::Cloud(c)
    }
}

impl<T> From<GridMeasure<T>> for Measure<T> {
    fn from(g: GridMeasure<T>) -> Self {
        Measure::Grid(g)
    }
}

/// Which parameterization a measure (or an energy capability) refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    Particles,
    Grid,
}

/// Gaussian `N(mean, covariance)` with symmetric PSD covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure<T> {
    mean: Vec<T>,
    covariance: Matrix<T>,
}

impl<T: Scalar> GaussianMeasure<T> {
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        if mean.is_empty() {
            return Err(invalid("Gaussian needs dimension >= 1"));
        }
        if covariance.rows() != mean.len() || covariance.cols() != mean.len() {
            return Err(invalid("covariance shape does not match the mean"));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(invalid("Gaussian mean must be finite"));
        }
        crate::linalg::psd_eigen(&covariance, "covariance")?;
        Ok(Self { mean, covariance })
    }

    /// `N(mean, s^2 I)`.
    pub fn isotropic(mean: Vec<T>, std_dev: T) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, Matrix::scaled_identity(d, std_dev * std_dev))
    }

    pub fn standard(d: usize) -> Result<Self> {
        Self::isotropic(vec![T::zero(); d], T::one())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    /// `Some(s^2)` when the covariance is exactly `s^2 I`.
    pub fn isotropic_variance(&self) -> Option<T> {
        let d = self.dim();
        let v = self.covariance[(0, 0)];
        for i in 0..d {
            for j in 0..d {
                let expect = if i == j { v } else { T::zero() };
                if self.covariance[(i, j)] != expect {
                    return None;
                }
            }
        }
        Some(v)
    }

    /// Moment-matched Gaussian of a discrete measure.
    pub fn from_moments<A: Atoms<T>>(measure: &A) -> Result<Self> {
        Self::new(measure.mean(), measure.covariance().symmetrized())
    }
}

/// `L` unit directions on `S^{d-1}` with the seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet<T> {
    directions: Matrix<T>,
    seed: u64,
}

impl<T: Scalar> ProjectionSet<T> {
    /// Draws `count` directions from `Rng::new(seed)` and records `seed`.
    pub fn sample(count: usize, dim: usize, seed: u64) -> Result<Self> {
        if count == 0 || dim == 0 {
            return Err(invalid("sample_unit_sphere needs L >= 1 and d >= 1"));
        }
        let mut local = Rng::new(seed);
        let mut data = Vec::with_capacity(count * dim);
        let mut buf = vec![0.0f64; dim];
        for _ in 0..count {
            loop {
                for z in buf.iter_mut() {
                    *z = local.standard_normal::<f64>();
                }
                let n = buf.iter().map(|z| z * z).sum::<f64>().sqrt();
                if n > 1e-300 {
                    data.extend(buf.iter().map(|z| T::lit(z / n)));
                    break;
                }
            }
        }
        Ok(Self {
            directions: Matrix::from_vec(count, dim, data)?,
            seed,
        })
    }

    /// Wraps explicit directions; each row must be unit-norm within 1e-12
    /// (scaled for `f32`).
    pub fn from_directions(directions: Matrix<T>, seed: u64) -> Result<Self> {
        if directions.rows() == 0 || directions.cols() == 0 {
            return Err(invalid("projection set needs L >= 1 directions in d >= 1"));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
        for (i, r) in directions.row_iter().enumerate() {
            let n = dot(r, r).sqrt();
            if (n - T::one()).abs() > tol {
                return Err(invalid(format!("direction {i} has norm {n}")));
            }
        }
        Ok(Self { directions, seed })
    }

    pub fn len(&self) -> usize {
        self.directions.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.directions.cols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn direction(&self, i: usize) -> &[T] {
        self.directions.row(i)
    }

    pub fn directions(&self) -> &Matrix<T> {
        &self.directions
    }
}

/// `count` i.i.d. uniform directions on `S^{dim-1}`, by normalizing
/// standard Gaussian vectors. The recorded seed is the first value drawn
/// from `rng`; `ProjectionSet::sample(count, dim, seed)` reproduces the set.
pub fn sample_unit_sphere<T: Scalar>(
    count: usize,
    dim: usize,
    rng: &mut Rng,
) -> Result<ProjectionSet<T>> {
    if count == 0 || dim == 0 {
        return Err(invalid("sample_unit_sphere needs L >= 1 and d >= 1"));
    }
    ProjectionSet::sample(count, dim, rng.next_seed())
}

/// Projected values `<x_i, direction>` and the atom weights.
pub fn project_1d<T: Scalar, A: Atoms<T> + ?Sized>(
    measure: &A,
    direction: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    if direction.len() != measure.dim() {
        return Err(invalid(format!(
            "direction has dimension {} but measure has {}",
            direction.len(),
            measure.dim()
        )));
    }
    let values = project_values(measure, direction);
    let weights = measure.weights().to_vec(measure.len());
    Ok((values, weights))
}

/// Projected values only; no dimension check.
pub(crate) fn project_values<T: Scalar, A: Atoms<T> + ?Sized>(
    measure: &A,
    direction: &[T],
) -> Vec<T> {
    (0..measure.len())
        .map(|i| dot(measure.point(i), direction))
        .collect()
}

/// `n` i.i.d. draws `mean + L z` with `L` the PSD Cholesky factor of the
/// covariance and `z ~ N(0, I)`.
pub fn sample_gaussian<T: Scalar>(
    g: &GaussianMeasure<T>,
    n: usize,
    rng: &mut Rng,
) -> Result<ParticleCloud<T>> {
    if n == 0 {
        return Err(invalid("sample_gaussian needs n >= 1"));
    }
    let l = cholesky_psd(g.covariance(), "covariance")?;
    let d = g.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut z = vec![T::zero(); d];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = rng.standard_normal();
        }
        for a in 0..d {
            let mut acc = g.mean()[a];
            for b in 0..=a {
                acc = acc + l[(a, b)] * z[b];
            }
            data.push(acc);
        }
    }
    ParticleCloud::new(Matrix::from_vec(n, d, data)?)
}

//! Distribution comparisons and geometric summaries: Gaussian KDE with
//! Scott's bandwidth, symmetric KL divergences, radial statistics.

use crate::error::{domain, invalid, Result};
use crate::linalg::{spd_eigen, Matrix};
use crate::measures::{Atoms, GaussianMeasure, GridMeasure, ParticleCloud};
use crate::scalar::{sorted, Scalar};

/// Gaussian kernel density estimate `(1/n) sum N(x; x_i, H)` with
/// `H = n^{-2/(d+4)} Cov` (Scott's rule, unbiased sample covariance).
#[derive(Debug, Clone)]
pub struct KdeModel<T> {
    samples: Matrix<T>,
    bandwidth: Matrix<T>,
    precision: Matrix<T>,
    log_norm: T,
}

impl<T: Scalar> KdeModel<T> {
    /// Scott's rule; a degenerate covariance is a numeric-domain error.
    pub fn scott(samples: &ParticleCloud<T>) -> Result<Self> {
        Self::build(samples, false)
    }

    /// Scott's rule with eigenvalues of `H` raised to at least
    /// `1e-6 * trace(H) / d` (for clouds concentrated on curves).
    pub fn scott_with_floor(samples: &ParticleCloud<T>) -> Result<Self> {
        Self::build(samples, true)
    }

    fn build(samples: &ParticleCloud<T>, floor: bool) -> Result<Self> {
        let n = samples.len();
        let d = samples.dim();
        if n < 2 {
            return Err(invalid("KDE needs at least 2 samples"));
        }
        let nf = T::from_usize_lossy(n);
        // population covariance rescaled to ddof = 1
        let mut cov = samples.covariance();
        cov.scale_mut(nf / (nf - T::one()));
        let factor = nf.powf(-T::lit(2.0) / T::from_usize_lossy(d + 4));
        cov.scale_mut(factor);
        let mut h = cov.symmetrized();
        if floor {
            let eig = crate::linalg::psd_eigen(&h, "bandwidth")?;
            let min = T::lit(1e-6) * h.trace().max(T::min_positive_value()) / T::from_usize_lossy(d);
            h = eig.map(|x| x.max(min)).symmetrized();
        }
        let eig = spd_eigen(&h, "KDE bandwidth").map_err(|_| {
            domain("sample covariance is degenerate; use the bandwidth floor (scott_with_floor)")
        })?;
        let precision = eig.map(|x| x.recip()).symmetrized();
        let log_det: T = eig.values.iter().map(|x| x.ln()).sum();
        let two_pi = T::lit(2.0 * std::f64::consts::PI);
        let log_norm = -T::lit(0.5) * (T::from_usize_lossy(d) * two_pi.ln() + log_det) - nf.ln();
        Ok(Self {
            samples: samples.points().clone(),
            bandwidth: h,
            precision,
            log_norm,
        })
    }

    pub fn bandwidth(&self) -> &Matrix<T> {
        &self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }
}

/// Log-density of the KDE at `x`, by log-sum-exp over the kernels.
pub fn kde_log_density<T: Scalar>(model: &KdeModel<T>, x: &[T]) -> Result<T> {
    let d = model.dim();
    if x.len() != d {
        return Err(invalid("query point has the wrong dimension"));
    }
    let mut exps = Vec::with_capacity(model.samples.rows());
    let mut diff = vec![T::zero(); d];
    for s in model.samples.row_iter() {
        for c in 0..d {
            diff[c] = x[c] - s[c];
        }
        let mut q = T::zero();
        for a in 0..d {
            let mut row = T::zero();
            for b in 0..d {
                row = row + model.precision[(a, b)] * diff[b];
            }
            q = q + diff[a] * row;
        }
        exps.push(-T::lit(0.5) * q);
    }
    Ok(log_sum_exp(&exps) + model.log_norm)
}

fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let s: T = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Log-density of a Gaussian with positive-definite covariance.
#[derive(Debug, Clone)]
pub struct GaussianLogPdf<T> {
    mean: Vec<T>,
    precision: Matrix<T>,
    log_norm: T,
}

impl<T: Scalar> GaussianLogPdf<T> {
    pub fn new(g: &GaussianMeasure<T>) -> Result<Self> {
        let eig = spd_eigen(g.covariance(), "covariance")?;
        let d = T::from_usize_lossy(g.dim());
        let log_det: T = eig.values.iter().map(|x| x.ln()).sum();
        Ok(Self {
            mean: g.mean().to_vec(),
            precision: eig.map(|x| x.recip()).symmetrized(),
            log_norm: -T::lit(0.5) * (d * T::lit(2.0 * std::f64::consts::PI).ln() + log_det),
        })
    }

    pub fn eval(&self, x: &[T]) -> T {
        let d = self.mean.len();
        let mut q = T::zero();
        for a in 0..d {
            let mut row = T::zero();
            for b in 0..d {
                row = row + self.precision[(a, b)] * (x[b] - self.mean[b]);
            }
            q = q + (x[a] - self.mean[a]) * row;
        }
        self.log_norm - T::lit(0.5) * q
    }
}

/// Closed-form `KL(g1 | g2) + KL(g2 | g1)`.
pub fn sym_kl_gaussians<T: Scalar>(g1: &GaussianMeasure<T>, g2: &GaussianMeasure<T>) -> Result<T> {
    if g1.dim() != g2.dim() {
        return Err(invalid("Gaussians have different dimensions"));
    }
    let d = g1.dim();
    let p1 = spd_eigen(g1.covariance(), "first covariance")?.map(|x| x.recip());
    let p2 = spd_eigen(g2.covariance(), "second covariance")?.map(|x| x.recip());
    let tr = p2.matmul(g1.covariance())?.trace() + p1.matmul(g2.covariance())?.trace();
    let dm: Vec<T> = g1.mean().iter().zip(g2.mean()).map(|(&a, &b)| a - b).collect();
    let psum = p1.add(&p2)?;
    let q: T = (0..d)
        .map(|a| dm[a] * (0..d).map(|b| psum[(a, b)] * dm[b]).sum::<T>())
        .sum();
    Ok(T::lit(0.5) * (tr + q) - T::from_usize_lossy(d))
}

/// Monte-Carlo `KL(p | q^) + KL(q^ | p)` where `p` has the analytic
/// log-density `p_logpdf` (sampled by `p_samples`) and `q^` is the Scott
/// KDE of `q_samples`.
pub fn sym_kl_samples<T: Scalar>(
    p_logpdf: impl Fn(&[T]) -> T,
    q_samples: &ParticleCloud<T>,
    p_samples: &ParticleCloud<T>,
) -> Result<T> {
    let kde = KdeModel::scott(q_samples)?;
    sym_kl_with(p_logpdf, |x| kde_log_density(&kde, x), q_samples, p_samples)
}

/// Both sides known only by samples: KDEs on both (higher variance).
pub fn sym_kl_kde_both<T: Scalar>(q_samples: &ParticleCloud<T>, p_samples: &ParticleCloud<T>) -> Result<T> {
    let kp = KdeModel::scott(p_samples)?;
    let kq = KdeModel::scott(q_samples)?;
    let mut kl_pq = T::zero();
    for i in 0..p_samples.len() {
        let x = p_samples.point(i);
        kl_pq = kl_pq + kde_log_density(&kp, x)? - kde_log_density(&kq, x)?;
    }
    let mut kl_qp = T::zero();
    for i in 0..q_samples.len() {
        let x = q_samples.point(i);
        kl_qp = kl_qp + kde_log_density(&kq, x)? - kde_log_density(&kp, x)?;
    }
    Ok(kl_pq / T::from_usize_lossy(p_samples.len()) + kl_qp / T::from_usize_lossy(q_samples.len()))
}

fn sym_kl_with<T: Scalar>(
    log_p: impl Fn(&[T]) -> T,
    log_q: impl Fn(&[T]) -> Result<T>,
    q_samples: &ParticleCloud<T>,
    p_samples: &ParticleCloud<T>,
) -> Result<T> {
    if q_samples.dim() != p_samples.dim() {
        return Err(invalid("sample sets have different dimensions"));
    }
    let mut kl_pq = T::zero();
    for i in 0..p_samples.len() {
        let x = p_samples.point(i);
        kl_pq = kl_pq + log_p(x) - log_q(x)?;
    }
    let mut kl_qp = T::zero();
    for i in 0..q_samples.len() {
        let x = q_samples.point(i);
        kl_qp = kl_qp + log_q(x)? - log_p(x);
    }
    let v = kl_pq / T::from_usize_lossy(p_samples.len()) + kl_qp / T::from_usize_lossy(q_samples.len());
    if !v.is_finite() {
        return Err(domain("symmetric KL estimate is not finite"));
    }
    Ok(v)
}

/// Symmetric KL between the grid density `rho_i / l` and a density `p`
/// restricted to the grid, both normalized over the grid cells. Infinite
/// when the grid has empty cells.
pub fn sym_kl_grid<T: Scalar>(grid: &GridMeasure<T>, log_p: impl Fn(&[T]) -> T) -> Result<T> {
    let l = grid.cell_volume();
    let logs: Vec<T> = (0..grid.len()).map(|i| log_p(grid.point(i)) + l.ln()).collect();
    // renormalize p's cell masses so both sides are probability vectors
    let z = log_sum_exp(&logs);
    let mut total = T::zero();
    for (&rho, &lp) in grid.weight_slice().iter().zip(&logs) {
        let p = (lp - z).exp();
        if rho == T::zero() {
            if p > T::zero() {
                return Ok(T::infinity());
            }
            continue;
        }
        total = total + (rho - p) * (rho.ln() - (lp - z));
    }
    Ok(total)
}

/// Symmetric KL between the Gaussian fitted by moments to `measure` and `g`.
pub fn sym_kl_moment_matched<T: Scalar, A: Atoms<T>>(measure: &A, g: &GaussianMeasure<T>) -> Result<T> {
    sym_kl_gaussians(&GaussianMeasure::from_moments(measure)?, g)
}

/// Summary of distances `|x_i - center|`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusStats<T> {
    pub mean: T,
    /// Population standard deviation.
    pub std: T,
    pub min: T,
    pub max: T,
    /// `(level, value)` pairs, linear interpolation between order
    /// statistics.
    pub quantiles: Vec<(T, T)>,
}

impl<T: Scalar> RadiusStats<T> {
    pub fn quantile(&self, level: T) -> Option<T> {
        self.quantiles.iter().find(|(l, _)| *l == level).map(|(_, v)| *v)
    }
}

/// Levels reported by default.
pub const DEFAULT_RADIUS_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

pub fn radius_stats<T: Scalar>(cloud: &ParticleCloud<T>, center: &[T], levels: &[T]) -> Result<RadiusStats<T>> {
    if center.len() != cloud.dim() {
        return Err(invalid("center has the wrong dimension"));
    }
    if levels.iter().any(|l| !(*l >= T::zero() && *l <= T::one())) {
        return Err(invalid("quantile levels must lie in [0, 1]"));
    }
    let r: Vec<T> = (0..cloud.len())
        .map(|i| {
            cloud
                .point(i)
                .iter()
                .zip(center)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt()
        })
        .collect();
    let n = T::from_usize_lossy(r.len());
    let mean = r.iter().copied().sum::<T>() / n;
    let var = r.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    let s = sorted(&r);
    let quantiles = levels.iter().map(|&l| (l, interpolated_quantile(&s, l))).collect();
    Ok(RadiusStats {
        mean,
        std: var.sqrt(),
        min: s[0],
        max: s[s.len() - 1],
        quantiles,
    })
}

/// Radius summary of a weighted measure (e.g. a grid). Quantiles are the
/// smallest radius whose cumulative weight reaches the level; support
/// points with zero weight are ignored for `min` and `max`.
pub fn weighted_radius_stats<T: Scalar, A: Atoms<T>>(measure: &A, center: &[T], levels: &[T]) -> Result<RadiusStats<T>> {
    if center.len() != measure.dim() {
        return Err(invalid("center has the wrong dimension"));
    }
    if levels.iter().any(|l| !(*l >= T::zero() && *l <= T::one())) {
        return Err(invalid("quantile levels must lie in [0, 1]"));
    }
    let w = measure.weights();
    let mut rw: Vec<(T, T)> = (0..measure.len())
        .filter(|&i| w.get(i) > T::zero())
        .map(|i| {
            let r = measure
                .point(i)
                .iter()
                .zip(center)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                .sqrt();
            (r, w.get(i))
        })
        .collect();
    if rw.is_empty() {
        return Err(domain("measure has no atom with positive weight"));
    }
    rw.sort_by(|a, b| a.0.cmp_total(&b.0));
    let total: T = rw.iter().map(|p| p.1).sum();
    let mean = rw.iter().map(|&(r, wi)| r * wi).sum::<T>() / total;
    let var = rw.iter().map(|&(r, wi)| wi * (r - mean) * (r - mean)).sum::<T>() / total;
    let quantiles = levels
        .iter()
        .map(|&l| {
            let mut acc = T::zero();
            let target = l * total;
            let v = rw
                .iter()
                .find(|&&(_, wi)| {
                    acc = acc + wi;
                    acc >= target
                })
                .map_or(rw[rw.len() - 1].0, |p| p.0);
            (l, v)
        })
        .collect();
    Ok(RadiusStats {
        mean,
        std: var.sqrt(),
        min: rw[0].0,
        max: rw[rw.len() - 1].0,
        quantiles,
    })
}

fn interpolated_quantile<T: Scalar>(s: &[T], level: T) -> T {
    let pos = level * T::from_usize_lossy(s.len() - 1);
    let lo = pos.floor().to_usize().unwrap_or(0).min(s.len() - 1);
    let hi = (lo + 1).min(s.len() - 1);
    let frac = pos - T::from_usize_lossy(lo);
    s[lo] + frac * (s[hi] - s[lo])
}

/// Hausdorff distance between two point sets.
pub fn hausdorff<T: Scalar>(a: &ParticleCloud<T>, b: &ParticleCloud<T>) -> T {
    let directed = |x: &ParticleCloud<T>, y: &ParticleCloud<T>| {
        (0..x.len())
            .map(|i| {
                (0..y.len())
                    .map(|j| {
                        x.point(i)
                            .iter()
                            .zip(y.point(j))
                            .map(|(&p, &q)| (p - q) * (p - q))
                            .sum::<T>()
                    })
                    .fold(T::infinity(), T::min)
            })
            .fold(T::zero(), T::max)
            .sqrt()
    };
    directed(a, b).max(directed(b, a))
}

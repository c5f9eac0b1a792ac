//! Closed-form references and brute-force checks: the Ornstein-Uhlenbeck
//! flow, the unadjusted Langevin sampler, central finite differences, and
//! exhaustive assignment and simplex solvers for tiny inputs.

use crate::assignment::Assignment;
use crate::error::{domain, invalid, Result};
use crate::functionals::Potential;
use crate::linalg::{psd_eigen, spd_eigen, Matrix};
use crate::measures::{Atoms, GaussianMeasure, ParticleCloud, Rng};
use crate::scalar::Scalar;

/// Largest size accepted by [`assignment_bruteforce`].
pub const MAX_BRUTEFORCE_ASSIGNMENT: usize = 7;
/// Largest size accepted by [`simplex_project_bruteforce`].
pub const MAX_BRUTEFORCE_SIMPLEX: usize = 8;

/// OU process `dX = -A (X - m) dt + sqrt(2) dW` started from
/// `N(m0, sigma0)`; its law solves the Fokker-Planck equation of
/// `V(x) = 1/2 (x - m)^T A (x - m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuSpec<T> {
    a: Matrix<T>,
    m: Vec<T>,
    m0: Vec<T>,
    sigma0: Matrix<T>,
}

impl<T: Scalar> OuSpec<T> {
    pub fn new(a: Matrix<T>, m: Vec<T>, m0: Vec<T>, sigma0: Matrix<T>) -> Result<Self> {
        let d = m.len();
        if d == 0 || a.rows() != d || a.cols() != d || m0.len() != d || sigma0.rows() != d || sigma0.cols() != d {
            return Err(invalid("OU spec: inconsistent dimensions"));
        }
        spd_eigen(&a, "drift matrix A")?;
        psd_eigen(&sigma0, "initial covariance")?;
        Ok(Self { a, m, m0, sigma0 })
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn drift(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn target_mean(&self) -> &[T] {
        &self.m
    }

    /// Stationary law `N(m, A^{-1})`.
    pub fn stationary(&self) -> Result<GaussianMeasure<T>> {
        let inv = spd_eigen(&self.a, "drift matrix A")?.map(|x| x.recip());
        GaussianMeasure::new(self.m.clone(), inv.symmetrized())
    }

    /// Same process restarted from `g`.
    pub fn restarted(&self, g: &GaussianMeasure<T>) -> Result<Self> {
        Self::new(self.a.clone(), self.m.clone(), g.mean().to_vec(), g.covariance().clone())
    }
}

/// Law at time `t`: `m_t = m + e^{-tA}(m0 - m)`,
/// `S_t = e^{-tA} S0 e^{-tA} + (I - e^{-2tA}) A^{-1}`.
pub fn ou_analytic<T: Scalar>(spec: &OuSpec<T>, t: T) -> Result<GaussianMeasure<T>> {
    if !(t >= T::zero()) || !t.is_finite() {
        return Err(invalid(format!("OU time must be finite and >= 0 (got {t})")));
    }
    let eig = spd_eigen(&spec.a, "drift matrix A")?;
    let e = eig.map(|l| (-t * l).exp());
    let stat = eig.map(|l| {
        // (1 - e^{-2tl}) / l without cancellation for small tl
        -(-T::lit(2.0) * t * l).exp_m1() / l
    });
    let dm: Vec<T> = spec.m0.iter().zip(&spec.m).map(|(&a, &b)| a - b).collect();
    let shift = e.matvec(&dm)?;
    let mean = spec.m.iter().zip(&shift).map(|(&a, &b)| a + b).collect();
    let cov = e.matmul(&spec.sigma0)?.matmul(&e)?.add(&stat)?.symmetrized();
    GaussianMeasure::new(mean, cov)
}

/// Euler-Maruyama settings for the Langevin SDE
/// `X_{t+h} = X_t - h grad V(X_t) + sqrt(2h) xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaConfig<T> {
    pub step: T,
    pub horizon: T,
    /// Times at which snapshots are kept, rounded to the step grid.
    pub checkpoints: Vec<T>,
    /// Turning noise off reduces the scheme to gradient descent on `V`.
    pub noise: bool,
}

/// Snapshots of the particle system at the requested checkpoints.
#[derive(Debug, Clone)]
pub struct UlaTrajectory<T> {
    pub times: Vec<T>,
    pub clouds: Vec<ParticleCloud<T>>,
}

/// Unadjusted Langevin algorithm from the initial cloud `x0`, unit
/// temperature.
pub fn euler_maruyama<T: Scalar>(
    potential: &Potential<T>,
    x0: &ParticleCloud<T>,
    cfg: &UlaConfig<T>,
    rng: &mut Rng,
) -> Result<UlaTrajectory<T>> {
    let h = cfg.step;
    if !(h > T::zero()) || !h.is_finite() {
        return Err(invalid("ULA step must be positive"));
    }
    if !(cfg.horizon >= T::zero()) || !cfg.horizon.is_finite() {
        return Err(invalid("ULA horizon must be finite and >= 0"));
    }
    let n_steps = (cfg.horizon / h).round().to_usize().unwrap_or(0);
    let mut marks: Vec<(usize, T)> = Vec::with_capacity(cfg.checkpoints.len());
    for &t in &cfg.checkpoints {
        if !(t >= T::zero()) || t > cfg.horizon + h {
            return Err(invalid(format!("checkpoint {t} outside [0, horizon]")));
        }
        marks.push(((t / h).round().to_usize().unwrap_or(0).min(n_steps), t));
    }
    marks.sort_by_key(|m| m.0);
    let n = x0.len();
    let d = x0.dim();
    let noise = if cfg.noise { (T::lit(2.0) * h).sqrt() } else { T::zero() };
    let mut x = x0.points().clone();
    let mut grad = vec![T::zero(); d];
    let mut out = UlaTrajectory {
        times: Vec::with_capacity(marks.len()),
        clouds: Vec::with_capacity(marks.len()),
    };
    let mut next = 0;
    for k in 0..=n_steps {
        while next < marks.len() && marks[next].0 == k {
            out.times.push(marks[next].1);
            out.clouds.push(ParticleCloud::new(x.clone())?);
            next += 1;
        }
        if k == n_steps {
            break;
        }
        for i in 0..n {
            potential.gradient(x.row(i), &mut grad);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(domain(format!("potential gradient not finite at particle {i}, step {k}")));
            }
            let row = x.row_mut(i);
            for c in 0..d {
                let xi = if cfg.noise { rng.standard_normal::<T>() } else { T::zero() };
                row[c] = row[c] - h * grad[c] + noise * xi;
            }
        }
    }
    Ok(out)
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / (2h)`.
pub fn finite_diff_grad<T: Scalar>(mut f: impl FnMut(&[T]) -> T, x: &[T], h: T) -> Result<Vec<T>> {
    if !(h > T::zero()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let mut y = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(domain(format!("function not finite around coordinate {i}")));
        }
        g.push((fp - fm) / (T::lit(2.0) * h));
    }
    Ok(g)
}

/// Exhaustive minimum-cost assignment over all `n!` permutations
/// (`n <= 7`). Ties keep the first permutation in lexicographic order.
pub fn assignment_bruteforce<T: Scalar>(cost: &Matrix<T>) -> Result<Assignment<T>> {
    let n = cost.rows();
    if n == 0 || !cost.is_square() {
        return Err(invalid("assignment needs a non-empty square cost matrix"));
    }
    if n > MAX_BRUTEFORCE_ASSIGNMENT {
        return Err(invalid(format!(
            "brute force refused for n = {n} > {MAX_BRUTEFORCE_ASSIGNMENT}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best: Option<Assignment<T>> = None;
    loop {
        let c: T = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        if best.as_ref().map_or(true, |b| c < b.cost) {
            best = Some(Assignment {
                perm: perm.clone(),
                cost: c,
            });
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.expect("at least one permutation"))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Simplex projection by enumerating every support set and keeping the
/// one that satisfies the KKT conditions (`N <= 8`).
pub fn simplex_project_bruteforce<T: Scalar>(v: &[T]) -> Result<Vec<T>> {
    let n = v.len();
    if n == 0 {
        return Err(invalid("simplex projection of an empty vector"));
    }
    if n > MAX_BRUTEFORCE_SIMPLEX {
        return Err(invalid(format!("brute force refused for N = {n} > {MAX_BRUTEFORCE_SIMPLEX}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("simplex projection needs finite input"));
    }
    let mut best: Option<(T, Vec<T>)> = None;
    for mask in 1u32..(1 << n) {
        let k = mask.count_ones() as usize;
        let s: T = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| v[i]).sum();
        let t = (s - T::one()) / T::from_usize_lossy(k);
        let feasible = (0..n).all(|i| {
            if mask >> i & 1 == 1 {
                v[i] - t >= T::zero()
            } else {
                v[i] - t <= T::zero()
            }
        });
        if !feasible {
            continue;
        }
        let w: Vec<T> = (0..n)
            .map(|i| if mask >> i & 1 == 1 { v[i] - t } else { T::zero() })
            .collect();
        let dist: T = w.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
            best = Some((dist, w));
        }
    }
    best.map(|(_, w)| w)
        .ok_or_else(|| domain("no KKT point found (round-off)"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::solve_assignment;
    use crate::functionals::QuadraticPotential;
    use crate::simplex::simplex_project;

    fn ou_1d_shift() -> OuSpec<f64> {
        OuSpec::<f64>::new(Matrix::<f64>::identity(2), vec![0.0, 0.0], vec![1.0, 0.0], Matrix::<f64>::identity(2)).unwrap()
    }

    #[test]
    fn ou_examples() {
        let s = ou_1d_shift();
        let g0 = ou_analytic(&s, 0.0).unwrap();
        assert_eq!(g0.mean(), &[1.0, 0.0]);
        assert!(g0.covariance().max_abs_diff(&Matrix::<f64>::identity(2)) < 1e-15);
        let g1 = ou_analytic(&s, 1.0).unwrap();
        assert!((g1.mean()[0] - (-1.0f64).exp()).abs() < 1e-15);
        let inf = ou_analytic(&s, 50.0).unwrap();
        assert!(inf.mean()[0].abs() < 1e-10);
        assert!(inf.covariance().max_abs_diff(&Matrix::<f64>::identity(2)) < 1e-10);
        assert!(ou_analytic(&s, -1.0).is_err());
    }

    #[test]
    fn ou_semigroup() {
        let a = Matrix::<f64>::from_rows(&[[1.5, 0.3], [0.3, 0.7]]).unwrap();
        let s0 = Matrix::<f64>::from_rows(&[[0.2, 0.05], [0.05, 0.4]]).unwrap();
        let s = OuSpec::<f64>::new(a, vec![0.5, -1.0], vec![2.0, 1.0], s0).unwrap();
        let direct = ou_analytic(&s, 1.7).unwrap();
        let mid = ou_analytic(&s, 0.6).unwrap();
        let two = ou_analytic(&s.restarted(&mid).unwrap(), 1.1).unwrap();
        for (a, b) in direct.mean().iter().zip(two.mean()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(direct.covariance().max_abs_diff(two.covariance()) < 1e-10);
    }

    #[test]
    fn ou_rejects_non_spd() {
        let a = Matrix::<f64>::from_diag(&[1.0, -0.5]);
        assert!(OuSpec::<f64>::new(a, vec![0.0; 2], vec![0.0; 2], Matrix::<f64>::identity(2)).is_err());
    }

    #[test]
    fn ula_brownian_variance() {
        let x0 = ParticleCloud::<f64>::new(Matrix::<f64>::zeros(4000, 1)).unwrap();
        let cfg = UlaConfig {
            step: 0.01,
            horizon: 1.0,
            checkpoints: vec![0.5, 1.0],
            noise: true,
        };
        let out = euler_maruyama(&Potential::Zero, &x0, &cfg, &mut Rng::new(3)).unwrap();
        for (t, c) in out.times.iter().zip(&out.clouds) {
            let var = c.covariance()[(0, 0)];
            // sd of a sample variance is about var * sqrt(2/n)
            let band = 3.0 * 2.0 * t * (2.0f64 / 4000.0).sqrt();
            assert!((var - 2.0 * t).abs() < band, "t={t} var={var}");
        }
    }

    #[test]
    fn ula_without_noise_is_gradient_descent() {
        let q = QuadraticPotential::new(Matrix::<f64>::identity(1), vec![0.0]).unwrap();
        let x0 = ParticleCloud::<f64>::from_rows(&[[1.0]]).unwrap();
        let cfg = UlaConfig {
            step: 0.1,
            horizon: 1.0,
            checkpoints: vec![1.0],
            noise: false,
        };
        let out = euler_maruyama(&Potential::Quadratic(q), &x0, &cfg, &mut Rng::new(0)).unwrap();
        let expect = 0.9f64.powi(10);
        assert!((out.clouds[0].point(0)[0] - expect).abs() < 1e-14);
    }

    #[test]
    fn finite_difference_examples() {
        let g = finite_diff_grad(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        let g = finite_diff_grad(|_: &[f64]| 3.0, &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let g = finite_diff_grad(|x: &[f64]| x[0] * x[1], &[3.0, 5.0], 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
        let err = finite_diff_grad(|x: &[f64]| if x[1] > 2.0 { f64::NAN } else { 0.0 }, &[0.0, 2.0], 1e-3);
        assert!(err.unwrap_err().to_string().contains("coordinate 1"));
    }

    #[test]
    fn assignment_oracle() {
        let c = Matrix::<f64>::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let a = assignment_bruteforce(&c).unwrap();
        assert_eq!((a.perm, a.cost), (vec![0, 1], 0.0));
        let mut rng = Rng::new(11);
        let data: Vec<f64> = (0..25).map(|_| rng.uniform()).collect();
        let c = Matrix::<f64>::from_vec(5, 5, data).unwrap();
        assert_eq!(assignment_bruteforce(&c).unwrap().cost, solve_assignment(&c).unwrap().cost);
        assert!(assignment_bruteforce(&Matrix::<f64>::zeros(8, 8)).is_err());
    }

    #[test]
    fn simplex_oracle() {
        assert_eq!(simplex_project_bruteforce(&[0.25, 0.75]).unwrap(), vec![0.25, 0.75]);
        assert_eq!(simplex_project_bruteforce(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let mut rng = Rng::new(5);
        for _ in 0..50 {
            let v: Vec<f64> = (0..6).map(|_| 4.0 * rng.uniform::<f64>() - 2.0).collect();
            let a = simplex_project_bruteforce(&v).unwrap();
            let b = simplex_project(&v);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert!(simplex_project_bruteforce(&[0.0; 9]).is_err());
    }
}

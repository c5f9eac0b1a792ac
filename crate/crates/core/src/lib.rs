//! Sliced-Wasserstein JKO gradient flows.
//!
//! Measures are either uniform particle clouds (optimized over positions)
//! or weighted measures on a fixed grid (optimized over weights). Each
//! JKO step minimizes `F(mu) + SW_2^2(mu, mu_k) / (2 tau)` with a
//! first-order inner solver.
//!
//! Everything is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix it to `f64`.

pub mod assignment;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod linalg;
pub mod measures;
pub mod oracles;
pub mod scalar;
pub mod simplex;
pub mod sliced;
pub mod solver;

pub use error::{Error, Result};
pub use functionals::{EnergySpec, InteractionKernel, Potential, PotentialFn, QuadraticPotential, SwTarget};
pub use linalg::Matrix;
pub use measures::{
    Atoms, GaussianMeasure, GridMeasure, Measure, Parameterization, ParticleCloud, ProjectionSet, Rng,
};
pub use scalar::Scalar;
pub use simplex::simplex_project;
pub use sliced::{Quadrature, QuantileGrid, SwEstimate};
pub use solver::{
    direct_minimize, energy_gap_check, run_flow, sw_jko_step, FlowError, InnerMethod, ProjectionMode, SolverConfig,
    Trajectory, WeightUpdate,
};

pub type Real = f64;
pub type Cloud = ParticleCloud<f64>;
pub type Grid = GridMeasure<f64>;
pub type Gaussian = GaussianMeasure<f64>;
pub type Projections = ProjectionSet<f64>;
pub type Energy = EnergySpec<f64>;
pub type Config = SolverConfig<f64>;

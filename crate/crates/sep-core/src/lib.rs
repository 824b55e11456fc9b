//! Skorokhod embedding for inhomogeneous diffusions.
//!
//! Given a drift `mu(t, a)`, a diffusion `sigma(t, a)` and a target law `nu`,
//! this crate computes a bounded stopping time `tau` and a start value `A0`
//! such that the diffusion started at `A0` and stopped at `tau` has law `nu`.
//! The construction goes through a fully coupled forward-backward SDE on the
//! unit interval whose second forward component is a random clock; the crate
//! solves it with a Picard-iterated, truncated, explicit-Euler scheme with
//! least-squares Monte Carlo conditional expectations, and closes the loop by
//! simulating the diffusion against the same Brownian path and testing the
//! stopped marginal against the target.
//!
//! Module map:
//! - [`model`]: coefficients, target law, quantile transform, norm records;
//! - [`analysis`]: admissibility checks and the a-priori constants;
//! - [`paths`]: deterministic per-path RNG substreams and the lazily refined
//!   Brownian trajectory with bridge insertion;
//! - [`regression`]: polynomial-basis least squares for conditional
//!   expectations;
//! - [`solver`]: the Picard/Euler engine in strong and weak modes plus the
//!   decoupled oracle for homogeneous coefficients;
//! - [`verify`]: stopped-process simulation and goodness-of-fit tests.

pub mod analysis;
pub mod error;
pub mod model;
pub mod normal;
pub mod paths;
pub mod regression;
pub mod solver;
pub mod verify;

pub use analysis::{AssumptionCase, AssumptionReport, FailedCheck, ZBounds};
pub use error::{Result, SepError};
pub use model::{
    CoefficientField, LawSpec, NormProvenance, NormSet, SigmoidFamily, SignCase, TargetLaw,
};
pub use paths::{PathStore, RngStream};
pub use regression::{BasisSpec, RegressionFit, Standardizer};
pub use solver::{IterationState, PicardResult, SolveMode, SolverConfig};
pub use verify::{EmbeddingReport, Histogram};

//! Stochastic gradient descent for 2-Wasserstein population barycenters.
//!
//! The 2-Wasserstein barycenter of a distribution over probability measures is
//! the minimizer of the averaged squared Wasserstein distance. For families of
//! measures whose optimal transport maps have a closed form, a single SGD step
//! is a cheap geodesic interpolation towards a sampled measure, and the
//! barycenter can be approached by streaming samples instead of solving the
//! full multimarginal problem.
//!
//! This crate implements that solver over four such families:
//!
//! - [`quantile`]: univariate distributions represented by discretized
//!   quantile functions (the monotone rearrangement is the optimal map),
//! - [`copula`]: multivariate distributions sharing a common copula, where
//!   everything factors through the marginals,
//! - [`spherical`]: spherically equivalent families generated by nondecreasing
//!   radial rescalings of a fixed generator,
//! - [`scatter`]: scatter-location (Gaussian-like) families with affine
//!   optimal maps built from SPD matrix square roots.
//!
//! Each family implements the [`family::BarycenterFamily`] contract: SGD
//! steps, distances, the barycenter functional and its gradient norm, an exact
//! barycenter oracle for finitely supported populations, and Karcher
//! residuals. The generic driver lives in [`solver`], together with Monte
//! Carlo estimators for the functional, the gradient norm, the integrated
//! variance of mini-batch gradient estimators, and a statistical check of the
//! expected one-step descent inequality.
//!
//! Randomness is always explicit: operations that sample take an
//! [`population::RngState`] seeded by the caller, and identical seeds yield
//! identical runs.

pub mod copula;
pub mod error;
pub mod family;
pub mod population;
pub mod quantile;
pub mod record;
pub mod scatter;
pub mod schedule;
pub mod solver;
pub mod spherical;

pub use error::FamilyError;
pub use family::BarycenterFamily;
pub use population::{FiniteSupport, PopulationModel, RngState};
pub use record::RunRecord;
pub use schedule::{ScheduleMode, StepSchedule};
pub use solver::{SolverConfig, StoppingRule};

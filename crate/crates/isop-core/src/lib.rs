//! Stochastic potential theory toolkit.
//!
//! Estimates harmonic measure, exit times, principal Dirichlet eigenvalues,
//! Riesz/Newtonian capacities and Wiener-sausage volumes by Monte Carlo
//! simulation of Brownian and symmetric alpha-stable paths, and checks the
//! classical isoperimetric inequalities (polarization, Steiner, circular and
//! Schwarz symmetrization) as seeded statistical verdicts.

pub mod error;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod stochastic;
pub mod symmetrize;

pub use error::{Error, Result};
pub use estimators::{DiscreteMeasure, Estimate};
pub use geometry::{Domain, Hyperplane, Point, RasterSet};
pub use stochastic::{SimConfig, StableParams, StoppedPath};

//! Supervised principal component analysis as a multiobjective problem:
//! a prediction loss traded off against the PCA reconstruction error, with the
//! subspace optimised on the Grassmann manifold.

pub mod baselines;
pub mod data;
pub mod error;
pub mod grassmann;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod method;
pub mod model;
pub mod nuisance;
pub mod regression;
pub mod solver;
pub mod synthetic;

pub use error::{Result, SpcaError};

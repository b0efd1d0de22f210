//! Estimation of nonlinear multivariate diffusions from discrete observations
//! with Strang splitting built on exact Pearson-diffusion moments.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod models;
pub mod moments;
pub mod optimizer;
pub mod quadrature;
pub mod sim;
pub mod study;

pub use error::{Error, Result};

//! Numerical verification laboratory for dynamical Poisson groupoids over
//! sl(n, C): dynamical r-matrices, coboundary Poisson groupoid brackets,
//! dual Lie algebroid and vertex structures, and the constant-r symplectic
//! double groupoid, each checked as a machine-verified residual.

pub mod error;
pub mod bialgebroid;
pub mod calibrate;
pub mod config;
pub mod doublegpd;
pub mod dynrmat;
pub mod liealg;
pub mod pgroupoid;
pub mod poly;
pub mod numerics;
pub mod report;
pub mod suites;
pub mod residual;

pub use error::{Error, Result};

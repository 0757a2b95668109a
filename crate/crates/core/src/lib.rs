//! Sub-Riemannian relative heat content: exact kernels, Monte Carlo and grid
//! estimators, small-time expansion fitting and the supporting operator algebra.

pub mod domains;
pub mod asymptotics;
pub mod error;
pub mod jets;
pub mod kernels;
pub mod mc;
pub mod models;
pub mod opalg;
pub mod pdegrid;
pub mod pipeline;
pub mod special;

pub use error::{Error, Result};

//! Monte Carlo machinery for extremes of observations spaced by heavy-tailed
//! renewal times: samplers, renewal and CTRW path simulation, stable
//! subordinator functionals, limit-law evaluation and an experiment harness.

pub mod ctrw;
pub mod error;
pub mod harness;
pub mod limits;
pub mod model;
pub mod pointproc;
pub mod renewal;
pub mod rng;
pub mod stats;
pub mod subord;

pub use error::{Error, Result};

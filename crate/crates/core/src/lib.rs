//! Link-level analysis of mmWave MIMO transmitters with nonlinear power
//! amplifiers: Bussgang statistics of a memoryless polynomial PA, the
//! resulting distortion covariance, spectral and energy efficiency, and the
//! transmit power that maximizes energy efficiency.

// Negated comparisons are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamformers;
pub mod channel;
pub mod config;
pub mod distortion;
pub mod ee_optimizer;
pub mod error;
pub mod linalg;
pub mod link_metrics;
pub mod oracle;
pub mod pa_model;
pub mod rng;
pub mod runner;
pub mod units;

pub use error::{Error, Result};

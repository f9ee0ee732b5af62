//! Exponentiality goodness-of-fit tests for randomly right-censored data.
//!
//! The crate provides IPCW-weighted U-statistics built on the Puri–Rubin and
//! Desu characterizations of the exponential law, four competitor tests,
//! their bootstrap and large-sample calibration, and a parallel Monte-Carlo
//! harness for power studies.

pub mod asymptotics;
pub mod bootstrap;
pub mod distributions;
pub mod error;
pub mod kernels;
pub mod power_study;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod statistics;
pub mod survival;

pub use distributions::{censoring_beta_for_rate, generate_censored_sample, DistSpec, Family, KgCensoring};
pub use error::{Error, Result};
pub use kernels::Characterization;
pub use survival::{CensoredSample, StepFn, Target};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
pub(crate) mod oracle;

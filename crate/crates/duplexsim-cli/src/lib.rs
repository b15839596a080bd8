//! Experiment runner around the duplexsim simulation core: sweeps, policy
//! comparisons, channel calibration and analysis-context dumps.

pub mod builtin;
pub mod calibrate;
pub mod compare;
pub mod config;
pub mod sweep;

//! Deterministic discrete-event simulation of half-duplex and full-duplex
//! memory channels, plus a pluggable duplex-aware task scheduling engine.
//!
//! The crate is organized around five subsystems:
//!
//! - [`channel`]: closed-form and event-level models of a memory channel,
//!   including turnaround penalties, per-direction capacities and calibration
//!   against measured ratio sweeps.
//! - [`workload`]: synthetic multi-threaded read/write stream generation with
//!   token-bucket rate limiting.
//! - [`sim`]: the discrete-event core binding workloads, channels, CPUs and
//!   scheduling policies together.
//! - [`policy`]: the pluggable scheduling policy engine (baseline, duplex
//!   co-location, and a time-series predictive scheduler) plus hierarchical
//!   hint resolution.
//! - [`cax`]: hierarchical bandwidth attribution contexts
//!   (system/process/thread/function) with shadow scope stacks.
//!
//! Everything is virtual-time only and deterministic: identical configuration
//! and master seed produce bit-identical results on any host.

pub mod cax;
pub mod channel;
pub mod policy;
pub mod seed;
pub mod sim;
pub mod workload;

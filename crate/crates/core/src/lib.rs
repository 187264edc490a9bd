//! Planning and simulation of consistent network updates.
//!
//! The crate compares untimed update procedures, where the controller waits
//! out worst-case delays between phases, against timed procedures, where
//! every switch is told in advance when to apply its change. It provides
//!
//! - [`planner`]: worst-case durations from PERT graphs and their closed
//!   forms, and worst-case schedules;
//! - [`simulator`]: a deterministic discrete-event engine that executes
//!   both kinds of procedure and forwards test-flow packets through the
//!   changing rule tables;
//! - [`consistency`]: per-packet classification and the inconsistency
//!   metric, including the consistency-knob schedule;
//! - [`topology`]: leaf-spine generation, geo-annotated topology files and
//!   path-change update construction;
//! - [`stats`]: delay sampling, percentiles and tail ratios;
//! - [`cli`]: the experiment harness behind the `netupdate` binary.

pub mod cli;
pub mod consistency;
pub mod model;
pub mod planner;
pub mod simulator;
pub mod stats;
pub mod topology;

pub use model::{Nanos, SystemParameters};

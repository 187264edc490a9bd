use serde::{Deserialize, Serialize};

use crate::model::{Nanos, SystemParameters};

/// How late a switch runs a timed command: its clock is ahead of real time
/// by at most `sync_err`, and execution adds at most `exec_err` more. The
/// two add up to the scheduling error δ, so a command due at `T` runs in
/// `[T, T + δ]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockModel {
    pub sync_err: Nanos,
    pub exec_err: Nanos,
}

impl ClockModel {
    pub fn new(sync_err: Nanos, exec_err: Nanos, params: &SystemParameters) -> Result<Self, String> {
        if sync_err + exec_err != params.delta_sched {
            return Err(format!(
                "clock error {sync_err} + execution error {exec_err} must equal the scheduling error {}",
                params.delta_sched
            ));
        }
        Ok(ClockModel { sync_err, exec_err })
    }

    /// Perfect clocks; all of δ is execution jitter.
    pub fn jitter_only(params: &SystemParameters) -> Self {
        ClockModel {
            sync_err: Nanos::ZERO,
            exec_err: params.delta_sched,
        }
    }

    pub fn total(&self) -> Nanos {
        self.sync_err + self.exec_err
    }
}

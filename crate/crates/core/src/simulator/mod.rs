//! Deterministic discrete-event execution of update procedures.
//!
//! A run has two stages. The control stage is an event loop in which the
//! controller sends update messages and switches execute them; it yields
//! the execution instant of every singleton update. The data stage then
//! forwards test-flow packets against the resulting [`StateTimeline`].
//!
//! Runs are single-threaded and fully determined by their inputs and seed.

mod clock;
mod delay;
mod engine;
mod forward;
mod queue;

use std::fmt;

use serde::Serialize;

use crate::model::{Endpoint, FlowId, ForwardingState, ModelError, Nanos, Phase, SwitchId};

pub use clock::ClockModel;
pub use delay::{DelayModel, DEFAULT_CAP_FACTOR};
pub use engine::{run_timed, run_untimed, ControlDelays, Simulation};
pub use forward::{
    forward_packet, inject_flow, path_delay_bound, Hop, LinkDelays, MissingEntry, Outcome,
    PacketTrace, StateTimeline,
};
pub use queue::EventQueue;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid delay model for {what}: {reason}")]
    InvalidDelay { what: &'static str, reason: String },
    #[error("first scheduled instant {first} is earlier than send time plus setup lead ({earliest})")]
    ScheduleTooEarly { first: Nanos, earliest: Nanos },
    #[error("test flow `{0}` needs a positive finite rate")]
    BadRate(FlowId),
    #[error("{0} is not an ingress port")]
    NotIngress(Endpoint),
    #[error("clock model adds up to {total}, expected the scheduling error {delta}")]
    ClockMismatch { total: Nanos, delta: Nanos },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Untimed,
    Timed,
}

/// When one switch applied one singleton update.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Execution {
    /// Position of the update in the procedure's item list.
    pub item: usize,
    pub switch: SwitchId,
    pub phase: Phase,
    pub sent: Nanos,
    pub arrived: Nanos,
    pub executed: Nanos,
    /// Due time for timed runs.
    pub scheduled: Option<Nanos>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    ControllerDelay,
    MessageGap,
    NetworkDelay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fault {
    /// A sampled delay exceeded the bound the procedure was planned with.
    BoundViolation {
        bound_kind: BoundKind,
        sample: Nanos,
        bound: Nanos,
        at: Nanos,
    },
    /// Packets of a flow whose transit time exceeded Dn.
    SlowPackets {
        flow: FlowId,
        packets: usize,
        max_transit: Nanos,
        bound: Nanos,
    },
    /// A timed command reached its switch after the switch's clock had
    /// passed the due time; the switch ran it on arrival.
    MissedSchedule {
        switch: SwitchId,
        phase: Phase,
        scheduled: Nanos,
        arrived: Nanos,
    },
    /// A removal found no entry to delete; harmless.
    MissingEntry {
        switch: SwitchId,
        phase: Phase,
        at: Nanos,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogKind {
    Send,
    Arrive,
    Execute,
    Fault,
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogKind::Send => "send",
            LogKind::Arrive => "arrive",
            LogKind::Execute => "execute",
            LogKind::Fault => "fault",
        })
    }
}

/// One control-plane message event.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub time: Nanos,
    pub kind: LogKind,
    pub src: String,
    pub dst: String,
    pub phase: Phase,
    pub detail: String,
}

impl fmt::Display for LogEntry {
    /// `time_ns kind src dst phase detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {}",
            self.time.0, self.kind, self.src, self.dst, self.phase, self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowTrace {
    pub flow: FlowId,
    pub rate_pps: f64,
    pub window: (Nanos, Nanos),
    pub packets: Vec<PacketTrace>,
}

/// Bounds in force during a run, recorded for later inspection.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunMetadata {
    pub controller_delay_cap: Nanos,
    pub message_gap_cap: Nanos,
    pub max_link_delay_cap: Nanos,
    pub adversarial: bool,
    pub start: Nanos,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunResult {
    pub mode: RunMode,
    pub seed: u64,
    /// First execution to last execution.
    pub update_duration: Nanos,
    pub first_execution: Nanos,
    pub last_execution: Nanos,
    pub executions: Vec<Execution>,
    pub faults: Vec<Fault>,
    pub flows: Vec<FlowTrace>,
    pub metadata: RunMetadata,
    #[serde(skip)]
    pub log: Vec<LogEntry>,
    #[serde(skip)]
    pub old_config: ForwardingState,
    #[serde(skip)]
    pub new_config: ForwardingState,
}

impl RunResult {
    pub fn flow(&self, id: &FlowId) -> Option<&FlowTrace> {
        self.flows.iter().find(|f| &f.flow == id)
    }

    pub fn log_lines(&self) -> impl Iterator<Item = String> + '_ {
        self.log.iter().map(ToString::to_string)
    }

    pub fn bound_violations(&self) -> usize {
        self.faults
            .iter()
            .filter(|f| matches!(f, Fault::BoundViolation { .. }))
            .count()
    }

    pub fn missed_schedules(&self) -> usize {
        self.faults
            .iter()
            .filter(|f| matches!(f, Fault::MissedSchedule { .. }))
            .count()
    }
}

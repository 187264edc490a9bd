//! Domain types: the network, packets, rule tables, updates and schedules,
//! plus the delay and accuracy bounds they are planned against.

mod forwarding;
mod network;
mod params;
mod time;
mod update;

pub use forwarding::{
    Action, Applied, FlowId, ForwardingState, Generation, Lookup, MatchKey, Packet, PacketInstance,
    Rule, RuleTable, VersionTag,
};
pub use network::{Endpoint, Link, Network, NetworkBuilder, PortId, SwitchId};
pub use params::SystemParameters;
pub use time::{Nanos, ParseNanosError, TimeUnit};
pub use update::{
    similar, Phase, Schedule, SingletonUpdate, TimedUpdateProcedure, UpdateMode, UpdateProcedure,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown switch `{0}`")]
    UnknownSwitch(SwitchId),
    #[error("endpoint {0} does not exist")]
    UnknownEndpoint(Endpoint),
    #[error("link connects {0} to itself")]
    SelfLink(Endpoint),
    #[error("port {0} is attached to more than one link")]
    PortReused(Endpoint),
    #[error("ingress port {0} is also a link endpoint")]
    IngressIsLinked(Endpoint),
    #[error("update procedure has no updates")]
    EmptyProcedure,
    #[error("phase {missing} is empty in a {k}-phase procedure")]
    PhaseGap { missing: Phase, k: Phase },
    #[error("phase {0} has no scheduled time")]
    UnscheduledPhase(Phase),
    #[error("phase {0} is scheduled both as a regular and a garbage-collection phase")]
    DuplicatePhaseTime(Phase),
    #[error("phase {phase} is due at {time}, before the previous phase at {previous}")]
    ScheduleOutOfOrder {
        phase: Phase,
        time: Nanos,
        previous: Nanos,
    },
}

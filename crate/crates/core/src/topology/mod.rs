//! Network construction: the leaf-spine generator, geo-annotated topology
//! files and the two-phase update that moves flows to new paths.

mod file;
mod leaf_spine;
mod paths;

use crate::model::{FlowId, ModelError, SwitchId};

pub use file::{
    haversine_km, load_topology, IngressSpec, LinkDelayMode, LinkSpec, NodeSpec, TopologyFile,
    DEFAULT_US_PER_KM,
};
pub use leaf_spine::{leaf_spine, leaf_spine_scenario, Scenario};
pub use paths::{
    ingress_endpoint, install_paths, ordered_update, path_bound, path_entries, shortest_path, two_phase_update,
    update_for_path_change, PathChange, PathRule, NEW_TAG, OLD_TAG,
};

#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("leaf-spine size {0} must be a positive multiple of 3")]
    BadLeafSpineSize(usize),
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("node `{0}` is declared twice")]
    DuplicateNode(String),
    #[error("link {a}-{b} references unknown node `{missing}`")]
    UnknownNode { a: String, b: String, missing: String },
    #[error("link {a}-{b} needs coordinates on both nodes or an explicit delay_ns")]
    MissingDelay { a: String, b: String },
    #[error("ingress references unknown node `{0}`")]
    UnknownIngress(String),
    #[error("propagation speed {0} us/km is not a finite non-negative number")]
    BadPropagation(f64),
    #[error("flow `{0}` has an empty path")]
    EmptyPath(FlowId),
    #[error("flow `{flow}`: path starts at `{start}` but the flow enters at `{ingress}`")]
    IngressMismatch {
        flow: FlowId,
        start: SwitchId,
        ingress: SwitchId,
    },
    #[error("flow `{flow}`: old path ends at `{old}`, new path at `{new}`")]
    EgressMismatch {
        flow: FlowId,
        old: SwitchId,
        new: SwitchId,
    },
    #[error("flow `{flow}`: `{from}` and `{to}` are not adjacent")]
    NotAdjacent {
        flow: FlowId,
        from: SwitchId,
        to: SwitchId,
    },
    #[error("flow `{flow}`: path visits `{switch}` twice")]
    RepeatedSwitch { flow: FlowId, switch: SwitchId },
    #[error("no path from `{from}` to `{to}`")]
    NoPath { from: SwitchId, to: SwitchId },
    #[error("switch `{0}` has no ingress port")]
    NoIngress(SwitchId),
}

//! Per-packet consistency of simulated updates and the inconsistency metric
//! `I(f, U) = n(f, U) / R(f)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{
    Endpoint, FlowId, ForwardingState, Nanos, Packet, Phase, Schedule, SwitchId, SystemParameters,
};
use crate::planner;
use crate::simulator::{PacketTrace, RunResult};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConsistencyError {
    #[error("trace visits switch `{0}`, which neither configuration knows")]
    UnknownSwitch(SwitchId),
    #[error("test flow `{0}` needs a positive finite rate")]
    ZeroRate(FlowId),
    #[error("run has no traces for flow `{0}`")]
    UnknownFlow(FlowId),
}

/// Identical packets entering at one ingress port at a constant rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFlow {
    pub id: FlowId,
    pub ingress: Endpoint,
    /// Packets per second.
    pub rate_pps: f64,
}

impl TestFlow {
    pub fn new(id: impl Into<FlowId>, ingress: Endpoint, rate_pps: f64) -> Self {
        TestFlow {
            id: id.into(),
            ingress,
            rate_pps,
        }
    }

    /// A flow sending `packet_bytes`-byte packets at `bits_per_sec`.
    pub fn from_bitrate(
        id: impl Into<FlowId>,
        ingress: Endpoint,
        bits_per_sec: f64,
        packet_bytes: u32,
    ) -> Self {
        Self::new(id, ingress, bits_per_sec / (8.0 * packet_bytes as f64))
    }

    /// The packet every instance carries; untagged at ingress.
    pub fn packet(&self) -> Packet {
        Packet {
            flow: self.id.clone(),
            tag: None,
        }
    }

    /// Inter-packet interval `1/R`, rounded up to whole nanoseconds.
    pub fn spacing(&self) -> Nanos {
        Nanos((1e9 / self.rate_pps).ceil() as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    ConsistentOld,
    ConsistentNew,
    Inconsistent,
}

/// Compares every hop's realized action with the action the old and the
/// new configuration would have taken for the same packet, tag and port.
/// A packet matching both counts as old.
pub fn classify_packet(
    trace: &PacketTrace,
    old: &ForwardingState,
    new: &ForwardingState,
) -> Result<Class, ConsistencyError> {
    let mut as_old = true;
    let mut as_new = true;
    for hop in &trace.hops {
        if !old.contains_switch(&hop.switch) && !new.contains_switch(&hop.switch) {
            return Err(ConsistencyError::UnknownSwitch(hop.switch.clone()));
        }
        let packet = Packet {
            flow: trace.flow.clone(),
            tag: hop.tag,
        };
        as_old &= old.lookup(&hop.switch, &packet, hop.in_port).action == hop.action;
        as_new &= new.lookup(&hop.switch, &packet, hop.in_port).action == hop.action;
    }
    Ok(if as_old {
        Class::ConsistentOld
    } else if as_new {
        Class::ConsistentNew
    } else {
        Class::Inconsistent
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InconsistencyReport {
    pub flow_id: FlowId,
    pub packets: usize,
    pub n_inconsistent: usize,
    pub rate_pps: f64,
    /// `n_inconsistent / rate`, rounded to the nearest nanosecond.
    pub inconsistency: Nanos,
}

/// Counts the inconsistently forwarded packets of `flow` in a run. The new
/// configuration is the state the run ended in.
pub fn measure_inconsistency(
    run: &RunResult,
    flow: &TestFlow,
) -> Result<InconsistencyReport, ConsistencyError> {
    measure(run, &flow.id, flow.rate_pps)
}

/// Reports for every flow traced in the run, in run order.
pub fn measure_all(run: &RunResult) -> Result<Vec<InconsistencyReport>, ConsistencyError> {
    run.flows
        .iter()
        .map(|t| measure(run, &t.flow, t.rate_pps))
        .collect()
}

fn measure(run: &RunResult, id: &FlowId, rate_pps: f64) -> Result<InconsistencyReport, ConsistencyError> {
    if !(rate_pps > 0.0 && rate_pps.is_finite()) {
        return Err(ConsistencyError::ZeroRate(id.clone()));
    }
    let traces = run
        .flow(id)
        .ok_or_else(|| ConsistencyError::UnknownFlow(id.clone()))?;
    let mut n = 0;
    for trace in &traces.packets {
        if classify_packet(trace, &run.old_config, &run.new_config)? == Class::Inconsistent {
            n += 1;
        }
    }
    Ok(InconsistencyReport {
        flow_id: id.clone(),
        packets: traces.packets.len(),
        n_inconsistent: n,
        rate_pps,
        inconsistency: Nanos((n as f64 * 1e9 / rate_pps).round() as u64),
    })
}

/// Two-phase schedule with garbage collection where `d` replaces Dn as the
/// drain time: `T_2 = T_1 + δ` and `Tg = T_2 + δ + d`. With `d = Dn` this
/// is the worst-case schedule.
pub fn knob_schedule(t1: Nanos, d: Nanos, params: &SystemParameters) -> Schedule {
    let gc: BTreeSet<Phase> = [3].into();
    let mut schedule = planner::spaced_schedule(3, t1, params, &gc, d);
    schedule.knob_d = Some(d);
    schedule
}

//! Packet injection and hop-by-hop forwarding against time-varying rule
//! tables.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::consistency::TestFlow;
use crate::model::{
    Action, Endpoint, FlowId, ForwardingState, Generation, Lookup, MatchKey, ModelError, Nanos, Network,
    Packet, PacketInstance, PortId, RuleTable, SingletonUpdate, SwitchId, VersionTag,
};
use crate::stats::sample;

use super::SimError;

/// Rule tables of every switch as a function of time: the table a packet
/// sees at time `t` includes every update executed at or before `t`.
#[derive(Clone, Debug)]
pub struct StateTimeline {
    initial: ForwardingState,
    changes: BTreeMap<SwitchId, Vec<(Nanos, RuleTable)>>,
    last: ForwardingState,
}

/// A removal that found nothing to delete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MissingEntry {
    pub switch: SwitchId,
    pub at: Nanos,
    pub key: MatchKey,
}

impl StateTimeline {
    /// Applies updates in the given order; times must not decrease.
    pub fn build<'a>(
        initial: &ForwardingState,
        executed: impl IntoIterator<Item = (Nanos, &'a SingletonUpdate)>,
    ) -> Result<(Self, Vec<MissingEntry>), ModelError> {
        let mut current = initial.clone();
        let mut changes: BTreeMap<SwitchId, Vec<(Nanos, RuleTable)>> = BTreeMap::new();
        let mut missing = Vec::new();
        let mut prev = Nanos::ZERO;
        for (at, update) in executed {
            debug_assert!(at >= prev, "timeline updates out of order");
            prev = at;
            for key in current.apply_in_place(update)? {
                missing.push(MissingEntry {
                    switch: update.target.clone(),
                    at,
                    key,
                });
            }
            let table = current
                .table(&update.target)
                .expect("apply_in_place checked the target")
                .clone();
            let history = changes.entry(update.target.clone()).or_default();
            match history.last_mut() {
                Some((t, slot)) if *t == at => *slot = table,
                _ => history.push((at, table)),
            }
        }
        Ok((
            StateTimeline {
                initial: initial.clone(),
                changes,
                last: current,
            },
            missing,
        ))
    }

    /// A timeline that never changes.
    pub fn fixed(state: &ForwardingState) -> Self {
        StateTimeline {
            initial: state.clone(),
            changes: BTreeMap::new(),
            last: state.clone(),
        }
    }

    pub fn table_at(&self, switch: &SwitchId, t: Nanos) -> Option<&RuleTable> {
        if let Some(history) = self.changes.get(switch) {
            let applied = history.partition_point(|(at, _)| *at <= t);
            if applied > 0 {
                return Some(&history[applied - 1].1);
            }
        }
        self.initial.table(switch)
    }

    pub fn initial(&self) -> &ForwardingState {
        &self.initial
    }

    pub fn final_state(&self) -> &ForwardingState {
        &self.last
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub switch: SwitchId,
    pub in_port: PortId,
    pub arrival: Nanos,
    /// Tag carried when the packet reached this switch.
    pub tag: Option<VersionTag>,
    pub action: Action,
    /// Generation of the matched rule; `None` on a table miss.
    pub generation: Option<Generation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Delivered,
    Dropped,
    /// Sent out of a port with no link attached.
    Dangling,
    /// Hop limit reached, most likely a transient loop.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PacketTrace {
    pub flow: FlowId,
    pub injected_at: Nanos,
    pub hops: Vec<Hop>,
    pub outcome: Outcome,
    /// Arrival time at the last hop.
    pub finished_at: Nanos,
}

impl PacketTrace {
    pub fn truncated(&self) -> bool {
        self.outcome == Outcome::Truncated
    }

    pub fn transit_time(&self) -> Nanos {
        self.finished_at - self.injected_at
    }
}

/// Instances of a test flow spaced `1/R` apart over `[t0, t1)`. The first
/// instance is always at `t0`.
pub fn inject_flow(
    net: &Network,
    flow: &TestFlow,
    window: (Nanos, Nanos),
) -> Result<Vec<PacketInstance>, SimError> {
    if !(flow.rate_pps > 0.0 && flow.rate_pps.is_finite()) {
        return Err(SimError::BadRate(flow.id.clone()));
    }
    if !net.is_ingress(&flow.ingress) {
        return Err(SimError::NotIngress(flow.ingress.clone()));
    }
    let (t0, t1) = window;
    let spacing_ns = 1e9 / flow.rate_pps;
    let packet = flow.packet();
    let mut out = Vec::new();
    for i in 0u64.. {
        let offset = (i as f64 * spacing_ns).round() as u64;
        let at = t0 + Nanos(offset);
        if i > 0 && at >= t1 {
            break;
        }
        out.push(PacketInstance {
            packet: packet.clone(),
            ingress: flow.ingress.clone(),
            arrival: at,
        });
    }
    Ok(out)
}

/// How link delays are drawn while forwarding.
pub enum LinkDelays<'r, R: Rng> {
    Sampled(&'r mut R),
    /// Every link takes its upper bound.
    Pinned,
}

/// Forwards one packet hop by hop. At each switch the table in force at
/// the packet's arrival time decides the action.
pub fn forward_packet<R: Rng>(
    net: &Network,
    timeline: &StateTimeline,
    instance: &PacketInstance,
    delays: &mut LinkDelays<'_, R>,
    hop_limit: usize,
) -> PacketTrace {
    let mut at = instance.ingress.clone();
    let mut now = instance.arrival;
    let mut packet: Packet = instance.packet.clone();
    let mut hops = Vec::new();
    let outcome = loop {
        if hops.len() >= hop_limit {
            break Outcome::Truncated;
        }
        let lookup = match timeline.table_at(&at.switch, now) {
            Some(table) => table.lookup(&packet, at.port),
            None => Lookup {
                action: Action::Drop,
                generation: None,
            },
        };
        hops.push(Hop {
            switch: at.switch.clone(),
            in_port: at.port,
            arrival: now,
            tag: packet.tag,
            action: lookup.action,
            generation: lookup.generation,
        });
        let out_port = match lookup.action {
            Action::Forward { port } => port,
            Action::ForwardTagged { port, tag } => {
                packet.tag = Some(tag);
                port
            }
            Action::Drop => break Outcome::Dropped,
            Action::Deliver => break Outcome::Delivered,
        };
        let Some((far, model)) = net.peer(&Endpoint::new(at.switch.clone(), out_port)) else {
            break Outcome::Dangling;
        };
        now += match delays {
            LinkDelays::Sampled(rng) => sample(model, *rng),
            LinkDelays::Pinned => model.upper_bound(),
        };
        at = far.clone();
    };
    PacketTrace {
        flow: instance.packet.flow.clone(),
        injected_at: instance.arrival,
        hops,
        outcome,
        finished_at: now,
    }
}

/// Sum of link upper bounds along the path a flow takes under a fixed
/// state, following at most `hop_limit` hops.
pub fn path_delay_bound(
    net: &Network,
    state: &ForwardingState,
    flow: &TestFlow,
    hop_limit: usize,
) -> Nanos {
    let timeline = StateTimeline::fixed(state);
    let instance = PacketInstance {
        packet: flow.packet(),
        ingress: flow.ingress.clone(),
        arrival: Nanos::ZERO,
    };
    let trace = forward_packet::<rand::rngs::mock::StepRng>(
        net,
        &timeline,
        &instance,
        &mut LinkDelays::Pinned,
        hop_limit,
    );
    trace.finished_at
}

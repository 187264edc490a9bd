use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::consistency::TestFlow;
use crate::model::{
    Action, Endpoint, ForwardingState, Generation, MatchKey, Nanos, Network, PortId, Rule,
    SingletonUpdate, SwitchId, UpdateMode, UpdateProcedure, VersionTag,
};

use super::TopologyError;

/// Version tag of the configuration being replaced.
pub const OLD_TAG: VersionTag = VersionTag(1);
/// Version tag of the configuration being installed.
pub const NEW_TAG: VersionTag = VersionTag(2);

/// Moves one flow from `old_path` to `new_path`. Both paths list switches
/// from the flow's ingress switch to its egress switch.
#[derive(Clone, Debug, PartialEq)]
pub struct PathChange {
    pub flow: TestFlow,
    pub old_path: Vec<SwitchId>,
    pub new_path: Vec<SwitchId>,
}

/// First ingress port of a switch.
pub fn ingress_endpoint(net: &Network, switch: &SwitchId) -> Result<Endpoint, TopologyError> {
    net.ingress_of(switch)
        .first()
        .map(|p| Endpoint::new(switch.clone(), *p))
        .ok_or_else(|| TopologyError::NoIngress(switch.clone()))
}

/// Fewest-hop path; ties go to the lexicographically smallest neighbour.
pub fn shortest_path(
    net: &Network,
    from: &SwitchId,
    to: &SwitchId,
) -> Result<Vec<SwitchId>, TopologyError> {
    let no_path = || TopologyError::NoPath {
        from: from.clone(),
        to: to.clone(),
    };
    if !net.contains_switch(from) || !net.contains_switch(to) {
        return Err(no_path());
    }
    let mut parent: BTreeMap<SwitchId, SwitchId> = BTreeMap::new();
    let mut seen: BTreeSet<SwitchId> = [from.clone()].into();
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(cur) = queue.pop_front() {
        if &cur == to {
            let mut path = vec![cur];
            while let Some(p) = parent.get(path.last().expect("non-empty")) {
                path.push(p.clone());
            }
            path.reverse();
            return Ok(path);
        }
        for next in net.neighbors(&cur) {
            if seen.insert(next.clone()) {
                parent.insert(next.clone(), cur.clone());
                queue.push_back(next);
            }
        }
    }
    Err(no_path())
}

/// Sum of link delay upper bounds along a path, or `None` when two
/// consecutive switches are not adjacent.
pub fn path_bound(net: &Network, path: &[SwitchId]) -> Option<Nanos> {
    path.windows(2).try_fold(Nanos::ZERO, |acc, pair| {
        let port = net.port_towards(&pair[0], &pair[1])?;
        let (_, delay) = net.peer(&Endpoint::new(pair[0].clone(), port))?;
        Some(acc + delay.upper_bound())
    })
}

/// Tagged rules that carry `flow` along `path`: at every switch, packets
/// tagged `tag` from the previous hop (or the ingress port) go to the next
/// hop, and the last switch delivers. Returns the ingress stamp rule, which
/// tags untagged packets at the ingress port, and the per-hop rules.
pub fn path_entries(
    net: &Network,
    flow: &TestFlow,
    path: &[SwitchId],
    tag: VersionTag,
) -> Result<(PathRule, Vec<PathRule>), TopologyError> {
    check_path(net, flow, path)?;
    let mut hops = Vec::with_capacity(path.len());
    let mut in_port = flow.ingress.port;
    let mut first_action = Action::Deliver;
    for (i, sw) in path.iter().enumerate() {
        let action = match path.get(i + 1) {
            Some(next) => Action::Forward {
                port: port_towards(net, flow, sw, next)?,
            },
            None => Action::Deliver,
        };
        if i == 0 {
            first_action = action;
        }
        hops.push(PathRule {
            switch: sw.clone(),
            key: MatchKey::new(flow.id.clone(), Some(tag), in_port),
            action,
        });
        if let Some(next) = path.get(i + 1) {
            in_port = port_towards(net, flow, next, sw)?;
        }
    }
    let stamp_action = match first_action {
        Action::Forward { port } => Action::ForwardTagged { port, tag },
        other => other,
    };
    let stamp = PathRule {
        switch: path[0].clone(),
        key: MatchKey::new(flow.id.clone(), None, flow.ingress.port),
        action: stamp_action,
    };
    Ok((stamp, hops))
}

/// One rule placed by [`path_entries`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathRule {
    pub switch: SwitchId,
    pub key: MatchKey,
    pub action: Action,
}

fn port_towards(
    net: &Network,
    flow: &TestFlow,
    from: &SwitchId,
    to: &SwitchId,
) -> Result<PortId, TopologyError> {
    net.port_towards(from, to)
        .ok_or_else(|| TopologyError::NotAdjacent {
            flow: flow.id.clone(),
            from: from.clone(),
            to: to.clone(),
        })
}

fn check_path(net: &Network, flow: &TestFlow, path: &[SwitchId]) -> Result<(), TopologyError> {
    let Some(start) = path.first() else {
        return Err(TopologyError::EmptyPath(flow.id.clone()));
    };
    if start != &flow.ingress.switch {
        return Err(TopologyError::IngressMismatch {
            flow: flow.id.clone(),
            start: start.clone(),
            ingress: flow.ingress.switch.clone(),
        });
    }
    let mut seen = BTreeSet::new();
    for sw in path {
        if !net.contains_switch(sw) {
            return Err(crate::model::ModelError::UnknownSwitch(sw.clone()).into());
        }
        if !seen.insert(sw) {
            return Err(TopologyError::RepeatedSwitch {
                flow: flow.id.clone(),
                switch: sw.clone(),
            });
        }
    }
    Ok(())
}

/// The configuration before an update: every flow stamped with
/// [`OLD_TAG`] and routed along its old path. All rules are old-generation.
pub fn install_paths(net: &Network, changes: &[PathChange]) -> Result<ForwardingState, TopologyError> {
    let mut state = ForwardingState::with_switches(net.switches());
    for change in changes {
        let (stamp, hops) = path_entries(net, &change.flow, &change.old_path, OLD_TAG)?;
        for r in hops.into_iter().chain([stamp]) {
            state.insert_rule(
                &r.switch,
                r.key,
                Rule {
                    action: r.action,
                    generation: Generation::Old,
                },
            )?;
        }
    }
    Ok(state)
}

/// Per-switch singleton updates of one phase, in order of first mention.
#[derive(Default)]
struct PhaseBuilder {
    order: Vec<SwitchId>,
    updates: BTreeMap<SwitchId, SingletonUpdate>,
}

impl PhaseBuilder {
    fn add(&mut self, mode: UpdateMode, rule: PathRule) {
        let update = self.updates.entry(rule.switch.clone()).or_insert_with(|| {
            self.order.push(rule.switch.clone());
            SingletonUpdate {
                target: rule.switch.clone(),
                entries: BTreeMap::new(),
                mode,
            }
        });
        update.entries.insert(rule.key, rule.action);
    }

    fn finish(mut self) -> Vec<SingletonUpdate> {
        self.order
            .iter()
            .map(|s| self.updates.remove(s).expect("ordered switch has an update"))
            .collect()
    }
}

/// Two-phase update for a set of path changes. Phase 1 installs
/// [`NEW_TAG`] rules on every switch of each new path, phase 2 replaces
/// the ingress stamp, and with `gc` a third phase removes the
/// [`OLD_TAG`] rules along each old path. Rules for several flows on one
/// switch share one singleton update.
pub fn two_phase_update(
    net: &Network,
    changes: &[PathChange],
    gc: bool,
) -> Result<UpdateProcedure, TopologyError> {
    let mut install = PhaseBuilder::default();
    let mut flip = PhaseBuilder::default();
    let mut collect = PhaseBuilder::default();
    for change in changes {
        check_egress(change)?;
        let (stamp, hops) = path_entries(net, &change.flow, &change.new_path, NEW_TAG)?;
        for r in hops {
            install.add(UpdateMode::Install, r);
        }
        flip.add(UpdateMode::Install, stamp);
        let (_, old_hops) = path_entries(net, &change.flow, &change.old_path, OLD_TAG)?;
        for r in old_hops {
            collect.add(UpdateMode::Remove, r);
        }
    }
    let mut phases = vec![install.finish(), flip.finish()];
    if gc {
        phases.push(collect.finish());
    }
    Ok(UpdateProcedure::from_phases(phases)?)
}

/// Two-phase update with garbage collection for a single flow.
pub fn update_for_path_change(
    net: &Network,
    change: &PathChange,
) -> Result<UpdateProcedure, TopologyError> {
    two_phase_update(net, std::slice::from_ref(change), true)
}

/// Ordered update: new-path rules are installed one hop per phase from the
/// egress back towards the ingress, and the ingress stamp is flipped in a
/// final phase. Old rules are left in place.
pub fn ordered_update(net: &Network, changes: &[PathChange]) -> Result<UpdateProcedure, TopologyError> {
    let mut per_flow = Vec::with_capacity(changes.len());
    for change in changes {
        check_egress(change)?;
        per_flow.push(path_entries(net, &change.flow, &change.new_path, NEW_TAG)?);
    }
    let longest = per_flow.iter().map(|(_, hops)| hops.len()).max().unwrap_or(0);
    let mut phases: Vec<Vec<SingletonUpdate>> = Vec::with_capacity(longest + 1);
    for back in 1..=longest {
        let mut phase = PhaseBuilder::default();
        for (_, hops) in &per_flow {
            if hops.len() >= back {
                phase.add(UpdateMode::Install, hops[hops.len() - back].clone());
            }
        }
        phases.push(phase.finish());
    }
    let mut flip = PhaseBuilder::default();
    for (stamp, _) in per_flow {
        flip.add(UpdateMode::Install, stamp);
    }
    phases.push(flip.finish());
    Ok(UpdateProcedure::from_phases(phases)?)
}

fn check_egress(change: &PathChange) -> Result<(), TopologyError> {
    match (change.old_path.last(), change.new_path.last()) {
        (Some(old), Some(new)) if old != new => Err(TopologyError::EgressMismatch {
            flow: change.flow.id.clone(),
            old: old.clone(),
            new: new.clone(),
        }),
        _ => Ok(()),
    }
}

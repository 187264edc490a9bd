//! PERT event/activity graphs and their longest paths.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::model::{Nanos, Phase, Schedule, SystemParameters, UpdateProcedure};

use super::PlanError;

/// An event in a PERT graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PertNode {
    /// `C_start`
    Start,
    /// `C_{j,i}`: the controller starts sending message `i` of phase `j`.
    Message { phase: Phase, index: usize },
    /// `S_{j,i}`: the switch targeted by message `i` of phase `j` is updated.
    Switch { phase: Phase, index: usize },
    /// `T_j`: the scheduled clock time of phase `j` is reached.
    Scheduled { phase: Phase },
    /// `C_fin`
    Finish,
}

impl fmt::Display for PertNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PertNode::Start => f.write_str("C_start"),
            PertNode::Message { phase, index } => write!(f, "C_{{{phase},{index}}}"),
            PertNode::Switch { phase, index } => write!(f, "S_{{{phase},{index}}}"),
            PertNode::Scheduled { phase } => write!(f, "T_{phase}"),
            PertNode::Finish => f.write_str("C_fin"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PertEdge {
    pub from: usize,
    pub to: usize,
    pub weight: Nanos,
}

#[derive(Clone, Debug, Default)]
pub struct PertGraph {
    nodes: Vec<PertNode>,
    index: HashMap<PertNode, usize>,
    edges: Vec<PertEdge>,
}

/// Worst-case duration and one path that attains it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DurationReport {
    pub worst_case: Nanos,
    pub critical_path: Vec<PertNode>,
}

impl PertGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the node's index, adding it if needed.
    pub fn add_node(&mut self, node: PertNode) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        self.nodes.push(node);
        self.index.insert(node, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: PertNode, to: PertNode, weight: Nanos) {
        let from = self.add_node(from);
        let to = self.add_node(to);
        self.edges.push(PertEdge { from, to, weight });
    }

    pub fn nodes(&self) -> &[PertNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[PertEdge] {
        &self.edges
    }

    pub fn node_index(&self, node: &PertNode) -> Option<usize> {
        self.index.get(node).copied()
    }

    /// Weight of the edge `from -> to`; the largest one if there are several.
    pub fn edge_weight(&self, from: &PertNode, to: &PertNode) -> Option<Nanos> {
        let (f, t) = (self.node_index(from)?, self.node_index(to)?);
        self.edges
            .iter()
            .filter(|e| e.from == f && e.to == t)
            .map(|e| e.weight)
            .max()
    }

    fn topological_order(&self) -> Result<Vec<usize>, PlanError> {
        let n = self.nodes.len();
        let mut indegree = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            indegree[e.to] += 1;
            out[e.from].push(i);
        }
        let mut ready: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_front() {
            order.push(v);
            for &ei in &out[v] {
                let w = self.edges[ei].to;
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    ready.push_back(w);
                }
            }
        }
        if order.len() != n {
            return Err(PlanError::Cycle);
        }
        Ok(order)
    }

    /// Longest path between two events, by dynamic programming over a
    /// topological order.
    pub fn longest_path_between(
        &self,
        from: &PertNode,
        to: &PertNode,
    ) -> Result<DurationReport, PlanError> {
        let order = self.topological_order()?;
        let src = self.node_index(from).ok_or(PlanError::MissingNode(*from))?;
        let dst = self.node_index(to).ok_or(PlanError::MissingNode(*to))?;
        let n = self.nodes.len();
        let mut dist: Vec<Option<Nanos>> = vec![None; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        dist[src] = Some(Nanos::ZERO);
        let mut out: Vec<Vec<&PertEdge>> = vec![Vec::new(); n];
        for e in &self.edges {
            out[e.from].push(e);
        }
        for v in order {
            let Some(dv) = dist[v] else { continue };
            for e in &out[v] {
                let cand = dv + e.weight;
                if dist[e.to].is_none_or(|d| cand > d) {
                    dist[e.to] = Some(cand);
                    pred[e.to] = Some(v);
                }
            }
        }
        let worst_case = dist[dst].ok_or(PlanError::Unreachable(*from, *to))?;
        let mut path = vec![self.nodes[dst]];
        let mut cur = dst;
        while let Some(p) = pred[cur] {
            path.push(self.nodes[p]);
            cur = p;
        }
        path.reverse();
        Ok(DurationReport {
            worst_case,
            critical_path: path,
        })
    }
}

/// Longest `C_start -> C_fin` path.
pub fn longest_path(graph: &PertGraph) -> Result<DurationReport, PlanError> {
    graph.longest_path_between(&PertNode::Start, &PertNode::Finish)
}

pub(crate) fn check_phases(sizes: &[usize], gc_phases: &BTreeSet<Phase>) -> Result<(), PlanError> {
    if sizes.is_empty() {
        return Err(PlanError::EmptyProcedure);
    }
    if let Some(j) = sizes.iter().position(|&n| n == 0) {
        return Err(PlanError::EmptyPhase(j as Phase + 1));
    }
    let k = sizes.len() as Phase;
    if let Some(&j) = gc_phases.iter().find(|&&j| j < 2 || j > k) {
        return Err(PlanError::GcPhaseOutOfRange { phase: j, k });
    }
    Ok(())
}

/// Controller wait between the last message of phase `j - 1` and the first
/// message of phase `j`.
pub(crate) fn boundary_wait(j: Phase, gc_phases: &BTreeSet<Phase>, p: &SystemParameters) -> Nanos {
    if gc_phases.contains(&j) {
        p.delta_msg.max(p.d_c + p.d_n)
    } else {
        p.delta_msg.max(p.d_c)
    }
}

/// Untimed greedy PERT graph for phases of the given sizes.
///
/// Each phase is a chain of message events spaced Δ apart, every message
/// event reaches its switch event after Dc, and consecutive phases are
/// joined from the last message of one to the first of the next by the
/// boundary wait: `max(Δ, Dc)`, or `max(Δ, Dc + Dn)` before a
/// garbage-collection phase.
pub fn untimed_graph(
    sizes: &[usize],
    gc_phases: &BTreeSet<Phase>,
    params: &SystemParameters,
) -> Result<PertGraph, PlanError> {
    check_phases(sizes, gc_phases)?;
    let mut g = PertGraph::new();
    g.add_node(PertNode::Start);
    let mut prev_last: Option<PertNode> = None;
    for (j0, &n) in sizes.iter().enumerate() {
        let phase = j0 as Phase + 1;
        for index in 1..=n {
            let msg = PertNode::Message { phase, index };
            let sw = PertNode::Switch { phase, index };
            if index == 1 {
                match prev_last {
                    None => g.add_edge(PertNode::Start, msg, Nanos::ZERO),
                    Some(last) => g.add_edge(last, msg, boundary_wait(phase, gc_phases, params)),
                }
            } else {
                let before = PertNode::Message {
                    phase,
                    index: index - 1,
                };
                g.add_edge(before, msg, params.delta_msg);
            }
            g.add_edge(msg, sw, params.d_c);
            g.add_edge(sw, PertNode::Finish, Nanos::ZERO);
        }
        prev_last = Some(PertNode::Message { phase, index: n });
    }
    Ok(g)
}

pub fn build_pert_untimed(
    procedure: &UpdateProcedure,
    params: &SystemParameters,
    gc_phases: &BTreeSet<Phase>,
) -> Result<PertGraph, PlanError> {
    untimed_graph(&procedure.phase_sizes(), gc_phases, params)
}

/// Timed PERT graph with worst-case spacing between scheduled instants.
///
/// `T_j` follows `T_{j-1}` by δ, or by δ plus a drain time before a
/// garbage-collection phase (Dn, or the knob `d` when given). Each switch
/// event trails its phase's instant by at most δ. The first switch may run
/// exactly at `T_1`, so `C_start` coincides with `T_1`.
pub fn timed_graph(
    sizes: &[usize],
    gc_phases: &BTreeSet<Phase>,
    params: &SystemParameters,
    knob: Option<Nanos>,
) -> Result<PertGraph, PlanError> {
    check_phases(sizes, gc_phases)?;
    let drain = knob.unwrap_or(params.d_n);
    let mut g = PertGraph::new();
    g.add_edge(PertNode::Start, PertNode::Scheduled { phase: 1 }, Nanos::ZERO);
    for (j0, &n) in sizes.iter().enumerate() {
        let phase = j0 as Phase + 1;
        let at = PertNode::Scheduled { phase };
        if phase > 1 {
            let gap = if gc_phases.contains(&phase) {
                params.delta_sched + drain
            } else {
                params.delta_sched
            };
            g.add_edge(PertNode::Scheduled { phase: phase - 1 }, at, gap);
        }
        for index in 1..=n {
            let sw = PertNode::Switch { phase, index };
            g.add_edge(at, sw, params.delta_sched);
            g.add_edge(sw, PertNode::Finish, Nanos::ZERO);
        }
    }
    Ok(g)
}

/// Timed PERT graph for an explicit schedule: scheduled instants are spaced
/// by the schedule's own gaps.
pub fn build_pert_timed(
    procedure: &UpdateProcedure,
    schedule: &Schedule,
    params: &SystemParameters,
) -> Result<PertGraph, PlanError> {
    let sizes = procedure.phase_sizes();
    check_phases(&sizes, &BTreeSet::new())?;
    let mut times = Vec::with_capacity(sizes.len());
    for j in 1..=sizes.len() as Phase {
        times.push(schedule.time_of(j).ok_or(PlanError::Unscheduled(j))?);
    }
    let first = *times.iter().min().expect("non-empty");
    let mut g = PertGraph::new();
    for (j0, &n) in sizes.iter().enumerate() {
        let phase = j0 as Phase + 1;
        let at = PertNode::Scheduled { phase };
        g.add_edge(PertNode::Start, at, times[j0] - first);
        for index in 1..=n {
            let sw = PertNode::Switch { phase, index };
            g.add_edge(at, sw, params.delta_sched);
            g.add_edge(sw, PertNode::Finish, Nanos::ZERO);
        }
    }
    Ok(g)
}

//! Worst-case analysis: PERT graphs, closed-form durations, worst-case
//! schedules and the timed-versus-untimed comparison.
//!
//! All procedures are greedy: the untimed controller sends each message as
//! early as the bounds allow while still keeping phases ordered, and the
//! timed controller uses worst-case schedules. Garbage collection is a
//! phase of its own (consisting of removals) and is listed in `gc_phases`;
//! the boundary before such a phase also waits out the network delay.

mod formulas;
mod pert;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::model::{Nanos, Phase, Schedule, SystemParameters, UpdateProcedure};

pub use formulas::{
    gc_tail_duration, kphase_worst_duration, phase_worst_duration, timed_kphase_worst_duration,
    timed_twophase_gc_worst_duration, timed_worst_duration, twophase_gc_worst_duration,
    untimed_worst_duration,
};
pub use pert::{
    build_pert_timed, build_pert_untimed, longest_path, timed_graph, untimed_graph,
    DurationReport, PertEdge, PertGraph, PertNode,
};
pub(crate) use pert::boundary_wait;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("update procedure has no phases")]
    EmptyProcedure,
    #[error("phase {0} has no updates")]
    EmptyPhase(Phase),
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("garbage-collection phase {phase} is outside 2..={k}")]
    GcPhaseOutOfRange { phase: Phase, k: Phase },
    #[error("phase {0} has no scheduled time")]
    Unscheduled(Phase),
    #[error("PERT graph contains a cycle")]
    Cycle,
    #[error("PERT graph has no node {0}")]
    MissingNode(PertNode),
    #[error("{1} is not reachable from {0}")]
    Unreachable(PertNode, PertNode),
}

/// Worst-case schedule starting at `t1`: every phase follows the previous
/// one by δ, and a garbage-collection phase additionally waits Dn.
pub fn worst_case_schedule(
    procedure: &UpdateProcedure,
    t1: Nanos,
    params: &SystemParameters,
    gc_phases: &BTreeSet<Phase>,
) -> Schedule {
    spaced_schedule(procedure.phase_count(), t1, params, gc_phases, params.d_n)
}

pub(crate) fn spaced_schedule(
    k: Phase,
    t1: Nanos,
    params: &SystemParameters,
    gc_phases: &BTreeSet<Phase>,
    drain: Nanos,
) -> Schedule {
    let mut schedule = Schedule::default();
    let mut prev = t1;
    for j in 1..=k {
        if j == 1 {
            schedule.phase_times.insert(1, t1);
        } else if gc_phases.contains(&j) {
            prev = prev + params.delta_sched + drain;
            schedule.gc_times.insert(j, prev);
        } else {
            prev += params.delta_sched;
            schedule.phase_times.insert(j, prev);
        }
    }
    schedule
}

/// Every phase due at the same instant.
pub fn simultaneous_schedule(
    procedure: &UpdateProcedure,
    t: Nanos,
    gc_phases: &BTreeSet<Phase>,
) -> Schedule {
    let mut schedule = Schedule::default();
    for j in 1..=procedure.phase_count() {
        if gc_phases.contains(&j) {
            schedule.gc_times.insert(j, t);
        } else {
            schedule.phase_times.insert(j, t);
        }
    }
    schedule
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Comparison {
    pub timed: Nanos,
    pub untimed: Nanos,
    /// Strictly shorter; a tie goes to the untimed procedure.
    pub timed_wins: bool,
}

/// Worst-case durations of a procedure run untimed and run on a worst-case
/// schedule.
pub fn compare_timed_untimed(
    procedure: &UpdateProcedure,
    params: &SystemParameters,
    gc_phases: &BTreeSet<Phase>,
) -> Result<Comparison, PlanError> {
    compare_sizes(&procedure.phase_sizes(), params, gc_phases)
}

pub fn compare_sizes(
    sizes: &[usize],
    params: &SystemParameters,
    gc_phases: &BTreeSet<Phase>,
) -> Result<Comparison, PlanError> {
    let untimed = untimed_worst_duration(sizes, gc_phases, params)?;
    let timed = timed_worst_duration(sizes.len(), gc_phases, params, None)?;
    Ok(Comparison {
        timed,
        untimed,
        timed_wins: timed < untimed,
    })
}

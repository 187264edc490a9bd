//! Closed-form worst-case update durations.
//!
//! Every function here has a PERT counterpart in [`super::pert`]; the two
//! agree exactly in integer nanoseconds.

use std::collections::BTreeSet;

use crate::model::{Nanos, Phase, SystemParameters};

use super::pert::{boundary_wait, check_phases};
use super::PlanError;

fn gaps(count: usize, p: &SystemParameters) -> Nanos {
    p.delta_msg * (count as u64 - 1)
}

/// One phase of `n_j` messages: `(N_j - 1)·Δ + Dc`.
pub fn phase_worst_duration(n_j: usize, p: &SystemParameters) -> Result<Nanos, PlanError> {
    if n_j == 0 {
        return Err(PlanError::ZeroCount("n_j"));
    }
    Ok(gaps(n_j, p) + p.d_c)
}

/// Untimed greedy k-phase procedure:
/// `Σ (N_j - 1)·Δ + (k - 1)·max(Δ, Dc) + Dc`.
pub fn kphase_worst_duration(phases: &[usize], p: &SystemParameters) -> Result<Nanos, PlanError> {
    untimed_worst_duration(phases, &BTreeSet::new(), p)
}

/// From the last message of a phase until its garbage collection of
/// `ng_j` switches completes: `max(Δ, Dc + Dn) + (NG_j - 1)·Δ + Dc`.
pub fn gc_tail_duration(ng_j: usize, p: &SystemParameters) -> Result<Nanos, PlanError> {
    if ng_j == 0 {
        return Err(PlanError::ZeroCount("ng_j"));
    }
    Ok(p.delta_msg.max(p.d_c + p.d_n) + gaps(ng_j, p) + p.d_c)
}

/// Untimed two-phase procedure followed by garbage collection:
/// `(N_1 + N_2 + NG_1 - 3)·Δ + max(Δ, Dc) + max(Δ, Dc + Dn) + Dc`.
pub fn twophase_gc_worst_duration(
    n1: usize,
    n2: usize,
    ng1: usize,
    p: &SystemParameters,
) -> Result<Nanos, PlanError> {
    for (name, v) in [("n1", n1), ("n2", n2), ("ng1", ng1)] {
        if v == 0 {
            return Err(PlanError::ZeroCount(name));
        }
    }
    Ok(p.delta_msg * (n1 + n2 + ng1 - 3) as u64
        + p.delta_msg.max(p.d_c)
        + p.delta_msg.max(p.d_c + p.d_n)
        + p.d_c)
}

/// General untimed greedy duration: per-phase Δ gaps, one boundary wait per
/// phase after the first (the longer one before garbage-collection
/// phases), and a final Dc.
pub fn untimed_worst_duration(
    sizes: &[usize],
    gc_phases: &BTreeSet<Phase>,
    p: &SystemParameters,
) -> Result<Nanos, PlanError> {
    check_phases(sizes, gc_phases)?;
    let in_phase: Nanos = sizes.iter().map(|&n| gaps(n, p)).sum();
    let waits: Nanos = (2..=sizes.len() as Phase)
        .map(|j| boundary_wait(j, gc_phases, p))
        .sum();
    Ok(in_phase + waits + p.d_c)
}

/// Timed k-phase procedure on a worst-case schedule: `k·δ`.
pub fn timed_kphase_worst_duration(k: usize, p: &SystemParameters) -> Nanos {
    p.delta_sched * k as u64
}

/// Timed two-phase procedure with garbage collection: `Dn + 3·δ`.
pub fn timed_twophase_gc_worst_duration(p: &SystemParameters) -> Nanos {
    p.d_n + p.delta_sched * 3
}

/// General timed duration on a worst-case schedule: `k·δ` plus one drain
/// time per garbage-collection phase. `knob` replaces Dn as the drain time.
pub fn timed_worst_duration(
    k: usize,
    gc_phases: &BTreeSet<Phase>,
    p: &SystemParameters,
    knob: Option<Nanos>,
) -> Result<Nanos, PlanError> {
    if k == 0 {
        return Err(PlanError::EmptyProcedure);
    }
    if let Some(&j) = gc_phases.iter().find(|&&j| j < 2 || j as usize > k) {
        return Err(PlanError::GcPhaseOutOfRange {
            phase: j,
            k: k as Phase,
        });
    }
    Ok(timed_kphase_worst_duration(k, p) + knob.unwrap_or(p.d_n) * gc_phases.len() as u64)
}

#![allow(dead_code)]

use netupdate::consistency::{measure_all, InconsistencyReport};
use netupdate::model::{Nanos, Network, Schedule, SystemParameters, TimedUpdateProcedure};
use netupdate::simulator::{ClockModel, DelayModel, RunResult, Simulation};
use netupdate::topology::{
    ingress_endpoint, install_paths, leaf_spine_scenario, two_phase_update, PathChange, Scenario,
};
use netupdate::consistency::TestFlow;

pub const RATE: f64 = 5000.0;

/// `a -> b -> d` moving to `a -> c -> d`, every link taking `link`.
pub fn diamond(link: DelayModel, rate_pps: f64) -> Scenario {
    let mut b = Network::builder();
    b.ingress("a");
    for (x, y) in [("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")] {
        b.link(x, y, link.clone());
    }
    let network = b.build().unwrap();
    let ingress = ingress_endpoint(&network, &"a".into()).unwrap();
    let changes = vec![PathChange {
        flow: TestFlow::new("f", ingress, rate_pps),
        old_path: vec!["a".into(), "b".into(), "d".into()],
        new_path: vec!["a".into(), "c".into(), "d".into()],
    }];
    let initial = install_paths(&network, &changes).unwrap();
    let procedure = two_phase_update(&network, &changes, true).unwrap();
    Scenario {
        network,
        initial,
        changes,
        procedure,
    }
}

/// Leaf-spine scenario with two-phase update and collection.
pub fn leaf_spine(n: usize, link: DelayModel) -> Scenario {
    leaf_spine_scenario(n, link, RATE, true).unwrap()
}

pub fn simulation(s: &Scenario, params: SystemParameters) -> Simulation {
    Simulation::new(s.network.clone(), s.initial.clone(), params)
        .with_flows(s.flows())
        .with_clock(ClockModel::jitter_only(&params))
}

/// First instant a timed run of `s` may be scheduled at.
pub fn t1(sim: &Simulation, s: &Scenario) -> Nanos {
    sim.start + sim.params.setup_lead(s.procedure.len())
}

pub fn run_timed(sim: &Simulation, s: &Scenario, schedule: Schedule, seed: u64) -> RunResult {
    let timed = TimedUpdateProcedure::new(s.procedure.clone(), schedule).unwrap();
    sim.run_timed(&timed, seed).unwrap()
}

pub fn reports(run: &RunResult) -> Vec<InconsistencyReport> {
    measure_all(run).unwrap()
}

/// Worst-case inconsistency of any flow in the run.
pub fn max_inconsistency(run: &RunResult) -> Nanos {
    reports(run).iter().map(|r| r.inconsistency).max().unwrap_or_default()
}

/// Least-squares fit `y = a + b·x`; returns R².
pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Untimed two-phase-with-collection worst case written out term by term.
pub fn eq_untimed_gc(n1: u64, n2: u64, ng: u64, p: &SystemParameters) -> u64 {
    let (dc, dn, gap) = (p.d_c.0, p.d_n.0, p.delta_msg.0);
    (n1 + n2 + ng - 3) * gap + gap.max(dc) + gap.max(dc + dn) + dc
}

/// Timed counterpart on the worst-case schedule.
pub fn eq_timed_gc(p: &SystemParameters) -> u64 {
    p.d_n.0 + 3 * p.delta_sched.0
}

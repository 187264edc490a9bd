mod common;

use common::*;
use netupdate::consistency::{classify_packet, knob_schedule, measure_inconsistency, Class};
use netupdate::model::{
    Action, Endpoint, FlowId, ForwardingState, Generation, MatchKey, Nanos, Network, PortId, Rule,
    SystemParameters, VersionTag,
};
use netupdate::planner::{simultaneous_schedule, worst_case_schedule};
use netupdate::simulator::{DelayModel, Hop, Outcome, PacketTrace};
use netupdate::topology::path_bound;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn no_delta(d_n: Nanos) -> SystemParameters {
    SystemParameters::testbed()
        .with_delta_sched(Nanos::ZERO)
        .with_d_n(d_n)
}

#[test]
fn simultaneous_update_is_inconsistent_for_one_path_delay() {
    for ms in [1, 5, 10] {
        let d = Nanos::from_millis(ms);
        let s = diamond(DelayModel::Constant(Nanos(d.0 / 2)), RATE);
        let sim = simulation(&s, no_delta(d));
        let schedule = simultaneous_schedule(&s.procedure, t1(&sim, &s), &s.procedure.gc_phases());
        let run = run_timed(&sim, &s, schedule, 0);
        let r = measure_inconsistency(&run, &s.flows()[0]).unwrap();
        let spacing = s.flows()[0].spacing();
        assert!(
            r.inconsistency.0.abs_diff(d.0) <= spacing.0,
            "D = {d}: measured {}",
            r.inconsistency
        );
    }
}

#[test]
fn knob_trades_duration_for_consistency() {
    let dn = Nanos::from_millis(10);
    let s = diamond(DelayModel::Constant(Nanos(dn.0 / 2)), RATE);
    let sim = simulation(&s, no_delta(dn));
    let spacing = s.flows()[0].spacing();
    let mut previous = Nanos(u64::MAX);
    for ms in (0..=12).step_by(2) {
        let d = Nanos::from_millis(ms);
        let run = run_timed(&sim, &s, knob_schedule(t1(&sim, &s), d, &sim.params), 0);
        let measured = max_inconsistency(&run);
        let expected = dn.saturating_sub(d);
        assert!(
            measured.0.abs_diff(expected.0) <= spacing.0,
            "d = {d}: measured {measured}, expected {expected}"
        );
        assert!(measured <= previous, "not monotone at d = {d}");
        previous = measured;
    }
}

#[test]
fn worst_case_schedule_is_consistent() {
    let constant = DelayModel::Constant(Nanos(131_000));
    let exponential = DelayModel::exponential(Nanos(131_000));
    for link in [constant, exponential] {
        let s = leaf_spine(12, link);
        let bound = s
            .changes
            .iter()
            .flat_map(|c| [&c.old_path, &c.new_path])
            .map(|p| path_bound(&s.network, p).unwrap())
            .max()
            .unwrap();
        let params = SystemParameters::testbed().with_d_n(bound);
        let sim = simulation(&s, params);
        let schedule = worst_case_schedule(&s.procedure, t1(&sim, &s), &params, &s.procedure.gc_phases());
        for seed in 0..25 {
            let run = run_timed(&sim, &s, schedule.clone(), seed);
            for r in reports(&run) {
                assert_eq!(r.n_inconsistent, 0, "seed {seed}, flow {}", r.flow_id);
                assert!(r.packets > 0);
            }
        }
    }
}

/// `s0 - s1 - s2`, ingress on `s0`.
fn line() -> Network {
    let mut b = Network::builder();
    b.ingress("s0");
    b.link("s0", "s1", DelayModel::Constant(Nanos(1)));
    b.link("s1", "s2", DelayModel::Constant(Nanos(1)));
    b.build().unwrap()
}

fn random_action(net: &Network, sw: &str, rng: &mut ChaCha8Rng) -> Action {
    let mut ports: Vec<PortId> = net.ports(&sw.into()).unwrap().iter().copied().collect();
    ports.push(PortId(9));
    let port = ports[rng.gen_range(0..ports.len())];
    match rng.gen_range(0..4) {
        0 => Action::Drop,
        1 => Action::Deliver,
        2 => Action::Forward { port },
        _ => Action::ForwardTagged {
            port,
            tag: VersionTag(rng.gen_range(1..=2)),
        },
    }
}

fn random_state(net: &Network, generation: Generation, rng: &mut ChaCha8Rng) -> ForwardingState {
    let mut s = ForwardingState::with_switches(net.switches());
    for sw in ["s0", "s1", "s2"] {
        for port in net.ports(&sw.into()).unwrap().clone() {
            for tag in [None, Some(VersionTag(1)), Some(VersionTag(2))] {
                if rng.gen_bool(0.6) {
                    let rule = Rule {
                        action: random_action(net, sw, rng),
                        generation,
                    };
                    s.insert_rule(&sw.into(), MatchKey::new("f", tag, port), rule)
                        .unwrap();
                }
            }
        }
    }
    s
}

/// Exact tag first, then the wildcard, else drop.
fn oracle_action(s: &ForwardingState, sw: &str, tag: Option<VersionTag>, port: PortId) -> Action {
    let table = s.table(&sw.into()).unwrap();
    let exact = tag.and_then(|_| table.get(&MatchKey::new("f", tag, port)));
    exact
        .or_else(|| table.get(&MatchKey::new("f", None, port)))
        .map_or(Action::Drop, |r| r.action)
}

/// Walks the packet, taking hop `i`'s action from `pick(i)`.
fn walk<'a>(net: &Network, pick: &dyn Fn(usize) -> &'a ForwardingState) -> Vec<Hop> {
    let mut at = Endpoint::new("s0", PortId(1));
    let mut tag = None;
    let mut hops = Vec::new();
    while hops.len() < 6 {
        let action = oracle_action(pick(hops.len()), at.switch.as_str(), tag, at.port);
        hops.push(Hop {
            switch: at.switch.clone(),
            in_port: at.port,
            arrival: Nanos::ZERO,
            tag,
            action,
            generation: None,
        });
        let port = match action {
            Action::Forward { port } => port,
            Action::ForwardTagged { port, tag: t } => {
                tag = Some(t);
                port
            }
            _ => break,
        };
        match net.peer(&Endpoint::new(at.switch.clone(), port)) {
            Some((far, _)) => at = far.clone(),
            None => break,
        }
    }
    hops
}

#[test]
fn classifier_matches_brute_force() {
    let net = line();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut seen = [0usize; 3];
    for _ in 0..400 {
        let old = random_state(&net, Generation::Old, &mut rng);
        let new = random_state(&net, Generation::New, &mut rng);
        let pure_old = walk(&net, &|_| &old);
        let pure_new = walk(&net, &|_| &new);
        for mask in 0u32..64 {
            let hops = walk(&net, &|i| if mask >> i & 1 == 1 { &new } else { &old });
            let expected = if hops == pure_old {
                Class::ConsistentOld
            } else if hops == pure_new {
                Class::ConsistentNew
            } else {
                Class::Inconsistent
            };
            let trace = PacketTrace {
                flow: FlowId::from("f"),
                injected_at: Nanos::ZERO,
                hops,
                outcome: Outcome::Dropped,
                finished_at: Nanos::ZERO,
            };
            let got = classify_packet(&trace, &old, &new).unwrap();
            assert_eq!(got, expected);
            seen[got as usize] += 1;
        }
    }
    assert!(seen.iter().all(|&n| n > 0), "{seen:?}");
}

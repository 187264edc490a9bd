//! Acceptance criteria, one line of output each. Exits non-zero when any
//! criterion fails.

mod common;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::*;
use netupdate::cli::{plan_rows, run_point, ExperimentConfig, Prepared, ScheduleMode};
use netupdate::consistency::knob_schedule;
use netupdate::model::{Nanos, Phase, SingletonUpdate, SystemParameters, TimedUpdateProcedure, UpdateProcedure};
use netupdate::planner::*;
use netupdate::simulator::{DelayModel, Fault};
use netupdate::stats::{tail_ratio, DelayTrace};
use netupdate::topology::path_bound;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> SystemParameters {
    let mut t = || Nanos(rng.gen_range(0..50_000_000));
    SystemParameters {
        d_c: t(),
        d_n: t(),
        delta_msg: t(),
        delta_sched: t(),
        t_su: None,
    }
}

/// A procedure with k ≤ 5 phases of at most 10 updates; phases after the
/// first are collection phases with probability 1/3.
fn random_procedure(rng: &mut ChaCha8Rng) -> (UpdateProcedure, BTreeSet<Phase>) {
    let k = rng.gen_range(1..=5);
    let mut gc = BTreeSet::new();
    let phases = (1..=k)
        .map(|j| {
            let removal = j > 1 && rng.gen_ratio(1, 3);
            if removal {
                gc.insert(j as Phase);
            }
            (0..rng.gen_range(1..=10))
                .map(|i| {
                    let target = format!("s{i}");
                    if removal {
                        SingletonUpdate::remove(target.as_str())
                    } else {
                        SingletonUpdate::install(target.as_str())
                    }
                })
                .collect()
        })
        .collect();
    (UpdateProcedure::from_phases(phases).unwrap(), gc)
}

fn pert(g: PertGraph) -> Nanos {
    longest_path(&g).unwrap().worst_case
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let (proc, gc) = random_procedure(&mut rng);
        let p = random_params(&mut rng);
        let sizes = proc.phase_sizes();
        let k = sizes.len();
        let knob = Nanos(rng.gen_range(0..50_000_000));
        let fail = |what: &str| format!("case {case}: {what} differs for sizes {sizes:?}, gc {gc:?}");

        let untimed = untimed_worst_duration(&sizes, &gc, &p).unwrap();
        check(untimed == pert(build_pert_untimed(&proc, &p, &gc).unwrap()), fail("untimed"))?;
        let timed = timed_worst_duration(k, &gc, &p, None).unwrap();
        check(timed == pert(timed_graph(&sizes, &gc, &p, None).unwrap()), fail("timed"))?;
        let t1 = Nanos(1_000_000_000);
        let schedule = worst_case_schedule(&proc, t1, &p, &gc);
        check(timed == pert(build_pert_timed(&proc, &schedule, &p).unwrap()), fail("timed schedule"))?;
        check(
            timed_worst_duration(k, &gc, &p, Some(knob)).unwrap()
                == pert(timed_graph(&sizes, &gc, &p, Some(knob)).unwrap()),
            fail("knob"),
        )?;
        let no_gc = BTreeSet::new();
        check(
            kphase_worst_duration(&sizes, &p).unwrap() == pert(untimed_graph(&sizes, &no_gc, &p).unwrap()),
            fail("k-phase"),
        )?;
        check(
            timed_kphase_worst_duration(k, &p) == pert(timed_graph(&sizes, &no_gc, &p, None).unwrap()),
            fail("timed k-phase"),
        )?;
        let n = sizes[0];
        check(
            phase_worst_duration(n, &p).unwrap() == pert(untimed_graph(&[n], &no_gc, &p).unwrap()),
            fail("single phase"),
        )?;
        if k == 3 && gc == BTreeSet::from([3]) {
            check(
                twophase_gc_worst_duration(sizes[0], sizes[1], sizes[2], &p).unwrap() == untimed
                    && untimed.0 == eq_untimed_gc(sizes[0] as u64, sizes[1] as u64, sizes[2] as u64, &p),
                fail("two-phase with collection"),
            )?;
            check(
                timed_twophase_gc_worst_duration(&p) == timed && timed.0 == eq_timed_gc(&p),
                fail("timed two-phase with collection"),
            )?;
        }
        // collection tail: from the last phase-1 message to the end
        let ng = sizes[k - 1];
        let tail_graph = untimed_graph(&[1, ng], &BTreeSet::from([2]), &p).unwrap();
        check(gc_tail_duration(ng, &p).unwrap() == pert(tail_graph), fail("collection tail"))?;
    }
    let elapsed = started.elapsed();
    check(elapsed.as_secs_f64() < 10.0, format!("took {elapsed:?}"))?;
    Ok(format!("1000 procedures, closed form == longest path, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    while cases < 1000 {
        let (proc, gc) = random_procedure(&mut rng);
        let p = random_params(&mut rng);
        if p.delta_sched >= p.d_c {
            continue;
        }
        cases += 1;
        let c = compare_timed_untimed(&proc, &p, &gc).unwrap();
        check(
            c.timed_wins,
            format!("counterexample: sizes {:?}, {p:?}: {c:?}", proc.phase_sizes()),
        )?;
    }
    Ok("1000 procedures with delta < Dc, timed shorter in all".into())
}

fn criterion_3() -> Outcome {
    let s = leaf_spine(12, DelayModel::Constant(Nanos(131_000)));
    let p = SystemParameters::testbed();
    let gc = s.procedure.gc_phases();
    let sim = simulation(&s, p).with_flows(Vec::new());
    let untimed_worst = untimed_worst_duration(&s.procedure.phase_sizes(), &gc, &p).unwrap();
    let timed_worst = timed_worst_duration(s.procedure.phase_count() as usize, &gc, &p, None).unwrap();
    let schedule = worst_case_schedule(&s.procedure, t1(&sim, &s), &p, &gc);
    let timed = TimedUpdateProcedure::new(s.procedure.clone(), schedule).unwrap();

    let untimed_max = (0..500u64)
        .into_par_iter()
        .map(|seed| sim.run_untimed(&s.procedure, seed).unwrap().update_duration)
        .max()
        .unwrap();
    let timed_max = (0..500u64)
        .into_par_iter()
        .map(|seed| sim.run_timed(&timed, seed).unwrap().update_duration)
        .max()
        .unwrap();
    check(untimed_max <= untimed_worst, format!("untimed {untimed_max} > {untimed_worst}"))?;
    check(timed_max <= timed_worst, format!("timed {timed_max} > {timed_worst}"))?;

    let pinned = sim.clone().adversarial(true);
    let pu = pinned.run_untimed(&s.procedure, 0).unwrap().update_duration;
    let pt = pinned.run_timed(&timed, 0).unwrap().update_duration;
    check(pu == untimed_worst, format!("pinned untimed {pu} != {untimed_worst}"))?;
    check(pt == timed_worst, format!("pinned timed {pt} != {timed_worst}"))?;
    Ok(format!(
        "500 runs each: untimed max {untimed_max} <= {untimed_worst}, timed max {timed_max} <= {timed_worst}; pinned runs equal both"
    ))
}

fn criterion_4() -> Outcome {
    let mut detail = Vec::new();
    for (name, link) in [
        ("constant", DelayModel::Constant(Nanos(131_000))),
        ("exponential", DelayModel::exponential(Nanos(131_000))),
    ] {
        let s = leaf_spine(12, link);
        let dn = s
            .changes
            .iter()
            .flat_map(|c| [&c.old_path, &c.new_path])
            .map(|path| path_bound(&s.network, path).unwrap())
            .max()
            .unwrap();
        let p = SystemParameters::testbed().with_d_n(dn);
        let sim = simulation(&s, p);
        let schedule = worst_case_schedule(&s.procedure, t1(&sim, &s), &p, &s.procedure.gc_phases());
        let (bad, packets) = (0..200u64)
            .into_par_iter()
            .map(|seed| {
                let run = run_timed(&sim, &s, schedule.clone(), seed);
                let r = reports(&run);
                (
                    r.iter().map(|x| x.n_inconsistent).sum::<usize>(),
                    r.iter().map(|x| x.packets).sum::<usize>(),
                )
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        check(bad == 0, format!("{name}: {bad} inconsistent packets"))?;
        detail.push(format!("{name} (Dn {dn}): 0 of {packets}"));
    }
    Ok(format!("200 seeds, inconsistent packets {}", detail.join(", ")))
}

fn no_delta(d_n: Nanos) -> SystemParameters {
    SystemParameters::testbed()
        .with_delta_sched(Nanos::ZERO)
        .with_d_n(d_n)
}

fn criterion_5() -> Outcome {
    let mut detail = Vec::new();
    for ms in [1, 5, 10] {
        let d = Nanos::from_millis(ms);
        let s = diamond(DelayModel::Constant(Nanos(d.0 / 2)), RATE);
        let sim = simulation(&s, no_delta(d));
        let schedule = simultaneous_schedule(&s.procedure, t1(&sim, &s), &s.procedure.gc_phases());
        let measured = max_inconsistency(&run_timed(&sim, &s, schedule, 0));
        let tolerance = s.flows()[0].spacing();
        check(
            measured.0.abs_diff(d.0) <= tolerance.0,
            format!("D = {d}: I = {measured}"),
        )?;
        detail.push(format!("D={d} I={measured}"));
    }
    Ok(detail.join(", "))
}

fn criterion_6() -> Outcome {
    let dn = Nanos::from_millis(10);
    let s = diamond(DelayModel::Constant(Nanos(dn.0 / 2)), RATE);
    let sim = simulation(&s, no_delta(dn));
    let tolerance = s.flows()[0].spacing();
    let mut measured = Vec::new();
    for ms in (0..=12).step_by(2) {
        let d = Nanos::from_millis(ms);
        let run = run_timed(&sim, &s, knob_schedule(t1(&sim, &s), d, &sim.params), 0);
        let i = max_inconsistency(&run);
        let expected = dn.saturating_sub(d);
        check(
            i.0.abs_diff(expected.0) <= tolerance.0,
            format!("d = {d}: I = {i}, expected {expected}"),
        )?;
        measured.push(i);
    }
    check(measured.windows(2).all(|w| w[1] <= w[0]), format!("not monotone: {measured:?}"))?;
    let list: Vec<String> = measured.iter().map(|i| format!("{:.1}", i.as_millis_f64())).collect();
    Ok(format!("I(d) in ms for d = 0,2,..,12 ms: {}", list.join(" ")))
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn load_config(name: &str) -> (ExperimentConfig, PathBuf) {
    let path = data_dir().join("configs").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    (ExperimentConfig::parse(&text).unwrap(), path.parent().unwrap().to_path_buf())
}

fn criterion_7() -> Outcome {
    let (config, base) = load_config("leaf-spine-plan.json");
    let rows = plan_rows(&config, &base).map_err(|e| e.to_string())?;
    let ns: Vec<f64> = rows.iter().map(|r| r.axis_value.parse().unwrap()).collect();
    check(ns == [6.0, 12.0, 24.0, 36.0, 48.0], format!("grid {ns:?}"))?;
    let untimed: Vec<f64> = rows.iter().map(|r| r.untimed_worst.0 as f64).collect();
    check(untimed.windows(2).all(|w| w[0] < w[1]), "untimed not strictly increasing")?;
    let p = SystemParameters::testbed();
    for r in &rows {
        let n: u64 = r.axis_value.parse().unwrap();
        check(
            r.untimed_worst.0 == eq_untimed_gc(n, 2 * n / 3, n, &p),
            format!("N = {n}: untimed {}", r.untimed_worst),
        )?;
        check(r.timed_worst == Nanos(4_153_000), format!("N = {n}: timed {}", r.timed_worst))?;
    }
    let r2 = r_squared(&ns, &untimed);
    check(r2 > 0.999, format!("R^2 = {r2}"))?;

    // Dc swept at delta = 100 ms: the planner's verdict must follow the
    // inequality evaluated on both sides, and flip exactly once
    let base_p = p.with_delta_sched(Nanos::from_millis(100));
    let gc = BTreeSet::from([3]);
    let mut flips = Vec::new();
    for (gap, label) in [(p.delta_msg, "testbed gap"), (Nanos::ZERO, "zero gap")] {
        let mut verdicts = Vec::new();
        for dc_ms in 0..=200u64 {
            let q = base_p.with_d_c(Nanos::from_millis(dc_ms)).with_delta_msg(gap);
            let c = compare_sizes(&[12, 8, 12], &q, &gc).unwrap();
            let direct = eq_timed_gc(&q) < eq_untimed_gc(12, 8, 12, &q);
            check(c.timed_wins == direct, format!("{label}, Dc = {dc_ms} ms: planner disagrees"))?;
            verdicts.push((dc_ms, direct));
        }
        let changes: Vec<u64> = verdicts
            .windows(2)
            .filter(|w| w[0].1 != w[1].1)
            .map(|w| w[1].0)
            .collect();
        check(changes.len() == 1, format!("{label}: flips at {changes:?}"))?;
        check(!verdicts[0].1 && verdicts.last().unwrap().1, format!("{label}: wrong direction"))?;
        flips.push(format!("{label} at Dc = {} ms", changes[0]));
    }
    // with no message gap the flip sits exactly at Dc = delta
    let at = |dc: u64| {
        compare_sizes(&[12, 8, 12], &base_p.with_d_c(Nanos(dc)).with_delta_msg(Nanos::ZERO), &gc)
            .unwrap()
            .timed_wins
    };
    check(!at(100_000_000) && at(100_000_001), "zero gap: flip is not at Dc = delta")?;
    Ok(format!(
        "untimed linear in N (R^2 = {r2:.6}), timed 4.153 ms at every N; crossover {}",
        flips.join(", ")
    ))
}

fn knob_runs(name: &str, d: Option<Nanos>, seeds: u64) -> Result<(Nanos, Vec<Vec<Nanos>>), String> {
    let (mut config, base) = load_config(name);
    config.sweep = None;
    let prep = Prepared::resolve(&config, &base).map_err(|e| e.to_string())?;
    let d = d.unwrap_or(prep.params.d_n);
    config.schedule = ScheduleMode::Knob(d);
    let prep = Prepared::resolve(&config, &base).map_err(|e| e.to_string())?;
    let per_seed = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let (run, _) = run_point(&prep, seed).map_err(|e| e.to_string())?;
            if run.faults.iter().any(|f| !matches!(f, Fault::SlowPackets { .. })) {
                return Err(format!("{name}, seed {seed}: {:?}", run.faults));
            }
            Ok(reports(&run).iter().map(|r| r.inconsistency).collect())
        })
        .collect::<Result<Vec<Vec<Nanos>>, String>>()?;
    Ok((d, per_seed))
}

fn criterion_8() -> Outcome {
    let mut detail = Vec::new();
    for topo in ["sprint", "netrail", "compuserve"] {
        // d is the largest constant-mode path delay: the smallest knob
        // that drains every old-tagged packet
        let (d, constant) = knob_runs(&format!("{topo}-constant.json"), None, 50)?;
        check(
            constant.iter().flatten().all(|i| *i == Nanos::ZERO),
            format!("{topo}: constant delays leave I > 0 at d = {d}"),
        )?;
        let (_, exponential) = knob_runs(&format!("{topo}-exponential.json"), Some(d), 50)?;
        let positive = exponential
            .iter()
            .filter(|flows| flows.iter().any(|i| *i > Nanos::ZERO))
            .count();
        check(
            positive == exponential.len(),
            format!("{topo}: only {positive} of 50 exponential runs have a flow with I > 0"),
        )?;
        detail.push(format!("{topo} d={d}"));
    }

    // tail ratios of synthetic unit-mean exponential traces
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples: Vec<Nanos> = (0..1_000_000)
        .map(|_| {
            let u: f64 = rng.gen();
            Nanos((-(1.0 - u).ln() * 1e6).round() as u64)
        })
        .collect();
    let trace = DelayTrace::new("exp", samples);
    let mut ratios = Vec::new();
    for p in [0.999, 0.9999, 0.99999] {
        let got = tail_ratio(&trace, p).map_err(|e| e.to_string())?;
        let analytic = -(1.0f64 - p).ln();
        check(
            (got / analytic - 1.0).abs() <= 0.15,
            format!("tail ratio at {p}: {got:.3} vs {analytic:.3}"),
        )?;
        ratios.push(format!("{got:.2}/{analytic:.2}"));
    }
    Ok(format!(
        "constant I = 0 and exponential I > 0 at d = max path delay over 50 seeds ({}); tail ratios {}",
        detail.join(", "),
        ratios.join(" ")
    ))
}

fn criterion_9() -> Outcome {
    let dir = std::env::temp_dir().join(format!("netupdate-acceptance-{}", std::process::id()));
    let mut compared = 0;
    for (config, extra) in [
        ("leaf-spine-untimed.json", vec!["--seeds", "0..10"]),
        ("netrail-exponential.json", vec!["--seeds", "0..4", "--grid", "0ms,20ms"]),
    ] {
        let mut outputs = Vec::new();
        for i in 0..2 {
            let out = dir.join(format!("{config}-{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_netupdate"))
                .arg("sweep")
                .arg("--config")
                .arg(data_dir().join("configs").join(config))
                .arg("--out")
                .arg(&out)
                .args(&extra)
                .status()
                .map_err(|e| e.to_string())?;
            check(status.success(), format!("{config}: exit {status}"))?;
            let files = ["sweep.csv", "sweep_flows.csv"]
                .map(|f| std::fs::read(out.join(f)).map_err(|e| e.to_string()));
            outputs.push(files.into_iter().collect::<Result<Vec<_>, _>>()?);
        }
        check(outputs[0] == outputs[1], format!("{config}: outputs differ"))?;
        compared += outputs[0].len();
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("{compared} CSV files byte-identical across repeated sweeps"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("formula/PERT equivalence", criterion_1),
        ("timed dominance", criterion_2),
        ("simulation within bounds", criterion_3),
        ("worst-case schedule consistency", criterion_4),
        ("simultaneous update, I = D", criterion_5),
        ("consistency knob", criterion_6),
        ("N sweep and Dc crossover", criterion_7),
        ("topologies, constant vs exponential", criterion_8),
        ("sweep determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

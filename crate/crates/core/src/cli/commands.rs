use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::consistency::{measure_all, InconsistencyReport};
use crate::model::{FlowId, Nanos, Schedule};
use crate::planner::{timed_worst_duration, untimed_worst_duration, worst_case_schedule};
use crate::simulator::{Fault, RunResult, SimError};
use crate::stats::{analyze, DelayTrace};

use super::config::{ExperimentConfig, Prepared, ScheduleMode};
use super::{CliError, Loaded};

/// One row of `plan.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanRow {
    pub axis_value: String,
    pub untimed_worst: Nanos,
    pub timed_worst: Nanos,
    pub timed_wins: bool,
    /// Worst-case schedule starting right after the setup lead.
    pub schedule: Schedule,
}

/// One row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: String,
    pub runs: usize,
    pub duration_mean: f64,
    pub duration_min: Nanos,
    pub duration_max: Nanos,
    pub worst_case: Nanos,
    /// Per run, the largest inconsistency over all flows.
    pub inconsistency_mean: f64,
    pub inconsistency_max: Nanos,
    pub faults: usize,
    /// Per flow: mean, min and max inconsistency over seeds.
    pub flows: Vec<(FlowId, f64, Nanos, Nanos)>,
}

/// Sweep points in grid order, labelled by their axis value. Without a
/// sweep there is one point labelled `base`.
pub fn points(config: &ExperimentConfig) -> Result<Vec<(String, ExperimentConfig)>, CliError> {
    match &config.sweep {
        None => Ok(vec![("base".to_string(), config.clone())]),
        Some(s) => {
            if s.grid.is_empty() {
                return Err(CliError::config("sweep.grid", "is empty"));
            }
            s.grid
                .iter()
                .map(|v| Ok((v.to_string(), config.at(s.axis, v)?)))
                .collect()
        }
    }
}

pub fn plan_rows(config: &ExperimentConfig, base_dir: &Path) -> Result<Vec<PlanRow>, CliError> {
    points(config)?
        .into_iter()
        .map(|(label, c)| {
            let prep = Prepared::resolve(&c, base_dir)?;
            let proc = &prep.scenario.procedure;
            let sizes = proc.phase_sizes();
            let knob = match prep.schedule_mode {
                ScheduleMode::Knob(d) => Some(d),
                _ => None,
            };
            let untimed = untimed_worst_duration(&sizes, &prep.gc, &prep.params)
                .map_err(|e| CliError::config("procedure", e.to_string()))?;
            let timed = timed_worst_duration(sizes.len(), &prep.gc, &prep.params, knob)
                .map_err(|e| CliError::config("procedure", e.to_string()))?;
            let t1 = prep.simulation.start + prep.params.setup_lead(proc.len());
            Ok(PlanRow {
                axis_value: label,
                untimed_worst: untimed,
                timed_worst: timed,
                timed_wins: timed < untimed,
                schedule: prep
                    .schedule()
                    .unwrap_or_else(|| worst_case_schedule(proc, t1, &prep.params, &prep.gc)),
            })
        })
        .collect()
}

pub fn plan(loaded: &Loaded) -> Result<(), CliError> {
    let rows = plan_rows(&loaded.config, &loaded.base_dir)?;
    let meta = metadata(&loaded.config);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.axis_value.clone(),
                r.untimed_worst.0.to_string(),
                r.timed_worst.0.to_string(),
                r.timed_wins.to_string(),
            ]
        })
        .collect();
    let out = &loaded.out;
    create_dir(out)?;
    write_csv(
        &out.join("plan.csv"),
        &meta,
        &["axis_value", "untimed_worst_ns", "timed_worst_ns", "timed_wins"],
        &table,
    )?;
    let schedules: Vec<_> = rows
        .iter()
        .map(|r| serde_json::json!({"axis_value": r.axis_value, "schedule": r.schedule}))
        .collect();
    write_file(
        &out.join("schedules.json"),
        &serde_json::to_string_pretty(&schedules).expect("schedules serialize"),
    )
}

/// Runs one prepared point with one seed and checks the run against the
/// planner bound.
pub fn run_point(prep: &Prepared, seed: u64) -> Result<(RunResult, Nanos), CliError> {
    let proc = &prep.scenario.procedure;
    let (result, worst) = match prep.timed()? {
        None => {
            let worst = untimed_worst_duration(&proc.phase_sizes(), &prep.gc, &prep.params)
                .map_err(|e| CliError::config("procedure", e.to_string()))?;
            (prep.simulation.run_untimed(proc, seed), worst)
        }
        Some(timed) => {
            let times = timed.schedule().ordered_times();
            let span = times.last().expect("non-empty").1 - times.first().expect("non-empty").1;
            (prep.simulation.run_timed(&timed, seed), span + prep.params.delta_sched)
        }
    };
    let result = result.map_err(sim_error)?;
    let within_bounds = !result
        .faults
        .iter()
        .any(|f| matches!(f, Fault::BoundViolation { .. } | Fault::MissedSchedule { .. }));
    if within_bounds && result.update_duration > worst {
        return Err(CliError::internal(format!(
            "seed {seed}: simulated duration {} exceeds the worst case {}",
            result.update_duration, worst
        )));
    }
    Ok((result, worst))
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::ScheduleTooEarly { .. } => CliError::config("params.t_su", e.to_string()),
        SimError::ClockMismatch { .. } => CliError::config("delays.sync_err", e.to_string()),
        SimError::InvalidDelay { .. } => CliError::config("delays", e.to_string()),
        SimError::BadRate(_) | SimError::NotIngress(_) => CliError::config("flows", e.to_string()),
        SimError::Model(_) => CliError::config("procedure", e.to_string()),
    }
}

fn reports(run: &RunResult) -> Result<Vec<InconsistencyReport>, CliError> {
    measure_all(run).map_err(|e| CliError::internal(e.to_string()))
}

pub fn simulate(loaded: &Loaded) -> Result<(), CliError> {
    let mut config = loaded.config.clone();
    config.sweep = None;
    let seed = config.seeds[0];
    let prep = Prepared::resolve(&config, &loaded.base_dir)?;
    let (run, _) = run_point(&prep, seed)?;
    let meta = Meta {
        hash: config_hash(&config),
        seeds: vec![seed],
    };
    let out = &loaded.out;
    create_dir(out)?;
    write_file(
        &out.join("run.json"),
        &serde_json::to_string_pretty(&run).expect("run result serializes"),
    )?;
    let rows: Vec<Vec<String>> = reports(&run)?
        .into_iter()
        .map(|r| {
            vec![
                r.flow_id.0,
                r.n_inconsistent.to_string(),
                format_f64(r.rate_pps),
                r.inconsistency.0.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("inconsistency.csv"),
        &meta,
        &["flow_id", "n_inconsistent", "rate_pps", "inconsistency_ns"],
        &rows,
    )?;
    let faults: Vec<Vec<String>> = run
        .faults
        .iter()
        .map(|f| {
            let v = serde_json::to_value(f).expect("faults serialize");
            vec![
                v["kind"].as_str().unwrap_or_default().to_string(),
                serde_json::to_string(&v).expect("json value serializes"),
            ]
        })
        .collect();
    write_csv(&out.join("faults.csv"), &meta, &["kind", "detail"], &faults)?;
    let mut log = String::new();
    for line in run.log_lines() {
        log.push_str(&line);
        log.push('\n');
    }
    write_file(&out.join("messages.log"), &log)
}

struct JobOut {
    duration: Nanos,
    worst: Nanos,
    faults: usize,
    flows: Vec<(FlowId, Nanos)>,
}

pub fn sweep_rows(config: &ExperimentConfig, base_dir: &Path) -> Result<Vec<SweepRow>, CliError> {
    let points = points(config)?;
    let prepared = points
        .iter()
        .map(|(label, c)| Ok((label.clone(), Prepared::resolve(c, base_dir)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|p| config.seeds.iter().map(move |s| (p, *s)))
        .collect();
    let outs: Vec<Result<(usize, JobOut), CliError>> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let (run, worst) = run_point(&prepared[p].1, seed)?;
            let flows = reports(&run)?
                .into_iter()
                .map(|r| (r.flow_id, r.inconsistency))
                .collect();
            Ok((
                p,
                JobOut {
                    duration: run.update_duration,
                    worst,
                    faults: run.faults.len(),
                    flows,
                },
            ))
        })
        .collect();
    let mut grouped: Vec<Vec<JobOut>> = (0..prepared.len()).map(|_| Vec::new()).collect();
    for out in outs {
        let (p, job) = out?;
        grouped[p].push(job);
    }
    Ok(prepared
        .iter()
        .zip(grouped)
        .map(|((label, _), jobs)| aggregate(label, &jobs))
        .collect())
}

fn aggregate(label: &str, jobs: &[JobOut]) -> SweepRow {
    let n = jobs.len();
    let mean = |xs: &mut dyn Iterator<Item = Nanos>| xs.map(|x| x.0 as f64).sum::<f64>() / n as f64;
    let worst_flow = |j: &JobOut| j.flows.iter().map(|f| f.1).max().unwrap_or_default();
    let mut per_flow: BTreeMap<&FlowId, Vec<Nanos>> = BTreeMap::new();
    let mut flow_order: Vec<&FlowId> = Vec::new();
    for j in jobs {
        for (id, i) in &j.flows {
            let entry = per_flow.entry(id).or_insert_with(|| {
                flow_order.push(id);
                Vec::new()
            });
            entry.push(*i);
        }
    }
    SweepRow {
        axis_value: label.to_string(),
        runs: n,
        duration_mean: mean(&mut jobs.iter().map(|j| j.duration)),
        duration_min: jobs.iter().map(|j| j.duration).min().unwrap_or_default(),
        duration_max: jobs.iter().map(|j| j.duration).max().unwrap_or_default(),
        worst_case: jobs.iter().map(|j| j.worst).max().unwrap_or_default(),
        inconsistency_mean: mean(&mut jobs.iter().map(worst_flow)),
        inconsistency_max: jobs.iter().map(worst_flow).max().unwrap_or_default(),
        faults: jobs.iter().map(|j| j.faults).sum(),
        flows: flow_order
            .into_iter()
            .map(|id| {
                let v = &per_flow[id];
                let m = v.iter().map(|x| x.0 as f64).sum::<f64>() / v.len() as f64;
                (
                    id.clone(),
                    m,
                    *v.iter().min().expect("non-empty"),
                    *v.iter().max().expect("non-empty"),
                )
            })
            .collect(),
    }
}

pub fn sweep(loaded: &Loaded) -> Result<(), CliError> {
    let rows = sweep_rows(&loaded.config, &loaded.base_dir)?;
    let meta = metadata(&loaded.config);
    let out = &loaded.out;
    create_dir(out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.axis_value.clone(),
                r.runs.to_string(),
                format_f64(r.duration_mean),
                r.duration_min.0.to_string(),
                r.duration_max.0.to_string(),
                r.worst_case.0.to_string(),
                format_f64(r.inconsistency_mean),
                r.inconsistency_max.0.to_string(),
                r.faults.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("sweep.csv"),
        &meta,
        &[
            "axis_value",
            "runs",
            "duration_mean_ns",
            "duration_min_ns",
            "duration_max_ns",
            "worst_case_ns",
            "inconsistency_mean_ns",
            "inconsistency_max_ns",
            "faults",
        ],
        &table,
    )?;
    let flows: Vec<Vec<String>> = rows
        .iter()
        .flat_map(|r| {
            r.flows.iter().map(|(id, m, lo, hi)| {
                vec![
                    r.axis_value.clone(),
                    id.0.clone(),
                    format_f64(*m),
                    lo.0.to_string(),
                    hi.0.to_string(),
                ]
            })
        })
        .collect();
    write_csv(
        &out.join("sweep_flows.csv"),
        &meta,
        &[
            "axis_value",
            "flow_id",
            "inconsistency_mean_ns",
            "inconsistency_min_ns",
            "inconsistency_max_ns",
        ],
        &flows,
    )
}

pub fn analyze_trace(path: &Path, percentiles: &str, out: Option<&Path>) -> Result<(), CliError> {
    let trace = DelayTrace::load(path).map_err(|e| CliError::config("trace", e.to_string()))?;
    let ps = percentiles
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config("--percentiles", format!("`{p}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rows = analyze(&trace, &ps).map_err(|e| CliError::config("trace", e.to_string()))?;
    let bytes = std::fs::read(path).map_err(|e| CliError::config("trace", e.to_string()))?;
    let meta = Meta {
        hash: hex::encode(Sha256::digest(&bytes)),
        seeds: Vec::new(),
    };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                format_f64(r.p),
                r.percentile.0.to_string(),
                format_f64(r.mean),
                format_f64(r.ratio),
            ]
        })
        .collect();
    let header = ["label", "p", "percentile_ns", "mean_ns", "ratio"];
    match out {
        Some(dir) => {
            create_dir(dir)?;
            write_csv(&dir.join("analysis.csv"), &meta, &header, &table)
        }
        None => {
            print!("{}", render_csv(&meta, &header, &table));
            Ok(())
        }
    }
}

struct Meta {
    hash: String,
    seeds: Vec<u64>,
}

fn config_hash(config: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(config.canonical().as_bytes()))
}

fn metadata(config: &ExperimentConfig) -> Meta {
    Meta {
        hash: config_hash(config),
        seeds: config.seeds.clone(),
    }
}

/// Fixed six-decimal rendering keeps CSV output stable.
fn format_f64(v: f64) -> String {
    format!("{v:.6}")
}

fn render_csv(meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> String {
    let seeds = if meta.seeds.is_empty() {
        "-".to_string()
    } else {
        meta.seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv");
    format!("# config_hash={} seeds={}\n{}", meta.hash, seeds, body)
}

fn write_csv(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    write_file(path, &render_csv(meta, header, rows))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::config("--out", format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::config("--out", format!("{}: {e}", dir.display())))
}

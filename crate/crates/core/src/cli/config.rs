//! The experiment configuration document and its resolution into runnable
//! scenarios.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::consistency::TestFlow;
use crate::model::{
    Action, MatchKey, Nanos, Phase, PortId, Schedule, SingletonUpdate, SwitchId, SystemParameters,
    TimedUpdateProcedure, UpdateMode, UpdateProcedure, VersionTag,
};
use crate::planner::{simultaneous_schedule, spaced_schedule, worst_case_schedule};
use crate::simulator::{ClockModel, ControlDelays, DelayModel, Simulation};
use crate::topology::{
    ingress_endpoint, install_paths, leaf_spine, leaf_spine_scenario, load_topology,
    ordered_update, path_bound, shortest_path, two_phase_update, LinkDelayMode, PathChange,
    Scenario, TopologyFile, DEFAULT_US_PER_KM,
};

use super::CliError;

/// Default test-flow rate: 40 Mbit/s of 1000-byte packets.
pub const DEFAULT_RATE_PPS: f64 = 5_000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    #[serde(default)]
    pub procedure: ProcedureSpec,
    #[serde(default = "SystemParameters::testbed")]
    pub params: SystemParameters,
    /// Replace Dn by the largest path delay bound over all flow paths.
    #[serde(default)]
    pub derive_dn: bool,
    #[serde(default)]
    pub delays: DelaySpec,
    #[serde(default)]
    pub schedule: ScheduleMode,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
    #[serde(default = "default_rate")]
    pub rate_pps: f64,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    /// Pin every delay at the bound that stretches the update most.
    #[serde(default)]
    pub adversarial: bool,
}

fn default_rate() -> f64 {
    DEFAULT_RATE_PPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TopologySpec {
    LeafSpine {
        n: usize,
        /// Delay of every leaf-spine link; defaults to Dn / 2.
        #[serde(default)]
        link_delay: Option<DelayModel>,
    },
    File {
        /// Relative paths are resolved against the config file's directory.
        path: PathBuf,
        #[serde(default = "default_us_per_km")]
        us_per_km: f64,
        #[serde(default)]
        delay_mode: LinkDelayMode,
    },
}

fn default_us_per_km() -> f64 {
    DEFAULT_US_PER_KM
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureSpec {
    /// New-path rules, then the ingress stamp, then removal of old rules.
    #[default]
    TwoPhaseGc,
    TwoPhase,
    /// One hop per phase from the egress back to the ingress.
    Ordered,
    /// Phases spelled out update by update.
    Explicit(Vec<Vec<UpdateSpec>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateSpec {
    pub target: String,
    #[serde(default = "default_mode")]
    pub mode: UpdateMode,
    #[serde(default)]
    pub entries: Vec<EntrySpec>,
}

fn default_mode() -> UpdateMode {
    UpdateMode::Install
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    pub flow: String,
    #[serde(default)]
    pub tag: Option<u32>,
    pub in_port: u32,
    #[serde(default = "default_action")]
    pub action: Action,
}

fn default_action() -> Action {
    Action::Drop
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    /// Controller-to-switch delay; uniform over `[0, Dc]` by default.
    #[serde(default)]
    pub controller: Option<DelayModel>,
    /// Gap between messages of one phase; uniform over `[0, Δ]` by default.
    #[serde(default)]
    pub gap: Option<DelayModel>,
    /// Clock offset bound; the rest of δ is execution jitter.
    #[serde(default)]
    pub sync_err: Option<Nanos>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Greedy untimed controller.
    Untimed,
    #[default]
    WorstCase,
    /// Worst-case schedule with `d` in place of Dn before collection.
    Knob(Nanos),
    /// Every phase at the same instant.
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub ingress: String,
    pub egress: String,
    /// Defaults to a fewest-hop path.
    #[serde(default)]
    pub old_path: Option<Vec<String>>,
    /// Defaults to the old path (a tag-only change).
    #[serde(default)]
    pub new_path: Option<Vec<String>>,
    #[serde(default)]
    pub rate_pps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<GridValue>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Leaf-spine size.
    N,
    /// Scheduling error δ.
    Delta,
    Dc,
    Dn,
    /// Consistency knob.
    D,
}

impl FromStr for Axis {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(Axis::N),
            "delta" => Ok(Axis::Delta),
            "dc" => Ok(Axis::Dc),
            "dn" => Ok(Axis::Dn),
            "d" => Ok(Axis::D),
            _ => Err(CliError::config(
                "sweep.axis",
                format!("unknown axis `{s}` (expected n, delta, dc, dn or d)"),
            )),
        }
    }
}

/// A grid point as written: a bare integer or a string such as `"4ms"`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Int(u64),
    Text(String),
}

impl fmt::Display for GridValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridValue::Int(v) => write!(f, "{v}"),
            GridValue::Text(s) => f.write_str(s),
        }
    }
}

impl GridValue {
    pub fn parse_list(text: &str) -> Vec<GridValue> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| match s.parse::<u64>() {
                Ok(v) => GridValue::Int(v),
                Err(_) => GridValue::Text(s.to_string()),
            })
            .collect()
    }

    fn count(&self) -> Result<usize, CliError> {
        match self {
            GridValue::Int(v) => Ok(*v as usize),
            GridValue::Text(s) => s
                .parse()
                .map_err(|_| CliError::config("sweep.grid", format!("`{s}` is not a switch count"))),
        }
    }

    fn duration(&self) -> Result<Nanos, CliError> {
        match self {
            GridValue::Int(v) => Ok(Nanos(*v)),
            GridValue::Text(s) => s
                .parse()
                .map_err(|e| CliError::config("sweep.grid", format!("`{s}`: {e}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))
    }

    /// Canonical JSON of the configuration; hashing this makes the hash
    /// independent of formatting.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// The configuration with one sweep value applied.
    pub fn at(&self, axis: Axis, value: &GridValue) -> Result<ExperimentConfig, CliError> {
        let mut c = self.clone();
        c.sweep = None;
        match axis {
            Axis::N => match &mut c.topology {
                TopologySpec::LeafSpine { n, .. } => *n = value.count()?,
                TopologySpec::File { .. } => {
                    return Err(CliError::config(
                        "sweep.axis",
                        "axis n needs a leaf_spine topology",
                    ))
                }
            },
            Axis::Delta => c.params.delta_sched = value.duration()?,
            Axis::Dc => c.params.d_c = value.duration()?,
            Axis::Dn => {
                c.params.d_n = value.duration()?;
                c.derive_dn = false;
            }
            Axis::D => c.schedule = ScheduleMode::Knob(value.duration()?),
        }
        Ok(c)
    }
}

/// A configuration resolved against its files: ready to plan or run.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scenario: Scenario,
    pub params: SystemParameters,
    pub gc: BTreeSet<Phase>,
    pub schedule_mode: ScheduleMode,
    pub simulation: Simulation,
}

impl Prepared {
    pub fn resolve(config: &ExperimentConfig, base_dir: &Path) -> Result<Prepared, CliError> {
        let mut params = config.params;
        if !(config.rate_pps > 0.0 && config.rate_pps.is_finite()) {
            return Err(CliError::config("rate_pps", "must be a positive number"));
        }
        let scenario = build_scenario(config, &params, base_dir)?;
        if config.derive_dn {
            params.d_n = scenario
                .changes
                .iter()
                .flat_map(|c| [&c.old_path, &c.new_path])
                .map(|p| path_bound(&scenario.network, p).unwrap_or_default())
                .max()
                .unwrap_or_default();
        }
        let gc = scenario.procedure.gc_phases();
        let control = ControlDelays {
            controller: config
                .delays
                .controller
                .clone()
                .unwrap_or(ControlDelays::within(&params).controller),
            gap: config
                .delays
                .gap
                .clone()
                .unwrap_or(ControlDelays::within(&params).gap),
        };
        let clock = match config.delays.sync_err {
            None => ClockModel::jitter_only(&params),
            Some(sync) => {
                let exec = params.delta_sched.checked_sub(sync).ok_or_else(|| {
                    CliError::config("delays.sync_err", "exceeds the scheduling error delta_sched")
                })?;
                ClockModel::new(sync, exec, &params).map_err(|e| CliError::config("delays.sync_err", e))?
            }
        };
        let simulation = Simulation::new(scenario.network.clone(), scenario.initial.clone(), params)
            .with_control(control)
            .with_clock(clock)
            .with_flows(scenario.flows())
            .adversarial(config.adversarial);
        Ok(Prepared {
            scenario,
            params,
            gc,
            schedule_mode: config.schedule,
            simulation,
        })
    }

    /// The schedule for timed modes, first instant right after the setup
    /// lead. `None` for the untimed mode.
    pub fn schedule(&self) -> Option<Schedule> {
        let proc = &self.scenario.procedure;
        let t1 = self.simulation.start + self.params.setup_lead(proc.len());
        match self.schedule_mode {
            ScheduleMode::Untimed => None,
            ScheduleMode::WorstCase => Some(worst_case_schedule(proc, t1, &self.params, &self.gc)),
            ScheduleMode::Simultaneous => Some(simultaneous_schedule(proc, t1, &self.gc)),
            ScheduleMode::Knob(d) => {
                let mut s = spaced_schedule(proc.phase_count(), t1, &self.params, &self.gc, d);
                s.knob_d = Some(d);
                Some(s)
            }
        }
    }

    pub fn timed(&self) -> Result<Option<TimedUpdateProcedure>, CliError> {
        self.schedule()
            .map(|s| {
                TimedUpdateProcedure::new(self.scenario.procedure.clone(), s)
                    .map_err(|e| CliError::internal(e.to_string()))
            })
            .transpose()
    }
}

fn build_scenario(
    config: &ExperimentConfig,
    params: &SystemParameters,
    base_dir: &Path,
) -> Result<Scenario, CliError> {
    let topo_err = |e: crate::topology::TopologyError| CliError::config("topology", e.to_string());
    let gc = !matches!(config.procedure, ProcedureSpec::TwoPhase);
    let network = match &config.topology {
        TopologySpec::LeafSpine { n, link_delay } => {
            let delay = link_delay
                .clone()
                .unwrap_or(DelayModel::Constant(Nanos(params.d_n.0 / 2)));
            if config.flows.is_empty() && !matches!(config.procedure, ProcedureSpec::Explicit(_)) {
                let mut s = leaf_spine_scenario(*n, delay, config.rate_pps, gc).map_err(topo_err)?;
                if matches!(config.procedure, ProcedureSpec::Ordered) {
                    s.procedure = ordered_update(&s.network, &s.changes).map_err(topo_err)?;
                }
                return Ok(s);
            }
            leaf_spine(*n, delay).map_err(topo_err)?
        }
        TopologySpec::File {
            path,
            us_per_km,
            delay_mode,
        } => {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(path)
            };
            let file = TopologyFile::load(&full).map_err(topo_err)?;
            load_topology(&file, *us_per_km, *delay_mode).map_err(topo_err)?
        }
    };

    let mut changes = Vec::with_capacity(config.flows.len());
    for (i, f) in config.flows.iter().enumerate() {
        let field = format!("flows[{i}]");
        let ingress_sw = SwitchId::new(f.ingress.as_str());
        let egress_sw = SwitchId::new(f.egress.as_str());
        let ingress = ingress_endpoint(&network, &ingress_sw)
            .map_err(|e| CliError::config(&field, e.to_string()))?;
        let to_path = |p: &Vec<String>| p.iter().map(|s| SwitchId::new(s.as_str())).collect::<Vec<_>>();
        let old_path = match &f.old_path {
            Some(p) => to_path(p),
            None => shortest_path(&network, &ingress_sw, &egress_sw)
                .map_err(|e| CliError::config(&field, e.to_string()))?,
        };
        let new_path = f.new_path.as_ref().map(to_path).unwrap_or_else(|| old_path.clone());
        let id = f.id.clone().unwrap_or_else(|| format!("flow{i}"));
        changes.push(PathChange {
            flow: TestFlow::new(id.as_str(), ingress, f.rate_pps.unwrap_or(config.rate_pps)),
            old_path,
            new_path,
        });
    }
    let ids: BTreeSet<_> = changes.iter().map(|c| &c.flow.id).collect();
    if ids.len() != changes.len() {
        return Err(CliError::config("flows", "flow ids must be unique"));
    }
    let initial = install_paths(&network, &changes).map_err(|e| CliError::config("flows", e.to_string()))?;
    let procedure = match &config.procedure {
        ProcedureSpec::TwoPhaseGc | ProcedureSpec::TwoPhase => {
            if changes.is_empty() {
                return Err(CliError::config("flows", "a two-phase update needs at least one flow"));
            }
            two_phase_update(&network, &changes, gc).map_err(|e| CliError::config("flows", e.to_string()))?
        }
        ProcedureSpec::Ordered => {
            if changes.is_empty() {
                return Err(CliError::config("flows", "an ordered update needs at least one flow"));
            }
            ordered_update(&network, &changes).map_err(|e| CliError::config("flows", e.to_string()))?
        }
        ProcedureSpec::Explicit(phases) => explicit_procedure(phases)?,
    };
    Ok(Scenario {
        network,
        initial,
        changes,
        procedure,
    })
}

fn explicit_procedure(phases: &[Vec<UpdateSpec>]) -> Result<UpdateProcedure, CliError> {
    let mut out = Vec::with_capacity(phases.len());
    for phase in phases {
        let mut updates = Vec::with_capacity(phase.len());
        for u in phase {
            let entries: BTreeMap<MatchKey, Action> = u
                .entries
                .iter()
                .map(|e| {
                    (
                        MatchKey::new(e.flow.as_str(), e.tag.map(VersionTag), PortId(e.in_port)),
                        e.action,
                    )
                })
                .collect();
            updates.push(SingletonUpdate {
                target: SwitchId::new(u.target.as_str()),
                entries,
                mode: u.mode,
            });
        }
        out.push(updates);
    }
    UpdateProcedure::from_phases(out).map_err(|e| CliError::config("procedure", e.to_string()))
}

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consistency::TestFlow;
use crate::model::{
    ForwardingState, Nanos, Network, Phase, SingletonUpdate, SwitchId, SystemParameters,
    TimedUpdateProcedure, UpdateMode, UpdateProcedure,
};
use crate::planner::boundary_wait;
use crate::stats::sample;

use super::{
    forward_packet, inject_flow, path_delay_bound, BoundKind, ClockModel, DelayModel, EventQueue,
    Execution, Fault, FlowTrace, LinkDelays, LogEntry, LogKind, RunMetadata, RunMode, RunResult,
    SimError, StateTimeline,
};

const CONTROLLER: &str = "controller";

/// Delay distributions of the control channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlDelays {
    /// Controller-to-switch delay, install time included.
    pub controller: DelayModel,
    /// Gap between two consecutive messages of the same phase.
    pub gap: DelayModel,
}

impl ControlDelays {
    /// Uniform over `[0, Dc]` and `[0, Δ]`.
    pub fn within(params: &SystemParameters) -> Self {
        ControlDelays {
            controller: DelayModel::Uniform { hi: params.d_c },
            gap: DelayModel::Uniform {
                hi: params.delta_msg,
            },
        }
    }
}

/// Everything a run needs besides the procedure and the seed.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub network: Network,
    pub initial: ForwardingState,
    pub params: SystemParameters,
    pub control: ControlDelays,
    pub clock: ClockModel,
    pub flows: Vec<TestFlow>,
    /// Injection window applied to every flow. By default each flow covers
    /// the update plus one path-delay margin on both sides.
    pub flow_window: Option<(Nanos, Nanos)>,
    /// Every delay takes the value that stretches the update most: the
    /// first execution happens as early as possible, everything else as
    /// late as the bounds allow.
    pub adversarial: bool,
    /// Real time at which the controller sends its first message.
    pub start: Nanos,
}

impl Simulation {
    pub fn new(network: Network, initial: ForwardingState, params: SystemParameters) -> Self {
        Simulation {
            control: ControlDelays::within(&params),
            clock: ClockModel::jitter_only(&params),
            network,
            initial,
            params,
            flows: Vec::new(),
            flow_window: None,
            adversarial: false,
            start: Nanos::ZERO,
        }
    }

    pub fn with_flows(mut self, flows: Vec<TestFlow>) -> Self {
        self.flows = flows;
        self
    }

    pub fn with_control(mut self, control: ControlDelays) -> Self {
        self.control = control;
        self
    }

    pub fn with_clock(mut self, clock: ClockModel) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_window(mut self, window: (Nanos, Nanos)) -> Self {
        self.flow_window = Some(window);
        self
    }

    pub fn adversarial(mut self, on: bool) -> Self {
        self.adversarial = on;
        self
    }

    pub fn with_start(mut self, start: Nanos) -> Self {
        self.start = start;
        self
    }

    fn check(&self) -> Result<(), SimError> {
        for (what, model) in [
            ("controller delay", &self.control.controller),
            ("message gap", &self.control.gap),
        ] {
            model
                .validate()
                .map_err(|reason| SimError::InvalidDelay { what, reason })?;
        }
        for link in self.network.links() {
            link.delay.validate().map_err(|reason| SimError::InvalidDelay {
                what: "link delay",
                reason,
            })?;
        }
        if self.clock.total() != self.params.delta_sched {
            return Err(SimError::ClockMismatch {
                total: self.clock.total(),
                delta: self.params.delta_sched,
            });
        }
        Ok(())
    }

    /// Greedy untimed controller: messages of a phase go out with sampled
    /// gaps, then the controller waits `max(Δ, Dc)` (or `max(Δ, Dc + Dn)`
    /// before garbage collection) from the last message of the phase.
    /// Switches apply an update as soon as it arrives.
    pub fn run_untimed(&self, procedure: &UpdateProcedure, seed: u64) -> Result<RunResult, SimError> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gc = procedure.gc_phases();
        let items = procedure.items();
        let order = send_order(procedure);
        let mut ctx = Control::default();

        enum Event {
            Send(usize),
            Arrive { item: usize, sent: Nanos },
        }
        let mut queue = EventQueue::new();
        queue.push(self.start, Event::Send(0));
        while let Some((now, event)) = queue.pop() {
            match event {
                Event::Send(pos) => {
                    let item = order[pos];
                    let (update, phase) = &items[item];
                    ctx.log(now, LogKind::Send, CONTROLLER, update.target.as_str(), *phase, describe(update));
                    let delay = if self.adversarial {
                        if pos == 0 {
                            Nanos::ZERO
                        } else {
                            self.control.controller.upper_bound()
                        }
                    } else {
                        sample(&self.control.controller, &mut rng)
                    };
                    ctx.check_bound(BoundKind::ControllerDelay, delay, self.params.d_c, now);
                    queue.push(now + delay, Event::Arrive { item, sent: now });
                    if let Some(&next) = order.get(pos + 1) {
                        let next_phase = items[next].1;
                        let wait = if next_phase == *phase {
                            let gap = if self.adversarial {
                                self.control.gap.upper_bound()
                            } else {
                                sample(&self.control.gap, &mut rng)
                            };
                            ctx.check_bound(BoundKind::MessageGap, gap, self.params.delta_msg, now);
                            gap
                        } else {
                            boundary_wait(next_phase, &gc, &self.params)
                        };
                        queue.push(now + wait, Event::Send(pos + 1));
                    }
                }
                Event::Arrive { item, sent } => {
                    let (update, phase) = &items[item];
                    let sw = update.target.as_str();
                    ctx.log(now, LogKind::Arrive, CONTROLLER, sw, *phase, describe(update));
                    ctx.log(now, LogKind::Execute, sw, sw, *phase, describe(update));
                    ctx.executions.push(Execution {
                        item,
                        switch: update.target.clone(),
                        phase: *phase,
                        sent,
                        arrived: now,
                        executed: now,
                        scheduled: None,
                    });
                }
            }
        }
        self.finish(RunMode::Untimed, procedure, seed, ctx)
    }

    /// Timed controller: every command is sent up front, and each switch
    /// runs its command when its clock reads the due time, which is real
    /// time `T + offset` plus execution jitter. A command that arrives after
    /// that instant runs on arrival and is reported as a missed schedule.
    pub fn run_timed(&self, timed: &TimedUpdateProcedure, seed: u64) -> Result<RunResult, SimError> {
        self.check()?;
        let procedure = timed.procedure();
        let schedule = timed.schedule();
        let items = procedure.items();
        let first = schedule.first_time().expect("validated schedule is non-empty");
        let earliest = self.start + self.params.setup_lead(items.len());
        if first < earliest {
            return Err(SimError::ScheduleTooEarly { first, earliest });
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let offsets: BTreeMap<&SwitchId, Nanos> = self
            .network
            .switches()
            .map(|s| {
                let off = if self.adversarial {
                    self.clock.sync_err
                } else {
                    uniform(self.clock.sync_err, &mut rng)
                };
                (s, off)
            })
            .collect();

        let order = send_order(procedure);
        let mut ctx = Control::default();
        let mut now = self.start;
        for (pos, &item) in order.iter().enumerate() {
            let (update, phase) = &items[item];
            let due = schedule.time_of(*phase).expect("validated schedule covers every phase");
            if pos > 0 {
                let gap = if self.adversarial {
                    self.control.gap.upper_bound()
                } else {
                    sample(&self.control.gap, &mut rng)
                };
                ctx.check_bound(BoundKind::MessageGap, gap, self.params.delta_msg, now);
                now += gap;
            }
            let sent = now;
            let delay = if self.adversarial {
                self.control.controller.upper_bound()
            } else {
                sample(&self.control.controller, &mut rng)
            };
            ctx.check_bound(BoundKind::ControllerDelay, delay, self.params.d_c, sent);
            let arrived = sent + delay;
            let (offset, jitter) = if self.adversarial && pos == 0 {
                (Nanos::ZERO, Nanos::ZERO)
            } else if self.adversarial {
                (offsets[&update.target], self.clock.exec_err)
            } else {
                (offsets[&update.target], uniform(self.clock.exec_err, &mut rng))
            };
            let clock_reads_due = due + offset;
            let sw = update.target.as_str();
            let executed = if arrived > clock_reads_due {
                ctx.fault(
                    arrived,
                    Fault::MissedSchedule {
                        switch: update.target.clone(),
                        phase: *phase,
                        scheduled: due,
                        arrived,
                    },
                );
                arrived
            } else {
                clock_reads_due + jitter
            };
            let detail = format!("{} at={}", describe(update), due.0);
            ctx.log(sent, LogKind::Send, CONTROLLER, sw, *phase, detail.clone());
            ctx.log(arrived, LogKind::Arrive, CONTROLLER, sw, *phase, detail.clone());
            ctx.log(executed, LogKind::Execute, sw, sw, *phase, detail);
            ctx.executions.push(Execution {
                item,
                switch: update.target.clone(),
                phase: *phase,
                sent,
                arrived,
                executed,
                scheduled: Some(due),
            });
        }
        self.finish(RunMode::Timed, procedure, seed, ctx)
    }

    fn finish(
        &self,
        mode: RunMode,
        procedure: &UpdateProcedure,
        seed: u64,
        mut ctx: Control,
    ) -> Result<RunResult, SimError> {
        let items = procedure.items();
        ctx.executions
            .sort_by_key(|e| (e.executed, e.phase, e.item));
        let (timeline, missing) = StateTimeline::build(
            &self.initial,
            ctx.executions
                .iter()
                .map(|e| (e.executed, &items[e.item].0)),
        )?;
        for m in missing {
            let phase = ctx
                .executions
                .iter()
                .find(|e| e.switch == m.switch && e.executed == m.at)
                .map_or(0, |e| e.phase);
            ctx.fault(
                m.at,
                Fault::MissingEntry {
                    switch: m.switch,
                    phase,
                    at: m.at,
                },
            );
        }
        let first = ctx.executions.first().map_or(self.start, |e| e.executed);
        let last = ctx.executions.last().map_or(self.start, |e| e.executed);

        let hop_limit = self.network.switch_count();
        let mut flows = Vec::with_capacity(self.flows.len());
        for (index, flow) in self.flows.iter().enumerate() {
            let window = match self.flow_window {
                Some(w) => w,
                None => {
                    let margin = path_delay_bound(&self.network, &self.initial, flow, hop_limit)
                        .max(path_delay_bound(&self.network, timeline.final_state(), flow, hop_limit))
                        .max(self.params.d_n)
                        + flow.spacing();
                    (first.saturating_sub(margin), last + margin)
                }
            };
            let instances = inject_flow(&self.network, flow, window)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64 + 1);
            let mut delays = if self.adversarial {
                LinkDelays::Pinned
            } else {
                LinkDelays::Sampled(&mut rng)
            };
            let packets: Vec<_> = instances
                .iter()
                .map(|pi| forward_packet(&self.network, &timeline, pi, &mut delays, hop_limit))
                .collect();
            let slow: Vec<Nanos> = packets
                .iter()
                .map(|p| p.transit_time())
                .filter(|t| *t > self.params.d_n)
                .collect();
            if let Some(&max_transit) = slow.iter().max() {
                ctx.faults.push(Fault::SlowPackets {
                    flow: flow.id.clone(),
                    packets: slow.len(),
                    max_transit,
                    bound: self.params.d_n,
                });
            }
            flows.push(FlowTrace {
                flow: flow.id.clone(),
                rate_pps: flow.rate_pps,
                window,
                packets,
            });
        }

        let mut log_queue = EventQueue::new();
        for entry in ctx.log {
            log_queue.push(entry.time, entry);
        }
        let log = std::iter::from_fn(|| log_queue.pop()).map(|(_, e)| e).collect();
        ctx.executions.sort_by_key(|e| e.item);

        Ok(RunResult {
            mode,
            seed,
            update_duration: last - first,
            first_execution: first,
            last_execution: last,
            executions: ctx.executions,
            faults: ctx.faults,
            flows,
            metadata: RunMetadata {
                controller_delay_cap: self.control.controller.upper_bound(),
                message_gap_cap: self.control.gap.upper_bound(),
                max_link_delay_cap: self
                    .network
                    .links()
                    .iter()
                    .map(|l| l.delay.upper_bound())
                    .max()
                    .unwrap_or_default(),
                adversarial: self.adversarial,
                start: self.start,
            },
            log,
            old_config: self.initial.clone(),
            new_config: timeline.final_state().clone(),
        })
    }
}

/// Runs an untimed procedure with the default clock and no test flows
/// beyond those given.
pub fn run_untimed(
    network: &Network,
    initial: &ForwardingState,
    procedure: &UpdateProcedure,
    params: &SystemParameters,
    control: &ControlDelays,
    flows: &[TestFlow],
    seed: u64,
) -> Result<RunResult, SimError> {
    Simulation::new(network.clone(), initial.clone(), *params)
        .with_control(control.clone())
        .with_flows(flows.to_vec())
        .run_untimed(procedure, seed)
}

pub fn run_timed(
    network: &Network,
    initial: &ForwardingState,
    timed: &TimedUpdateProcedure,
    params: &SystemParameters,
    control: &ControlDelays,
    flows: &[TestFlow],
    seed: u64,
) -> Result<RunResult, SimError> {
    Simulation::new(network.clone(), initial.clone(), *params)
        .with_control(control.clone())
        .with_flows(flows.to_vec())
        .run_timed(timed, seed)
}

#[derive(Default)]
struct Control {
    executions: Vec<Execution>,
    faults: Vec<Fault>,
    log: Vec<LogEntry>,
}

impl Control {
    fn log(&mut self, time: Nanos, kind: LogKind, src: &str, dst: &str, phase: Phase, detail: String) {
        self.log.push(LogEntry {
            time,
            kind,
            src: src.to_string(),
            dst: dst.to_string(),
            phase,
            detail,
        });
    }

    fn fault(&mut self, time: Nanos, fault: Fault) {
        let (src, dst, phase) = match &fault {
            Fault::MissedSchedule { switch, phase, .. } | Fault::MissingEntry { switch, phase, .. } => {
                (switch.as_str().to_string(), switch.as_str().to_string(), *phase)
            }
            _ => (CONTROLLER.to_string(), "-".to_string(), 0),
        };
        let detail = serde_json::to_string(&fault).expect("faults serialize");
        self.log.push(LogEntry {
            time,
            kind: LogKind::Fault,
            src,
            dst,
            phase,
            detail,
        });
        self.faults.push(fault);
    }

    fn check_bound(&mut self, kind: BoundKind, sample: Nanos, bound: Nanos, at: Nanos) {
        if sample > bound {
            self.fault(
                at,
                Fault::BoundViolation {
                    bound_kind: kind,
                    sample,
                    bound,
                    at,
                },
            );
        }
    }
}

/// Item indices by phase, list order within a phase.
fn send_order(procedure: &UpdateProcedure) -> Vec<usize> {
    let mut order: Vec<usize> = (0..procedure.len()).collect();
    order.sort_by_key(|&i| procedure.items()[i].1);
    order
}

fn describe(update: &SingletonUpdate) -> String {
    let mode = match update.mode {
        UpdateMode::Install => "install",
        UpdateMode::Remove => "remove",
    };
    format!("{mode}/{}", update.entries.len())
}

fn uniform<R: Rng>(hi: Nanos, rng: &mut R) -> Nanos {
    Nanos(rng.gen_range(0..=hi.0))
}

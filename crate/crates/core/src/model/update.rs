use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Action, MatchKey, ModelError, Nanos, SwitchId};

/// Phase numbers start at 1.
pub type Phase = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Install (or overwrite) the listed entries as new-generation rules.
    Install,
    /// Delete the listed entries; the actions are ignored.
    Remove,
}

/// A change to the rule table of exactly one switch.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SingletonUpdate {
    pub target: SwitchId,
    pub entries: BTreeMap<MatchKey, Action>,
    pub mode: UpdateMode,
}

impl SingletonUpdate {
    pub fn install(target: impl Into<SwitchId>) -> Self {
        SingletonUpdate {
            target: target.into(),
            entries: BTreeMap::new(),
            mode: UpdateMode::Install,
        }
    }

    pub fn remove(target: impl Into<SwitchId>) -> Self {
        SingletonUpdate {
            target: target.into(),
            entries: BTreeMap::new(),
            mode: UpdateMode::Remove,
        }
    }

    pub fn with_entry(mut self, key: MatchKey, action: Action) -> Self {
        self.entries.insert(key, action);
        self
    }
}

/// Singleton updates grouped into phases `1..=k`, each phase non-empty.
/// Within a phase, list order is the controller's send order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateProcedure {
    items: Vec<(SingletonUpdate, Phase)>,
    phase_count: Phase,
}

impl UpdateProcedure {
    pub fn new(items: Vec<(SingletonUpdate, Phase)>) -> Result<Self, ModelError> {
        if items.is_empty() {
            return Err(ModelError::EmptyProcedure);
        }
        let phases: BTreeSet<Phase> = items.iter().map(|(_, p)| *p).collect();
        let k = *phases.iter().next_back().expect("non-empty");
        if let Some(missing) = (1..=k).find(|p| !phases.contains(p)) {
            return Err(ModelError::PhaseGap { missing, k });
        }
        Ok(UpdateProcedure {
            items,
            phase_count: k,
        })
    }

    /// Builds a procedure from phases given in order.
    pub fn from_phases(phases: Vec<Vec<SingletonUpdate>>) -> Result<Self, ModelError> {
        let items = phases
            .into_iter()
            .enumerate()
            .flat_map(|(i, us)| us.into_iter().map(move |u| (u, i as Phase + 1)))
            .collect();
        Self::new(items)
    }

    pub fn items(&self) -> &[(SingletonUpdate, Phase)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// k
    pub fn phase_count(&self) -> Phase {
        self.phase_count
    }

    pub fn phase(&self, j: Phase) -> impl Iterator<Item = &SingletonUpdate> {
        self.items
            .iter()
            .filter(move |(_, p)| *p == j)
            .map(|(u, _)| u)
    }

    /// N_j for j = 1..=k.
    pub fn phase_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.phase_count as usize];
        for (_, p) in &self.items {
            sizes[*p as usize - 1] += 1;
        }
        sizes
    }

    /// Remove-mode updates in phase j (NG_j when j is a garbage-collection phase).
    pub fn removal_count(&self, j: Phase) -> usize {
        self.phase(j)
            .filter(|u| u.mode == UpdateMode::Remove)
            .count()
    }

    /// Phases consisting solely of removals. Phase 1 never qualifies since
    /// there is nothing to drain before it.
    pub fn gc_phases(&self) -> BTreeSet<Phase> {
        (2..=self.phase_count)
            .filter(|&j| self.phase(j).all(|u| u.mode == UpdateMode::Remove))
            .collect()
    }

    fn sorted_pairs(&self) -> Vec<(&SingletonUpdate, Phase)> {
        let mut v: Vec<_> = self.items.iter().map(|(u, p)| (u, *p)).collect();
        v.sort();
        v
    }
}

/// Clock times at which each phase is due.
///
/// Regular phases live in `phase_times`, garbage-collection phases in
/// `gc_times`; both are keyed by the phase number inside the procedure.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub phase_times: BTreeMap<Phase, Nanos>,
    #[serde(default)]
    pub gc_times: BTreeMap<Phase, Nanos>,
    /// Consistency knob: the gap between the last regular phase and garbage
    /// collection, when the schedule was built around one.
    #[serde(default)]
    pub knob_d: Option<Nanos>,
}

impl Schedule {
    pub fn time_of(&self, phase: Phase) -> Option<Nanos> {
        self.phase_times
            .get(&phase)
            .or_else(|| self.gc_times.get(&phase))
            .copied()
    }

    pub fn first_time(&self) -> Option<Nanos> {
        self.phase_times
            .values()
            .chain(self.gc_times.values())
            .min()
            .copied()
    }

    /// All due times in phase order.
    pub fn ordered_times(&self) -> Vec<(Phase, Nanos)> {
        let mut all: Vec<(Phase, Nanos)> = self
            .phase_times
            .iter()
            .chain(self.gc_times.iter())
            .map(|(p, t)| (*p, *t))
            .collect();
        all.sort();
        all
    }

    /// Due times must not decrease with the phase number and no phase may
    /// appear in both maps.
    pub fn validate(&self) -> Result<(), ModelError> {
        if let Some(p) = self.phase_times.keys().find(|p| self.gc_times.contains_key(p)) {
            return Err(ModelError::DuplicatePhaseTime(*p));
        }
        let times = self.ordered_times();
        for pair in times.windows(2) {
            if pair[1].1 < pair[0].1 {
                return Err(ModelError::ScheduleOutOfOrder {
                    phase: pair[1].0,
                    time: pair[1].1,
                    previous: pair[0].1,
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedUpdateProcedure {
    procedure: UpdateProcedure,
    schedule: Schedule,
}

impl TimedUpdateProcedure {
    pub fn new(procedure: UpdateProcedure, schedule: Schedule) -> Result<Self, ModelError> {
        schedule.validate()?;
        if let Some(j) = (1..=procedure.phase_count()).find(|j| schedule.time_of(*j).is_none()) {
            return Err(ModelError::UnscheduledPhase(j));
        }
        Ok(TimedUpdateProcedure {
            procedure,
            schedule,
        })
    }

    pub fn procedure(&self) -> &UpdateProcedure {
        &self.procedure
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }
}

/// Same multiset of (update, phase) pairs, times ignored.
pub fn similar(timed: &TimedUpdateProcedure, untimed: &UpdateProcedure) -> bool {
    timed.procedure.sorted_pairs() == untimed.sorted_pairs()
}

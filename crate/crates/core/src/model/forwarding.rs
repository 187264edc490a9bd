use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Endpoint, ModelError, Nanos, PortId, SingletonUpdate, SwitchId, UpdateMode};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlowId(pub String);

impl FlowId {
    pub fn new(name: impl Into<String>) -> Self {
        FlowId(name.into())
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FlowId {
    fn from(s: &str) -> Self {
        FlowId(s.to_string())
    }
}

/// Version tag carried in the packet header (an MPLS label in practice).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VersionTag(pub u32);

/// The fields forwarding can see. Two packets with equal flow and tag are
/// indistinguishable to every rule table.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub flow: FlowId,
    pub tag: Option<VersionTag>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketInstance {
    pub packet: Packet,
    pub ingress: Endpoint,
    pub arrival: Nanos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Action {
    Forward { port: PortId },
    ForwardTagged { port: PortId, tag: VersionTag },
    Drop,
    /// Hand the packet to the outside world.
    Deliver,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generation {
    Old,
    New,
}

/// Match key of a rule. `tag: None` is a wildcard on the version tag.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchKey {
    pub flow: FlowId,
    pub tag: Option<VersionTag>,
    pub in_port: PortId,
}

impl MatchKey {
    pub fn new(flow: impl Into<FlowId>, tag: Option<VersionTag>, in_port: PortId) -> Self {
        MatchKey {
            flow: flow.into(),
            tag,
            in_port,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub action: Action,
    pub generation: Generation,
}

/// Result of a table lookup. `generation` is `None` on a table miss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lookup {
    pub action: Action,
    pub generation: Option<Generation>,
}

impl Lookup {
    const MISS: Lookup = Lookup {
        action: Action::Drop,
        generation: None,
    };
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleTable {
    rules: BTreeMap<MatchKey, Rule>,
}

impl RuleTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: MatchKey, rule: Rule) -> Option<Rule> {
        self.rules.insert(key, rule)
    }

    pub fn remove(&mut self, key: &MatchKey) -> Option<Rule> {
        self.rules.remove(key)
    }

    pub fn get(&self, key: &MatchKey) -> Option<&Rule> {
        self.rules.get(key)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MatchKey, &Rule)> {
        self.rules.iter()
    }

    /// An exact-tag rule beats a wildcard-tag rule; no match drops.
    pub fn lookup(&self, packet: &Packet, in_port: PortId) -> Lookup {
        let mut key = MatchKey {
            flow: packet.flow.clone(),
            tag: packet.tag,
            in_port,
        };
        if packet.tag.is_some() {
            if let Some(rule) = self.rules.get(&key) {
                return rule.into();
            }
            key.tag = None;
        }
        self.rules.get(&key).map_or(Lookup::MISS, Into::into)
    }
}

impl From<&Rule> for Lookup {
    fn from(rule: &Rule) -> Self {
        Lookup {
            action: rule.action,
            generation: Some(rule.generation),
        }
    }
}

/// Rule tables of every switch.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ForwardingState {
    tables: BTreeMap<SwitchId, RuleTable>,
}

/// Outcome of applying one singleton update.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Applied {
    pub state: ForwardingState,
    /// Entries a remove-mode update listed that were not present.
    pub missing: Vec<MatchKey>,
}

impl ForwardingState {
    /// Empty tables for the given switches.
    pub fn with_switches<'a>(switches: impl IntoIterator<Item = &'a SwitchId>) -> Self {
        ForwardingState {
            tables: switches
                .into_iter()
                .map(|s| (s.clone(), RuleTable::new()))
                .collect(),
        }
    }

    pub fn contains_switch(&self, id: &SwitchId) -> bool {
        self.tables.contains_key(id)
    }

    pub fn table(&self, id: &SwitchId) -> Option<&RuleTable> {
        self.tables.get(id)
    }

    pub fn table_mut(&mut self, id: &SwitchId) -> Option<&mut RuleTable> {
        self.tables.get_mut(id)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&SwitchId, &RuleTable)> {
        self.tables.iter()
    }

    pub fn insert_rule(
        &mut self,
        switch: &SwitchId,
        key: MatchKey,
        rule: Rule,
    ) -> Result<(), ModelError> {
        self.tables
            .get_mut(switch)
            .ok_or_else(|| ModelError::UnknownSwitch(switch.clone()))?
            .insert(key, rule);
        Ok(())
    }

    /// Table miss (or unknown switch) yields `Drop`.
    pub fn lookup(&self, switch: &SwitchId, packet: &Packet, in_port: PortId) -> Lookup {
        self.tables
            .get(switch)
            .map_or(Lookup::MISS, |t| t.lookup(packet, in_port))
    }

    pub fn apply_singleton(&self, update: &SingletonUpdate) -> Result<Applied, ModelError> {
        let mut state = self.clone();
        let missing = state.apply_in_place(update)?;
        Ok(Applied { state, missing })
    }

    /// In-place variant of [`ForwardingState::apply_singleton`]; returns the
    /// entries a removal did not find.
    pub fn apply_in_place(&mut self, update: &SingletonUpdate) -> Result<Vec<MatchKey>, ModelError> {
        let table = self
            .tables
            .get_mut(&update.target)
            .ok_or_else(|| ModelError::UnknownSwitch(update.target.clone()))?;
        let mut missing = Vec::new();
        match update.mode {
            UpdateMode::Install => {
                for (key, action) in &update.entries {
                    table.insert(
                        key.clone(),
                        Rule {
                            action: *action,
                            generation: Generation::New,
                        },
                    );
                }
            }
            UpdateMode::Remove => {
                for key in update.entries.keys() {
                    if table.remove(key).is_none() {
                        missing.push(key.clone());
                    }
                }
            }
        }
        Ok(missing)
    }
}

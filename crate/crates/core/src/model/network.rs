use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::simulator::DelayModel;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SwitchId(pub String);

impl SwitchId {
    pub fn new(name: impl Into<String>) -> Self {
        SwitchId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SwitchId {
    fn from(s: &str) -> Self {
        SwitchId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortId(pub u32);

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A (switch, port) pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Endpoint {
    pub switch: SwitchId,
    pub port: PortId,
}

impl Endpoint {
    pub fn new(switch: impl Into<SwitchId>, port: PortId) -> Self {
        Endpoint {
            switch: switch.into(),
            port,
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.switch, self.port)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
    pub delay: DelayModel,
}

/// Switches, their ports, the bidirectional links between ports and the
/// ingress ports that face the outside world.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    ports: BTreeMap<SwitchId, BTreeSet<PortId>>,
    links: Vec<Link>,
    ingress: BTreeSet<Endpoint>,
    // endpoint -> (link index, far endpoint)
    peers: BTreeMap<Endpoint, (usize, Endpoint)>,
}

impl Network {
    pub fn new(
        ports: BTreeMap<SwitchId, BTreeSet<PortId>>,
        links: Vec<Link>,
        ingress: BTreeSet<Endpoint>,
    ) -> Result<Self, ModelError> {
        let has_port = |ep: &Endpoint| {
            ports
                .get(&ep.switch)
                .is_some_and(|set| set.contains(&ep.port))
        };
        let mut peers = BTreeMap::new();
        for (idx, link) in links.iter().enumerate() {
            for ep in [&link.a, &link.b] {
                if !has_port(ep) {
                    return Err(ModelError::UnknownEndpoint(ep.clone()));
                }
            }
            if link.a == link.b {
                return Err(ModelError::SelfLink(link.a.clone()));
            }
            for (near, far) in [(&link.a, &link.b), (&link.b, &link.a)] {
                if peers.insert(near.clone(), (idx, far.clone())).is_some() {
                    return Err(ModelError::PortReused(near.clone()));
                }
            }
        }
        for ep in &ingress {
            if !has_port(ep) {
                return Err(ModelError::UnknownEndpoint(ep.clone()));
            }
            if peers.contains_key(ep) {
                return Err(ModelError::IngressIsLinked(ep.clone()));
            }
        }
        Ok(Network {
            ports,
            links,
            ingress,
            peers,
        })
    }

    pub fn builder() -> NetworkBuilder {
        NetworkBuilder::default()
    }

    pub fn switches(&self) -> impl Iterator<Item = &SwitchId> {
        self.ports.keys()
    }

    pub fn switch_count(&self) -> usize {
        self.ports.len()
    }

    pub fn contains_switch(&self, id: &SwitchId) -> bool {
        self.ports.contains_key(id)
    }

    pub fn ports(&self, id: &SwitchId) -> Option<&BTreeSet<PortId>> {
        self.ports.get(id)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn ingress_ports(&self) -> &BTreeSet<Endpoint> {
        &self.ingress
    }

    pub fn is_ingress(&self, ep: &Endpoint) -> bool {
        self.ingress.contains(ep)
    }

    /// Ingress ports of a switch, in port order.
    pub fn ingress_of(&self, id: &SwitchId) -> Vec<PortId> {
        self.ingress
            .iter()
            .filter(|ep| &ep.switch == id)
            .map(|ep| ep.port)
            .collect()
    }

    /// The far end of the link attached to `ep`, with that link's delay model.
    pub fn peer(&self, ep: &Endpoint) -> Option<(&Endpoint, &DelayModel)> {
        self.peers
            .get(ep)
            .map(|(idx, far)| (far, &self.links[*idx].delay))
    }

    /// The local port on `from` whose link leads to `to`. With parallel
    /// links the lowest port wins.
    pub fn port_towards(&self, from: &SwitchId, to: &SwitchId) -> Option<PortId> {
        self.ports.get(from)?.iter().copied().find(|p| {
            self.peers
                .get(&Endpoint::new(from.clone(), *p))
                .is_some_and(|(_, far)| &far.switch == to)
        })
    }

    /// Neighbouring switches, sorted and deduplicated.
    pub fn neighbors(&self, id: &SwitchId) -> Vec<SwitchId> {
        let mut out: Vec<SwitchId> = self
            .ports
            .get(id)
            .into_iter()
            .flatten()
            .filter_map(|p| self.peers.get(&Endpoint::new(id.clone(), *p)))
            .map(|(_, far)| far.switch.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Incremental construction with automatic port numbering.
#[derive(Default, Debug)]
pub struct NetworkBuilder {
    ports: BTreeMap<SwitchId, BTreeSet<PortId>>,
    links: Vec<Link>,
    ingress: BTreeSet<Endpoint>,
}

impl NetworkBuilder {
    pub fn switch(&mut self, id: impl Into<SwitchId>) -> &mut Self {
        self.ports.entry(id.into()).or_default();
        self
    }

    fn next_port(&mut self, id: &SwitchId) -> PortId {
        let set = self.ports.entry(id.clone()).or_default();
        let port = PortId(set.iter().next_back().map_or(1, |p| p.0 + 1));
        set.insert(port);
        port
    }

    /// Connects two switches with a fresh port on each side.
    pub fn link(
        &mut self,
        a: impl Into<SwitchId>,
        b: impl Into<SwitchId>,
        delay: DelayModel,
    ) -> (PortId, PortId) {
        let (a, b) = (a.into(), b.into());
        let pa = self.next_port(&a);
        let pb = self.next_port(&b);
        self.links.push(Link {
            a: Endpoint::new(a, pa),
            b: Endpoint::new(b, pb),
            delay,
        });
        (pa, pb)
    }

    /// Adds an outward-facing ingress port.
    pub fn ingress(&mut self, id: impl Into<SwitchId>) -> PortId {
        let id = id.into();
        let port = self.next_port(&id);
        self.ingress.insert(Endpoint::new(id, port));
        port
    }

    pub fn build(self) -> Result<Network, ModelError> {
        Network::new(self.ports, self.links, self.ingress)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nanos;

    fn line() -> Network {
        let mut b = Network::builder();
        b.ingress("a");
        b.link("a", "b", DelayModel::Constant(Nanos(5)));
        b.link("b", "c", DelayModel::Constant(Nanos(7)));
        b.build().unwrap()
    }

    #[test]
    fn builder_assigns_ports_and_peers() {
        let net = line();
        assert_eq!(net.switch_count(), 3);
        assert_eq!(net.ingress_of(&"a".into()), vec![PortId(1)]);
        assert_eq!(net.port_towards(&"a".into(), &"b".into()), Some(PortId(2)));
        let (far, delay) = net.peer(&Endpoint::new("b", PortId(2))).unwrap();
        assert_eq!(far, &Endpoint::new("c", PortId(1)));
        assert_eq!(delay, &DelayModel::Constant(Nanos(7)));
        assert_eq!(net.neighbors(&"b".into()), vec!["a".into(), "c".into()]);
    }

    #[test]
    fn rejects_dangling_and_linked_ingress() {
        let mut ports = BTreeMap::new();
        ports.insert(SwitchId::from("a"), BTreeSet::from([PortId(1)]));
        let link = Link {
            a: Endpoint::new("a", PortId(1)),
            b: Endpoint::new("z", PortId(1)),
            delay: DelayModel::Constant(Nanos(1)),
        };
        assert_eq!(
            Network::new(ports.clone(), vec![link], BTreeSet::new()),
            Err(ModelError::UnknownEndpoint(Endpoint::new("z", PortId(1))))
        );

        ports.insert(SwitchId::from("b"), BTreeSet::from([PortId(1)]));
        let link = Link {
            a: Endpoint::new("a", PortId(1)),
            b: Endpoint::new("b", PortId(1)),
            delay: DelayModel::Constant(Nanos(1)),
        };
        let ingress = BTreeSet::from([Endpoint::new("a", PortId(1))]);
        assert_eq!(
            Network::new(ports, vec![link], ingress),
            Err(ModelError::IngressIsLinked(Endpoint::new("a", PortId(1))))
        );
    }
}

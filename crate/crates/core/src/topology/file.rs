use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Nanos, Network};
use crate::simulator::{DelayModel, DEFAULT_CAP_FACTOR};

use super::TopologyError;

/// Propagation delay of light in fibre.
pub const DEFAULT_US_PER_KM: f64 = 5.0;

const EARTH_RADIUS_KM: f64 = 6371.0;

/// JSON topology: nodes with optional coordinates, undirected links with
/// optional fixed delays, and the nodes that receive external traffic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyFile {
    #[serde(default)]
    pub name: Option<String>,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub ingress: Vec<IngressSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default)]
    pub lat: Option<f64>,
    #[serde(default)]
    pub lon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    /// Overrides the distance-derived delay.
    #[serde(default)]
    pub delay_ns: Option<Nanos>,
}

/// A node id, optionally with a label naming the external source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IngressSpec {
    Node(String),
    Labeled { node: String, label: String },
}

impl IngressSpec {
    pub fn node(&self) -> &str {
        match self {
            IngressSpec::Node(n) | IngressSpec::Labeled { node: n, .. } => n,
        }
    }
}

/// How a link's derived delay becomes a delay distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinkDelayMode {
    /// Every packet takes exactly the derived delay.
    #[default]
    Constant,
    /// Exponential with the derived delay as its mean, truncated at
    /// `cap_factor` times the mean.
    Exponential {
        #[serde(default = "default_cap_factor")]
        cap_factor: u64,
    },
}

fn default_cap_factor() -> u64 {
    DEFAULT_CAP_FACTOR
}

impl TopologyFile {
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        serde_json::from_str(text).map_err(|e| TopologyError::Read {
            path: "<inline>".to_string(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, TopologyError> {
        let read_err = |reason: String| TopologyError::Read {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))
    }
}

/// Great-circle distance on a sphere of the Earth's mean radius.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Builds a network whose link delays are the beeline distance between the
/// endpoints times `us_per_km`, unless a link gives `delay_ns`. Each
/// ingress entry adds one ingress port to its node.
pub fn load_topology(
    file: &TopologyFile,
    us_per_km: f64,
    mode: LinkDelayMode,
) -> Result<Network, TopologyError> {
    if !(us_per_km.is_finite() && us_per_km >= 0.0) {
        return Err(TopologyError::BadPropagation(us_per_km));
    }
    let mut coords: BTreeMap<&str, Option<(f64, f64)>> = BTreeMap::new();
    let mut b = Network::builder();
    for node in &file.nodes {
        let c = node.lat.zip(node.lon);
        if coords.insert(node.id.as_str(), c).is_some() {
            return Err(TopologyError::DuplicateNode(node.id.clone()));
        }
        b.switch(node.id.as_str());
    }
    for link in &file.links {
        let lookup = |id: &str| {
            coords.get(id).copied().ok_or_else(|| TopologyError::UnknownNode {
                a: link.a.clone(),
                b: link.b.clone(),
                missing: id.to_string(),
            })
        };
        let (ca, cb) = (lookup(&link.a)?, lookup(&link.b)?);
        let mean = match (link.delay_ns, ca, cb) {
            (Some(d), _, _) => d,
            (None, Some((la, oa)), Some((lb, ob))) => {
                let km = haversine_km(la, oa, lb, ob);
                Nanos((km * us_per_km * 1_000.0).round() as u64)
            }
            _ => {
                return Err(TopologyError::MissingDelay {
                    a: link.a.clone(),
                    b: link.b.clone(),
                })
            }
        };
        let delay = match mode {
            LinkDelayMode::Constant => DelayModel::Constant(mean),
            LinkDelayMode::Exponential { cap_factor } => DelayModel::Exponential {
                mean,
                cap: mean * cap_factor,
            },
        };
        b.link(link.a.as_str(), link.b.as_str(), delay);
    }
    for ingress in &file.ingress {
        if !coords.contains_key(ingress.node()) {
            return Err(TopologyError::UnknownIngress(ingress.node().to_string()));
        }
        b.ingress(ingress.node());
    }
    Ok(b.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Endpoint, PortId};
    use proptest::prelude::*;

    fn node(id: &str, lat: Option<f64>, lon: Option<f64>) -> NodeSpec {
        NodeSpec {
            id: id.to_string(),
            lat,
            lon,
        }
    }

    fn link(a: &str, b: &str, delay_ns: Option<u64>) -> LinkSpec {
        LinkSpec {
            a: a.to_string(),
            b: b.to_string(),
            delay_ns: delay_ns.map(Nanos),
        }
    }

    fn delay_of(net: &Network, sw: &str, port: u32) -> DelayModel {
        net.peer(&Endpoint::new(sw, PortId(port))).unwrap().1.clone()
    }

    #[test]
    fn thousand_km_is_five_ms() {
        // 1000 km along a meridian is 1000 / 6371 rad of latitude
        let dlat = (1000.0 / EARTH_RADIUS_KM).to_degrees();
        let file = TopologyFile {
            name: None,
            nodes: vec![node("a", Some(0.0), Some(10.0)), node("b", Some(dlat), Some(10.0))],
            links: vec![link("a", "b", None)],
            ingress: vec![IngressSpec::Node("a".into())],
        };
        let net = load_topology(&file, DEFAULT_US_PER_KM, LinkDelayMode::Constant).unwrap();
        assert_eq!(delay_of(&net, "a", 1), DelayModel::Constant(Nanos::from_millis(5)));
        assert_eq!(net.ingress_of(&"a".into()), vec![PortId(2)]);

        let exp = load_topology(&file, 5.0, LinkDelayMode::Exponential { cap_factor: 10 }).unwrap();
        assert_eq!(
            delay_of(&exp, "a", 1),
            DelayModel::Exponential {
                mean: Nanos::from_millis(5),
                cap: Nanos::from_millis(50)
            }
        );
    }

    #[test]
    fn same_place_and_override() {
        let file = TopologyFile {
            name: None,
            nodes: vec![
                node("a", Some(40.0), Some(-74.0)),
                node("b", Some(40.0), Some(-74.0)),
                node("c", None, None),
            ],
            links: vec![link("a", "b", None), link("b", "c", Some(7_000_000))],
            ingress: vec![],
        };
        let net = load_topology(&file, 5.0, LinkDelayMode::Constant).unwrap();
        assert_eq!(delay_of(&net, "a", 1), DelayModel::Constant(Nanos::ZERO));
        assert_eq!(delay_of(&net, "c", 1), DelayModel::Constant(Nanos::from_millis(7)));
    }

    #[test]
    fn errors_name_the_link() {
        let file = TopologyFile {
            name: None,
            nodes: vec![node("a", Some(1.0), Some(1.0)), node("c", None, None)],
            links: vec![link("a", "c", None)],
            ingress: vec![],
        };
        let err = load_topology(&file, 5.0, LinkDelayMode::Constant).unwrap_err();
        assert!(matches!(err, TopologyError::MissingDelay { ref a, ref b } if a == "a" && b == "c"));
        assert!(err.to_string().contains("a-c"));

        let dup = TopologyFile {
            name: None,
            nodes: vec![node("a", None, None), node("a", None, None)],
            links: vec![],
            ingress: vec![],
        };
        assert!(matches!(load_topology(&dup, 5.0, LinkDelayMode::Constant), Err(TopologyError::DuplicateNode(_))));
    }

    #[test]
    fn parses_json_shape() {
        let text = r#"{
            "nodes": [{"id": "x", "lat": 1.0, "lon": 2.0}, {"id": "y"}],
            "links": [{"a": "x", "b": "y", "delay_ns": "2ms"}],
            "ingress": ["x", {"node": "y", "label": "peer"}]
        }"#;
        let file = TopologyFile::parse(text).unwrap();
        assert_eq!(file.links[0].delay_ns, Some(Nanos::from_millis(2)));
        assert_eq!(file.ingress[1].node(), "y");
        let net = load_topology(&file, 5.0, LinkDelayMode::Constant).unwrap();
        assert_eq!(net.ingress_ports().len(), 2);
    }

    proptest! {
        #[test]
        fn haversine_symmetric_and_zero_iff_same(
            la in -89.0f64..89.0, oa in -179.0f64..179.0,
            lb in -89.0f64..89.0, ob in -179.0f64..179.0,
        ) {
            let ab = haversine_km(la, oa, lb, ob);
            let ba = haversine_km(lb, ob, la, oa);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(haversine_km(la, oa, la, oa).abs() < 1e-9);
            if (la - lb).abs() > 1e-6 || (oa - ob).abs() > 1e-6 {
                prop_assert!(ab > 0.0);
            }
        }
    }
}

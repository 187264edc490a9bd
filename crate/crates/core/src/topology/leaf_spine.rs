use crate::consistency::TestFlow;
use crate::model::{ForwardingState, Network, SwitchId, UpdateProcedure};
use crate::simulator::DelayModel;

use super::{ingress_endpoint, install_paths, two_phase_update, PathChange, TopologyError};

/// `2n/3` leaves named `leaf{i}` and `n/3` spines named `spine{j}`, with
/// every leaf linked to every spine and one ingress port per leaf.
pub fn leaf_spine(n: usize, link_delay: DelayModel) -> Result<Network, TopologyError> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(TopologyError::BadLeafSpineSize(n));
    }
    let (leaves, spines) = (2 * n / 3, n / 3);
    let mut b = Network::builder();
    for i in 0..leaves {
        b.ingress(leaf(i));
    }
    for i in 0..leaves {
        for j in 0..spines {
            b.link(leaf(i), spine(j), link_delay.clone());
        }
    }
    Ok(b.build()?)
}

fn leaf(i: usize) -> SwitchId {
    SwitchId(format!("leaf{i}"))
}

fn spine(j: usize) -> SwitchId {
    SwitchId(format!("spine{j}"))
}

/// A network together with its initial configuration, test flows and the
/// update that moves them.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub network: Network,
    pub initial: ForwardingState,
    pub changes: Vec<PathChange>,
    pub procedure: UpdateProcedure,
}

impl Scenario {
    pub fn flows(&self) -> Vec<TestFlow> {
        self.changes.iter().map(|c| c.flow.clone()).collect()
    }
}

/// The leaf-spine experiment: flow `i` runs from leaf `i` to leaf
/// `i + 1` (mod L) and moves from spine `i` to spine `i + 1` (mod S).
/// With garbage collection the procedure touches all `n` switches in
/// phase 1, the `2n/3` leaves in phase 2 and all `n` switches again in
/// the collection phase.
pub fn leaf_spine_scenario(
    n: usize,
    link_delay: DelayModel,
    rate_pps: f64,
    gc: bool,
) -> Result<Scenario, TopologyError> {
    let network = leaf_spine(n, link_delay)?;
    let (leaves, spines) = (2 * n / 3, n / 3);
    let mut changes = Vec::with_capacity(leaves);
    for i in 0..leaves {
        let (src, dst) = (leaf(i), leaf((i + 1) % leaves));
        let ingress = ingress_endpoint(&network, &src)?;
        changes.push(PathChange {
            flow: TestFlow::new(format!("flow{i}").as_str(), ingress, rate_pps),
            old_path: vec![src.clone(), spine(i % spines), dst.clone()],
            new_path: vec![src, spine((i + 1) % spines), dst],
        });
    }
    let initial = install_paths(&network, &changes)?;
    let procedure = two_phase_update(&network, &changes, gc)?;
    Ok(Scenario {
        network,
        initial,
        changes,
        procedure,
    })
}

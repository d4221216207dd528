use std::collections::BTreeMap;

use super::{trace_path, HostId, NodeRef, PortNum, Routing, SwitchId, Topology};
use crate::error::Result;

/// Linear shift over `n` nodes: in phase `p`, node `i` targets `(p + i) mod n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftPattern {
    pub nodes: u32,
}

impl ShiftPattern {
    pub fn new(nodes: u32) -> Self {
        assert!(nodes > 0, "shift pattern needs at least one node");
        Self { nodes }
    }

    pub fn dest(&self, src: u32, phase: u32) -> u32 {
        ((u64::from(src) + u64::from(phase)) % u64::from(self.nodes)) as u32
    }

    /// Every `(src, dest)` pair of one phase.
    pub fn flows(&self, phase: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.nodes).map(move |i| (i, self.dest(i, phase)))
    }
}

/// An inter-switch link (named by its transmitting side) carrying more than
/// one flow in the same phase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkConflict {
    pub switch: SwitchId,
    pub port: PortNum,
    pub sources: Vec<HostId>,
}

/// Statically routes every flow of `phase` and reports each switch-to-switch
/// link used by two or more of them. Empty means the phase is conflict-free.
pub fn verify_conflict_free(
    topo: &Topology,
    routing: &Routing,
    pattern: ShiftPattern,
    phase: u32,
) -> Result<Vec<LinkConflict>> {
    assert_eq!(
        pattern.nodes as usize,
        topo.num_hosts(),
        "shift pattern size must match the host count"
    );
    let mut usage: BTreeMap<(SwitchId, PortNum), Vec<HostId>> = BTreeMap::new();
    for (src, dst) in pattern.flows(phase) {
        if src == dst {
            continue;
        }
        for (sw, port) in trace_path(topo, routing, src, dst)? {
            if matches!(topo.peer_of(sw, port).map(|e| e.node), Some(NodeRef::Switch(_))) {
                usage.entry((sw, port)).or_default().push(src);
            }
        }
    }
    Ok(usage
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|((switch, port), sources)| LinkConflict {
            switch,
            port,
            sources,
        })
        .collect())
}

/// Conflicts for every phase `0..N`, as `(phase, conflicts)` pairs.
pub fn verify_all_phases(
    topo: &Topology,
    routing: &Routing,
) -> Result<Vec<(u32, Vec<LinkConflict>)>> {
    let pattern = ShiftPattern::new(topo.num_hosts() as u32);
    (0..pattern.nodes)
        .map(|n| verify_conflict_free(topo, routing, pattern, n).map(|c| (n, c)))
        .collect()
}

use std::collections::BTreeSet;

use super::{HostId, NamedNode, Topology};
use crate::error::{Error, Result};

/// Returns a damaged copy of `topo`.
///
/// Each `(a, b)` pair in `swap_cable_pairs` exchanges the switch-side ends of
/// the two hosts' cables, so both hosts keep their names (and ids) but land
/// on each other's switch port. Swaps are applied first, then `remove_hosts`
/// drops hosts and their cables. Ids refer to `topo`; the result is
/// re-densified by name.
pub fn degrade(
    topo: &Topology,
    remove_hosts: &[HostId],
    swap_cable_pairs: &[(HostId, HostId)],
) -> Result<Topology> {
    let n = topo.num_hosts() as HostId;
    let check = |h: HostId| {
        if h < n {
            Ok(())
        } else {
            Err(Error::config(format!("degrade: host id {h} does not exist (have {n})")))
        }
    };
    for &h in remove_hosts {
        check(h)?;
    }
    for &(a, b) in swap_cable_pairs {
        check(a)?;
        check(b)?;
    }

    let mut cables = topo.named_cables();
    let host_cable = |cables: &[(super::NamedEndpoint, super::NamedEndpoint)], name: &str| {
        cables
            .iter()
            .position(|(x, y)| {
                [x, y]
                    .iter()
                    .any(|e| matches!(&e.node, NamedNode::Host(h) if h == name))
            })
            .expect("every host has a cable")
    };
    for &(a, b) in swap_cable_pairs {
        if a == b {
            continue;
        }
        let ia = host_cable(&cables, topo.host_name(a));
        let ib = host_cable(&cables, topo.host_name(b));
        let sa = switch_side(&mut cables[ia]).clone();
        let sb = switch_side(&mut cables[ib]).clone();
        *switch_side(&mut cables[ia]) = sb;
        *switch_side(&mut cables[ib]) = sa;
    }

    let removed: BTreeSet<&str> = remove_hosts.iter().map(|h| topo.host_name(*h)).collect();
    if removed.len() == topo.num_hosts() {
        return Err(Error::Topology("degrade would remove every host".into()));
    }
    cables.retain(|(x, y)| {
        ![x, y]
            .iter()
            .any(|e| matches!(&e.node, NamedNode::Host(h) if removed.contains(h.as_str())))
    });
    Topology::from_named(&cables)
}

fn switch_side(
    cable: &mut (super::NamedEndpoint, super::NamedEndpoint),
) -> &mut super::NamedEndpoint {
    if matches!(cable.0.node, NamedNode::Host(_)) {
        &mut cable.1
    } else {
        &mut cable.0
    }
}

use serde::{Deserialize, Serialize};

use super::{NamedEndpoint, PortNum, Topology};
use crate::error::{Error, Result};

/// Two-level leaf/spine fat-tree.
///
/// Host `leaf * hosts_per_leaf + slot` sits on leaf port `slot`. The up-port
/// of a leaf toward spine `s`, copy `k`, is `hosts_per_leaf + s * p + k`; the
/// spine port toward leaf `l`, copy `k`, is `l * p + k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FatTreeSpec {
    pub spines: u32,
    pub leaves: u32,
    pub hosts_per_leaf: u32,
    #[serde(default = "one")]
    pub parallel_uplinks: u32,
    /// Switch radix limit, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radix: Option<u32>,
}

fn one() -> u32 {
    1
}

impl FatTreeSpec {
    pub fn new(spines: u32, leaves: u32, hosts_per_leaf: u32) -> Self {
        Self {
            spines,
            leaves,
            hosts_per_leaf,
            parallel_uplinks: 1,
            radix: None,
        }
    }

    pub fn num_hosts(&self) -> u32 {
        self.leaves * self.hosts_per_leaf
    }

    /// Full bisection bandwidth: uplink capacity covers downlink capacity.
    pub fn is_non_blocking(&self) -> bool {
        self.hosts_per_leaf <= self.spines * self.parallel_uplinks
    }

    pub fn leaf_ports(&self) -> u32 {
        self.hosts_per_leaf + self.spines * self.parallel_uplinks
    }

    pub fn spine_ports(&self) -> u32 {
        self.leaves * self.parallel_uplinks
    }

    pub fn validate(&self) -> Result<()> {
        if self.leaves == 0 || self.hosts_per_leaf == 0 {
            return Err(Error::config("fat-tree needs at least one leaf and one host per leaf"));
        }
        if self.parallel_uplinks == 0 {
            return Err(Error::config("parallel_uplinks must be >= 1"));
        }
        if self.spines == 0 && self.leaves > 1 {
            return Err(Error::config("more than one leaf requires at least one spine"));
        }
        if let Some(radix) = self.radix {
            if self.leaf_ports() > radix {
                return Err(Error::config(format!(
                    "leaf needs {} ports but radix is {radix}",
                    self.leaf_ports()
                )));
            }
            if self.spine_ports() > radix {
                return Err(Error::config(format!(
                    "spine needs {} ports but radix is {radix}",
                    self.spine_ports()
                )));
            }
        }
        if self.leaf_ports() > u32::from(PortNum::MAX) || self.spine_ports() > u32::from(PortNum::MAX)
        {
            return Err(Error::config("port count exceeds 65535"));
        }
        Ok(())
    }

    pub fn host_name(&self, id: u32) -> String {
        format!("h{:0w$}", id, w = digits(self.num_hosts().saturating_sub(1)))
    }

    pub fn leaf_name(&self, l: u32) -> String {
        format!("leaf{:0w$}", l, w = digits(self.leaves.saturating_sub(1)))
    }

    pub fn spine_name(&self, s: u32) -> String {
        format!("spine{:0w$}", s, w = digits(self.spines.saturating_sub(1)))
    }
}

fn digits(mut n: u32) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

/// Host-side port number used for every host adapter.
pub const HOST_PORT: PortNum = 1;

pub fn build_fat_tree(spec: &FatTreeSpec) -> Result<Topology> {
    spec.validate()?;
    let h = spec.hosts_per_leaf;
    let p = spec.parallel_uplinks;
    let mut cables = Vec::new();
    for leaf in 0..spec.leaves {
        for slot in 0..h {
            cables.push((
                NamedEndpoint::host(spec.host_name(leaf * h + slot), HOST_PORT),
                NamedEndpoint::switch(spec.leaf_name(leaf), slot as PortNum),
            ));
        }
        for s in 0..spec.spines {
            for k in 0..p {
                cables.push((
                    NamedEndpoint::switch(spec.leaf_name(leaf), (h + s * p + k) as PortNum),
                    NamedEndpoint::switch(spec.spine_name(s), (leaf * p + k) as PortNum),
                ));
            }
        }
    }
    Topology::from_named(&cables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Endpoint, NodeRef};

    #[test]
    fn radix_four_figure() {
        let t = build_fat_tree(&FatTreeSpec::new(2, 4, 2)).unwrap();
        assert_eq!(t.num_hosts(), 8);
        assert_eq!(t.num_switches(), 6);
        let uplinks = t
            .links()
            .iter()
            .filter(|l| matches!((l.a.node, l.b.node), (NodeRef::Switch(_), NodeRef::Switch(_))))
            .count();
        assert_eq!(uplinks, 8);
        for s in 0..6 {
            assert_eq!(t.switch_ports(s).len(), 4);
        }
    }

    #[test]
    fn host_ids_follow_leaf_and_slot() {
        let spec = FatTreeSpec::new(6, 6, 12);
        let t = build_fat_tree(&spec).unwrap();
        assert_eq!(t.num_hosts(), 72);
        assert_eq!(t.num_switches(), 12);
        for host in 0..72u32 {
            let a = t.attachment(host);
            assert_eq!(a.switch, host / 12);
            assert_eq!(u32::from(a.switch_port), host % 12);
        }
        // leaf 2, spine 3 -> leaf port 12 + 3, spine port 2
        let spine3 = t.switch_id("spine3").unwrap();
        assert_eq!(
            t.peer_of(2, 15),
            Some(Endpoint::switch(spine3, 2))
        );
    }

    #[test]
    fn degenerate_star() {
        let t = build_fat_tree(&FatTreeSpec::new(1, 1, 2)).unwrap();
        assert_eq!(t.num_hosts(), 2);
        let t0 = build_fat_tree(&FatTreeSpec::new(0, 1, 2)).unwrap();
        assert_eq!(t0.num_switches(), 1);
    }

    #[test]
    fn parallel_uplinks_port_layout() {
        let spec = FatTreeSpec {
            parallel_uplinks: 2,
            ..FatTreeSpec::new(2, 3, 4)
        };
        let t = build_fat_tree(&spec).unwrap();
        let spine1 = t.switch_id("spine1").unwrap();
        // leaf 1 -> spine 1 copy 1 at leaf port 4 + 1*2 + 1 = 7, spine port 1*2 + 1 = 3
        assert_eq!(t.peer_of(1, 7), Some(Endpoint::switch(spine1, 3)));
        assert!(spec.is_non_blocking());
    }

    #[test]
    fn radix_violation() {
        let spec = FatTreeSpec {
            radix: Some(4),
            ..FatTreeSpec::new(3, 4, 2)
        };
        assert!(build_fat_tree(&spec).is_err());
        assert!(FatTreeSpec::new(0, 2, 2).validate().is_err());
        assert!(!FatTreeSpec::new(2, 4, 3).is_non_blocking());
    }
}

//! Fabric topologies: hosts, switches and the cables between their ports.
//!
//! Node names are mapped to dense ids in lexicographic order, so a topology
//! built in memory and the same topology re-read from its text form always
//! agree on every id. Links are stored in canonical sorted order for the
//! same reason.

mod conflict;
mod degrade;
mod fattree;
mod parse;
mod routing;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

pub use conflict::{verify_conflict_free, verify_all_phases, LinkConflict, ShiftPattern};
pub use degrade::degrade;
pub use fattree::{build_fat_tree, FatTreeSpec};
pub use parse::{parse_topology, serialize_topology};
pub use routing::{
    compute_fat_tree_routing, compute_generic_routing, compute_routing, detect_two_level,
    load_routing_tables, route_lookup, trace_path, Routing, RoutingTable, TwoLevel, NO_ROUTE,
};

use crate::error::{Error, Result};

pub type HostId = u32;
pub type SwitchId = u32;
pub type PortNum = u16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Host(HostId),
    Switch(SwitchId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub node: NodeRef,
    pub port: PortNum,
}

impl Endpoint {
    pub fn host(id: HostId, port: PortNum) -> Self {
        Endpoint {
            node: NodeRef::Host(id),
            port,
        }
    }

    pub fn switch(id: SwitchId, port: PortNum) -> Self {
        Endpoint {
            node: NodeRef::Switch(id),
            port,
        }
    }
}

/// A cable. `a < b` always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

impl Link {
    fn new(x: Endpoint, y: Endpoint) -> Self {
        if x <= y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    pub fn other(&self, end: Endpoint) -> Endpoint {
        if self.a == end {
            self.b
        } else {
            self.a
        }
    }
}

/// Where a host plugs into the fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attachment {
    pub host_port: PortNum,
    pub switch: SwitchId,
    pub switch_port: PortNum,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedNode {
    Host(String),
    Switch(String),
}

/// One side of a cable, by name. The input form for [`Topology::from_named`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NamedEndpoint {
    pub node: NamedNode,
    pub port: PortNum,
}

impl NamedEndpoint {
    pub fn host(name: impl Into<String>, port: PortNum) -> Self {
        NamedEndpoint {
            node: NamedNode::Host(name.into()),
            port,
        }
    }

    pub fn switch(name: impl Into<String>, port: PortNum) -> Self {
        NamedEndpoint {
            node: NamedNode::Switch(name.into()),
            port,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    host_names: Vec<String>,
    switch_names: Vec<String>,
    links: Vec<Link>,
    attachments: Vec<Attachment>,
    /// Per host, its port and the far end of its cable.
    host_links: Vec<(PortNum, Endpoint)>,
    /// Per switch, `(port, peer)` sorted by port.
    adjacency: Vec<Vec<(PortNum, Endpoint)>>,
}

/// Why a cable list was rejected; carries the index of the offending cable.
#[derive(Debug)]
pub(crate) enum BuildError {
    DuplicatePort { cable: usize, what: String },
    HostToHost { cable: usize },
    SelfLoop { cable: usize },
    Other(Error),
}

impl BuildError {
    pub(crate) fn into_error(self) -> Error {
        match self {
            BuildError::DuplicatePort { what, .. } => {
                Error::Topology(format!("port {what} is used by more than one link"))
            }
            BuildError::HostToHost { .. } => {
                Error::Topology("hosts must connect to switches".to_string())
            }
            BuildError::SelfLoop { .. } => Error::Topology("link connects a port to itself".into()),
            BuildError::Other(e) => e,
        }
    }
}

impl Topology {
    /// Builds a topology from named cables. Every host must have exactly one
    /// cable and the whole graph must be connected.
    pub fn from_named(cables: &[(NamedEndpoint, NamedEndpoint)]) -> Result<Self> {
        Self::from_named_checked(cables).map_err(BuildError::into_error)
    }

    pub(crate) fn from_named_checked(
        cables: &[(NamedEndpoint, NamedEndpoint)],
    ) -> std::result::Result<Self, BuildError> {
        let mut hosts = BTreeSet::new();
        let mut switches = BTreeSet::new();
        for (x, y) in cables {
            for e in [x, y] {
                match &e.node {
                    NamedNode::Host(n) => hosts.insert(n.clone()),
                    NamedNode::Switch(n) => switches.insert(n.clone()),
                };
            }
        }
        let host_names: Vec<String> = hosts.into_iter().collect();
        let switch_names: Vec<String> = switches.into_iter().collect();
        let host_id: BTreeMap<&str, HostId> = host_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as HostId))
            .collect();
        let switch_id: BTreeMap<&str, SwitchId> = switch_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as SwitchId))
            .collect();
        let resolve = |e: &NamedEndpoint| match &e.node {
            NamedNode::Host(n) => Endpoint::host(host_id[n.as_str()], e.port),
            NamedNode::Switch(n) => Endpoint::switch(switch_id[n.as_str()], e.port),
        };

        let mut used: BTreeSet<Endpoint> = BTreeSet::new();
        let mut links = Vec::with_capacity(cables.len());
        for (idx, (x, y)) in cables.iter().enumerate() {
            let (ex, ey) = (resolve(x), resolve(y));
            if ex == ey {
                return Err(BuildError::SelfLoop { cable: idx });
            }
            // two adapters cabled back to back are the only switchless fabric
            if matches!((ex.node, ey.node), (NodeRef::Host(_), NodeRef::Host(_)))
                && (cables.len() != 1 || host_names.len() != 2)
            {
                return Err(BuildError::HostToHost { cable: idx });
            }
            for (e, named) in [(ex, x), (ey, y)] {
                if !used.insert(e) {
                    return Err(BuildError::DuplicatePort {
                        cable: idx,
                        what: describe_named(named),
                    });
                }
            }
            links.push(Link::new(ex, ey));
        }
        links.sort_unstable();
        Self::from_parts(host_names, switch_names, links).map_err(BuildError::Other)
    }

    fn from_parts(
        host_names: Vec<String>,
        switch_names: Vec<String>,
        links: Vec<Link>,
    ) -> Result<Self> {
        let mut host_links: Vec<Option<(PortNum, Endpoint)>> = vec![None; host_names.len()];
        let mut adjacency: Vec<Vec<(PortNum, Endpoint)>> = vec![Vec::new(); switch_names.len()];
        let back_to_back = switch_names.is_empty() && host_names.len() == 2 && links.len() == 1;
        for link in &links {
            for (end, peer) in [(link.a, link.b), (link.b, link.a)] {
                match end.node {
                    NodeRef::Host(h) => {
                        if matches!(peer.node, NodeRef::Host(_)) && !back_to_back {
                            return Err(Error::Topology("hosts must connect to switches".into()));
                        }
                        if host_links[h as usize].is_some() {
                            return Err(Error::Topology(format!(
                                "host {} has more than one link",
                                host_names[h as usize]
                            )));
                        }
                        host_links[h as usize] = Some((end.port, peer));
                    }
                    NodeRef::Switch(s) => adjacency[s as usize].push((end.port, peer)),
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        let host_links = host_links
            .into_iter()
            .enumerate()
            .map(|(h, a)| {
                a.ok_or_else(|| Error::Disconnected {
                    host: host_names[h].clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let attachments = host_links
            .iter()
            .filter_map(|(port, peer)| match peer.node {
                NodeRef::Switch(s) => Some(Attachment {
                    host_port: *port,
                    switch: s,
                    switch_port: peer.port,
                }),
                NodeRef::Host(_) => None,
            })
            .collect();
        let topo = Topology {
            host_names,
            switch_names,
            links,
            attachments,
            host_links,
            adjacency,
        };
        topo.check_connected()?;
        Ok(topo)
    }

    fn check_connected(&self) -> Result<()> {
        if self.host_names.is_empty() {
            return Err(Error::Topology("topology has no hosts".into()));
        }
        if self.is_back_to_back() {
            return Ok(());
        }
        let start = self.attachments[0].switch;
        let mut seen = vec![false; self.switch_names.len()];
        seen[start as usize] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for (_, peer) in &self.adjacency[s as usize] {
                if let NodeRef::Switch(t) = peer.node {
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        for (h, a) in self.attachments.iter().enumerate() {
            if !seen[a.switch as usize] {
                return Err(Error::Disconnected {
                    host: self.host_names[h].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn num_hosts(&self) -> usize {
        self.host_names.len()
    }

    pub fn num_switches(&self) -> usize {
        self.switch_names.len()
    }

    pub fn host_name(&self, h: HostId) -> &str {
        &self.host_names[h as usize]
    }

    pub fn switch_name(&self, s: SwitchId) -> &str {
        &self.switch_names[s as usize]
    }

    pub fn host_names(&self) -> &[String] {
        &self.host_names
    }

    pub fn switch_names(&self) -> &[String] {
        &self.switch_names
    }

    pub fn host_id(&self, name: &str) -> Option<HostId> {
        self.host_names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as HostId)
    }

    pub fn switch_id(&self, name: &str) -> Option<SwitchId> {
        self.switch_names
            .binary_search_by(|n| n.as_str().cmp(name))
            .ok()
            .map(|i| i as SwitchId)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// Where host `h` plugs into the fabric. Panics on a back-to-back pair,
    /// which has no switch.
    pub fn attachment(&self, h: HostId) -> Attachment {
        assert!(!self.is_back_to_back(), "back-to-back hosts have no switch");
        self.attachments[h as usize]
    }

    /// Two hosts cabled directly, with no switch.
    pub fn is_back_to_back(&self) -> bool {
        self.switch_names.is_empty()
    }

    /// Host `h`'s port and the far end of its cable.
    pub fn host_link(&self, h: HostId) -> (PortNum, Endpoint) {
        self.host_links[h as usize]
    }

    /// `(port, peer)` pairs of a switch, sorted by port.
    pub fn switch_ports(&self, s: SwitchId) -> &[(PortNum, Endpoint)] {
        &self.adjacency[s as usize]
    }

    /// One more than the highest port number in use on the switch.
    pub fn switch_port_count(&self, s: SwitchId) -> usize {
        self.adjacency[s as usize]
            .last()
            .map(|(p, _)| usize::from(*p) + 1)
            .unwrap_or(0)
    }

    pub fn peer_of(&self, s: SwitchId, port: PortNum) -> Option<Endpoint> {
        let adj = &self.adjacency[s as usize];
        adj.binary_search_by_key(&port, |(p, _)| *p)
            .ok()
            .map(|i| adj[i].1)
    }

    /// Hosts attached to switch `s`, ordered by switch port.
    pub fn hosts_on(&self, s: SwitchId) -> impl Iterator<Item = (PortNum, HostId)> + '_ {
        self.adjacency[s as usize]
            .iter()
            .filter_map(|(p, peer)| match peer.node {
                NodeRef::Host(h) => Some((*p, h)),
                NodeRef::Switch(_) => None,
            })
    }

    /// The cable list with names, the inverse of [`Topology::from_named`].
    pub fn named_cables(&self) -> Vec<(NamedEndpoint, NamedEndpoint)> {
        self.links
            .iter()
            .map(|l| (self.name_endpoint(l.a), self.name_endpoint(l.b)))
            .collect()
    }

    pub fn name_endpoint(&self, e: Endpoint) -> NamedEndpoint {
        match e.node {
            NodeRef::Host(h) => NamedEndpoint::host(self.host_name(h), e.port),
            NodeRef::Switch(s) => NamedEndpoint::switch(self.switch_name(s), e.port),
        }
    }
}

fn describe_named(e: &NamedEndpoint) -> String {
    match &e.node {
        NamedNode::Host(n) => format!("HOST {n} {}", e.port),
        NamedNode::Switch(n) => format!("SWITCH {n} {}", e.port),
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_topology(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(n: usize) -> Topology {
        let cables: Vec<_> = (0..n)
            .map(|i| {
                (
                    NamedEndpoint::host(format!("h{i}"), 1),
                    NamedEndpoint::switch("sw", i as PortNum),
                )
            })
            .collect();
        Topology::from_named(&cables).unwrap()
    }

    #[test]
    fn names_map_lexicographically() {
        let t = Topology::from_named(&[
            (NamedEndpoint::host("zeta", 1), NamedEndpoint::switch("s", 0)),
            (NamedEndpoint::host("alpha", 1), NamedEndpoint::switch("s", 1)),
        ])
        .unwrap();
        assert_eq!(t.host_name(0), "alpha");
        assert_eq!(t.host_id("zeta"), Some(1));
        assert_eq!(t.attachment(0).switch_port, 1);
    }

    #[test]
    fn duplicate_port_rejected() {
        let err = Topology::from_named(&[
            (NamedEndpoint::host("a", 1), NamedEndpoint::switch("s", 0)),
            (NamedEndpoint::host("b", 1), NamedEndpoint::switch("s", 0)),
        ])
        .unwrap_err();
        assert!(err.to_string().contains("more than one link"), "{err}");
    }

    #[test]
    fn disconnected_host_rejected() {
        let err = Topology::from_named(&[
            (NamedEndpoint::host("a", 1), NamedEndpoint::switch("s1", 0)),
            (NamedEndpoint::host("b", 1), NamedEndpoint::switch("s2", 0)),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }), "{err}");
    }

    #[test]
    fn back_to_back_pair() {
        let t = Topology::from_named(&[(NamedEndpoint::host("a", 1), NamedEndpoint::host("b", 1))])
            .unwrap();
        assert!(t.is_back_to_back());
        assert_eq!(t.host_link(0), (1, Endpoint::host(1, 1)));
        assert!(Topology::from_named(&[
            (NamedEndpoint::host("a", 1), NamedEndpoint::host("b", 1)),
            (NamedEndpoint::host("c", 1), NamedEndpoint::switch("s", 0)),
        ])
        .is_err());
    }

    #[test]
    fn accessors() {
        let t = star(3);
        assert_eq!(t.num_hosts(), 3);
        assert_eq!(t.num_switches(), 1);
        assert_eq!(t.switch_port_count(0), 3);
        assert_eq!(t.peer_of(0, 2), Some(Endpoint::host(2, 1)));
        assert_eq!(t.hosts_on(0).count(), 3);
    }
}

//! Destination-based forwarding tables.
//!
//! Two generators are provided. [`compute_fat_tree_routing`] ties the spine
//! used to reach a host to the leaf port that host is plugged into, which
//! makes every linear-shift phase conflict-free on an intact fat-tree.
//! [`compute_generic_routing`] is a shortest-path fallback for anything else.

use std::collections::VecDeque;
use std::path::Path;

use super::{Endpoint, HostId, NodeRef, PortNum, SwitchId, Topology};
use crate::error::{Error, Result};

/// Marks a missing entry.
pub const NO_ROUTE: PortNum = PortNum::MAX;

/// Output port per destination host, for one switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoutingTable {
    ports: Vec<PortNum>,
}

impl RoutingTable {
    pub fn empty(num_hosts: usize) -> Self {
        Self {
            ports: vec![NO_ROUTE; num_hosts],
        }
    }

    pub fn set(&mut self, dest: HostId, port: PortNum) {
        self.ports[dest as usize] = port;
    }

    pub fn get(&self, dest: HostId) -> Option<PortNum> {
        match self.ports.get(dest as usize) {
            Some(&p) if p != NO_ROUTE => Some(p),
            _ => None,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (HostId, PortNum)> + '_ {
        self.ports
            .iter()
            .enumerate()
            .filter(|(_, p)| **p != NO_ROUTE)
            .map(|(h, p)| (h as HostId, *p))
    }
}

/// One table per switch, indexed by switch id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Routing {
    pub tables: Vec<RoutingTable>,
}

impl Routing {
    pub fn table(&self, s: SwitchId) -> &RoutingTable {
        &self.tables[s as usize]
    }

    /// Checks that every switch that can carry traffic has an entry for every
    /// host and that each entry names a cabled port.
    pub fn validate(&self, topo: &Topology) -> Result<()> {
        if self.tables.len() != topo.num_switches() {
            return Err(Error::config(format!(
                "routing has {} tables for {} switches",
                self.tables.len(),
                topo.num_switches()
            )));
        }
        for (s, table) in self.tables.iter().enumerate() {
            for (dest, port) in table.entries() {
                if topo.peer_of(s as SwitchId, port).is_none() {
                    return Err(Error::config(format!(
                        "switch {} routes {} to uncabled port {port}",
                        topo.switch_name(s as SwitchId),
                        topo.host_name(dest)
                    )));
                }
            }
        }
        for src in 0..topo.num_hosts() as HostId {
            for dst in 0..topo.num_hosts() as HostId {
                if src != dst {
                    trace_path(topo, self, src, dst)?;
                }
            }
        }
        Ok(())
    }
}

/// Output port at `table` for `dest`. A missing entry is a hard error: the
/// fabric is lossless and never drops.
pub fn route_lookup(
    topo: &Topology,
    routing: &Routing,
    switch: SwitchId,
    dest: HostId,
) -> Result<PortNum> {
    routing
        .table(switch)
        .get(dest)
        .ok_or_else(|| Error::RoutingHole {
            switch: topo.switch_name(switch).to_string(),
            dest: if (dest as usize) < topo.num_hosts() {
                topo.host_name(dest).to_string()
            } else {
                format!("#{dest}")
            },
        })
}

/// Switch egress hops `(switch, port)` from `src` to `dst`.
pub fn trace_path(
    topo: &Topology,
    routing: &Routing,
    src: HostId,
    dst: HostId,
) -> Result<Vec<(SwitchId, PortNum)>> {
    let mut hops = Vec::new();
    if topo.is_back_to_back() {
        return if topo.host_link(src).1.node == NodeRef::Host(dst) {
            Ok(hops)
        } else {
            Err(Error::Topology(format!(
                "no path from {} to {}",
                topo.host_name(src),
                topo.host_name(dst)
            )))
        };
    }
    let mut at = topo.attachment(src).switch;
    loop {
        if hops.len() > topo.num_switches() {
            return Err(Error::Topology(format!(
                "routing loop from {} to {}",
                topo.host_name(src),
                topo.host_name(dst)
            )));
        }
        let port = route_lookup(topo, routing, at, dst)?;
        hops.push((at, port));
        match topo.peer_of(at, port).map(|e| e.node) {
            Some(NodeRef::Host(h)) if h == dst => return Ok(hops),
            Some(NodeRef::Host(h)) => {
                return Err(Error::Topology(format!(
                    "route to {} from {} ends at wrong host {}",
                    topo.host_name(dst),
                    topo.host_name(src),
                    topo.host_name(h)
                )))
            }
            Some(NodeRef::Switch(next)) => at = next,
            None => {
                return Err(Error::Topology(format!(
                    "switch {} routes to uncabled port {port}",
                    topo.switch_name(at)
                )))
            }
        }
    }
}

/// Structure of a leaf/spine graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoLevel {
    pub leaves: Vec<SwitchId>,
    pub spines: Vec<SwitchId>,
    /// Parallel links between every leaf/spine pair.
    pub parallel: usize,
    /// `up[leaf_idx][spine_idx]` = leaf ports toward that spine, ascending.
    up: Vec<Vec<Vec<PortNum>>>,
    /// `down[spine_idx][leaf_idx]` = spine ports toward that leaf, ascending.
    down: Vec<Vec<Vec<PortNum>>>,
}

/// Recognises a two-level leaf/spine graph: switches with hosts are leaves,
/// the rest are spines, every switch link joins a leaf to a spine and every
/// leaf/spine pair has the same number of parallel links.
pub fn detect_two_level(topo: &Topology) -> Option<TwoLevel> {
    let n = topo.num_switches();
    let is_leaf: Vec<bool> = (0..n as SwitchId)
        .map(|s| topo.hosts_on(s).next().is_some())
        .collect();
    let leaves: Vec<SwitchId> = (0..n as SwitchId).filter(|s| is_leaf[*s as usize]).collect();
    let spines: Vec<SwitchId> = (0..n as SwitchId).filter(|s| !is_leaf[*s as usize]).collect();
    let mut leaf_idx = vec![usize::MAX; n];
    let mut spine_idx = vec![usize::MAX; n];
    for (i, l) in leaves.iter().enumerate() {
        leaf_idx[*l as usize] = i;
    }
    for (i, s) in spines.iter().enumerate() {
        spine_idx[*s as usize] = i;
    }
    if spines.is_empty() {
        return (leaves.len() == 1).then(|| TwoLevel {
            leaves,
            spines,
            parallel: 0,
            up: vec![Vec::new()],
            down: Vec::new(),
        });
    }
    let mut up = vec![vec![Vec::new(); spines.len()]; leaves.len()];
    let mut down = vec![vec![Vec::new(); leaves.len()]; spines.len()];
    for link in topo.links() {
        let (NodeRef::Switch(x), NodeRef::Switch(y)) = (link.a.node, link.b.node) else {
            continue;
        };
        let (leaf_end, spine_end) = match (is_leaf[x as usize], is_leaf[y as usize]) {
            (true, false) => (link.a, link.b),
            (false, true) => (link.b, link.a),
            _ => return None,
        };
        let (Endpoint { node: NodeRef::Switch(l), port: lp }, Endpoint { node: NodeRef::Switch(s), port: sp }) =
            (leaf_end, spine_end)
        else {
            unreachable!()
        };
        up[leaf_idx[l as usize]][spine_idx[s as usize]].push(lp);
        down[spine_idx[s as usize]][leaf_idx[l as usize]].push(sp);
    }
    let parallel = up[0][0].len();
    if parallel == 0 || up.iter().flatten().any(|v| v.len() != parallel) {
        return None;
    }
    for v in up.iter_mut().flatten().chain(down.iter_mut().flatten()) {
        v.sort_unstable();
    }
    Some(TwoLevel {
        leaves,
        spines,
        parallel,
        up,
        down,
    })
}

/// Fat-tree routing. For a remote destination plugged into leaf port `q`,
/// the up-route uses spine `q mod S`, parallel copy `(q div S) mod p`, and the
/// spine sends it down the same copy index toward the destination leaf.
/// Falls back to [`compute_generic_routing`] when the graph is not two-level.
pub fn compute_fat_tree_routing(topo: &Topology) -> Result<Routing> {
    if topo.is_back_to_back() {
        return Ok(Routing { tables: Vec::new() });
    }
    let Some(shape) = detect_two_level(topo) else {
        log::info!("topology is not a two-level fat-tree; using generic routing");
        return compute_generic_routing(topo);
    };
    let n = topo.num_hosts();
    let mut tables = vec![RoutingTable::empty(n); topo.num_switches()];
    let leaf_pos = |s: SwitchId| shape.leaves.iter().position(|l| *l == s).expect("leaf");
    let spines = shape.spines.len();
    for dest in 0..n as HostId {
        let a = topo.attachment(dest);
        let q = usize::from(a.switch_port);
        let dest_leaf = leaf_pos(a.switch);
        tables[a.switch as usize].set(dest, a.switch_port);
        if spines == 0 {
            continue;
        }
        let spine = q % spines;
        let copy = (q / spines) % shape.parallel;
        for (li, leaf) in shape.leaves.iter().enumerate() {
            if li != dest_leaf {
                tables[*leaf as usize].set(dest, shape.up[li][spine][copy]);
            }
        }
        for (si, s) in shape.spines.iter().enumerate() {
            tables[*s as usize].set(dest, shape.down[si][dest_leaf][copy]);
        }
    }
    Ok(Routing { tables })
}

/// Shortest paths toward each destination; among equal-cost next hops the
/// one at position `dest mod candidates` (ports ascending) is chosen.
pub fn compute_generic_routing(topo: &Topology) -> Result<Routing> {
    if topo.is_back_to_back() {
        return Ok(Routing { tables: Vec::new() });
    }
    let n = topo.num_hosts();
    let ns = topo.num_switches();
    let mut tables = vec![RoutingTable::empty(n); ns];
    let mut dist = vec![u32::MAX; ns];
    let mut queue = VecDeque::new();
    for dest in 0..n as HostId {
        let a = topo.attachment(dest);
        dist.fill(u32::MAX);
        dist[a.switch as usize] = 0;
        queue.clear();
        queue.push_back(a.switch);
        while let Some(s) = queue.pop_front() {
            for (_, peer) in topo.switch_ports(s) {
                if let NodeRef::Switch(t) = peer.node {
                    if dist[t as usize] == u32::MAX {
                        dist[t as usize] = dist[s as usize] + 1;
                        queue.push_back(t);
                    }
                }
            }
        }
        for s in 0..ns as SwitchId {
            if s == a.switch {
                tables[s as usize].set(dest, a.switch_port);
                continue;
            }
            let d = dist[s as usize];
            if d == u32::MAX {
                if let Some((_, h)) = topo.hosts_on(s).next() {
                    return Err(Error::Disconnected {
                        host: format!("{} (from {})", topo.host_name(dest), topo.host_name(h)),
                    });
                }
                continue;
            }
            let candidates: Vec<PortNum> = topo
                .switch_ports(s)
                .iter()
                .filter_map(|(p, peer)| match peer.node {
                    NodeRef::Switch(t) if dist[t as usize] + 1 == d => Some(*p),
                    _ => None,
                })
                .collect();
            let pick = candidates[dest as usize % candidates.len()];
            tables[s as usize].set(dest, pick);
        }
    }
    Ok(Routing { tables })
}

/// Fat-tree routing when the graph is two-level, generic otherwise.
pub fn compute_routing(topo: &Topology) -> Result<Routing> {
    compute_fat_tree_routing(topo)
}

/// Reads a routing table file: one `<switch-name> <host-name> <port>` entry
/// per line, `#` comments allowed. Unlisted pairs are holes.
pub fn load_routing_tables(topo: &Topology, path: &Path) -> Result<Routing> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut tables = vec![RoutingTable::empty(topo.num_hosts()); topo.num_switches()];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Parse {
            line: idx + 1,
            msg: format!("{}: {msg}", path.display()),
        };
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad("expected `<switch> <host> <port>`".into()));
        }
        let s = topo
            .switch_id(t[0])
            .ok_or_else(|| bad(format!("unknown switch `{}`", t[0])))?;
        let h = topo
            .host_id(t[1])
            .ok_or_else(|| bad(format!("unknown host `{}`", t[1])))?;
        let p: PortNum = t[2]
            .parse()
            .map_err(|_| bad(format!("invalid port `{}`", t[2])))?;
        tables[s as usize].set(h, p);
    }
    Ok(Routing { tables })
}

//! Scenario description: one JSON document covering topology, routing,
//! model parameters, traffic and run control. Every field has a default and
//! the resolved document, defaults included, is echoed next to the results.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fabric::FabricParams;
use crate::host::HostParams;
use crate::link::LinkParams;
use crate::sim::SimTime;
use crate::switch::SwitchParams;
use crate::topology::{
    build_fat_tree, compute_fat_tree_routing, compute_generic_routing, degrade,
    load_routing_tables, parse_topology, FatTreeSpec, HostId, Routing, Topology,
};
use crate::traffic::TrafficConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    FatTree(FatTreeSpec),
    /// A topology file in the `HOST a 1 -- SWITCH s 0` line format.
    File { path: PathBuf },
    /// `base` with cables swapped and hosts removed.
    Degraded {
        base: Box<TopologyConfig>,
        #[serde(default)]
        remove_hosts: Vec<HostId>,
        #[serde(default)]
        swap_cable_pairs: Vec<(HostId, HostId)>,
    },
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig::FatTree(FatTreeSpec::new(2, 4, 2))
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<Topology> {
        match self {
            TopologyConfig::FatTree(spec) => build_fat_tree(spec),
            TopologyConfig::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_topology(&text)
            }
            TopologyConfig::Degraded {
                base,
                remove_hosts,
                swap_cable_pairs,
            } => degrade(&base.build()?, remove_hosts, swap_cable_pairs),
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        match self {
            TopologyConfig::File { path } => *path = join(base, path),
            TopologyConfig::Degraded { base: inner, .. } => inner.resolve_paths(base),
            TopologyConfig::FatTree(_) => {}
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RoutingConfig {
    /// Spine chosen by the destination's leaf port; generic on other graphs.
    #[default]
    FatTree,
    Generic,
    /// `<switch> <host> <port>` lines.
    TableFile { path: PathBuf },
}

impl RoutingConfig {
    pub fn build(&self, topo: &Topology) -> Result<Routing> {
        let routing = match self {
            RoutingConfig::FatTree => compute_fat_tree_routing(topo)?,
            RoutingConfig::Generic => compute_generic_routing(topo)?,
            RoutingConfig::TableFile { path } => load_routing_tables(topo, path)?,
        };
        routing.validate(topo)?;
        Ok(routing)
    }
}

/// Knobs of the buffer-size estimation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Keep host0 streaming to host2 during the bursts.
    pub background: bool,
    /// First burst size of the geometric sweep.
    pub start_bytes: u64,
    /// The search stops when the bracket is this narrow.
    pub resolution_bytes: u64,
    /// Give up (and report) beyond this burst size.
    pub max_bytes: u64,
    /// Share of the congested output granted to the bursting host.
    pub drain_share: f64,
    /// Background warm-up before the burst is posted.
    pub lead_us: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            background: true,
            start_bytes: 4096,
            resolution_bytes: 64,
            max_bytes: 64 << 20,
            drain_share: 0.5,
            lead_us: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    pub routing: RoutingConfig,
    pub link: LinkParams,
    pub switch: SwitchParams,
    pub host: HostParams,
    pub traffic: TrafficConfig,
    pub seed: u64,
    pub duration_ms: f64,
    /// Leading share of the run excluded from goodput.
    pub warmup_fraction: f64,
    /// Bin width of the goodput time series.
    pub sample_interval_us: f64,
    /// After the run, stop injecting and let the fabric empty for up to
    /// this long; 0 skips the drain.
    pub drain_ms: f64,
    /// Check credit conservation after every event (slow).
    pub audit: bool,
    pub estimate: EstimateConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            topology: TopologyConfig::default(),
            routing: RoutingConfig::default(),
            link: LinkParams::default(),
            switch: SwitchParams::default(),
            host: HostParams::default(),
            traffic: TrafficConfig::default(),
            seed: 1,
            duration_ms: 10.0,
            warmup_fraction: 0.1,
            sample_interval_us: 100.0,
            drain_ms: 0.0,
            audit: false,
            estimate: EstimateConfig::default(),
            out_dir: None,
        }
    }
}

fn join(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ScenarioConfig {
    /// Reads, resolves and validates a config file. Relative paths inside
    /// it are taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolved(base)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|source| Error::Json {
            path: PathBuf::from("<inline>"),
            source,
        })?;
        cfg.resolved(Path::new("."))
    }

    /// Loads referenced files relative to `base` and validates.
    pub fn resolved(mut self, base: &Path) -> Result<Self> {
        self.topology.resolve_paths(base);
        if let RoutingConfig::TableFile { path } = &mut self.routing {
            *path = join(base, path);
        }
        self.host.stack_latency = self.host.stack_latency.resolve(base)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.fabric_params().validate()?;
        if !(self.duration_ms.is_finite() && self.duration_ms > 0.0) {
            return Err(Error::config("duration_ms must be > 0"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("warmup_fraction must be in [0, 1)"));
        }
        if !(self.sample_interval_us.is_finite() && self.sample_interval_us > 0.0) {
            return Err(Error::config("sample_interval_us must be > 0"));
        }
        if !(self.drain_ms.is_finite() && self.drain_ms >= 0.0) {
            return Err(Error::config("drain_ms must be >= 0"));
        }
        let e = &self.estimate;
        if e.start_bytes == 0 || e.resolution_bytes == 0 || e.max_bytes < e.start_bytes {
            return Err(Error::config("estimate needs 0 < start_bytes <= max_bytes, resolution > 0"));
        }
        if !(0.0..1.0).contains(&e.drain_share) {
            return Err(Error::config("estimate.drain_share must be in [0, 1)"));
        }
        if let TopologyConfig::FatTree(spec) = &self.topology {
            spec.validate()?;
        }
        Ok(())
    }

    /// Checks the traffic section against the built topology.
    pub fn validate_traffic(&self, hosts: usize) -> Result<()> {
        self.traffic.validate(hosts as u32, self.link.num_vls)
    }

    pub fn fabric_params(&self) -> FabricParams {
        FabricParams {
            link: self.link.clone(),
            switch: self.switch.clone(),
            host: self.host.clone(),
        }
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_ns_f64(self.duration_ms * 1e6)
    }

    pub fn warmup(&self) -> SimTime {
        SimTime::from_ns_f64(self.duration_ms * 1e6 * self.warmup_fraction)
    }

    pub fn sample_interval(&self) -> SimTime {
        SimTime::from_ns_f64(self.sample_interval_us * 1e3)
    }

    pub fn drain_limit(&self) -> SimTime {
        SimTime::from_ns_f64(self.drain_ms * 1e6)
    }

    /// The resolved document with every default spelled out.
    pub fn echo(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = ScenarioConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.warmup(), SimTime::from_ms(1));
        assert_eq!(cfg.sample_interval(), SimTime::from_us(100));
    }

    #[test]
    fn echo_round_trips() {
        let text = r#"{
            "topology": {"kind": "degraded",
                         "base": {"kind": "fat_tree", "spines": 6, "leaves": 6, "hosts_per_leaf": 12},
                         "remove_hosts": [1, 2], "swap_cable_pairs": [[3, 40]]},
            "routing": {"kind": "generic"},
            "traffic": {"kind": "daqpipe", "credits": 4, "parallel_sends": 8},
            "host": {"stack_latency": {"kind": "deterministic", "value_ns": 800}},
            "seed": 42
        }"#;
        let cfg = ScenarioConfig::from_json(text).unwrap();
        let back = ScenarioConfig::from_json(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.echo().contains("\"buffer_blocks_per_vl\": 1024"));
        assert_eq!(cfg.topology.build().unwrap().num_hosts(), 70);
    }

    #[test]
    fn schema_errors() {
        for text in [
            r#"{"bogus": 1}"#,
            r#"{"link": {"num_vls": 0}}"#,
            r#"{"duration_ms": -1}"#,
            r#"{"topology": {"kind": "ring"}}"#,
            r#"{"link": {"buffer_blocks_per_vl": 10}}"#,
            r#"{"warmup_fraction": 1.0}"#,
        ] {
            let err = ScenarioConfig::from_json(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }
}

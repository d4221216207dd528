//! Experiments on top of the engine: single runs, credit/parallel-send
//! sweeps, the buffer-size estimation procedure and routing verification.

use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::engine::{EventRecord, Injector, Simulation};
use crate::error::{Error, Result};
use crate::fabric::{CounterSet, DeliveryStats, Fabric};
use crate::host::{MessageClass, MessageId, Tag};
use crate::sim::{derive_seed, SimTime};
use crate::topology::{
    parse_topology, verify_all_phases, HostId, LinkConflict, NodeRef, Routing, Topology,
};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub counters: CounterSet,
    pub stats: DeliveryStats,
    pub records: Vec<EventRecord>,
    /// `Some(empty?)` when a drain was requested.
    pub drained: Option<bool>,
}

impl RunReport {
    pub fn mean_goodput_gbps(&self) -> f64 {
        self.stats.mean_goodput_bps() / 1e9
    }

    pub fn host_goodput_gbps(&self) -> Vec<f64> {
        (0..self.topology.num_hosts() as HostId)
            .map(|h| self.stats.host_goodput_bps(h) / 1e9)
            .collect()
    }

    pub fn node_name(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Host(h) => self.topology.host_name(h),
            NodeRef::Switch(s) => self.topology.switch_name(s),
        }
    }
}

/// Builds topology, routing, fabric and injector for `cfg`.
pub fn build_simulation(cfg: &ScenarioConfig) -> Result<Simulation> {
    let topo = cfg.topology.build()?;
    let routing = cfg.routing.build(&topo)?;
    cfg.validate_traffic(topo.num_hosts())?;
    let n = topo.num_hosts() as u32;
    let fabric = Fabric::new(
        topo,
        routing,
        cfg.fabric_params(),
        cfg.seed,
        cfg.sample_interval(),
        (cfg.warmup(), cfg.duration()),
    )?;
    let injector = cfg.traffic.build(n, cfg.seed, &cfg.link, &cfg.host);
    Ok(Simulation::new(fabric, injector).with_audit(cfg.audit))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    let mut sim = build_simulation(cfg)?;
    let counters = sim.run_until(cfg.duration())?;
    let mut drained = None;
    let counters = if cfg.drain_ms > 0.0 {
        let ok = sim.drain(cfg.duration() + cfg.drain_limit())?;
        let c = sim.fabric().counters();
        if ok && c.host_egress_bytes() != c.posted_wire_bytes {
            return Err(Error::Invariant {
                at_ps: c.now.as_ps(),
                msg: format!(
                    "egress {} B differs from posted {} B after drain",
                    c.host_egress_bytes(),
                    c.posted_wire_bytes
                ),
            });
        }
        drained = Some(ok);
        c
    } else {
        counters
    };
    Ok(RunReport {
        config: cfg.clone(),
        topology: sim.fabric().topology().clone(),
        stats: sim.fabric().stats().clone(),
        records: sim.records(),
        counters,
        drained,
    })
}

/// One `(credits, parallel_sends)` cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub credits: u32,
    pub parallel_sends: u32,
    pub seed: u64,
    /// Mean goodput per node, or the error that stopped the cell.
    pub goodput_gbps: std::result::Result<f64, String>,
}

/// Seed of a sweep cell. Depends only on the master seed and the cell, so
/// cells can run in any order.
pub fn cell_seed(master: u64, credits: u32, parallel_sends: u32) -> u64 {
    derive_seed(master, &format!("sweep/credits={credits}/parallel_sends={parallel_sends}"))
}

/// Runs every `(C, P)` pair concurrently. A failing cell is recorded and the
/// rest carry on.
pub fn sweep(template: &ScenarioConfig, credits: &[u32], parallel_sends: &[u32]) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::new();
    for &c in credits {
        for &p in parallel_sends {
            let mut cfg = template.clone();
            cfg.traffic = template.traffic.with_credits_and_sends(c, p)?;
            cfg.seed = cell_seed(template.seed, c, p);
            cells.push((c, p, cfg));
        }
    }
    Ok(cells
        .into_par_iter()
        .map(|(c, p, cfg)| SweepCell {
            credits: c,
            parallel_sends: p,
            seed: cfg.seed,
            goodput_gbps: run_scenario(&cfg)
                .map(|r| r.mean_goodput_gbps())
                .map_err(|e| e.to_string()),
        })
        .collect())
}

/// Streams host0 to host2 and, after a lead time, posts one burst from
/// host1 to host2.
struct BurstProbe {
    background: bool,
    lead: SimTime,
    burst: u64,
    burst_id: Option<MessageId>,
}

const STREAM_CHUNK: u64 = 1 << 20;

impl Injector for BurstProbe {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()> {
        if self.background {
            for _ in 0..2 {
                fabric.post_message(0, 2, STREAM_CHUNK, 0, MessageClass::Data, Tag::default())?;
            }
        }
        fabric.schedule_timer(1, self.lead, 0);
        Ok(())
    }

    fn on_delivered(&mut self, fabric: &mut Fabric, msg: MessageId) -> Result<()> {
        if Some(msg) != self.burst_id {
            fabric.post_message(0, 2, STREAM_CHUNK, 0, MessageClass::Data, Tag::default())?;
        }
        Ok(())
    }

    fn on_timer(&mut self, fabric: &mut Fabric, _host: HostId, _token: u64) -> Result<()> {
        let id = fabric.post_message(1, 2, self.burst, 0, MessageClass::Data, Tag::default())?;
        self.burst_id = Some(id);
        Ok(())
    }
}

/// Outcome of one burst trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BurstTrial {
    pub burst_bytes: u64,
    /// PortXmitWait ticks on host1's uplink.
    pub xmit_wait_ticks: u64,
    /// Peak occupancy of the switch input facing host1, in bytes.
    pub peak_input_bytes: u64,
    /// Bytes the congested output sent from host1 during the burst, and in
    /// total over the same interval.
    pub output_share: (u64, u64),
}

/// The 3-host, 1-switch congestion fabric.
pub fn congestion_topology() -> Topology {
    parse_topology(
        "HOST host0 1 -- SWITCH sw 0\nHOST host1 1 -- SWITCH sw 1\nHOST host2 1 -- SWITCH sw 2\n",
    )
    .expect("static topology")
}

/// One fresh simulation with a burst of `burst` bytes.
pub fn burst_trial(cfg: &ScenarioConfig, burst: u64) -> Result<BurstTrial> {
    let topo = congestion_topology();
    let routing = crate::topology::compute_generic_routing(&topo)?;
    let sw = topo.switch_id("sw").expect("switch");
    let fabric = Fabric::new(
        topo,
        routing,
        cfg.fabric_params(),
        cfg.seed,
        SimTime::from_us(100),
        (SimTime::ZERO, SimTime::MAX),
    )?;
    let lead = SimTime::from_us(cfg.estimate.lead_us);
    let probe = BurstProbe {
        background: cfg.estimate.background,
        lead,
        burst,
        burst_id: None,
    };
    let mut sim = Simulation::new(fabric, Box::new(probe)).with_audit(cfg.audit);
    let step = SimTime::from_us(10);
    let mut t = lead;
    let before = sim.run_until(lead)?;
    // the burst cannot take longer than at 1/8 of line rate
    let limit = lead + cfg.host.wire_time(burst, &cfg.link) * 8 + SimTime::from_ms(1);
    loop {
        t = t + step;
        let c = sim.run_until(t)?;
        let done = sim
            .fabric()
            .messages()
            .iter()
            .any(|m| m.src == 1 && m.completed_at.is_some());
        if done || t > limit {
            let uplink = c.port(NodeRef::Host(1), 1).expect("host1 port");
            let out = c.port(NodeRef::Switch(sw), 2).expect("switch port to host2");
            let out0 = before.port(NodeRef::Switch(sw), 2).expect("switch port to host2");
            let inp = c.port(NodeRef::Switch(sw), 1).expect("switch port from host1");
            let wire = cfg.host.wire_bytes(burst);
            if !done {
                return Err(Error::Invariant {
                    at_ps: t.as_ps(),
                    msg: format!("burst of {burst} B did not complete"),
                });
            }
            return Ok(BurstTrial {
                burst_bytes: burst,
                xmit_wait_ticks: uplink.xmit_wait_ticks,
                peak_input_bytes: u64::from(inp.max_occupancy_blocks[0]) * u64::from(crate::link::BLOCK_BYTES),
                output_share: (wire, out.bytes_tx - out0.bytes_tx),
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BufferEstimate {
    /// Largest burst that caused no XmitWait on host1's uplink.
    pub largest_clean_burst: u64,
    /// Smallest burst seen to cause XmitWait.
    pub smallest_stalled_burst: u64,
    pub drain_share: f64,
    pub estimate_bytes: f64,
    pub trials: Vec<BurstTrial>,
}

/// Bursts from host1 toward host2 while host0 keeps host2's link busy. The
/// largest burst that never stalls host1 fills host1's switch input buffer
/// while the congested output drains it at `drain_share` of line rate, so
/// the buffer is about `S* * (1 - drain_share)`.
pub fn buffer_estimation_experiment(cfg: &ScenarioConfig) -> Result<BufferEstimate> {
    let e = &cfg.estimate;
    let mut trials = Vec::new();
    let mut run = |s: u64| -> Result<bool> {
        let t = burst_trial(cfg, s)?;
        trials.push(t);
        Ok(t.xmit_wait_ticks > 0)
    };
    let mut lo = 0;
    let mut hi = e.start_bytes;
    while !run(hi)? {
        lo = hi;
        if hi >= e.max_bytes {
            return Err(Error::config(format!(
                "buffer estimation did not converge: no XmitWait up to {} bytes (trials: {:?})",
                hi,
                trials.iter().map(|t| t.burst_bytes).collect::<Vec<_>>()
            )));
        }
        hi = (hi * 2).min(e.max_bytes);
    }
    while hi - lo > e.resolution_bytes {
        let mid = lo + (hi - lo) / 2;
        if run(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    trials.sort_by_key(|t| t.burst_bytes);
    Ok(BufferEstimate {
        largest_clean_burst: lo,
        smallest_stalled_burst: hi,
        drain_share: e.drain_share,
        estimate_bytes: lo as f64 * (1.0 - e.drain_share),
        trials,
    })
}

/// Conflicting inter-switch links per shift phase.
#[derive(Debug, Clone)]
pub struct RoutingReport {
    pub hosts: usize,
    pub phases: Vec<(u32, Vec<LinkConflict>)>,
}

impl RoutingReport {
    pub fn conflicting_links(&self) -> usize {
        self.phases.iter().map(|(_, c)| c.len()).sum()
    }

    pub fn phases_with_conflicts(&self) -> usize {
        self.phases.iter().filter(|(_, c)| !c.is_empty()).count()
    }
}

pub fn verify_routing(cfg: &ScenarioConfig) -> Result<(Topology, Routing, RoutingReport)> {
    let topo = cfg.topology.build()?;
    let routing = cfg.routing.build(&topo)?;
    let phases = verify_all_phases(&topo, &routing)?;
    let report = RoutingReport {
        hosts: topo.num_hosts(),
        phases,
    };
    Ok((topo, routing, report))
}

//! Output files: CSV tables, gnuplot data and a plain-text summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{BufferEstimate, RoutingReport, RunReport, SweepCell};
use crate::latency::LatencyDistribution;
use crate::sim::{SimRng, SimTime};
use crate::topology::{NodeRef, Topology};

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<fs::File>, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path).map_err(|source| Error::Csv {
        path: path.clone(),
        source,
    })?;
    Ok((w, path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn gbps(bytes: u64, over: SimTime) -> f64 {
    if over == SimTime::ZERO {
        0.0
    } else {
        bytes as f64 * 8.0 / over.as_secs_f64() / 1e9
    }
}

/// Writes every file of a single run into `dir`.
pub fn write_run(report: &RunReport, dir: &Path) -> Result<()> {
    write(dir, "config.echo.json", &report.config.echo())?;
    write_timeseries(report, dir)?;
    write_ports(report, dir)?;
    write_events(report, dir)?;
    write(dir, "summary.txt", &summary(report))?;
    write(
        dir,
        "latency.dat",
        &latency_histogram(&report.config.host.stack_latency, 100_000, report.config.seed, 50),
    )?;
    Ok(())
}

/// `report.csv`: delivered data bytes per host per sampling interval.
fn write_timeseries(report: &RunReport, dir: &Path) -> Result<()> {
    let (mut w, path) = csv_writer(dir, "report.csv")?;
    let err = csv_err(&path);
    w.write_record(["bin_start_us", "host", "bytes", "goodput_gbps"])
        .map_err(&err)?;
    let bin = report.stats.bin;
    let bins = report.config.duration().as_ps().div_ceil(bin.as_ps().max(1)) as usize;
    let hosts = report.topology.num_hosts();
    for b in 0..bins {
        let start = SimTime::from_ps(b as u64 * bin.as_ps());
        for h in 0..hosts {
            let bytes = report.stats.series.get(b).map_or(0, |row| row[h]);
            w.write_record([
                format!("{:.3}", start.as_us_f64()),
                report.topology.host_name(h as u32).to_string(),
                bytes.to_string(),
                format!("{:.6}", gbps(bytes, bin)),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn peer_label(topo: &Topology, node: NodeRef, port: u16) -> String {
    let peer = match node {
        NodeRef::Host(h) => Some(topo.host_link(h).1),
        NodeRef::Switch(s) => topo.peer_of(s, port),
    };
    peer.map_or_else(String::new, |e| {
        let n = topo.name_endpoint(e);
        match n.node {
            crate::topology::NamedNode::Host(name) | crate::topology::NamedNode::Switch(name) => {
                format!("{name}:{}", n.port)
            }
        }
    })
}

/// `ports.csv`: one row per cabled port.
fn write_ports(report: &RunReport, dir: &Path) -> Result<()> {
    let (mut w, path) = csv_writer(dir, "ports.csv")?;
    let err = csv_err(&path);
    let vls = usize::from(report.config.link.num_vls);
    let mut header = vec![
        "kind".to_string(),
        "node".into(),
        "port".into(),
        "peer".into(),
        "xmit_wait_ticks".into(),
        "xmit_wait_ps".into(),
        "bytes_tx".into(),
        "packets_tx".into(),
    ];
    header.extend((0..vls).map(|v| format!("max_occupancy_vl{v}")));
    w.write_record(&header).map_err(&err)?;
    for p in &report.counters.ports {
        let kind = match p.node {
            NodeRef::Host(_) => "host",
            NodeRef::Switch(_) => "switch",
        };
        let mut row = vec![
            kind.to_string(),
            report.node_name(p.node).to_string(),
            p.port.to_string(),
            peer_label(&report.topology, p.node, p.port),
            p.xmit_wait_ticks.to_string(),
            p.xmit_wait_ps.to_string(),
            p.bytes_tx.to_string(),
            p.packets_tx.to_string(),
        ];
        row.extend(p.max_occupancy_blocks.iter().map(|b| b.to_string()));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// `events.csv`: DAQPIPE event completion records.
fn write_events(report: &RunReport, dir: &Path) -> Result<()> {
    let (mut w, path) = csv_writer(dir, "events.csv")?;
    let err = csv_err(&path);
    w.write_record(["event_id", "builder", "t_assigned_ns", "t_complete_ns"])
        .map_err(&err)?;
    for r in &report.records {
        w.write_record([
            r.event_id.to_string(),
            report.topology.host_name(r.builder).to_string(),
            format!("{:.3}", r.assigned_at.as_ns_f64()),
            r.completed_at
                .map_or_else(String::new, |t| format!("{:.3}", t.as_ns_f64())),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

pub fn summary(report: &RunReport) -> String {
    let cfg = &report.config;
    let per_host = report.host_goodput_gbps();
    let line = cfg.link.data_rate_bps as f64 / 1e9;
    let eff = cfg.host.payload_efficiency();
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k:<28} {v}");
    };
    kv("hosts", report.topology.num_hosts().to_string());
    kv("switches", report.topology.num_switches().to_string());
    kv("seed", cfg.seed.to_string());
    kv("duration_ms", format!("{}", cfg.duration_ms));
    kv(
        "window_ms",
        format!(
            "{:.3} .. {:.3}",
            report.stats.window_start.as_secs_f64() * 1e3,
            report.stats.window_end.as_secs_f64() * 1e3
        ),
    );
    kv("line_rate_gbps", format!("{line:.3}"));
    kv("payload_efficient_gbps", format!("{:.3}", line * eff));
    kv("mean_goodput_gbps", format!("{:.3}", report.mean_goodput_gbps()));
    let (min_h, min) = extreme(&per_host, |a, b| a < b);
    let (max_h, max) = extreme(&per_host, |a, b| a > b);
    kv(
        "min_goodput_gbps",
        format!("{min:.3} ({})", name_or_dash(&report.topology, min_h)),
    );
    kv(
        "max_goodput_gbps",
        format!("{max:.3} ({})", name_or_dash(&report.topology, max_h)),
    );
    let c = &report.counters;
    kv("messages_posted", c.messages_posted.to_string());
    kv("messages_completed", c.messages_completed.to_string());
    let done = report.records.iter().filter(|r| r.completed_at.is_some()).count();
    kv("events_completed", done.to_string());
    kv("delivered_payload_bytes", c.delivered_payload_bytes.to_string());
    kv("host_egress_bytes", c.host_egress_bytes().to_string());
    kv("posted_wire_bytes", c.posted_wire_bytes.to_string());
    match c.ports.iter().max_by_key(|p| (p.xmit_wait_ticks, std::cmp::Reverse((p.node, p.port)))) {
        Some(p) if p.xmit_wait_ticks > 0 => kv(
            "worst_congested_port",
            format!(
                "{}:{} xmit_wait_ticks={}",
                report.node_name(p.node),
                p.port,
                p.xmit_wait_ticks
            ),
        ),
        _ => kv("worst_congested_port", "none".into()),
    }
    kv("events_processed", c.events_processed.to_string());
    kv("trace_digest", format!("{:016x}", c.trace_digest));
    if let Some(d) = report.drained {
        kv("drained", if d { "yes" } else { "no" }.into());
    }
    s
}

fn extreme(v: &[f64], better: impl Fn(f64, f64) -> bool) -> (Option<usize>, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|(_, b)| better(x, b)) {
            best = Some((i, x));
        }
    }
    best.map_or((None, 0.0), |(i, x)| (Some(i), x))
}

fn name_or_dash(topo: &Topology, h: Option<usize>) -> String {
    h.map_or_else(|| "-".into(), |h| topo.host_name(h as u32).to_string())
}

/// Samples the stack-latency distribution and bins the draws into a
/// gnuplot table: `bin_start_ns bin_end_ns count density`.
pub fn latency_histogram(dist: &LatencyDistribution, samples: usize, seed: u64, bins: usize) -> String {
    let mut rng = SimRng::for_component(seed, "report/latency");
    let draws: Vec<f64> = (0..samples).map(|_| dist.sample(&mut rng).as_ns_f64()).collect();
    let mut out = String::from("# bin_start_ns bin_end_ns count density\n");
    if draws.is_empty() {
        return out;
    }
    let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // clip the log-normal tail so the shape stays visible
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    hi = hi.min(sorted[(sorted.len() - 1) * 999 / 1000]);
    let width = ((hi - lo) / bins as f64).max(1e-3);
    let mut counts = vec![0u64; bins];
    for x in &draws {
        let i = (((x - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    for (i, c) in counts.iter().enumerate() {
        let start = lo + i as f64 * width;
        let _ = writeln!(
            out,
            "{:.3} {:.3} {} {:.6e}",
            start,
            start + width,
            c,
            *c as f64 / samples as f64 / width
        );
    }
    out
}

/// `sweep.dat` plus a short summary. Failed cells carry `nan` and the error
/// as a trailing comment.
pub fn write_sweep(cells: &[SweepCell], echo: &str, dir: &Path) -> Result<()> {
    let mut dat = String::from("# credits parallel_sends goodput_gbps\n");
    for c in cells {
        match &c.goodput_gbps {
            Ok(g) => {
                let _ = writeln!(dat, "{} {} {:.6}", c.credits, c.parallel_sends, g);
            }
            Err(e) => {
                let _ = writeln!(
                    dat,
                    "{} {} nan # failed: {}",
                    c.credits,
                    c.parallel_sends,
                    e.replace('\n', " ")
                );
            }
        }
    }
    write(dir, "sweep.dat", &dat)?;
    write(dir, "config.echo.json", echo)?;
    let mut s = String::new();
    let ok: Vec<&SweepCell> = cells.iter().filter(|c| c.goodput_gbps.is_ok()).collect();
    let _ = writeln!(s, "{:<28} {}", "cells", cells.len());
    let _ = writeln!(s, "{:<28} {}", "failed_cells", cells.len() - ok.len());
    if let Some(best) = ok
        .iter()
        .max_by(|a, b| a.goodput_gbps.as_ref().unwrap().total_cmp(b.goodput_gbps.as_ref().unwrap()))
    {
        let _ = writeln!(
            s,
            "{:<28} credits={} parallel_sends={} goodput_gbps={:.3}",
            "best_cell",
            best.credits,
            best.parallel_sends,
            best.goodput_gbps.as_ref().unwrap()
        );
    }
    if let Some(worst) = ok
        .iter()
        .min_by(|a, b| a.goodput_gbps.as_ref().unwrap().total_cmp(b.goodput_gbps.as_ref().unwrap()))
    {
        let _ = writeln!(
            s,
            "{:<28} credits={} parallel_sends={} goodput_gbps={:.3}",
            "worst_cell",
            worst.credits,
            worst.parallel_sends,
            worst.goodput_gbps.as_ref().unwrap()
        );
    }
    write(dir, "summary.txt", &s)?;
    Ok(())
}

pub fn buffer_summary(est: &BufferEstimate) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {}", "largest_clean_burst_bytes", est.largest_clean_burst);
    let _ = writeln!(s, "{:<28} {}", "smallest_stalled_burst_bytes", est.smallest_stalled_burst);
    let _ = writeln!(s, "{:<28} {}", "drain_share", est.drain_share);
    let _ = writeln!(s, "{:<28} {:.0}", "estimate_bytes", est.estimate_bytes);
    let _ = writeln!(s, "{:<28} {:.3}", "estimate_kib", est.estimate_bytes / 1024.0);
    let _ = writeln!(s, "{:<28} {}", "trials", est.trials.len());
    s
}

/// `estimate.dat` (one line per trial) and `summary.txt`.
pub fn write_buffer_estimate(est: &BufferEstimate, echo: &str, dir: &Path) -> Result<()> {
    let mut dat = String::from("# burst_bytes xmit_wait_ticks peak_input_bytes\n");
    for t in &est.trials {
        let _ = writeln!(dat, "{} {} {}", t.burst_bytes, t.xmit_wait_ticks, t.peak_input_bytes);
    }
    write(dir, "estimate.dat", &dat)?;
    write(dir, "config.echo.json", echo)?;
    write(dir, "summary.txt", &buffer_summary(est))?;
    Ok(())
}

/// One line per conflicting link: `phase,switch,port,sources`.
pub fn routing_text(topo: &Topology, report: &RoutingReport) -> String {
    let mut s = String::from("phase,switch,port,sources\n");
    for (phase, conflicts) in &report.phases {
        for c in conflicts {
            let sources: Vec<&str> = c.sources.iter().map(|h| topo.host_name(*h)).collect();
            let _ = writeln!(
                s,
                "{phase},{},{},{}",
                topo.switch_name(c.switch),
                c.port,
                sources.join(" ")
            );
        }
    }
    s
}

pub fn write_routing(topo: &Topology, report: &RoutingReport, dir: &Path) -> Result<()> {
    write(dir, "conflicts.csv", &routing_text(topo, report))?;
    let s = format!(
        "{:<28} {}\n{:<28} {}\n{:<28} {}\n",
        "hosts",
        report.hosts,
        "phases_with_conflicts",
        report.phases_with_conflicts(),
        "conflicting_links",
        report.conflicting_links()
    );
    write(dir, "summary.txt", &s)?;
    Ok(())
}

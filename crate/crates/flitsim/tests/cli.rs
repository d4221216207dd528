use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn flitsim(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flitsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const SMALL: &str = r#"{
    "topology": {"kind": "fat_tree", "spines": 2, "leaves": 2, "hosts_per_leaf": 2},
    "traffic": {"kind": "daqpipe", "credits": 2, "parallel_sends": 2,
                "fragment_size": {"kind": "fixed", "bytes": 20000}},
    "duration_ms": 0.5,
    "sample_interval_us": 50
}"#;

#[test]
fn run_writes_every_output_file() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", SMALL);
    let o = flitsim(&["run", "c.json", "--out", "res", "--seed", "9"], d.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res = d.path().join("res");
    for f in ["report.csv", "ports.csv", "events.csv", "summary.txt", "config.echo.json", "latency.dat"] {
        assert!(res.join(f).is_file(), "{f}");
    }
    let report = fs::read_to_string(res.join("report.csv")).unwrap();
    assert!(report.starts_with("bin_start_us,host,bytes,goodput_gbps\n"));
    // 10 bins of 50 us for 4 hosts
    assert_eq!(report.lines().count(), 1 + 10 * 4);
    let echo = fs::read_to_string(res.join("config.echo.json")).unwrap();
    assert!(echo.contains("\"seed\": 9"));
    let events = fs::read_to_string(res.join("events.csv")).unwrap();
    assert!(events.starts_with("event_id,builder,t_assigned_ns,t_complete_ns\n"));
    assert!(events.lines().count() > 4);
    let ports = fs::read_to_string(res.join("ports.csv")).unwrap();
    assert!(ports.lines().next().unwrap().contains("xmit_wait_ticks"));
    // every cabled port once: 4 host ports + 2 leaves * 4 + 2 spines * 2
    assert_eq!(ports.lines().count(), 1 + 4 + 8 + 4);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", SMALL);
    assert!(flitsim(&["run", "c.json", "--out", "a", "--duration", "0.3"], d.path()).status.success());
    let o = flitsim(&["run", "a/config.echo.json", "--out", "b"], d.path());
    assert!(o.status.success());
    for f in ["report.csv", "ports.csv", "events.csv", "summary.txt"] {
        assert_eq!(
            fs::read(d.path().join("a").join(f)).unwrap(),
            fs::read(d.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn empty_run_reports_zeros() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", r#"{"traffic": {"kind": "idle"}, "duration_ms": 0.2}"#);
    let o = flitsim(&["run", "c.json", "--out", "res"], d.path());
    assert!(o.status.success());
    let s = fs::read_to_string(d.path().join("res/summary.txt")).unwrap();
    for key in ["mean_goodput_gbps", "messages_posted", "delivered_payload_bytes"] {
        let line = s.lines().find(|l| l.starts_with(key)).unwrap();
        let v: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.0, "{line}");
    }
    assert!(s.contains("worst_congested_port         none"));
}

#[test]
fn sweep_writes_the_matrix() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", SMALL);
    let o = flitsim(
        &["sweep", "c.json", "--credits", "1,2", "--parallel-sends", "1,4", "--out", "res"],
        d.path(),
    );
    assert!(o.status.success());
    let dat = fs::read_to_string(d.path().join("res/sweep.dat")).unwrap();
    let lines: Vec<&str> = dat.lines().collect();
    assert_eq!(lines[0], "# credits parallel_sends goodput_gbps");
    let cells: Vec<(u32, u32)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            assert!(f[2].parse::<f64>().unwrap() > 0.0);
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(cells, vec![(1, 1), (1, 4), (2, 1), (2, 4)]);
}

#[test]
fn estimate_buffer_and_verify_routing() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "c.json", r#"{"estimate": {"resolution_bytes": 1024}}"#);
    let o = flitsim(&["estimate-buffer", "c.json", "--out", "est"], d.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("estimate_kib"));
    assert!(d.path().join("est/estimate.dat").is_file());

    write(
        d.path(),
        "r.json",
        r#"{"topology": {"kind": "fat_tree", "spines": 4, "leaves": 4, "hosts_per_leaf": 4}}"#,
    );
    let o = flitsim(&["verify-routing", "r.json", "--out", "vr"], d.path());
    assert!(o.status.success());
    assert_eq!(
        String::from_utf8_lossy(&o.stdout).trim(),
        "hosts=16 phases=16 conflicting_links=0"
    );
    // a blocking tree with generic routing does share links
    write(
        d.path(),
        "g.json",
        r#"{"topology": {"kind": "fat_tree", "spines": 2, "leaves": 4, "hosts_per_leaf": 4},
            "routing": {"kind": "generic"}}"#,
    );
    let o = flitsim(&["verify-routing", "g.json", "--out", "vg"], d.path());
    assert!(o.status.success());
    let conflicts = fs::read_to_string(d.path().join("vg/conflicts.csv")).unwrap();
    assert!(conflicts.lines().count() > 1);
}

#[test]
fn config_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    write(d.path(), "bad.json", r#"{"link": {"num_vls": 99}}"#);
    write(d.path(), "typo.json", r#"{"durration_ms": 1}"#);
    write(d.path(), "vl.json", r#"{"traffic": {"kind": "script", "messages": [{"src": 0, "dest": 1, "size": 1, "vl": 7}]}}"#);
    for f in ["bad.json", "typo.json", "vl.json"] {
        let o = flitsim(&["run", f, "--out", "x"], d.path());
        assert_eq!(o.status.code(), Some(2), "{f}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = flitsim(&["run", "c.json", "--out", "x", "--duration", "-1"], d.path());
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn routing_holes_and_disconnection_exit_3() {
    let d = tempfile::tempdir().unwrap();
    // two islands
    write(
        d.path(),
        "split.topo",
        "HOST a 1 -- SWITCH s1 1\nHOST b 1 -- SWITCH s2 1\n",
    );
    write(d.path(), "split.json", r#"{"topology": {"kind": "file", "path": "split.topo"}}"#);
    let o = flitsim(&["run", "split.json", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    // a routing table that forgets host b
    write(
        d.path(),
        "star.topo",
        "HOST a 1 -- SWITCH s 1\nHOST b 1 -- SWITCH s 2\n",
    );
    write(d.path(), "hole.tbl", "s a 1\n");
    write(
        d.path(),
        "hole.json",
        r#"{"topology": {"kind": "file", "path": "star.topo"},
            "routing": {"kind": "table_file", "path": "hole.tbl"}}"#,
    );
    let o = flitsim(&["verify-routing", "hole.json", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

use flitsim::config::ScenarioConfig;
use flitsim::experiment::{buffer_estimation_experiment, burst_trial};
use flitsim::link::BLOCK_BYTES;

fn estimate(blocks: u32) -> flitsim::experiment::BufferEstimate {
    let mut cfg = ScenarioConfig::default();
    cfg.link.buffer_blocks_per_vl = blocks;
    buffer_estimation_experiment(&cfg).unwrap()
}

#[test]
fn estimate_lands_within_two_mtu_of_the_buffer() {
    let e = estimate(1024);
    let kib = 1024.0;
    assert!((56.0 * kib..=72.0 * kib).contains(&e.estimate_bytes), "{}", e.estimate_bytes);
    assert!(e.smallest_stalled_burst - e.largest_clean_burst <= 64);
}

#[test]
fn doubling_the_buffer_doubles_the_estimate() {
    let a = estimate(1024).estimate_bytes;
    let b = estimate(2048).estimate_bytes;
    assert!((1.75..=2.25).contains(&(b / a)), "{a} -> {b}");
}

/// Fluid oracle: host1 fills its input buffer at line rate while the shared
/// output drains it at half rate, so the occupancy at the stall point is
/// S*/2. At that point the sender has run out of credits, i.e. the buffer
/// minus what is still on the wire or waiting for its credit to return.
/// One max-size packet (65 blocks) plus the credit round trip bounds the gap.
#[test]
fn peak_occupancy_matches_the_fluid_oracle() {
    let cfg = ScenarioConfig::default();
    let e = buffer_estimation_experiment(&cfg).unwrap();
    let buffer = u64::from(cfg.link.buffer_blocks_per_vl * BLOCK_BYTES);
    let clean = burst_trial(&cfg, e.largest_clean_burst).unwrap();
    assert_eq!(clean.xmit_wait_ticks, 0);
    assert!(clean.peak_input_bytes <= buffer);
    // round trip: two propagation delays plus the crossbar, at 12.5 B/ns
    let rtt_bytes = ((2 * 170 + 100) as f64 * 12.5) as u64;
    let gap = buffer - clean.peak_input_bytes;
    assert!(gap <= 65 * 64 + rtt_bytes, "gap {gap}");
    let half = e.largest_clean_burst as f64 / 2.0;
    assert!((half - clean.peak_input_bytes as f64).abs() <= (65 * 64) as f64, "{half} vs {}", clean.peak_input_bytes);
    let stalled = burst_trial(&cfg, e.smallest_stalled_burst).unwrap();
    assert!(stalled.xmit_wait_ticks > 0);
}

#[test]
fn without_background_no_burst_ever_stalls() {
    let mut cfg = ScenarioConfig::default();
    cfg.estimate.background = false;
    cfg.estimate.max_bytes = 1 << 20;
    let err = buffer_estimation_experiment(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

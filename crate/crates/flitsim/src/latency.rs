//! Host software-stack latency model.
//!
//! A [`LatencyDistribution`] describes the delay between an application
//! posting a message and its first byte becoming available to the link
//! layer (doorbell, PCIe fetch, driver stack). Three shapes are supported:
//! a constant, an empirical histogram and a shifted log-normal.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{SimRng, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start_ns: f64,
    pub end_ns: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyDistribution {
    Deterministic {
        value_ns: f64,
    },
    /// Half-open bins `[start, end)`, strictly increasing.
    Histogram {
        bins: Vec<HistogramBin>,
    },
    /// Histogram loaded from a `bin_start_ns,bin_end_ns,weight` CSV file.
    /// Replaced by [`LatencyDistribution::Histogram`] when the config is resolved.
    HistogramFile {
        path: PathBuf,
    },
    /// `shift + exp(N(mu, sigma))`, in nanoseconds.
    ShiftedLognormal {
        shift_ns: f64,
        mu: f64,
        sigma: f64,
    },
}

impl Default for LatencyDistribution {
    /// Shift 600 ns, median 850 ns, with a long right tail.
    fn default() -> Self {
        LatencyDistribution::ShiftedLognormal {
            shift_ns: 600.0,
            mu: 250f64.ln(),
            sigma: 0.5,
        }
    }
}

impl LatencyDistribution {
    pub fn deterministic(ns: f64) -> Self {
        LatencyDistribution::Deterministic { value_ns: ns }
    }

    pub fn zero() -> Self {
        Self::deterministic(0.0)
    }

    /// Loads any referenced histogram file (relative to `base`) and validates.
    pub fn resolve(&self, base: &Path) -> Result<Self> {
        let resolved = match self {
            LatencyDistribution::HistogramFile { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                LatencyDistribution::Histogram {
                    bins: load_histogram(&full)?,
                }
            }
            other => other.clone(),
        };
        resolved.validate()?;
        Ok(resolved)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatencyDistribution::Deterministic { value_ns } => {
                if !(value_ns.is_finite() && *value_ns >= 0.0) {
                    return Err(Error::config(format!(
                        "deterministic latency must be a finite value >= 0, got {value_ns}"
                    )));
                }
            }
            LatencyDistribution::Histogram { bins } => validate_bins(bins)?,
            LatencyDistribution::HistogramFile { path } => {
                return Err(Error::config(format!(
                    "histogram file {} was not loaded",
                    path.display()
                )))
            }
            LatencyDistribution::ShiftedLognormal {
                shift_ns,
                mu,
                sigma,
            } => {
                if !(shift_ns.is_finite() && *shift_ns >= 0.0) {
                    return Err(Error::config("lognormal shift must be >= 0"));
                }
                if !mu.is_finite() || !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(Error::config("lognormal needs finite mu and sigma >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Draws one latency. The distribution must already be validated.
    pub fn sample(&self, rng: &mut SimRng) -> SimTime {
        match self {
            LatencyDistribution::Deterministic { value_ns } => SimTime::from_ns_f64(*value_ns),
            LatencyDistribution::Histogram { bins } => {
                let total: f64 = bins.iter().map(|b| b.weight).sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut chosen = bins.last().expect("validated histogram is non-empty");
                for bin in bins {
                    if bin.weight > 0.0 && pick < bin.weight {
                        chosen = bin;
                        break;
                    }
                    pick -= bin.weight;
                }
                let start = SimTime::from_ns_f64(chosen.start_ns).as_ps();
                let end = SimTime::from_ns_f64(chosen.end_ns).as_ps();
                SimTime::from_ps(rng.gen_range(start..end.max(start + 1)))
            }
            LatencyDistribution::HistogramFile { .. } => {
                panic!("histogram file must be resolved before sampling")
            }
            LatencyDistribution::ShiftedLognormal {
                shift_ns,
                mu,
                sigma,
            } => {
                let tail = if *sigma == 0.0 {
                    mu.exp()
                } else {
                    LogNormal::new(*mu, *sigma)
                        .expect("validated lognormal")
                        .sample(rng)
                };
                SimTime::from_ns_f64(shift_ns + tail)
            }
        }
    }

    /// Smallest value the distribution can produce.
    pub fn min(&self) -> SimTime {
        match self {
            LatencyDistribution::Deterministic { value_ns } => SimTime::from_ns_f64(*value_ns),
            LatencyDistribution::Histogram { bins } => bins
                .iter()
                .find(|b| b.weight > 0.0)
                .map(|b| SimTime::from_ns_f64(b.start_ns))
                .unwrap_or(SimTime::ZERO),
            LatencyDistribution::HistogramFile { .. } => SimTime::ZERO,
            LatencyDistribution::ShiftedLognormal { shift_ns, .. } => {
                SimTime::from_ns_f64(*shift_ns)
            }
        }
    }
}

fn validate_bins(bins: &[HistogramBin]) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::config("histogram has no bins"));
    }
    let mut total = 0.0;
    let mut prev_end = f64::NEG_INFINITY;
    for (i, b) in bins.iter().enumerate() {
        if !(b.start_ns.is_finite() && b.end_ns.is_finite() && b.weight.is_finite()) {
            return Err(Error::config(format!("histogram bin {i} is not finite")));
        }
        if b.start_ns < 0.0 {
            return Err(Error::config(format!("histogram bin {i} starts below zero")));
        }
        if b.end_ns <= b.start_ns {
            return Err(Error::config(format!("histogram bin {i} is empty or reversed")));
        }
        if b.start_ns < prev_end {
            return Err(Error::config(format!(
                "histogram bins must be strictly increasing (bin {i} overlaps its predecessor)"
            )));
        }
        if b.weight < 0.0 {
            return Err(Error::config(format!("histogram bin {i} has negative weight")));
        }
        total += b.weight;
        prev_end = b.end_ns;
    }
    if total <= 0.0 {
        return Err(Error::config("histogram weights sum to zero"));
    }
    Ok(())
}

/// Reads `bin_start_ns,bin_end_ns,weight` rows. `#` lines are comments and a
/// non-numeric first row is treated as a header.
pub fn load_histogram(path: &Path) -> Result<Vec<HistogramBin>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_histogram(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_histogram(text: &str) -> Result<Vec<HistogramBin>> {
    let mut bins = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 3 => bins.push(HistogramBin {
                start_ns: v[0],
                end_ns: v[1],
                weight: v[2],
            }),
            None if bins.is_empty() && fields.len() == 3 => continue, // header
            _ => {
                return Err(Error::config(format!(
                    "line {}: expected bin_start_ns,bin_end_ns,weight",
                    idx + 1
                )))
            }
        }
    }
    validate_bins(&bins)?;
    Ok(bins)
}

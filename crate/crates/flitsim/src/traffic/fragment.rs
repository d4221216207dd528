use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimRng;

/// Size distribution of the fragment each readout unit holds per event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FragmentSize {
    Fixed { bytes: u64 },
    /// Inclusive bounds.
    Uniform { min: u64, max: u64 },
    /// Log-normal with the given mean (bytes) and shape `sigma`, rounded and
    /// truncated below at 1 byte.
    Lognormal { mean: f64, sigma: f64 },
}

impl Default for FragmentSize {
    fn default() -> Self {
        FragmentSize::Fixed { bytes: 1 << 20 }
    }
}

impl FragmentSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FragmentSize::Fixed { bytes } if bytes >= 1 => Ok(()),
            FragmentSize::Uniform { min, max } if min >= 1 && min <= max => Ok(()),
            FragmentSize::Lognormal { mean, sigma }
                if mean.is_finite() && mean >= 1.0 && sigma.is_finite() && sigma >= 0.0 =>
            {
                Ok(())
            }
            ref other => Err(Error::config(format!("invalid fragment size {other:?}"))),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> u64 {
        match *self {
            FragmentSize::Fixed { bytes } => bytes,
            FragmentSize::Uniform { min, max } => rng.gen_range(min..=max),
            FragmentSize::Lognormal { mean, sigma } => {
                // E[X] = exp(mu + sigma^2 / 2)
                let mu = mean.ln() - sigma * sigma / 2.0;
                let d = LogNormal::new(mu, sigma).expect("validated");
                (d.sample(rng).round() as u64).max(1)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            FragmentSize::Fixed { bytes } => bytes as f64,
            FragmentSize::Uniform { min, max } => (min as f64 + max as f64) / 2.0,
            FragmentSize::Lognormal { mean, .. } => mean,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed() {
        let mut rng = SimRng::from_seed(1);
        assert_eq!(FragmentSize::default().sample(&mut rng), 1_048_576);
    }

    #[test]
    fn uniform_stays_in_bounds() {
        let mut rng = SimRng::from_seed(2);
        let d = FragmentSize::Uniform {
            min: 100_000,
            max: 200_000,
        };
        for _ in 0..100_000 {
            let x = d.sample(&mut rng);
            assert!((100_000..=200_000).contains(&x));
        }
    }

    #[test]
    fn lognormal_mean_matches() {
        let mut rng = SimRng::from_seed(3);
        let d = FragmentSize::Lognormal {
            mean: 150_000.0,
            sigma: 0.6,
        };
        let n = 1_000_000;
        let total: u64 = (0..n).map(|_| d.sample(&mut rng)).sum();
        let mean = total as f64 / n as f64;
        assert!((mean / 150_000.0 - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn invalid() {
        assert!(FragmentSize::Uniform { min: 5, max: 4 }.validate().is_err());
        assert!(FragmentSize::Fixed { bytes: 0 }.validate().is_err());
        assert!(FragmentSize::Lognormal {
            mean: 10.0,
            sigma: -1.0
        }
        .validate()
        .is_err());
    }
}

use std::fmt;
use std::ops::{Add, AddAssign, Sub, Mul};

use serde::{Deserialize, Serialize};

/// Simulation time in integer picoseconds.
///
/// A 64-byte flit at 100 Gb/s serializes in exactly 5120 ps, so every
/// link-level quantity of interest is an exact integer in this base.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps)
    }

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * 1_000)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000_000)
    }

    /// Rounds to the nearest picosecond; negative and NaN inputs clamp to zero.
    pub fn from_ns_f64(ns: f64) -> Self {
        if ns.is_nan() || ns <= 0.0 {
            SimTime::ZERO
        } else {
            SimTime((ns * 1_000.0).round() as u64)
        }
    }

    pub const fn as_ps(self) -> u64 {
        self.0
    }

    pub fn as_ns_f64(self) -> f64 {
        self.0 as f64 / 1e3
    }

    pub fn as_us_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e12
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_add(rhs.0).expect("simulation time overflow"))
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        *self = *self + rhs;
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.checked_sub(rhs.0).expect("negative simulation time"))
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;

    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0.checked_mul(rhs).expect("simulation time overflow"))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps = self.0;
        if ps % 1_000_000 == 0 && ps >= 1_000_000 {
            write!(f, "{}us", ps / 1_000_000)
        } else if ps % 1_000 == 0 && ps >= 1_000 {
            write!(f, "{}ns", ps / 1_000)
        } else {
            write!(f, "{}ps", ps)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert_eq!(SimTime::from_ns(170).as_ps(), 170_000);
        assert_eq!(SimTime::from_us(100), SimTime::from_ns(100_000));
        assert_eq!(SimTime::from_ms(1).as_ps(), 1_000_000_000);
        assert_eq!(SimTime::from_ns_f64(850.4), SimTime::from_ps(850_400));
        assert_eq!(SimTime::from_ns_f64(-3.0), SimTime::ZERO);
    }

    #[test]
    fn display() {
        assert_eq!(SimTime::from_ns(170).to_string(), "170ns");
        assert_eq!(SimTime::from_ps(5120).to_string(), "5120ps");
        assert_eq!(SimTime::from_us(3).to_string(), "3us");
    }

    #[test]
    #[should_panic(expected = "negative simulation time")]
    fn subtraction_underflow_panics() {
        let _ = SimTime::from_ns(1) - SimTime::from_ns(2);
    }
}

//! Point-to-point link: serialization, propagation and per-VL credits.
//!
//! Credits are counted in 64-byte blocks. A sender may start a packet only
//! when the receiver has room for the whole packet on that VL, so a receive
//! buffer can never overflow mid-packet.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimTime;

/// Flow-control block and flit size in bytes.
pub const BLOCK_BYTES: u32 = 64;

/// Blocks occupied by `bytes` on the wire.
pub fn blocks_for(bytes: u32) -> u32 {
    bytes.div_ceil(BLOCK_BYTES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    /// Data rate after line encoding, bits per second.
    pub data_rate_bps: u64,
    pub propagation_delay_ns: u64,
    pub num_vls: u8,
    /// Receive buffer per VL, in 64-byte blocks.
    pub buffer_blocks_per_vl: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            data_rate_bps: 100_000_000_000,
            propagation_delay_ns: 170,
            num_vls: 4,
            buffer_blocks_per_vl: 1024,
        }
    }
}

impl LinkParams {
    pub fn propagation_delay(&self) -> SimTime {
        SimTime::from_ns(self.propagation_delay_ns)
    }

    pub fn buffer_bytes_per_vl(&self) -> u64 {
        u64::from(self.buffer_blocks_per_vl) * u64::from(BLOCK_BYTES)
    }

    /// Time to put one flit on the wire.
    pub fn flit_time(&self) -> SimTime {
        serialization_time(u64::from(BLOCK_BYTES), self)
    }

    pub fn validate(&self, max_packet_bytes: u32) -> Result<()> {
        if self.data_rate_bps == 0 {
            return Err(Error::config("link data_rate_bps must be > 0"));
        }
        if !(1..=15).contains(&self.num_vls) {
            return Err(Error::config(format!(
                "num_vls must be in [1, 15], got {}",
                self.num_vls
            )));
        }
        let need = blocks_for(max_packet_bytes);
        if self.buffer_blocks_per_vl < need {
            return Err(Error::config(format!(
                "buffer_blocks_per_vl {} cannot hold a full packet of {} blocks",
                self.buffer_blocks_per_vl, need
            )));
        }
        Ok(())
    }
}

/// Wire time of `bytes` at the link's data rate, rounded up to a picosecond.
pub fn serialization_time(bytes: u64, params: &LinkParams) -> SimTime {
    let bits = u128::from(bytes) * 8 * 1_000_000_000_000;
    let rate = u128::from(params.data_rate_bps);
    SimTime::from_ps(bits.div_ceil(rate) as u64)
}

/// Sender-side view of the receiver's free buffer blocks, per VL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreditState {
    free_blocks: Vec<u32>,
    capacity: u32,
}

impl CreditState {
    pub fn new(num_vls: u8, capacity: u32) -> Self {
        Self {
            free_blocks: vec![capacity; usize::from(num_vls)],
            capacity,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    pub fn free(&self, vl: u8) -> u32 {
        self.free_blocks[usize::from(vl)]
    }

    pub fn can_send(&self, vl: u8, blocks: u32) -> bool {
        self.free(vl) >= blocks
    }

    /// Whole-packet credit check. On success the credits are consumed.
    pub fn try_consume(&mut self, vl: u8, blocks: u32) -> bool {
        let free = &mut self.free_blocks[usize::from(vl)];
        if *free >= blocks {
            *free -= blocks;
            true
        } else {
            false
        }
    }

    /// Credits returned by the receiver. Returning more than was taken is a
    /// model bug and panics.
    pub fn give_back(&mut self, vl: u8, blocks: u32) {
        let free = &mut self.free_blocks[usize::from(vl)];
        let after = *free + blocks;
        assert!(
            after <= self.capacity,
            "credit over-return on VL {vl}: {after} > capacity {}",
            self.capacity
        );
        *free = after;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_examples() {
        let p = LinkParams::default();
        assert_eq!(serialization_time(64, &p), SimTime::from_ps(5120));
        assert_eq!(serialization_time(4096, &p), SimTime::from_ps(327_680));
        assert_eq!(serialization_time(4096 + 30, &p), SimTime::from_ps(330_080));
        assert_eq!(p.flit_time(), SimTime::from_ps(5120));
    }

    #[test]
    fn serialization_rounds_up() {
        let p = LinkParams {
            data_rate_bps: 3_000_000_000,
            ..LinkParams::default()
        };
        // 8 bits / 3 Gb/s = 2666.67 ps
        assert_eq!(serialization_time(1, &p), SimTime::from_ps(2667));
    }

    #[test]
    fn block_counts() {
        assert_eq!(blocks_for(1), 1);
        assert_eq!(blocks_for(64), 1);
        assert_eq!(blocks_for(65), 2);
        assert_eq!(blocks_for(4160), 65);
        assert_eq!(blocks_for(4126), 65);
    }

    #[test]
    fn whole_packet_credit_check() {
        let mut c = CreditState::new(1, 1);
        assert!(c.try_consume(0, 1));
        assert_eq!(c.free(0), 0);

        let mut c = CreditState::new(1, 64);
        assert!(!c.try_consume(0, blocks_for(4160)));
        assert_eq!(c.free(0), 64);
    }

    #[test]
    #[should_panic(expected = "over-return")]
    fn over_return_is_fatal() {
        let mut c = CreditState::new(2, 8);
        c.give_back(1, 1);
    }

    #[test]
    fn validation() {
        let p = LinkParams::default();
        assert!(p.validate(4126).is_ok());
        assert!(LinkParams { num_vls: 0, ..p.clone() }.validate(4126).is_err());
        assert!(LinkParams { num_vls: 16, ..p.clone() }.validate(4126).is_err());
        assert!(LinkParams { data_rate_bps: 0, ..p.clone() }.validate(4126).is_err());
        assert!(LinkParams {
            buffer_blocks_per_vl: 64,
            ..p
        }
        .validate(4160)
        .is_err());
    }
}

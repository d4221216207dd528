//! Switch parameters, VL arbitration and per-port counters.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::host::Packet;
use crate::link::{blocks_for, CreditState};
use crate::sim::SimTime;
use crate::topology::{NodeRef, PortNum};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchParams {
    /// Input-to-output forwarding latency.
    pub crossbar_delay_ns: u64,
    /// Output buffer per port per VL in blocks; `None` means one maximum-size
    /// packet.
    pub output_buffer_blocks: Option<u32>,
    /// Forward a packet once its head flit has arrived instead of its tail.
    pub cut_through: bool,
    /// Length of one PortXmitWait tick.
    pub xmit_wait_tick_ps: u64,
}

impl Default for SwitchParams {
    fn default() -> Self {
        Self {
            crossbar_delay_ns: 100,
            output_buffer_blocks: None,
            cut_through: false,
            xmit_wait_tick_ps: 1_000,
        }
    }
}

impl SwitchParams {
    pub fn crossbar_delay(&self) -> SimTime {
        SimTime::from_ns(self.crossbar_delay_ns)
    }

    pub fn output_blocks(&self, max_packet_wire: u32) -> u32 {
        self.output_buffer_blocks
            .unwrap_or_else(|| blocks_for(max_packet_wire))
    }

    pub fn validate(&self, max_packet_wire: u32) -> Result<()> {
        if self.xmit_wait_tick_ps == 0 {
            return Err(Error::config("xmit_wait_tick_ps must be > 0"));
        }
        if self.output_blocks(max_packet_wire) < blocks_for(max_packet_wire) {
            return Err(Error::config(format!(
                "output_buffer_blocks {} cannot hold a full packet of {} blocks",
                self.output_blocks(max_packet_wire),
                blocks_for(max_packet_wire)
            )));
        }
        Ok(())
    }
}

/// Round-robin VL arbitration at a packet boundary.
///
/// Starting at `next_vl`, returns the first VL whose head packet is fully
/// covered by downstream credits. The second value reports whether any VL
/// had a packet waiting at all, so the caller can tell "idle" from "stalled
/// on credits".
pub fn vl_arbitrate(
    queues: &[VecDeque<Packet>],
    credits: &CreditState,
    next_vl: usize,
) -> (Option<u8>, bool) {
    let n = queues.len();
    let mut queued = false;
    for k in 0..n {
        let vl = (next_vl + k) % n;
        if let Some(head) = queues[vl].front() {
            queued = true;
            if credits.can_send(vl as u8, head.blocks()) {
                return (Some(vl as u8), true);
            }
        }
    }
    (None, queued)
}

/// Per-port counters, the simulated equivalent of the IB port counters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortCounters {
    pub node: NodeRef,
    pub port: PortNum,
    pub xmit_wait_ticks: u64,
    /// Exact stalled time, for analysis finer than one tick.
    pub xmit_wait_ps: u64,
    pub bytes_tx: u64,
    pub packets_tx: u64,
    /// Peak input buffer occupancy per VL, in blocks.
    pub max_occupancy_blocks: Vec<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(vl: u8, wire: u32) -> Packet {
        Packet {
            msg: 0,
            seq: 0,
            last: true,
            src: 0,
            dest: 1,
            vl,
            payload: wire,
            wire,
        }
    }

    #[test]
    fn round_robin_alternates() {
        let mut q = vec![VecDeque::new(); 4];
        for _ in 0..3 {
            q[0].push_back(pkt(0, 64));
            q[1].push_back(pkt(1, 64));
        }
        let credits = CreditState::new(4, 100);
        let mut next = 0;
        let mut order = Vec::new();
        for _ in 0..6 {
            let (vl, _) = vl_arbitrate(&q, &credits, next);
            let vl = vl.unwrap();
            q[usize::from(vl)].pop_front();
            order.push(vl);
            next = usize::from(vl) + 1;
        }
        assert_eq!(order, vec![0, 1, 0, 1, 0, 1]);
    }

    #[test]
    fn single_vl_back_to_back() {
        let mut q = vec![VecDeque::new(); 2];
        q[0].push_back(pkt(0, 64));
        q[0].push_back(pkt(0, 64));
        let credits = CreditState::new(2, 100);
        assert_eq!(vl_arbitrate(&q, &credits, 1).0, Some(0));
    }

    #[test]
    fn stalled_on_credits() {
        let mut q = vec![VecDeque::new(); 2];
        q[0].push_back(pkt(0, 4126));
        let mut credits = CreditState::new(2, 100);
        assert!(credits.try_consume(0, 50));
        assert_eq!(vl_arbitrate(&q, &credits, 0), (None, true));
        let empty = vec![VecDeque::new(); 2];
        assert_eq!(vl_arbitrate(&empty, &credits, 0), (None, false));
    }

    #[test]
    fn output_buffer_default() {
        let p = SwitchParams::default();
        assert_eq!(p.output_blocks(4126), 65);
        assert!(SwitchParams {
            output_buffer_blocks: Some(10),
            ..p
        }
        .validate(4126)
        .is_err());
    }
}

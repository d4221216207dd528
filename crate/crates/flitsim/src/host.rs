//! Host adapter: messages, work queues and packetization.
//!
//! An application posts a [`Message`]; after one draw of the stack latency
//! it becomes eligible in the work queue for its `(dest, vl)` pair. The
//! generator walks the eligible queues round-robin at packet boundaries,
//! cutting each message into MTU-sized packets. The sink reassembles
//! packets and reports each message exactly once when its last packet lands.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::LatencyDistribution;
use crate::link::{blocks_for, serialization_time, LinkParams};
use crate::sim::SimTime;
use crate::topology::HostId;

pub type MessageId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HostParams {
    /// Maximum packet payload in bytes.
    pub mtu: u32,
    /// Per-packet header and CRC overhead in bytes.
    pub header_bytes: u32,
    pub stack_latency: LatencyDistribution,
}

impl Default for HostParams {
    fn default() -> Self {
        Self {
            mtu: 4096,
            header_bytes: 30,
            stack_latency: LatencyDistribution::default(),
        }
    }
}

impl HostParams {
    pub fn max_packet_wire_bytes(&self) -> u32 {
        self.mtu + self.header_bytes
    }

    /// Payload delivered per wire byte for full-MTU packets.
    pub fn payload_efficiency(&self) -> f64 {
        f64::from(self.mtu) / f64::from(self.mtu + self.header_bytes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mtu == 0 {
            return Err(Error::config("mtu must be > 0"));
        }
        self.stack_latency.validate()
    }

    pub fn packet_count(&self, size: u64) -> u32 {
        u32::try_from(size.div_ceil(u64::from(self.mtu))).expect("message too large")
    }

    /// Payload of packet `seq` of a `size`-byte message.
    pub fn packet_payload(&self, size: u64, seq: u32) -> u32 {
        let mtu = u64::from(self.mtu);
        let offset = u64::from(seq) * mtu;
        debug_assert!(offset < size);
        (size - offset).min(mtu) as u32
    }

    /// Total bytes a message puts on the wire, headers included.
    pub fn wire_bytes(&self, size: u64) -> u64 {
        size + u64::from(self.packet_count(size)) * u64::from(self.header_bytes)
    }

    /// Time the message occupies a link, packet by packet.
    pub fn wire_time(&self, size: u64, link: &LinkParams) -> SimTime {
        let n = self.packet_count(size);
        let full = serialization_time(u64::from(self.mtu + self.header_bytes), link);
        let last = self.packet_payload(size, n - 1) + self.header_bytes;
        SimTime::from_ps(
            full.as_ps() * u64::from(n - 1) + serialization_time(u64::from(last), link).as_ps(),
        )
    }
}

/// Whether a message counts toward goodput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageClass {
    Data,
    Control,
}

/// Application-level identity of a message, e.g. `(event id, fragment)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Tag {
    pub event: u64,
    pub fragment: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub src: HostId,
    pub dest: HostId,
    pub size: u64,
    pub vl: u8,
    pub class: MessageClass,
    pub tag: Tag,
    pub posted_at: SimTime,
    /// When the stack latency has elapsed and the first packet may leave.
    pub ready_at: SimTime,
    pub completed_at: Option<SimTime>,
    pub packets: u32,
    pub received: u32,
}

/// What the generator hands to the link layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub msg: MessageId,
    pub seq: u32,
    pub last: bool,
    pub src: HostId,
    pub dest: HostId,
    pub vl: u8,
    pub payload: u32,
    pub wire: u32,
}

impl Packet {
    pub fn blocks(&self) -> u32 {
        blocks_for(self.wire)
    }
}

/// FIFO of messages sharing a `(dest, vl)` pair.
#[derive(Debug, Clone)]
pub(crate) struct WorkQueue {
    pub dest: HostId,
    pub vl: u8,
    pub msgs: VecDeque<MessageId>,
    /// Next packet index of the head message.
    pub next_seq: u32,
    pub last_ready: SimTime,
}

/// Host-side send state: the work queues and the round-robin generator.
#[derive(Debug, Default)]
pub(crate) struct HostQueues {
    pub queues: Vec<WorkQueue>,
    index: HashMap<(HostId, u8), usize>,
    /// Indices of non-empty queues, in activation order.
    pub active: Vec<usize>,
    pub rr: usize,
}

impl HostQueues {
    /// Enqueues `id` and returns when it becomes eligible, which is never
    /// earlier than the message ahead of it in the same queue.
    pub fn push(&mut self, id: MessageId, dest: HostId, vl: u8, ready_at: SimTime) -> SimTime {
        let qi = *self.index.entry((dest, vl)).or_insert_with(|| {
            self.queues.push(WorkQueue {
                dest,
                vl,
                msgs: VecDeque::new(),
                next_seq: 0,
                last_ready: SimTime::ZERO,
            });
            self.queues.len() - 1
        });
        let q = &mut self.queues[qi];
        let ready = ready_at.max(q.last_ready);
        q.last_ready = ready;
        if q.msgs.is_empty() {
            q.next_seq = 0;
            self.active.push(qi);
        }
        q.msgs.push_back(id);
        ready
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    /// Removes the queue at `active[pos]` once its last message is sent and
    /// fixes up the round-robin pointer.
    pub fn retire(&mut self, pos: usize) {
        self.active.remove(pos);
        self.rr = pos;
    }
}

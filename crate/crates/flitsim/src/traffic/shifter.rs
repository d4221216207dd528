use super::shifter_dest;
use crate::engine::Injector;
use crate::error::Result;
use crate::fabric::Fabric;
use crate::host::{MessageClass, MessageId, Tag};
use crate::sim::SimTime;
use crate::topology::HostId;

/// Phase `k` of a shift that never targets the sender itself: cycles over
/// `1..count`.
fn network_phase(k: u64, count: u32) -> u32 {
    debug_assert!(count >= 2);
    1 + (k % u64::from(count - 1)) as u32
}

#[derive(Debug, Clone)]
struct Node {
    phase_index: u64,
    posted_in_phase: u64,
    outstanding: u32,
    /// Bytes posted in each finished phase.
    history: Vec<u64>,
}

/// Moves on to the next destination after a fixed number of bytes, with no
/// coordination between nodes.
#[derive(Debug, Clone)]
pub struct FixedSizeShifter {
    count: u32,
    chunk: u64,
    message: u64,
    vl: u8,
    window: u32,
    nodes: Vec<Node>,
}

impl FixedSizeShifter {
    pub fn new(count: u32, chunk: u64, message: u64, vl: u8, window: u32) -> Self {
        let node = Node {
            phase_index: 0,
            posted_in_phase: 0,
            outstanding: 0,
            history: Vec::new(),
        };
        Self {
            count,
            chunk,
            message,
            vl,
            window,
            nodes: vec![node; count as usize],
        }
    }

    /// Current phase of every node. Nodes drift apart under congestion.
    pub fn phases(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .map(|n| network_phase(n.phase_index, self.count))
            .collect()
    }

    /// Bytes posted in each completed phase of `node`.
    pub fn phase_bytes(&self, node: HostId) -> &[u64] {
        &self.nodes[node as usize].history
    }

    fn fill(&mut self, fabric: &mut Fabric, i: HostId) -> Result<()> {
        while self.nodes[i as usize].outstanding < self.window {
            let node = &mut self.nodes[i as usize];
            let dest = shifter_dest(i, network_phase(node.phase_index, self.count), self.count);
            let size = self.message.min(self.chunk - node.posted_in_phase);
            node.posted_in_phase += size;
            node.outstanding += 1;
            if node.posted_in_phase >= self.chunk {
                node.history.push(node.posted_in_phase);
                node.posted_in_phase = 0;
                node.phase_index += 1;
            }
            fabric.post_message(i, dest, size, self.vl, MessageClass::Data, Tag::default())?;
        }
        Ok(())
    }
}

impl Injector for FixedSizeShifter {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()> {
        if self.count < 2 {
            return Ok(());
        }
        for i in 0..self.count {
            self.fill(fabric, i)?;
        }
        Ok(())
    }

    fn on_delivered(&mut self, fabric: &mut Fabric, msg: MessageId) -> Result<()> {
        let src = fabric.message(msg).src;
        self.nodes[src as usize].outstanding -= 1;
        self.fill(fabric, src)
    }
}

/// All nodes switch destination together at every window boundary. A node
/// only posts what its link can put on the wire before the window's cutoff
/// (`window - grace`); anything still in flight at the cutoff drains.
#[derive(Debug, Clone)]
pub struct TimeWindowShifter {
    count: u32,
    window: SimTime,
    grace: SimTime,
    message: u64,
    vl: u8,
    message_wire: SimTime,
    committed: Vec<SimTime>,
}

impl TimeWindowShifter {
    pub fn new(
        count: u32,
        window: SimTime,
        grace: SimTime,
        message: u64,
        vl: u8,
        message_wire: SimTime,
    ) -> Self {
        assert!(grace < window);
        Self {
            count,
            window,
            grace,
            message,
            vl,
            message_wire,
            committed: vec![SimTime::ZERO; count as usize],
        }
    }

    /// Phase in effect at `now`.
    pub fn phase_at(&self, now: SimTime) -> u32 {
        network_phase(now.as_ps() / self.window.as_ps(), self.count)
    }

    /// Whether `now` falls in a grace period.
    pub fn in_grace(&self, now: SimTime) -> bool {
        now.as_ps() % self.window.as_ps() >= (self.window - self.grace).as_ps()
    }

    fn open_window(&mut self, fabric: &mut Fabric, k: u64) -> Result<()> {
        let now = fabric.now();
        let start = SimTime::from_ps(k * self.window.as_ps());
        let cutoff = start + self.window - self.grace;
        let phase = network_phase(k, self.count);
        for i in 0..self.count {
            let dest = shifter_dest(i, phase, self.count);
            let c = &mut self.committed[i as usize];
            *c = (*c).max(now);
            while *c + self.message_wire <= cutoff {
                *c = *c + self.message_wire;
                fabric.post_message(i, dest, self.message, self.vl, MessageClass::Data, Tag::default())?;
            }
        }
        fabric.schedule_timer(0, start + self.window, k + 1);
        Ok(())
    }
}

impl Injector for TimeWindowShifter {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()> {
        if self.count < 2 {
            return Ok(());
        }
        let k = fabric.now().as_ps() / self.window.as_ps();
        self.open_window(fabric, k)
    }

    fn on_delivered(&mut self, _fabric: &mut Fabric, _msg: MessageId) -> Result<()> {
        Ok(())
    }

    fn on_timer(&mut self, fabric: &mut Fabric, _host: HostId, token: u64) -> Result<()> {
        self.open_window(fabric, token)
    }
}

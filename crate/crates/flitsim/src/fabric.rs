//! The fabric: every host adapter and switch port, wired by the topology,
//! exchanging packets under per-VL credit flow control.
//!
//! Events are scheduled per packet, not per flit. A packet that starts on a
//! link at `t` leaves the sender at `t + ser` and reaches the receiver at
//! `t + ser + prop` (store-and-forward) or `t + flit + prop` (cut-through
//! into a switch). Buffer space and credits are still counted in 64-byte
//! blocks, and all timing is exact to the picosecond.
//!
//! Switch data path, per VL:
//!
//! ```text
//! link -> input FIFO --(route, output space)--> crossbar_delay -> output FIFO -> VL arbiter -> link
//!            |                                                                   |
//!            +-- credits back upstream when the packet leaves the input          +-- needs downstream credits
//! ```
//!
//! An input whose head packet cannot get output space joins that output's
//! waiting list. Freed space is granted to waiting inputs in FIFO order,
//! one packet per grant, which shares a congested output evenly.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::host::{HostParams, HostQueues, Message, MessageClass, MessageId, Packet, Tag};
use crate::link::{blocks_for, serialization_time, CreditState, LinkParams};
use crate::sim::{EventQueue, SimEvent, SimRng, SimTime};
use crate::switch::{vl_arbitrate, PortCounters, SwitchParams};
use crate::topology::{Endpoint, HostId, NodeRef, PortNum, Routing, Topology};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricParams {
    pub link: LinkParams,
    pub switch: SwitchParams,
    pub host: HostParams,
}

impl FabricParams {
    pub fn validate(&self) -> Result<()> {
        self.host.validate()?;
        let max = self.host.max_packet_wire_bytes();
        self.link.validate(max)?;
        self.switch.validate(max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FabricEvent {
    TxDone(u32),
    Arrive(u32, Packet),
    Credit(u32, u8, u32),
    Xbar(u32, Packet),
    HostWake(HostId),
    Timer(HostId, u64),
}

impl FabricEvent {
    fn kind(&self) -> u64 {
        match self {
            FabricEvent::TxDone(p) => (1 << 56) | u64::from(*p),
            FabricEvent::Arrive(p, pkt) => (2 << 56) | (u64::from(*p) << 24) | u64::from(pkt.seq),
            FabricEvent::Credit(p, vl, b) => {
                (3 << 56) | (u64::from(*p) << 24) | (u64::from(*vl) << 16) | u64::from(*b)
            }
            FabricEvent::Xbar(p, pkt) => (4 << 56) | (u64::from(*p) << 24) | u64::from(pkt.msg),
            FabricEvent::HostWake(h) => (5 << 56) | u64::from(*h),
            FabricEvent::Timer(h, t) => (6 << 56) ^ (u64::from(*h) << 32) ^ *t,
        }
    }
}

/// Something the traffic layer must react to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notice {
    Delivered(MessageId),
    Timer(HostId, u64),
}

#[derive(Debug)]
struct Port {
    owner: NodeRef,
    number: PortNum,
    peer: Option<u32>,

    // transmit side
    busy: bool,
    credits: CreditState,
    out_q: Vec<VecDeque<Packet>>,
    out_occ: Vec<u32>,
    xbar_transit: Vec<u32>,
    waiters: Vec<VecDeque<u32>>,
    rr_vl: usize,
    wait_since: Option<SimTime>,
    inflight_data: Vec<u32>,
    inflight_credit: Vec<u32>,

    // receive side
    in_q: Vec<VecDeque<(Packet, u32)>>,
    in_occ: Vec<u32>,
    registered: Vec<bool>,

    xmit_wait_ps: u64,
    bytes_tx: u64,
    packets_tx: u64,
    max_occ: Vec<u32>,
}

impl Port {
    fn new(owner: NodeRef, number: PortNum, vls: usize, in_cap: u32) -> Self {
        Port {
            owner,
            number,
            peer: None,
            busy: false,
            credits: CreditState::new(vls as u8, in_cap),
            out_q: vec![VecDeque::new(); vls],
            out_occ: vec![0; vls],
            xbar_transit: vec![0; vls],
            waiters: vec![VecDeque::new(); vls],
            rr_vl: 0,
            wait_since: None,
            inflight_data: vec![0; vls],
            inflight_credit: vec![0; vls],
            in_q: vec![VecDeque::new(); vls],
            in_occ: vec![0; vls],
            registered: vec![false; vls],
            xmit_wait_ps: 0,
            bytes_tx: 0,
            packets_tx: 0,
            max_occ: vec![0; vls],
        }
    }

    fn start_wait(&mut self, now: SimTime) {
        self.wait_since.get_or_insert(now);
    }

    fn stop_wait(&mut self, now: SimTime) {
        if let Some(since) = self.wait_since.take() {
            self.xmit_wait_ps += (now - since).as_ps();
        }
    }

    fn wait_total(&self, now: SimTime) -> u64 {
        self.xmit_wait_ps + self.wait_since.map_or(0, |s| (now - s).as_ps())
    }
}

struct HostState {
    queues: HostQueues,
    rng: SimRng,
}

/// Delivered-payload accounting for goodput.
#[derive(Debug, Clone)]
pub struct DeliveryStats {
    pub bin: SimTime,
    pub window_start: SimTime,
    pub window_end: SimTime,
    /// `series[bin][host]`: data payload bytes delivered to `host`.
    pub series: Vec<Vec<u64>>,
    /// Data payload bytes delivered to each host inside the window.
    pub window_bytes: Vec<u64>,
    pub total_bytes: u64,
}

impl DeliveryStats {
    fn new(hosts: usize, bin: SimTime, window_start: SimTime, window_end: SimTime) -> Self {
        Self {
            bin,
            window_start,
            window_end,
            series: Vec::new(),
            window_bytes: vec![0; hosts],
            total_bytes: 0,
        }
    }

    fn record(&mut self, now: SimTime, host: HostId, bytes: u32) {
        let bytes = u64::from(bytes);
        self.total_bytes += bytes;
        if now >= self.window_start && now < self.window_end {
            self.window_bytes[host as usize] += bytes;
        }
        let idx = (now.as_ps() / self.bin.as_ps().max(1)) as usize;
        let hosts = self.window_bytes.len();
        if self.series.len() <= idx {
            self.series.resize_with(idx + 1, || vec![0; hosts]);
        }
        self.series[idx][host as usize] += bytes;
    }

    /// Mean goodput per host over the window, bits per second.
    pub fn mean_goodput_bps(&self) -> f64 {
        let secs = (self.window_end.saturating_sub(self.window_start)).as_secs_f64();
        if secs <= 0.0 || self.window_bytes.is_empty() {
            return 0.0;
        }
        let total: u64 = self.window_bytes.iter().sum();
        total as f64 * 8.0 / secs / self.window_bytes.len() as f64
    }

    pub fn host_goodput_bps(&self, host: HostId) -> f64 {
        let secs = (self.window_end.saturating_sub(self.window_start)).as_secs_f64();
        if secs <= 0.0 {
            return 0.0;
        }
        self.window_bytes[host as usize] as f64 * 8.0 / secs
    }
}

/// Snapshot of every counter at the end of (or during) a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterSet {
    pub now: SimTime,
    pub events_processed: u64,
    /// Running hash over every fired event's `(time, sequence, kind)`.
    pub trace_digest: u64,
    pub ports: Vec<PortCounters>,
    pub messages_posted: u64,
    pub messages_completed: u64,
    pub posted_wire_bytes: u64,
    pub delivered_payload_bytes: u64,
}

impl CounterSet {
    /// Bytes sent by host adapters.
    pub fn host_egress_bytes(&self) -> u64 {
        self.ports
            .iter()
            .filter(|p| matches!(p.node, NodeRef::Host(_)))
            .map(|p| p.bytes_tx)
            .sum()
    }

    pub fn port(&self, node: NodeRef, port: PortNum) -> Option<&PortCounters> {
        self.ports.iter().find(|p| p.node == node && p.port == port)
    }
}

pub struct Fabric {
    params: FabricParams,
    topo: Topology,
    routing: Routing,
    queue: EventQueue<FabricEvent>,
    ports: Vec<Port>,
    switch_base: Vec<u32>,
    hosts: Vec<HostState>,
    messages: Vec<Message>,
    stats: DeliveryStats,
    prop: SimTime,
    flit_time: SimTime,
    xbar_delay: SimTime,
    in_cap: u32,
    out_cap: u32,
    vls: usize,
    messages_completed: u64,
    posted_wire_bytes: u64,
    trace_digest: u64,
}

impl Fabric {
    /// Wires up a fabric. `routing` must already be validated against `topo`.
    pub fn new(
        topo: Topology,
        routing: Routing,
        params: FabricParams,
        seed: u64,
        stats_bin: SimTime,
        window: (SimTime, SimTime),
    ) -> Result<Self> {
        params.validate()?;
        if routing.tables.len() != topo.num_switches() {
            return Err(Error::config("routing does not match topology"));
        }
        let vls = usize::from(params.link.num_vls);
        let in_cap = params.link.buffer_blocks_per_vl;
        let out_cap = params.switch.output_blocks(params.host.max_packet_wire_bytes());
        let mut ports = Vec::new();
        for h in 0..topo.num_hosts() as HostId {
            ports.push(Port::new(
                NodeRef::Host(h),
                topo.host_link(h).0,
                vls,
                in_cap,
            ));
        }
        let mut switch_base = Vec::with_capacity(topo.num_switches());
        for s in 0..topo.num_switches() as u32 {
            switch_base.push(ports.len() as u32);
            for p in 0..topo.switch_port_count(s) {
                ports.push(Port::new(NodeRef::Switch(s), p as PortNum, vls, in_cap));
            }
        }
        let index = |e: Endpoint| match e.node {
            NodeRef::Host(h) => h,
            NodeRef::Switch(s) => switch_base[s as usize] + u32::from(e.port),
        };
        for link in topo.links() {
            let (a, b) = (index(link.a), index(link.b));
            ports[a as usize].peer = Some(b);
            ports[b as usize].peer = Some(a);
        }
        let hosts = (0..topo.num_hosts())
            .map(|h| HostState {
                queues: HostQueues::default(),
                rng: SimRng::for_component(seed, &format!("host/{}", topo.host_name(h as HostId))),
            })
            .collect();
        let stats = DeliveryStats::new(topo.num_hosts(), stats_bin, window.0, window.1);
        Ok(Fabric {
            prop: params.link.propagation_delay(),
            flit_time: params.link.flit_time(),
            xbar_delay: params.switch.crossbar_delay(),
            in_cap,
            out_cap,
            vls,
            params,
            topo,
            routing,
            queue: EventQueue::new(),
            ports,
            switch_base,
            hosts,
            messages: Vec::new(),
            stats,
            messages_completed: 0,
            posted_wire_bytes: 0,
            trace_digest: 0xcbf2_9ce4_8422_2325,
        })
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    /// Replaces the goodput measurement window.
    pub fn with_window(mut self, start: SimTime, end: SimTime) -> Self {
        self.stats.window_start = start;
        self.stats.window_end = end;
        self
    }

    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn num_hosts(&self) -> usize {
        self.topo.num_hosts()
    }

    pub fn message(&self, id: MessageId) -> &Message {
        &self.messages[id as usize]
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn stats(&self) -> &DeliveryStats {
        &self.stats
    }

    /// Random stream of a host, for traffic generators that sample per node.
    pub fn host_rng(&mut self, host: HostId) -> &mut SimRng {
        &mut self.hosts[host as usize].rng
    }

    /// Posts a message. It becomes eligible for transmission after one draw
    /// of the host's stack latency.
    pub fn post_message(
        &mut self,
        src: HostId,
        dest: HostId,
        size: u64,
        vl: u8,
        class: MessageClass,
        tag: Tag,
    ) -> Result<MessageId> {
        let n = self.num_hosts() as HostId;
        if src >= n || dest >= n {
            return Err(Error::config(format!("message endpoint out of range: {src} -> {dest}")));
        }
        if src == dest {
            return Err(Error::config("a host cannot send a network message to itself"));
        }
        if size == 0 {
            return Err(Error::config("message size must be >= 1"));
        }
        if usize::from(vl) >= self.vls {
            return Err(Error::config(format!("vl {vl} >= num_vls {}", self.vls)));
        }
        let now = self.now();
        let latency = self.params.host.stack_latency.sample(&mut self.hosts[src as usize].rng);
        let id = MessageId::try_from(self.messages.len()).expect("message id space exhausted");
        let ready = self.hosts[src as usize]
            .queues
            .push(id, dest, vl, now + latency);
        let packets = self.params.host.packet_count(size);
        self.posted_wire_bytes += self.params.host.wire_bytes(size);
        self.messages.push(Message {
            src,
            dest,
            size,
            vl,
            class,
            tag,
            posted_at: now,
            ready_at: ready,
            completed_at: None,
            packets,
            received: 0,
        });
        self.queue.schedule(ready, FabricEvent::HostWake(src));
        Ok(id)
    }

    /// Fires `Notice::Timer(host, token)` at `at`.
    pub fn schedule_timer(&mut self, host: HostId, at: SimTime, token: u64) {
        self.queue.schedule(at, FabricEvent::Timer(host, token));
    }

    pub(crate) fn pop_event(&mut self, end: SimTime) -> Option<SimEvent<FabricEvent>> {
        let ev = self.queue.pop_until(end)?;
        self.trace_digest = (self.trace_digest ^ ev.fire_at.as_ps())
            .wrapping_mul(0x0000_0100_0000_01b3)
            ^ ev.payload.kind();
        self.trace_digest = self.trace_digest.wrapping_mul(0x0000_0100_0000_01b3);
        Some(ev)
    }

    pub(crate) fn has_pending(&self) -> bool {
        !self.queue.is_empty()
    }

    pub(crate) fn close_at(&mut self, end: SimTime) {
        if self.has_pending() {
            self.queue.advance_to(end);
        }
    }

    pub(crate) fn handle(&mut self, ev: FabricEvent) -> Result<Option<Notice>> {
        match ev {
            FabricEvent::TxDone(p) => {
                self.ports[p as usize].busy = false;
                self.try_transmit(p);
                Ok(None)
            }
            FabricEvent::Arrive(p, pkt) => self.on_arrive(p, pkt),
            FabricEvent::Credit(p, vl, blocks) => {
                let port = &mut self.ports[p as usize];
                let v = usize::from(vl);
                port.inflight_credit[v] -= blocks;
                if port.credits.free(vl) + blocks > port.credits.capacity() {
                    return Err(self.invariant(format!("credit over-return on port {p} VL {vl}")));
                }
                port.credits.give_back(vl, blocks);
                self.try_transmit(p);
                Ok(None)
            }
            FabricEvent::Xbar(out, pkt) => {
                let port = &mut self.ports[out as usize];
                let v = usize::from(pkt.vl);
                port.xbar_transit[v] -= pkt.blocks();
                port.out_q[v].push_back(pkt);
                self.switch_try_transmit(out);
                Ok(None)
            }
            FabricEvent::HostWake(h) => {
                self.host_try_transmit(h);
                Ok(None)
            }
            FabricEvent::Timer(h, token) => Ok(Some(Notice::Timer(h, token))),
        }
    }

    fn invariant(&self, msg: String) -> Error {
        Error::Invariant {
            at_ps: self.now().as_ps(),
            msg,
        }
    }

    fn try_transmit(&mut self, p: u32) {
        match self.ports[p as usize].owner {
            NodeRef::Host(h) => self.host_try_transmit(h),
            NodeRef::Switch(_) => self.switch_try_transmit(p),
        }
    }

    fn host_try_transmit(&mut self, h: HostId) {
        let pi = h as usize;
        if self.ports[pi].busy || self.ports[pi].peer.is_none() {
            return;
        }
        let now = self.now();
        let header = self.params.host.header_bytes;
        let host = &mut self.hosts[pi].queues;
        let n = host.active.len();
        let mut chosen = None;
        let mut any_ready = false;
        for k in 0..n {
            let pos = (host.rr + k) % n;
            let q = &host.queues[host.active[pos]];
            let id = *q.msgs.front().expect("active queue is non-empty");
            let m = &self.messages[id as usize];
            if m.ready_at > now {
                continue;
            }
            any_ready = true;
            let wire = self.params.host.packet_payload(m.size, q.next_seq) + header;
            if self.ports[pi].credits.can_send(q.vl, blocks_for(wire)) {
                chosen = Some(pos);
                break;
            }
        }
        let Some(pos) = chosen else {
            if any_ready {
                self.ports[pi].start_wait(now);
            } else {
                self.ports[pi].stop_wait(now);
            }
            return;
        };
        let qi = host.active[pos];
        let q = &mut host.queues[qi];
        let id = *q.msgs.front().expect("active queue is non-empty");
        let m = &self.messages[id as usize];
        let seq = q.next_seq;
        let payload = self.params.host.packet_payload(m.size, seq);
        let last = seq + 1 == m.packets;
        let pkt = Packet {
            msg: id,
            seq,
            last,
            src: h,
            dest: q.dest,
            vl: q.vl,
            payload,
            wire: payload + header,
        };
        if last {
            q.msgs.pop_front();
            q.next_seq = 0;
            if q.msgs.is_empty() {
                host.retire(pos);
            } else {
                host.rr = pos + 1;
            }
        } else {
            q.next_seq += 1;
            host.rr = pos + 1;
        }
        let port = &mut self.ports[pi];
        port.stop_wait(now);
        let ok = port.credits.try_consume(pkt.vl, pkt.blocks());
        debug_assert!(ok);
        self.start_tx(h, pkt);
    }

    fn switch_try_transmit(&mut self, p: u32) {
        let now = self.now();
        let port = &mut self.ports[p as usize];
        if port.busy || port.peer.is_none() {
            return;
        }
        let (choice, queued) = vl_arbitrate(&port.out_q, &port.credits, port.rr_vl);
        let Some(vl) = choice else {
            if queued {
                port.start_wait(now);
            } else {
                port.stop_wait(now);
            }
            return;
        };
        let v = usize::from(vl);
        port.stop_wait(now);
        let pkt = port.out_q[v].pop_front().expect("arbiter picked a non-empty VL");
        let ok = port.credits.try_consume(vl, pkt.blocks());
        debug_assert!(ok);
        port.out_occ[v] -= pkt.blocks();
        port.rr_vl = (v + 1) % self.vls;
        self.start_tx(p, pkt);
        self.grant(p, v);
    }

    fn start_tx(&mut self, p: u32, pkt: Packet) {
        let now = self.now();
        let ser = serialization_time(u64::from(pkt.wire), &self.params.link);
        let port = &mut self.ports[p as usize];
        port.busy = true;
        port.bytes_tx += u64::from(pkt.wire);
        port.packets_tx += 1;
        port.inflight_data[usize::from(pkt.vl)] += pkt.blocks();
        let peer = port.peer.expect("transmitting port is cabled");
        let into_switch = matches!(self.ports[peer as usize].owner, NodeRef::Switch(_));
        let arrive = if self.params.switch.cut_through && into_switch {
            now + self.flit_time.min(ser) + self.prop
        } else {
            now + ser + self.prop
        };
        self.queue.schedule(now + ser, FabricEvent::TxDone(p));
        self.queue.schedule(arrive, FabricEvent::Arrive(peer, pkt));
    }

    fn return_credits(&mut self, receiver: u32, vl: usize, blocks: u32) {
        let sender = self.ports[receiver as usize].peer.expect("cabled");
        self.ports[sender as usize].inflight_credit[vl] += blocks;
        let at = self.now() + self.prop;
        self.queue
            .schedule(at, FabricEvent::Credit(sender, vl as u8, blocks));
    }

    fn on_arrive(&mut self, p: u32, pkt: Packet) -> Result<Option<Notice>> {
        let now = self.now();
        let v = usize::from(pkt.vl);
        let blocks = pkt.blocks();
        let sender = self.ports[p as usize].peer.expect("cabled");
        self.ports[sender as usize].inflight_data[v] -= blocks;
        let in_cap = self.in_cap;
        let port = &mut self.ports[p as usize];
        port.in_occ[v] += blocks;
        if port.in_occ[v] > in_cap {
            return Err(self.invariant(format!("input buffer overflow on port {p} VL {v}")));
        }
        port.max_occ[v] = port.max_occ[v].max(port.in_occ[v]);
        match port.owner {
            NodeRef::Host(h) => {
                port.in_occ[v] -= blocks;
                if pkt.dest != h {
                    return Err(self.invariant(format!(
                        "packet for host {} delivered to host {h}",
                        pkt.dest
                    )));
                }
                self.return_credits(p, v, blocks);
                let m = &mut self.messages[pkt.msg as usize];
                if pkt.seq != m.received {
                    let msg = format!(
                        "message {} packet {} arrived, expected {} (duplicate or reordered)",
                        pkt.msg, pkt.seq, m.received
                    );
                    return Err(self.invariant(msg));
                }
                m.received += 1;
                if m.class == MessageClass::Data {
                    self.stats.record(now, h, pkt.payload);
                }
                if pkt.last {
                    m.completed_at = Some(now);
                    self.messages_completed += 1;
                    return Ok(Some(Notice::Delivered(pkt.msg)));
                }
                Ok(None)
            }
            NodeRef::Switch(s) => {
                let local = self.routing.table(s).get(pkt.dest).ok_or_else(|| {
                    Error::RoutingHole {
                        switch: self.topo.switch_name(s).to_string(),
                        dest: self.topo.host_name(pkt.dest).to_string(),
                    }
                })?;
                let out = self.switch_base[s as usize] + u32::from(local);
                if self.ports.get(out as usize).and_then(|o| o.peer).is_none()
                    || self.ports[out as usize].owner != NodeRef::Switch(s)
                {
                    return Err(Error::RoutingHole {
                        switch: self.topo.switch_name(s).to_string(),
                        dest: self.topo.host_name(pkt.dest).to_string(),
                    });
                }
                let port = &mut self.ports[p as usize];
                port.in_q[v].push_back((pkt, out));
                if port.in_q[v].len() == 1 {
                    self.try_crossbar(p, v, false);
                }
                Ok(None)
            }
        }
    }

    /// Moves head packets of input `inp` on `vl` across the crossbar while
    /// their outputs have room. `granted` lets the first packet bypass the
    /// output's waiting list, because the grant already came from it.
    fn try_crossbar(&mut self, inp: u32, vl: usize, granted: bool) {
        let mut first = true;
        loop {
            let Some(&(pkt, out)) = self.ports[inp as usize].in_q[vl].front() else {
                break;
            };
            let blocks = pkt.blocks();
            let o = &self.ports[out as usize];
            let fair = (first && granted) || o.waiters[vl].is_empty();
            let fits = o.out_occ[vl] + blocks <= self.out_cap;
            if !(fair && fits) {
                if !self.ports[inp as usize].registered[vl] {
                    self.ports[inp as usize].registered[vl] = true;
                    self.ports[out as usize].waiters[vl].push_back(inp);
                }
                break;
            }
            first = false;
            let port = &mut self.ports[inp as usize];
            port.in_q[vl].pop_front();
            port.in_occ[vl] -= blocks;
            self.return_credits(inp, vl, blocks);
            let o = &mut self.ports[out as usize];
            o.out_occ[vl] += blocks;
            o.xbar_transit[vl] += blocks;
            let at = self.now() + self.xbar_delay;
            self.queue.schedule(at, FabricEvent::Xbar(out, pkt));
        }
    }

    /// Hands freed output space on `vl` to waiting inputs, oldest first.
    fn grant(&mut self, out: u32, vl: usize) {
        while let Some(&inp) = self.ports[out as usize].waiters[vl].front() {
            let (pkt, target) = *self.ports[inp as usize].in_q[vl]
                .front()
                .expect("a waiting input has a head packet");
            debug_assert_eq!(target, out);
            if self.ports[out as usize].out_occ[vl] + pkt.blocks() > self.out_cap {
                break;
            }
            self.ports[out as usize].waiters[vl].pop_front();
            self.ports[inp as usize].registered[vl] = false;
            self.try_crossbar(inp, vl, true);
        }
    }

    /// Checks credit conservation on every link direction and VL:
    /// sender free blocks + data in flight + receiver occupancy + credits in
    /// flight equals the receive buffer size. Also checks output-buffer
    /// bookkeeping and input occupancy against queued packets.
    pub fn audit(&self) -> Result<()> {
        for (pi, port) in self.ports.iter().enumerate() {
            let Some(peer) = port.peer else { continue };
            let rx = &self.ports[peer as usize];
            for v in 0..self.vls {
                let sum = port.credits.free(v as u8)
                    + port.inflight_data[v]
                    + rx.in_occ[v]
                    + port.inflight_credit[v];
                if sum != self.in_cap {
                    return Err(self.invariant(format!(
                        "credit conservation broken on port {pi} VL {v}: free {} + in-flight {} + occupancy {} + returning {} != {}",
                        port.credits.free(v as u8),
                        port.inflight_data[v],
                        rx.in_occ[v],
                        port.inflight_credit[v],
                        self.in_cap
                    )));
                }
                if rx.in_occ[v] > self.in_cap {
                    return Err(self.invariant(format!("port {peer} VL {v} over capacity")));
                }
                let queued_in: u32 = rx.in_q[v].iter().map(|(p, _)| p.blocks()).sum();
                if queued_in != rx.in_occ[v] {
                    return Err(self.invariant(format!(
                        "port {peer} VL {v} occupancy {} != queued {queued_in}",
                        rx.in_occ[v]
                    )));
                }
                let queued_out: u32 = port.out_q[v].iter().map(|p| p.blocks()).sum();
                if port.out_occ[v] != queued_out + port.xbar_transit[v]
                    || port.out_occ[v] > self.out_cap
                {
                    return Err(self.invariant(format!(
                        "output buffer bookkeeping broken on port {pi} VL {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when no packet, credit or message is anywhere in the fabric.
    pub fn is_drained(&self) -> bool {
        self.hosts.iter().all(|h| h.queues.is_empty())
            && self.ports.iter().all(|p| {
                !p.busy
                    && p.in_occ.iter().all(|x| *x == 0)
                    && p.out_occ.iter().all(|x| *x == 0)
                    && p.inflight_data.iter().all(|x| *x == 0)
                    && p.inflight_credit.iter().all(|x| *x == 0)
                    && (p.peer.is_none()
                        || (0..self.vls).all(|v| p.credits.free(v as u8) == self.in_cap))
            })
    }

    /// Current input occupancy of a port, in blocks.
    pub fn input_occupancy(&self, node: NodeRef, port: PortNum, vl: u8) -> u32 {
        self.port_index(node, port)
            .map_or(0, |i| self.ports[i].in_occ[usize::from(vl)])
    }

    /// Credits the transmitter at `(node, port)` holds for `vl`.
    pub fn free_credits(&self, node: NodeRef, port: PortNum, vl: u8) -> u32 {
        self.port_index(node, port)
            .map_or(0, |i| self.ports[i].credits.free(vl))
    }

    fn port_index(&self, node: NodeRef, port: PortNum) -> Option<usize> {
        match node {
            NodeRef::Host(h) => Some(h as usize),
            NodeRef::Switch(s) => {
                let base = *self.switch_base.get(s as usize)? as usize;
                let i = base + usize::from(port);
                (self.ports.get(i)?.owner == node).then_some(i)
            }
        }
    }

    pub fn counters(&self) -> CounterSet {
        let now = self.now();
        let tick = self.params.switch.xmit_wait_tick_ps;
        CounterSet {
            now,
            events_processed: self.queue.processed(),
            trace_digest: self.trace_digest,
            ports: self
                .ports
                .iter()
                .filter(|p| p.peer.is_some())
                .map(|p| {
                    let wait = p.wait_total(now);
                    PortCounters {
                        node: p.owner,
                        port: p.number,
                        xmit_wait_ticks: wait / tick,
                        xmit_wait_ps: wait,
                        bytes_tx: p.bytes_tx,
                        packets_tx: p.packets_tx,
                        max_occupancy_blocks: p.max_occ.clone(),
                    }
                })
                .collect(),
            messages_posted: self.messages.len() as u64,
            messages_completed: self.messages_completed,
            posted_wire_bytes: self.posted_wire_bytes,
            delivered_payload_bytes: self.stats.total_bytes,
        }
    }
}

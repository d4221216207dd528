//! Event builder with folded roles: every node is a readout unit (RU) holding
//! one fragment of each event and a builder unit (BU) assembling the events
//! the event manager (EM) hands it.
//!
//! A BU works on at most `credits` events at once and keeps at most
//! `parallel_sends` fragments of each event in flight. It collects the
//! fragments in barrel order starting after itself, `b+1, b+2, ..., b-1`,
//! then copies its own fragment locally. Nothing is synchronized: each BU
//! moves on as soon as its fragments land.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::FragmentSize;
use crate::engine::{EventRecord, Injector};
use crate::error::{Error, Result};
use crate::fabric::Fabric;
use crate::host::{MessageClass, MessageId, Tag};
use crate::sim::SimRng;
use crate::topology::HostId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PullMode {
    /// The BU sends a small request; the RU answers with the fragment.
    Pull,
    /// The RU sends the fragment without being asked.
    Push,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaqpipeConfig {
    pub credits: u32,
    pub parallel_sends: u32,
    pub fragment_size: FragmentSize,
    pub mode: PullMode,
    pub request_bytes: u64,
    pub data_vl: u8,
    pub request_vl: u8,
    /// Route EM assignments and completions over the network as small
    /// control messages instead of handling them instantly.
    pub em_control: bool,
    pub em_host: HostId,
    pub control_bytes: u64,
    pub control_vl: u8,
    /// Stop assigning after this many events; `None` runs until the end.
    pub events_total: Option<u64>,
}

impl Default for DaqpipeConfig {
    fn default() -> Self {
        Self {
            credits: 2,
            parallel_sends: 2,
            fragment_size: FragmentSize::default(),
            mode: PullMode::Pull,
            request_bytes: 64,
            data_vl: 0,
            request_vl: 0,
            em_control: false,
            em_host: 0,
            control_bytes: 64,
            control_vl: 1,
            events_total: None,
        }
    }
}

impl DaqpipeConfig {
    pub fn validate(&self, num_vls: u8) -> Result<()> {
        if self.credits == 0 || self.parallel_sends == 0 {
            return Err(Error::config("credits and parallel_sends must be >= 1"));
        }
        if self.request_bytes == 0 || self.control_bytes == 0 {
            return Err(Error::config("request and control messages need >= 1 byte"));
        }
        for vl in [self.data_vl, self.request_vl, self.control_vl] {
            if vl >= num_vls {
                return Err(Error::config(format!("daqpipe vl {vl} >= num_vls {num_vls}")));
            }
        }
        self.fragment_size.validate()
    }
}

#[derive(Debug, Clone, Copy)]
enum Purpose {
    Request { event: u64, ru: HostId },
    Fragment { event: u64 },
    Assign { event: u64 },
    Done { bu: HostId },
}

#[derive(Debug, Clone)]
struct Event {
    bu: HostId,
    sizes: Vec<u64>,
    /// Next barrel offset to fetch, in `1..n`.
    next: u32,
    outstanding: u32,
    done: u32,
    started: bool,
}

pub struct Daqpipe {
    cfg: DaqpipeConfig,
    n: u32,
    rng: SimRng,
    next_event: u64,
    em_rr: u32,
    /// Events charged against each BU's credits, as the EM sees them.
    bu_load: Vec<u32>,
    live: HashMap<u64, Event>,
    purpose: Vec<Option<Purpose>>,
    records: Vec<EventRecord>,
    record_index: HashMap<u64, usize>,
    fragments_delivered: u64,
    max_outstanding_seen: u32,
}

impl Daqpipe {
    pub fn new(cfg: DaqpipeConfig, n: u32, rng: SimRng) -> Self {
        Self {
            bu_load: vec![0; n as usize],
            cfg,
            n,
            rng,
            next_event: 0,
            em_rr: 0,
            live: HashMap::new(),
            purpose: Vec::new(),
            records: Vec::new(),
            record_index: HashMap::new(),
            fragments_delivered: 0,
            max_outstanding_seen: 0,
        }
    }

    /// Events assigned and not yet complete, per BU.
    pub fn in_flight(&self) -> Vec<u32> {
        let mut v = vec![0; self.n as usize];
        for e in self.live.values() {
            v[e.bu as usize] += 1;
        }
        v
    }

    pub fn events_completed(&self) -> u64 {
        self.records.iter().filter(|r| r.completed_at.is_some()).count() as u64
    }

    pub fn fragments_delivered(&self) -> u64 {
        self.fragments_delivered
    }

    /// Largest number of fragments of one event ever in flight together.
    pub fn max_outstanding_seen(&self) -> u32 {
        self.max_outstanding_seen
    }

    fn post(
        &mut self,
        fabric: &mut Fabric,
        src: HostId,
        dest: HostId,
        size: u64,
        vl: u8,
        class: MessageClass,
        tag: Tag,
        purpose: Purpose,
    ) -> Result<()> {
        let id = fabric.post_message(src, dest, size, vl, class, tag)? as usize;
        if self.purpose.len() <= id {
            self.purpose.resize(id + 1, None);
        }
        self.purpose[id] = Some(purpose);
        Ok(())
    }

    /// Zero-latency round-robin over BUs with spare credits.
    fn em_assign(&mut self, fabric: &mut Fabric) -> Result<()> {
        loop {
            if self.cfg.events_total.is_some_and(|t| self.next_event >= t) {
                return Ok(());
            }
            let Some(b) = (0..self.n)
                .map(|k| (self.em_rr + k) % self.n)
                .find(|b| self.bu_load[*b as usize] < self.cfg.credits)
            else {
                return Ok(());
            };
            self.em_rr = (b + 1) % self.n;
            self.bu_load[b as usize] += 1;
            let id = self.next_event;
            self.next_event += 1;
            let sizes = (0..self.n)
                .map(|_| self.cfg.fragment_size.sample(&mut self.rng))
                .collect();
            let now = fabric.now();
            self.live.insert(
                id,
                Event {
                    bu: b,
                    sizes,
                    next: 1,
                    outstanding: 0,
                    done: 0,
                    started: false,
                },
            );
            self.record_index.insert(id, self.records.len());
            self.records.push(EventRecord {
                event_id: id,
                builder: b,
                assigned_at: now,
                completed_at: None,
            });
            if self.cfg.em_control && b != self.cfg.em_host {
                let tag = Tag { event: id, fragment: 0 };
                let (em, bytes, vl) = (self.cfg.em_host, self.cfg.control_bytes, self.cfg.control_vl);
                self.post(fabric, em, b, bytes, vl, MessageClass::Control, tag, Purpose::Assign { event: id })?;
            } else {
                self.bu_start(fabric, id)?;
            }
        }
    }

    fn bu_start(&mut self, fabric: &mut Fabric, event: u64) -> Result<()> {
        self.live.get_mut(&event).expect("live event").started = true;
        self.bu_fetch(fabric, event)
    }

    /// Opens fetches until `parallel_sends` fragments are in flight.
    fn bu_fetch(&mut self, fabric: &mut Fabric, event: u64) -> Result<()> {
        loop {
            let e = self.live.get_mut(&event).expect("live event");
            if e.outstanding >= self.cfg.parallel_sends || e.next >= self.n {
                break;
            }
            let b = e.bu;
            let ru = (b + e.next) % self.n;
            e.next += 1;
            e.outstanding += 1;
            self.max_outstanding_seen = self.max_outstanding_seen.max(e.outstanding);
            let tag = Tag {
                event,
                fragment: ru,
            };
            match self.cfg.mode {
                PullMode::Pull => {
                    let (bytes, vl) = (self.cfg.request_bytes, self.cfg.request_vl);
                    self.post(
                        fabric,
                        b,
                        ru,
                        bytes,
                        vl,
                        MessageClass::Control,
                        tag,
                        Purpose::Request { event, ru },
                    )?;
                }
                PullMode::Push => self.ru_send(fabric, event, ru)?,
            }
        }
        Ok(())
    }

    fn ru_send(&mut self, fabric: &mut Fabric, event: u64, ru: HostId) -> Result<()> {
        let e = &self.live[&event];
        let (bu, size) = (e.bu, e.sizes[ru as usize]);
        let tag = Tag {
            event,
            fragment: ru,
        };
        let vl = self.cfg.data_vl;
        self.post(fabric, ru, bu, size, vl, MessageClass::Data, tag, Purpose::Fragment { event })
    }

    fn bu_fragment_landed(&mut self, fabric: &mut Fabric, event: u64) -> Result<()> {
        self.fragments_delivered += 1;
        let e = self.live.get_mut(&event).expect("live event");
        e.outstanding -= 1;
        e.done += 1;
        if e.done + 1 < self.n {
            return self.bu_fetch(fabric, event);
        }
        // every remote fragment is in; the own fragment is a local copy
        let e = self.live.remove(&event).expect("live event");
        let now = fabric.now();
        let rec = self.record_index.remove(&event).expect("record");
        self.records[rec].completed_at = Some(now);
        if self.cfg.em_control && e.bu != self.cfg.em_host {
            let (em, bytes, vl) = (self.cfg.em_host, self.cfg.control_bytes, self.cfg.control_vl);
            let tag = Tag { event, fragment: 0 };
            self.post(fabric, e.bu, em, bytes, vl, MessageClass::Control, tag, Purpose::Done { bu: e.bu })
        } else {
            self.bu_load[e.bu as usize] -= 1;
            self.em_assign(fabric)
        }
    }
}

impl Injector for Daqpipe {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()> {
        if self.n < 2 {
            return Ok(());
        }
        if self.cfg.em_host >= self.n {
            return Err(Error::config(format!("em_host {} out of range", self.cfg.em_host)));
        }
        self.em_assign(fabric)
    }

    fn on_delivered(&mut self, fabric: &mut Fabric, msg: MessageId) -> Result<()> {
        let purpose = self
            .purpose
            .get(msg as usize)
            .copied()
            .flatten()
            .expect("every message has a purpose");
        match purpose {
            Purpose::Request { event, ru } => self.ru_send(fabric, event, ru),
            Purpose::Fragment { event } => self.bu_fragment_landed(fabric, event),
            Purpose::Assign { event } => self.bu_start(fabric, event),
            Purpose::Done { bu } => {
                self.bu_load[bu as usize] -= 1;
                self.em_assign(fabric)
            }
        }
    }

    fn records(&self) -> Vec<EventRecord> {
        self.records.clone()
    }

    fn check(&self) -> Result<()> {
        let fail = |msg: String| Error::Invariant { at_ps: 0, msg };
        let flight = self.in_flight();
        for (b, (&load, &inflight)) in self.bu_load.iter().zip(&flight).enumerate() {
            if load > self.cfg.credits || inflight > load {
                return Err(fail(format!(
                    "BU {b} holds {inflight} events ({load} charged), credits {}",
                    self.cfg.credits
                )));
            }
        }
        for (id, e) in &self.live {
            if e.outstanding > self.cfg.parallel_sends {
                return Err(fail(format!("event {id} has {} fragments in flight", e.outstanding)));
            }
            if !e.started && e.outstanding > 0 {
                return Err(fail(format!("event {id} fetching before its assignment arrived")));
            }
        }
        Ok(())
    }
}

//! The run loop: pops fabric events in order and forwards deliveries and
//! timers to the traffic injector.

use crate::error::{Error, Result};
use crate::fabric::{CounterSet, Fabric, Notice};
use crate::host::MessageId;
use crate::sim::SimTime;
use crate::topology::HostId;

/// Completion record of one application-level event (DAQPIPE event).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventRecord {
    pub event_id: u64,
    pub builder: HostId,
    pub assigned_at: SimTime,
    pub completed_at: Option<SimTime>,
}

/// A traffic source. Callbacks run inline with the engine and may post
/// messages or timers through the fabric.
pub trait Injector {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()>;

    fn on_delivered(&mut self, fabric: &mut Fabric, msg: MessageId) -> Result<()>;

    fn on_timer(&mut self, _fabric: &mut Fabric, _host: HostId, _token: u64) -> Result<()> {
        Ok(())
    }

    fn records(&self) -> Vec<EventRecord> {
        Vec::new()
    }

    /// Checks injector-level invariants (credit bounds and the like).
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

/// Injector that never sends anything.
#[derive(Debug, Default)]
pub struct Idle;

impl Injector for Idle {
    fn start(&mut self, _fabric: &mut Fabric) -> Result<()> {
        Ok(())
    }

    fn on_delivered(&mut self, _fabric: &mut Fabric, _msg: MessageId) -> Result<()> {
        Ok(())
    }
}

pub struct Simulation {
    fabric: Fabric,
    injector: Box<dyn Injector + Send>,
    audit: bool,
    started: bool,
    stopped: bool,
}

impl Simulation {
    pub fn new(fabric: Fabric, injector: Box<dyn Injector + Send>) -> Self {
        Self {
            fabric,
            injector,
            audit: false,
            started: false,
            stopped: false,
        }
    }

    /// Runs the full credit audit after every event. Slow; for tests.
    pub fn with_audit(mut self, on: bool) -> Self {
        self.audit = on;
        self
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn fabric_mut(&mut self) -> &mut Fabric {
        &mut self.fabric
    }

    pub fn injector(&self) -> &(dyn Injector + Send) {
        self.injector.as_ref()
    }

    pub fn now(&self) -> SimTime {
        self.fabric.now()
    }

    /// Processes every event with `fire_at <= end`. The clock ends at `end`
    /// if events remain beyond it, else at the last event fired.
    pub fn run_until(&mut self, end: SimTime) -> Result<CounterSet> {
        if !self.started {
            self.started = true;
            self.injector.start(&mut self.fabric)?;
        }
        let mut last = self.fabric.now();
        while let Some(ev) = self.fabric.pop_event(end) {
            if ev.fire_at < last {
                return Err(Error::Invariant {
                    at_ps: ev.fire_at.as_ps(),
                    msg: format!("event order violated: previous event at {last}"),
                });
            }
            last = ev.fire_at;
            let notice = self.fabric.handle(ev.payload)?;
            if let (Some(n), false) = (notice, self.stopped) {
                match n {
                    Notice::Delivered(id) => self.injector.on_delivered(&mut self.fabric, id)?,
                    Notice::Timer(h, token) => self.injector.on_timer(&mut self.fabric, h, token)?,
                }
            }
            if self.audit {
                self.fabric.audit()?;
                self.injector.check()?;
            }
        }
        self.fabric.close_at(end);
        Ok(self.fabric.counters())
    }

    /// Stops the injector and lets the fabric empty, giving up at `limit`.
    /// Returns whether everything drained.
    pub fn drain(&mut self, limit: SimTime) -> Result<bool> {
        self.stopped = true;
        let end = limit.max(self.now());
        self.run_until(end)?;
        Ok(self.fabric.is_drained())
    }

    pub fn records(&self) -> Vec<EventRecord> {
        self.injector.records()
    }

    pub fn into_parts(self) -> (Fabric, Box<dyn Injector + Send>) {
        (self.fabric, self.injector)
    }
}

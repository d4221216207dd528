//! Discrete-event engine core: the picosecond time base, the pending-event
//! set and per-component random streams.
//!
//! Events are ordered by `(fire_at, sequence)` where `sequence` is the
//! insertion counter, so simultaneous events fire in the order they were
//! scheduled and every run with the same seed replays identically.

mod queue;
mod rng;
mod time;

pub use queue::{EventQueue, SimEvent};
pub use rng::{derive_seed, SimRng};
pub use time::SimTime;

//! Traffic injectors: linear shifters, the DAQPIPE event builder and a
//! fixed script of messages.

mod daqpipe;
mod fragment;
mod script;
mod shifter;

use serde::{Deserialize, Serialize};

pub use daqpipe::{Daqpipe, DaqpipeConfig, PullMode};
pub use fragment::FragmentSize;
pub use script::{Script, ScriptedMessage};
pub use shifter::{FixedSizeShifter, TimeWindowShifter};

use crate::engine::Injector;
use crate::error::{Error, Result};
use crate::sim::{SimRng, SimTime};

/// Destination of node `i` in phase `n` of a linear shift over `count` nodes.
pub fn shifter_dest(i: u32, n: u32, count: u32) -> u32 {
    assert!(i < count, "node {i} out of range for {count} nodes");
    ((u64::from(n) + u64::from(i)) % u64::from(count)) as u32
}

fn default_message_size() -> u64 {
    1 << 20
}

fn default_outstanding() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficConfig {
    /// Each node moves to its next destination after `chunk_size` bytes.
    FixedSizeShifter {
        chunk_size: u64,
        #[serde(default = "default_message_size")]
        message_size: u64,
        #[serde(default)]
        vl: u8,
        /// Messages a node keeps posted but undelivered.
        #[serde(default = "default_outstanding")]
        outstanding: u32,
    },
    /// All nodes change destination together every `window_ns`, and stay
    /// quiet for the last `grace_ns` of each window.
    TimeWindowShifter {
        window_ns: u64,
        #[serde(default)]
        grace_ns: u64,
        #[serde(default = "default_message_size")]
        message_size: u64,
        #[serde(default)]
        vl: u8,
    },
    Daqpipe(DaqpipeConfig),
    Script {
        messages: Vec<ScriptedMessage>,
    },
    Idle,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig::Daqpipe(DaqpipeConfig::default())
    }
}

impl TrafficConfig {
    pub fn validate(&self, hosts: u32, num_vls: u8) -> Result<()> {
        let vl_ok = |vl: u8| {
            if vl < num_vls {
                Ok(())
            } else {
                Err(Error::config(format!("traffic vl {vl} >= num_vls {num_vls}")))
            }
        };
        match self {
            TrafficConfig::FixedSizeShifter {
                chunk_size,
                message_size,
                vl,
                outstanding,
            } => {
                if *chunk_size == 0 || *message_size == 0 || *outstanding == 0 {
                    return Err(Error::config(
                        "chunk_size, message_size and outstanding must be >= 1",
                    ));
                }
                vl_ok(*vl)
            }
            TrafficConfig::TimeWindowShifter {
                window_ns,
                grace_ns,
                message_size,
                vl,
            } => {
                if *window_ns == 0 || grace_ns >= window_ns {
                    return Err(Error::config("time window needs 0 <= grace < window"));
                }
                if *message_size == 0 {
                    return Err(Error::config("message_size must be >= 1"));
                }
                vl_ok(*vl)
            }
            TrafficConfig::Daqpipe(d) => d.validate(num_vls),
            TrafficConfig::Script { messages } => {
                for m in messages {
                    if m.src >= hosts || m.dest >= hosts || m.src == m.dest || m.size == 0 {
                        return Err(Error::config(format!("bad scripted message {m:?}")));
                    }
                    vl_ok(m.vl)?;
                }
                Ok(())
            }
            TrafficConfig::Idle => Ok(()),
        }
    }

    /// Builds the injector for a fabric of `hosts` nodes.
    pub fn build(
        &self,
        hosts: u32,
        seed: u64,
        line: &crate::link::LinkParams,
        host: &crate::host::HostParams,
    ) -> Box<dyn Injector + Send> {
        match self {
            TrafficConfig::FixedSizeShifter {
                chunk_size,
                message_size,
                vl,
                outstanding,
            } => Box::new(FixedSizeShifter::new(
                hosts,
                *chunk_size,
                *message_size,
                *vl,
                *outstanding,
            )),
            TrafficConfig::TimeWindowShifter {
                window_ns,
                grace_ns,
                message_size,
                vl,
            } => Box::new(TimeWindowShifter::new(
                hosts,
                SimTime::from_ns(*window_ns),
                SimTime::from_ns(*grace_ns),
                *message_size,
                *vl,
                host.wire_time(*message_size, line),
            )),
            TrafficConfig::Daqpipe(d) => Box::new(Daqpipe::new(
                d.clone(),
                hosts,
                SimRng::for_component(seed, "traffic/daqpipe"),
            )),
            TrafficConfig::Script { messages } => Box::new(Script::new(messages.clone())),
            TrafficConfig::Idle => Box::new(crate::engine::Idle),
        }
    }

    /// The sweep knobs, when this is a DAQPIPE config.
    pub fn with_credits_and_sends(&self, credits: u32, parallel_sends: u32) -> Result<Self> {
        match self {
            TrafficConfig::Daqpipe(d) => Ok(TrafficConfig::Daqpipe(DaqpipeConfig {
                credits,
                parallel_sends,
                ..d.clone()
            })),
            _ => Err(Error::config("sweep needs a daqpipe traffic config")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dest_examples() {
        assert_eq!(shifter_dest(1, 2, 4), 3);
        assert_eq!(shifter_dest(3, 0, 4), 3);
    }

    #[test]
    fn every_destination_once() {
        for n in 1..=64u32 {
            for i in 0..n {
                let mut seen = vec![false; n as usize];
                for phase in 0..n {
                    let d = shifter_dest(i, phase, n) as usize;
                    assert!(!seen[d]);
                    seen[d] = true;
                }
            }
        }
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"kind":"time_window_shifter","window_ns":1000000,"grace_ns":100000}"#;
        let cfg: TrafficConfig = serde_json::from_str(text).unwrap();
        assert_eq!(
            cfg,
            TrafficConfig::TimeWindowShifter {
                window_ns: 1_000_000,
                grace_ns: 100_000,
                message_size: 1 << 20,
                vl: 0
            }
        );
        assert!(cfg.validate(8, 4).is_ok());
        let back: TrafficConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let bad = r#"{"kind":"time_window_shifter","window_ns":10,"grace_ns":10}"#;
        let cfg: TrafficConfig = serde_json::from_str(bad).unwrap();
        assert!(cfg.validate(8, 4).is_err());
    }

    #[test]
    fn daqpipe_defaults_parse() {
        let cfg: TrafficConfig = serde_json::from_str(r#"{"kind":"daqpipe"}"#).unwrap();
        let TrafficConfig::Daqpipe(d) = cfg else {
            panic!()
        };
        assert_eq!(d, DaqpipeConfig::default());
    }
}

use serde::{Deserialize, Serialize};

use crate::engine::Injector;
use crate::error::Result;
use crate::fabric::Fabric;
use crate::host::{MessageClass, MessageId, Tag};
use crate::sim::SimTime;
use crate::topology::HostId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedMessage {
    #[serde(default)]
    pub at_ns: u64,
    pub src: HostId,
    pub dest: HostId,
    pub size: u64,
    #[serde(default)]
    pub vl: u8,
}

/// Posts a fixed list of messages at fixed times.
#[derive(Debug, Clone)]
pub struct Script {
    messages: Vec<ScriptedMessage>,
}

impl Script {
    pub fn new(messages: Vec<ScriptedMessage>) -> Self {
        Self { messages }
    }
}

impl Injector for Script {
    fn start(&mut self, fabric: &mut Fabric) -> Result<()> {
        for (i, m) in self.messages.iter().enumerate() {
            if m.at_ns == 0 {
                post(fabric, m)?;
            } else {
                fabric.schedule_timer(m.src, SimTime::from_ns(m.at_ns), i as u64);
            }
        }
        Ok(())
    }

    fn on_delivered(&mut self, _fabric: &mut Fabric, _msg: MessageId) -> Result<()> {
        Ok(())
    }

    fn on_timer(&mut self, fabric: &mut Fabric, _host: HostId, token: u64) -> Result<()> {
        let m = self.messages[token as usize].clone();
        post(fabric, &m)
    }
}

fn post(fabric: &mut Fabric, m: &ScriptedMessage) -> Result<()> {
    fabric
        .post_message(m.src, m.dest, m.size, m.vl, MessageClass::Data, Tag::default())
        .map(|_| ())
}

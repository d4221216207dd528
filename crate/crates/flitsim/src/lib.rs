pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod fabric;
pub mod host;
pub mod latency;
pub mod link;
pub mod report;
pub mod sim;
pub mod switch;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};

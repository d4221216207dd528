// The guide's chapters, pulled in as docs so `cargo test --doc` compiles and
// runs every snippet in book/. Nothing to see here otherwise.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/fabric.md")]
pub mod fabric {}

#[doc = include_str!("../../../book/src/topology.md")]
pub mod topology {}

#[doc = include_str!("../../../book/src/traffic.md")]
pub mod traffic {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/config.md")]
pub mod config {}

//! Library surface of the runner: configuration, the synthetic stream
//! generator, and report serialization. The `augur` binary is a thin shell
//! over these modules.

pub mod config;
pub mod report;
pub mod synth;

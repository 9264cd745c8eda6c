//! Scenario harness for the soliton-superchannel link model: configuration,
//! BER sweeps, eye and budget exports, and the built-in self-test.

pub mod config;
pub mod eye;
pub mod oracles;
pub mod report;
pub mod scenario;
pub mod selftest;

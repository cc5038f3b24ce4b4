//! Command-line harness around the takeover simulation core: batch
//! experiments, offline analysis, expert trace generation and the live
//! cockpit session server.

pub mod analyze;
pub mod config;
pub mod experiment;
pub mod protocol;
pub mod session;
pub mod report;

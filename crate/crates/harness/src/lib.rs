//! Experiment driver: trace synthesis, scoring and the sweeps behind the `lrfhss` CLI.

pub mod config;
pub mod experiments;
pub mod quality;
pub mod score;
pub mod synth;
pub mod trace_io;

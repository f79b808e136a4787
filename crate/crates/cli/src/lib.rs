//! Command-line pipelines over `qmem-core`: each run writes its artifacts
//! and a manifest into one directory and prints a JSON summary.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;
pub mod states;

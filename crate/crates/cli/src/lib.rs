//! File-driven batch runs for energy community studies: configuration,
//! CSV ingestion, the command pipelines and fixed-format output.

pub mod commands;
pub mod config;
pub mod io;
pub mod output;

pub use commands::{run, Command, Format, Outcome, Run};
pub use config::Config;

//! End-to-end runs: configuration, attack and evaluation pipeline, commands.

mod commands;
mod config;
mod pipeline;

pub use commands::*;
pub use config::*;
pub use pipeline::*;

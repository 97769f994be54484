//! Batch front-end for `lcsk-core`: configuration, IO formats, a rayon
//! executor and the command implementations behind the `lcsk` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod pool;
pub mod report;

pub use config::RunConfig;
pub use error::CliError;
pub use pipeline::Context;

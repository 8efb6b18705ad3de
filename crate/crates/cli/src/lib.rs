//! Command-line entry points and the HTTP service for the inspection-comment
//! toolkit.

pub mod backend;
pub mod cli;
pub mod commands;
pub mod config;
pub mod service;

pub use cli::{run, Cli};
pub use commands::{Env, Outcome};
pub use config::ServiceConfig;

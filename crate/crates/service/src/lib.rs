//! Session server, configuration and command line of the level design engine.

pub mod cli;
pub mod config;
pub mod http;
pub mod registry;

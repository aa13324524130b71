//! Library surface of the `frtr` binary: configuration, subcommand
//! implementations, and the HTTP service, exposed so integration tests can
//! drive them in-process.

pub mod commands;
pub mod config;
pub mod service;

//! Files, configuration, parallel execution and the command line around
//! [`lsa_core`].

pub mod cli;
pub mod config;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod report;

pub use lsa_core as core;

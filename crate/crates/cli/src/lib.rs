//! Configuration loading and the commands behind the `etc-traffic` binary.

pub mod commands;
pub mod config;

//! Control service and command-line front end of the bench.

pub mod api;
pub mod commands;
pub mod config;
pub mod power;
pub mod wire;

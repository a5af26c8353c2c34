//! Experiment runner for `fracvort-core`: TOML configurations, output
//! directories, the command-line interface and the primary acceptance checks.

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod experiments;
pub mod output;

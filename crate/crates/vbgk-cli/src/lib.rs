//! Command line driver: configuration, output files and the `run`,
//! `convergence`, `certify` and `constants` subcommands.

pub mod commands;
pub mod config;
pub mod output;

//! Experiment orchestration behind the `csdim` binary: TOML configs, the
//! output tree, and one function per subcommand.

pub mod commands;
pub mod config;

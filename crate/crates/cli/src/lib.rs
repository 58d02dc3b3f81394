//! Library side of the `dqkd` command-line tool: configuration, session
//! dispatch and report rendering.

pub mod commands;
pub mod config;

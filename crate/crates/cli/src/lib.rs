//! Configuration, orchestration and artifact output for the `fracmfg`
//! command-line tool.

pub mod acceptance;
pub mod config;
pub mod expr;
pub mod output;
pub mod run;

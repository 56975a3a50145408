//! Scenario files, runs, sweeps and the acceptance suite.

pub mod config;
pub mod output;
pub mod run;
pub mod sweep;
pub mod acceptance;
pub mod query;

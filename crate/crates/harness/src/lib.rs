//! Experiment orchestration and the acceptance suite.

pub mod acceptance;
pub mod cache;
pub mod config;
pub mod experiments;

//! Experiment configuration, run orchestration, ablation harness, and
//! metrics emission for the PINN training engine.

pub mod ablate;
pub mod config;
pub mod diagnose;
pub mod metrics;
pub mod runner;

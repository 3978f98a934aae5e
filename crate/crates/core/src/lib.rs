//! Core library for `cyberdef`: a deterministic agent-based simulator of
//! cyber attacks against a defended network, plus a self-contained threat
//! detection pipeline for network flow records.
//!
//! The crate is organized in two halves that share nothing but the error
//! type, so each can be used independently:
//!
//! * **Simulation** — [`sim`] implements the tick-based attack/defense engine
//!   (nodes, threats, control centre, adaptive defenses); [`scenario`]
//!   defines experiment configurations, built-in scenario suites, parameter
//!   sweeps, and CSV export.
//! * **Detection** — [`flows`] ingests and synthesizes flow-record datasets;
//!   [`detect`] trains and applies classifiers (decision tree, Gaussian naive
//!   Bayes, k-nearest-neighbour) with a fixed preprocessing pipeline;
//!   [`metrics`] computes evaluation metrics; [`serve`] exposes a trained
//!   model over HTTP with alerting, feedback capture, and drift monitoring.
//!
//! Everything randomized takes an explicit `u64` seed and uses a ChaCha8
//! stream, so identical inputs always produce byte-identical outputs.

pub mod detect;
pub mod error;
pub mod flows;
pub mod metrics;
pub mod scenario;
pub mod serve;
pub mod sim;

pub use error::{Error, Result};

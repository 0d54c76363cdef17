//! Physics-bounded solar irradiance forecasting.
//!
//! The forecaster never emits raw irradiance: a small temporal network
//! predicts a bounded transmissivity factor `alpha`, and the output is
//! `alpha * GHI_clear`, where `GHI_clear` comes from a deterministic
//! clear-sky model. Nights are therefore exactly zero and predictions can
//! never exceed the physical ceiling, for any weights.
//!
//! Module map:
//! - [`solar`]: solar position, air mass, clear-sky and extraterrestrial
//!   irradiance (the physical anchors).
//! - [`features`]: raw hourly records to normalized 22-feature windows
//!   with leakage-safe chronological splits.
//! - [`manifold`]: delay embedding of each window into the sequence the
//!   encoder consumes.
//! - [`network`]: dilated causal conv encoder, celestial calibration,
//!   transmissivity head, alpha gate; hand-written analytic gradients.
//! - [`training`]: log-cosh objective, Adam, plateau LR schedule,
//!   deterministic training loop.
//! - [`checkpoint`]: binary model serialization (bit-exact round trip).
//! - [`evaluation`]: error metrics, night-noise audit, phase lag,
//!   clearness-index strata, persistence baselines.
//! - [`ingest`]: NASA POWER fetching/parsing with a local cache, plus a
//!   seeded synthetic weather generator.

pub mod checkpoint;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod manifold;
pub mod mat;
pub mod network;
pub mod solar;
pub mod training;

pub use error::{Error, Result};
pub use mat::Mat;

//! Motion-trace spoof screening and user verification for mobile selfie capture.
//!
//! The crate turns 15-channel inertial traces recorded around a selfie capture
//! into anomaly scores (spoof screening, one-class verification) and
//! per-identity probabilities (classification-based verification), and runs
//! the three evaluation protocols end to end.

pub mod artifact;
pub mod classifiers;
pub mod cli;
pub mod detectors;
pub mod error;
pub mod features;
pub mod preprocess;
pub mod protocols;
pub mod rng;
pub mod server;
pub mod synthgen;
pub mod trace;

pub use error::{Error, Result};

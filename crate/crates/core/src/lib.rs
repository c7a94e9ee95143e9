//! Channel estimation for RIS-assisted multi-user MIMO with hybrid
//! beamforming.
//!
//! The crate synthesizes near- and far-field cascaded channels, simulates the
//! two-part uplink pilot protocol, runs the collaborative low-rank estimators
//! (`clra_jo` and the `clra_ls` ablation), and evaluates them with a seeded
//! Monte Carlo NMSE harness.

pub mod channel;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod numerics;
pub mod protocol;
pub mod serialize;

pub use error::{Error, Result};
pub use numerics::{CMatrix, CVector};

//! Pose estimation on SE(3) with guaranteed transient and steady-state error
//! envelopes.
//!
//! The filter fuses biased angular/translational velocity measurements with a
//! pose reconstructed from body-frame vector and landmark observations. Each of
//! the four error channels (attitude distance and the three position
//! components) is mapped through a log-ratio transformation so that keeping
//! the transformed error bounded keeps the raw error inside an exponentially
//! shrinking envelope.
//!
//! Module map:
//! - [`liegroup`]: SO(3)/SE(3) primitives.
//! - [`ppf`]: envelopes, the error transformation and its gain.
//! - [`recon`]: measurement synthesis and pose reconstruction.
//! - [`filter`]: correction, bias estimator and the discrete step.
//! - [`sim`]: truth trajectory and the end-to-end scenario harness.
//! - [`config`], [`report`], [`verify`]: configuration files, run artifacts and property suites.

pub mod config;
pub mod error;
pub mod filter;
pub mod liegroup;
pub mod ppf;
pub mod recon;
pub mod report;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

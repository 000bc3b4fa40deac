//! Two-layer coalitional game for cooperative spectrum sensing and access in
//! multichannel cognitive-radio ad-hoc networks.
//!
//! The bottom layer ([`coalition`], [`bargaining`]) decides how the SUs that
//! share a channel pool their sensing and split detected opportunities. The
//! top layer ([`hedonic`]) decides which channel each SU joins. [`sim`]
//! drives both slot by slot.

pub mod bargaining;
pub mod config;
pub mod coalition;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod hedonic;
pub mod network;
pub mod partition;
pub mod rng;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

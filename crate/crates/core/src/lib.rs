//! Broadcast-phase transmit strategies for a multi-pair two-way relay with a
//! multi-antenna relay and single-antenna nodes.
//!
//! The crate covers
//! - linear and dirty-paper precoding with the two-node interpolating
//!   beamformer ([`precoding`]),
//! - rate-region sweeps, random-beam search and convex hulls ([`region`],
//!   [`hull`]),
//! - fixed-beamformer power minimization for the downlink and its dual
//!   uplink, including a coupled instance where the two disagree
//!   ([`duality`]),
//! - semidefinite relaxation of the power-minimization problem with a small
//!   interior-point solver, rank-one extraction and rate bisection ([`sdp`]),
//! - static SVG plots of two-pair regions ([`plot`]).
//!
//! Sweeps run on rayon when the `parallel` feature is enabled (default); see
//! [`Exec`].

pub mod duality;
pub mod error;
pub mod exec;
pub mod hull;
pub mod linalg;
pub mod plot;
pub mod precoding;
pub mod region;
pub mod scenario;
pub mod sdp;

pub use error::{Error, Result};
pub use exec::Exec;
pub use scenario::Scenario;

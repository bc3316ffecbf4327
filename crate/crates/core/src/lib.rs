//! Soft-output MIMO detection from marginal posterior statistics.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: square-QAM constellations with Gray labelling, channel
//!   generation (identity, i.i.d. Rayleigh, Kronecker-correlated Rayleigh)
//!   and the `y = Hs + n` transmission model.
//! - [`search`]: real-valued lattice embedding, sorted-QR K-best candidate
//!   generation, per-layer minimum metric tables and the minimal path set.
//! - [`moments`]: rank-order transport of sampled metric rows onto a Gaussian
//!   shape and per-layer mean/variance fitting.
//! - [`baseline`]: exhaustive log-MAP / max-log oracles, candidate-list
//!   max-log with clamping, and LMMSE soft demapping.
//! - [`net`]: the one-hidden-layer LLR recovery network, its training loop
//!   and model persistence.
//! - [`sim`]: Monte-Carlo sweeps, fidelity metrics and result emission.

pub mod baseline;
pub mod error;
pub mod model;
pub mod moments;
pub mod net;
pub mod search;
pub mod sim;

pub use error::{Error, Result};

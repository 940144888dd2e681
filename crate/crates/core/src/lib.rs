//! Mean-field simulator and optimization library for anti-jamming
//! transmission through a large swarm of aerial reconfigurable
//! intelligent surfaces (ARIS).
//!
//! The swarm is modeled as a continuous spatial density over a
//! discretized deployment region. The library provides:
//!
//! - channel synthesis (Rician air-ground links, LoS jammer links) and
//!   mean-field aggregate channels ([`channel`]),
//! - the worst-case adversary: optimal jamming beamformer via the
//!   Rayleigh quotient and jammer positioning inside an uncertainty
//!   disk ([`jammer`]),
//! - zero-forcing precoding with water-filling power allocation
//!   ([`beamform`]),
//! - Riemannian gradient ascent over the unit-modulus phase field of
//!   the RIS elements ([`ris`]),
//! - spatial water-filling of the UAV density via threshold allocation
//!   ([`density`]),
//! - the alternating joint optimizer and benchmark schemes ([`driver`]),
//! - config parsing, CSV export, and experiment sweeps ([`io`], [`cli`]).

pub mod beamform;
pub mod channel;
pub mod cli;
pub mod config;
pub mod density;
pub mod driver;
pub mod error;
pub mod grid;
pub mod io;
pub mod jammer;
pub mod ris;
pub mod rng;

pub use config::SystemConfig;
pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

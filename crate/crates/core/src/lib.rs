//! Seeded Monte Carlo simulator for user-centric distributed massive MIMO
//! served by a LEO satellite constellation.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: orbit propagation, ground users, elevation and visibility,
//!   service times and propagation timing offsets.
//! - [`channel`]: large-scale gains, Rician small-scale fading, delay phase
//!   shifts and spatial correlation.
//! - [`pilots`]: orthogonal pilot book with per-satellite occupancy.
//! - [`estimation`]: uplink pilot reception and per-satellite LMMSE estimates.
//! - [`clustering`]: reference-satellite selection, cluster formation, update
//!   and handover, and the full-cooperation / non-cooperative baselines.
//! - [`downlink`]: precoding, power allocation and Monte Carlo SINR / SE.
//! - [`harness`]: configuration, drop loop, statistics and result files.

pub mod bessel;
pub mod channel;
pub mod clustering;
pub mod downlink;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod pilots;
pub mod stats;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
/// Heap-allocated complex column vector (one entry per satellite antenna).
pub type CVector = nalgebra::DVector<C64>;
/// Heap-allocated complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Crate version embedded in every result file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

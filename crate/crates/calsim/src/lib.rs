//! calsim — reduced-density simulator for a particle coupled to a harmonic
//! oscillator bath.
//!
//! The pipeline: discretize an ohmic bath into explicit modes, build the
//! bath two-point correlation matrix on the shared time grid and compress
//! it with a truncated Hermitian eigendecomposition, propagate frozen
//! Gaussians along classical trajectories of the effective potential, and
//! accumulate the factorized influence expansion whose assembly yields the
//! reduced position-space density.
//!
//! Run `cargo run --release --example <name>` for guided tours of each
//! capability; the `calsim` binary exposes the same pipeline as a CLI.

pub use num_complex::Complex64;

/// Shorthand used throughout the crate for double-precision complex values.
pub type C64 = num_complex::Complex64;

pub mod bath;
pub mod cli;
pub mod config;
pub mod dyson;
pub mod fga;
pub mod linalg;
pub mod oracle;
pub mod output;
pub mod pool;
pub mod potentials;
pub mod runner;
pub mod util;
pub mod wavefunction;

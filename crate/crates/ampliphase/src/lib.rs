//! Simulator for optical phase estimation with post-sensing parametric
//! amplification.
//!
//! The protocol sends a coherent probe through a lossy phase-shifting sample,
//! amplifies the two polarization modes in a phase-sensitive optical
//! parametric amplifier *after* the phase is acquired, and reads the modes out
//! with inefficient photon counters. Because every element of the pipeline is
//! Gaussian, the output state is an exact displaced squeezed thermal state per
//! mode, and all figures of merit admit closed forms.
//!
//! The crate is organized around that pipeline:
//!
//! - [`params`]: the physical knobs of one protocol instance.
//! - [`gaussian`]: exact output state construction (displacement, effective
//!   squeezing, effective thermal occupation per mode) and its eigenspectrum.
//! - [`fisher`]: quantum Fisher information: closed forms plus a truncated
//!   Fock-space spectral sum that validates them.
//! - [`photon`]: photon-number distributions and their phase derivatives,
//!   the classical Fisher information of photon counting, and the
//!   photon-difference sensitivity, including the pump-phase-averaged model
//!   of an unstabilized amplifier.
//! - [`fock`]: brute-force Fock-basis oracle (displaced squeezed number
//!   state amplitudes) used to cross-check the closed forms.
//! - [`estimation`]: seeded Monte Carlo photon-counting experiments,
//!   Bayesian posterior inference of the phase, and the two-step adaptive
//!   protocol with its resource-allocation bounds.
//!
//! All types are immutable values and all operations are pure functions, so
//! everything here is safe to use from parallel sweeps.

pub(crate) mod bignum;
pub mod dd;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod fock;
pub mod gaussian;
pub mod params;
pub mod photon;
pub mod special;

pub use error::Error;
pub use gaussian::{ModeGaussian, ModeGrad, TwoModeGaussian, TwoModeGrad};
pub use params::ProtocolParams;

/// Complex amplitude of an optical mode, in units of √photons.
///
/// `|a|²` is the mean photon number of a coherent state with amplitude `a`.
pub type C64 = num_complex::Complex64;

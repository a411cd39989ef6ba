//! Physical parameters of one protocol instance.

use crate::error::{Error, Result};

/// Wrap an angle to the interval (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

/// All physical knobs of one protocol instance.
///
/// The probe is a coherent state of amplitude `alpha_mag·e^{iθ}` in the
/// horizontal mode; the sample transmits a fraction `xi` of the light and
/// imprints the phase `phi`; the amplifier has gain magnitude `g` and pump
/// phase `lambda`; the detectors have quantum efficiency `eta`.
///
/// The post-sample amplitude is `β = √ξ·α`, so `|β|² = ξ|α|²` is always a
/// derived quantity ([`Self::beta_sq`]), never stored separately. A signed
/// per-mode gain is represented as a magnitude plus a π shift of the squeeze
/// phase, so `g ≥ 0` always. All angles are stored in radians, wrapped to
/// (−π, π] on construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Probe amplitude |α| ≥ 0, √photons.
    pub alpha_mag: f64,
    /// Probe phase θ, radians.
    pub theta: f64,
    /// Sample transmission ξ ∈ [0, 1].
    pub xi: f64,
    /// Amplifier gain magnitude g ≥ 0, dimensionless.
    pub g: f64,
    /// Pump phase λ, radians.
    pub lambda: f64,
    /// Detector efficiency η ∈ [0, 1].
    pub eta: f64,
    /// True interferometric phase φ, radians.
    pub phi: f64,
}

impl ProtocolParams {
    pub fn new(
        alpha_mag: f64,
        theta: f64,
        xi: f64,
        g: f64,
        lambda: f64,
        eta: f64,
        phi: f64,
    ) -> Result<Self> {
        check_nonneg("alpha_mag", alpha_mag)?;
        check_unit("xi", xi)?;
        check_nonneg("g", g)?;
        check_unit("eta", eta)?;
        for (name, v) in [("theta", theta), ("lambda", lambda), ("phi", phi)] {
            if !v.is_finite() {
                return Err(Error::InvalidParam {
                    name,
                    value: v,
                    expected: "a finite angle in radians",
                });
            }
        }
        Ok(Self {
            alpha_mag,
            theta: wrap_angle(theta),
            xi,
            g,
            lambda: wrap_angle(lambda),
            eta,
            phi: wrap_angle(phi),
        })
    }

    /// Build an instance directly from the post-sample photon number
    /// `beta_sq = |β|² = ξ|α|²`, with the sample folded into the probe
    /// (ξ = 1, |α|² = |β|²).
    pub fn from_beta_sq(
        beta_sq: f64,
        theta: f64,
        g: f64,
        lambda: f64,
        eta: f64,
        phi: f64,
    ) -> Result<Self> {
        check_nonneg("beta_sq", beta_sq)?;
        Self::new(beta_sq.sqrt(), theta, 1.0, g, lambda, eta, phi)
    }

    /// Mean photon number of the post-sample probe, |β|² = ξ|α|².
    pub fn beta_sq(&self) -> f64 {
        self.xi * self.alpha_mag * self.alpha_mag
    }

    /// Same instance at a different true phase.
    pub fn with_phi(&self, phi: f64) -> Self {
        Self {
            phi: wrap_angle(phi),
            ..*self
        }
    }

    /// Same instance at a different gain.
    pub fn with_g(&self, g: f64) -> Self {
        debug_assert!(g >= 0.0);
        Self { g, ..*self }
    }

    /// Same instance with the pump phase locked to the working condition
    /// λ = 2θ, where the photon-difference signal has maximal slope.
    pub fn at_locked_pump(&self) -> Self {
        Self {
            lambda: wrap_angle(2.0 * self.theta),
            ..*self
        }
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value: v,
            expected: "a finite value ≥ 0",
        })
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            name,
            value: v,
            expected: "a value in [0, 1]",
        })
    }
}

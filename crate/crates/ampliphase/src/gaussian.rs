//! Exact Gaussian output state of the protocol.
//!
//! The pipeline is: phase encoding of the coherent probe over the H/V modes,
//! sample loss, an optional quarter-wave plate, one single-mode squeezer per
//! mode (the two halves of the parametric amplifier), and detector loss.
//! Commuting the displacement through the squeezer and absorbing the loss
//! into an effective squeezed thermal state leaves each mode in the canonical
//! form
//!
//! ```text
//! ρ = D(γ) S(ζ) ρ_th(N_eff) S†(ζ) D†(γ),   ζ = g_eff·e^{i·squeeze_phase},
//! ```
//!
//! which [`ModeGaussian`] stores. Everything downstream (Fisher information,
//! photon statistics) consumes this form.
//!
//! Sign bookkeeping that is easy to get wrong, fixed here once: the loss
//! channel preserves the phase of the squeeze parameter, i.e.
//! `L_η[S(ζ)|0⟩⟨0|S†(ζ)] = S(g_eff e^{iμ}) ρ_th(N_eff) S†(g_eff e^{iμ})` with
//! μ the phase of ζ. This is forced by matching quadrature variances
//! (`Δ²x → ηΔ²x + (1−η)/4` must reproduce `e^{−2g_eff}(1+2N_eff)/4` in the
//! squeezed direction) and is confirmed against the Fock-basis oracle; the
//! daggered variant swaps the squeezed and anti-squeezed quadratures and
//! disagrees with both.

use crate::error::{Error, Result};
use crate::params::{wrap_angle, ProtocolParams};
use crate::C64;

/// One optical mode as a displaced squeezed thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGaussian {
    /// Displacement after all losses (γ̃ = √η γ), √photons.
    pub gamma: C64,
    /// Effective squeeze magnitude ≥ 0.
    pub g_eff: f64,
    /// Phase of the effective squeeze parameter, radians in (−π, π].
    pub squeeze_phase: f64,
    /// Effective thermal occupation ≥ 0.
    pub n_eff: f64,
}

impl ModeGaussian {
    /// A vacuum mode.
    pub fn vacuum() -> Self {
        Self {
            gamma: C64::new(0.0, 0.0),
            g_eff: 0.0,
            squeeze_phase: 0.0,
            n_eff: 0.0,
        }
    }

    /// A coherent mode of amplitude `gamma`.
    pub fn coherent(gamma: C64) -> Self {
        Self {
            gamma,
            ..Self::vacuum()
        }
    }

    pub fn new(gamma: C64, g_eff: f64, squeeze_phase: f64, n_eff: f64) -> Result<Self> {
        if !(gamma.re.is_finite() && gamma.im.is_finite()) {
            return Err(Error::InvalidParam {
                name: "gamma",
                value: f64::NAN,
                expected: "finite components",
            });
        }
        if !(g_eff.is_finite() && g_eff >= 0.0) {
            return Err(Error::InvalidParam {
                name: "g_eff",
                value: g_eff,
                expected: "a finite value ≥ 0",
            });
        }
        if !(n_eff.is_finite() && n_eff >= 0.0) {
            return Err(Error::InvalidParam {
                name: "n_eff",
                value: n_eff,
                expected: "a finite value ≥ 0",
            });
        }
        Ok(Self {
            gamma,
            g_eff,
            squeeze_phase: wrap_angle(squeeze_phase),
            n_eff,
        })
    }

    /// Mean photon number ⟨a†a⟩ of the mode.
    pub fn mean_photons(&self) -> f64 {
        self.gamma.norm_sqr() + self.n_eff * (2.0 * self.g_eff).cosh() + self.g_eff.sinh().powi(2)
    }
}

/// The separable H⊗V output state of the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeGaussian {
    pub h: ModeGaussian,
    pub v: ModeGaussian,
}

impl TwoModeGaussian {
    /// Total mean photon number over both modes.
    pub fn mean_photons(&self) -> f64 {
        self.h.mean_photons() + self.v.mean_photons()
    }
}

/// A mode together with the φ-derivative of its displacement.
///
/// Only the displacement depends on the encoded phase; the effective
/// squeezing and thermal occupation do not. This is all the derivative
/// information the Fisher-information and distribution-derivative routines
/// need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeGrad {
    pub mode: ModeGaussian,
    /// dγ̃/dφ.
    pub dgamma: C64,
}

/// Both output modes with their displacement derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeGrad {
    pub h: ModeGrad,
    pub v: ModeGrad,
}

impl TwoModeGrad {
    pub fn state(&self) -> TwoModeGaussian {
        TwoModeGaussian {
            h: self.h.mode,
            v: self.v.mode,
        }
    }
}

/// Which of the two equivalent amplifier decompositions to build the state
/// with. Both give identical photon statistics and Fisher information; they
/// differ by a π/2 phase-space rotation of the V mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// Quarter-wave plate on V, per-mode gains (H, V) = (−g, +g).
    /// Matches the physical setup.
    #[default]
    Waveplate,
    /// No waveplate, per-mode gains (H, V) = (−g, −g).
    NoWaveplate,
}

/// Coherent amplitudes of the H and V modes after the phase unitary.
///
/// The probe `|α|e^{iθ}` enters horizontally polarized; the phase φ between
/// the ±45° modes rotates it to
/// `a_H = e^{−iφ/2}α cos(φ/2)`, `a_V = i e^{−iφ/2}α sin(φ/2)`.
/// Energy is conserved: |a_H|² + |a_V|² = |α|².
pub fn phase_encode(alpha_mag: f64, theta: f64, phi: f64) -> (C64, C64) {
    let alpha = C64::from_polar(alpha_mag, theta);
    let half = C64::from_polar(1.0, -0.5 * phi);
    let a_h = half * alpha * (0.5 * phi).cos();
    let a_v = C64::new(0.0, 1.0) * half * alpha * (0.5 * phi).sin();
    (a_h, a_v)
}

/// [`phase_encode`] together with the φ-derivatives of both amplitudes.
pub fn phase_encode_with_grad(alpha_mag: f64, theta: f64, phi: f64) -> ((C64, C64), (C64, C64)) {
    let (a_h, a_v) = phase_encode(alpha_mag, theta, phi);
    // a_H = α(1+e^{−iφ})/2, a_V = α(1−e^{−iφ})/2, so
    // da_H/dφ = −iα e^{−iφ}/2 and da_V/dφ = +iα e^{−iφ}/2.
    let alpha = C64::from_polar(alpha_mag, theta);
    let d = C64::new(0.0, 0.5) * alpha * C64::from_polar(1.0, -phi);
    ((a_h, a_v), (-d, d))
}

/// Transmission through the lossy sample: a ↦ √ξ·a.
pub fn apply_sample_loss(a: C64, xi: f64) -> Result<C64> {
    if !(xi.is_finite() && (0.0..=1.0).contains(&xi)) {
        return Err(Error::InvalidParam {
            name: "xi",
            value: xi,
            expected: "a value in [0, 1]",
        });
    }
    Ok(a * xi.sqrt())
}

/// Quarter-wave plate: multiplies the V amplitude by i, i.e. a relative π/2
/// phase between H and V.
pub fn quarter_wave(a_v: C64) -> C64 {
    C64::new(0.0, 1.0) * a_v
}

/// Displacement after commuting D(β) through S(g·e^{i·squeeze_phase}):
/// γ = β cosh g − β* e^{i·squeeze_phase} sinh g.
pub fn displace_through_squeezer(beta: C64, g: f64, squeeze_phase: f64) -> C64 {
    debug_assert!(g >= 0.0);
    beta * g.cosh() - beta.conj() * C64::from_polar(g.sinh(), squeeze_phase)
}

/// Effective squeezing and thermal occupation of a squeezed vacuum after a
/// transmission-η loss channel:
///
/// ```text
/// g_eff = ¼ log(P/M),  N_eff = (√(PM) − 1)/2,
/// P = η e^{2g} + 1 − η,  M = η e^{−2g} + 1 − η.
/// ```
///
/// The squeeze phase is unchanged by the loss. `g_eff ∈ [0, g]` and
/// `n_eff ≥ 0`; both vanish for g = 0 or η = 0, and (g_eff, n_eff) → (g, 0)
/// for η → 1.
pub fn lossy_squeezed_vacuum(g: f64, eta: f64) -> Result<(f64, f64)> {
    if !(eta.is_finite() && (0.0..=1.0).contains(&eta)) {
        return Err(Error::InvalidParam {
            name: "eta",
            value: eta,
            expected: "a value in [0, 1]",
        });
    }
    debug_assert!(g >= 0.0);
    let p = eta * (2.0 * g).exp() + 1.0 - eta;
    let m = eta * (-2.0 * g).exp() + 1.0 - eta;
    let g_eff = 0.25 * (p / m).ln();
    let n_eff = 0.5 * ((p * m).sqrt() - 1.0);
    // Guard against -0.0 / tiny negative roundoff at the endpoints.
    Ok((g_eff.max(0.0), n_eff.max(0.0)))
}

/// Eigenvalue ϱ_n of a [`ModeGaussian`]: the thermal weight
/// `n_eff^n / (1+n_eff)^{n+1}` of the n-th displaced squeezed number state.
pub fn eigen_spectrum(m: &ModeGaussian, n: usize) -> f64 {
    thermal_weight(m.n_eff, n)
}

/// Thermal weight N^n/(1+N)^{n+1}, evaluated in log space to stay finite for
/// large N and n.
pub(crate) fn thermal_weight(n_eff: f64, n: usize) -> f64 {
    if n_eff == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let q = n_eff / (1.0 + n_eff);
    ((n as f64) * q.ln() - (1.0 + n_eff).ln()).exp()
}

/// The exact output state of the protocol, per mode.
pub fn output_state(p: &ProtocolParams) -> TwoModeGaussian {
    output_state_grad_with(p, Convention::default()).state()
}

/// Output state together with the φ-derivatives of the displacements.
pub fn output_state_with_grad(p: &ProtocolParams) -> TwoModeGrad {
    output_state_grad_with(p, Convention::default())
}

/// Output state under an explicit amplifier decomposition.
pub fn output_state_with(p: &ProtocolParams, conv: Convention) -> TwoModeGaussian {
    output_state_grad_with(p, conv).state()
}

/// Output state and displacement derivatives under an explicit convention.
pub fn output_state_grad_with(p: &ProtocolParams, conv: Convention) -> TwoModeGrad {
    let ((a_h, a_v), (da_h, da_v)) = phase_encode_with_grad(p.alpha_mag, p.theta, p.phi);
    let sqrt_xi = p.xi.sqrt();
    let (b_h, db_h) = (a_h * sqrt_xi, da_h * sqrt_xi);
    let (mut b_v, mut db_v) = (a_v * sqrt_xi, da_v * sqrt_xi);

    // Per-mode squeeze phases: a gain of −g is a gain of magnitude g with the
    // pump phase shifted by π.
    let phase_h = wrap_angle(p.lambda + std::f64::consts::PI);
    let phase_v = match conv {
        Convention::Waveplate => {
            b_v = quarter_wave(b_v);
            db_v = quarter_wave(db_v);
            wrap_angle(p.lambda)
        }
        Convention::NoWaveplate => phase_h,
    };

    let (g_eff, n_eff) =
        lossy_squeezed_vacuum(p.g, p.eta).expect("eta validated at ProtocolParams construction");
    let sqrt_eta = p.eta.sqrt();

    let mode = |b: C64, db: C64, phase: f64| ModeGrad {
        mode: ModeGaussian {
            gamma: displace_through_squeezer(b, p.g, phase) * sqrt_eta,
            g_eff,
            squeeze_phase: phase,
            n_eff,
        },
        // γ is linear in (β, β*), so the derivative passes through the same map.
        dgamma: displace_through_squeezer(db, p.g, phase) * sqrt_eta,
    };

    TwoModeGrad {
        h: mode(b_h, db_h, phase_h),
        v: mode(b_v, db_v, phase_v),
    }
}

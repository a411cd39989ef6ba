//! Quantum Fisher information of the output state.
//!
//! Two independent routes are kept deliberately separate:
//!
//! 1. Closed forms ([`qfi_phase_dependent`], [`qfi_optimal`]) obtained by
//!    carrying the spectral decomposition through analytically.
//! 2. A truncated Fock-space evaluation ([`qfi_numeric`]) that sums the
//!    spectral formula term by term from the state's eigenvalues and the
//!    eigenvector derivative coefficients. It serves as the validation
//!    oracle for route 1 and must never share its algebra.
//!
//! The eigenvalues of the output state do not depend on the encoded phase,
//! so the eigenvalue-derivative part of the mixed-state Fisher information
//! vanishes identically; only eigenvector motion contributes.

use crate::error::{Error, Result};
use crate::gaussian::{self, lossy_squeezed_vacuum, ModeGrad};
use crate::params::{wrap_angle, ProtocolParams};
use crate::C64;

/// Mean photon number sinh²g generated per mode by an amplifier of gain g.
pub fn n_bar(g: f64) -> f64 {
    debug_assert!(g >= 0.0);
    let s = g.sinh();
    s * s
}

/// Quantum Fisher information of a coherent probe of mean photon number
/// `beta_sq` with ideal detection: the standard-quantum-limit benchmark
/// 2|β|².
pub fn qfi_sql(beta_sq: f64) -> f64 {
    debug_assert!(beta_sq >= 0.0);
    2.0 * beta_sq
}

/// Closed-form quantum Fisher information at the actual phase φ:
///
/// ```text
/// I = 2|α|²ξη / √(1 + 4η(1−η) sinh²g)
///     · { cosh[2(g−g_eff)] − cos(λ+2φ−2θ) sinh[2(g−g_eff)] }
/// ```
pub fn qfi_phase_dependent(p: &ProtocolParams) -> f64 {
    let (g_eff, _) = lossy_squeezed_vacuum(p.g, p.eta).expect("validated params");
    let delta = 2.0 * (p.g - g_eff);
    let angle = p.lambda + 2.0 * p.phi - 2.0 * p.theta;
    let denom = (1.0 + 4.0 * p.eta * (1.0 - p.eta) * n_bar(p.g)).sqrt();
    2.0 * p.beta_sq() * p.eta * (delta.cosh() - angle.cos() * delta.sinh()) / denom
}

/// Quantum Fisher information maximized over the encoded phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiResult {
    /// I_max = 2|β|²η e^{2(g−g_eff)} / √(1 + 4η(1−η)n̄), rad⁻².
    pub value: f64,
    /// Effective squeezing after detector loss.
    pub g_eff: f64,
    /// Photons generated per mode by the amplifier, sinh²g.
    pub n_bar: f64,
    /// value / (2|β|²); in [0, 1] and → 1 when amplification defeats the
    /// detector loss.
    pub ratio_to_sql: f64,
    /// The maximizing phase π/2 − λ/2 + θ (mod π), wrapped to (−π, π].
    pub phi_opt: f64,
}

/// Maximal quantum Fisher information of the protocol (the phase argument of
/// `p` is ignored; the optimum φ = π/2 − λ/2 + θ is reported instead).
pub fn qfi_optimal(p: &ProtocolParams) -> QfiResult {
    let (g_eff, _) = lossy_squeezed_vacuum(p.g, p.eta).expect("validated params");
    let n_bar = n_bar(p.g);
    // The ratio to the SQL is independent of |β|², so compute it directly and
    // avoid 0/0 at zero probe amplitude.
    let ratio =
        p.eta * (2.0 * (p.g - g_eff)).exp() / (1.0 + 4.0 * p.eta * (1.0 - p.eta) * n_bar).sqrt();
    QfiResult {
        value: qfi_sql(p.beta_sq()) * ratio,
        g_eff,
        n_bar,
        ratio_to_sql: ratio,
        phi_opt: wrap_angle(std::f64::consts::FRAC_PI_2 - 0.5 * p.lambda + p.theta),
    }
}

/// Eigenvector-derivative coefficient of one mode:
/// B = cosh(g_eff)·dγ̃/dφ + e^{i·squeeze_phase}·sinh(g_eff)·(dγ̃/dφ)*.
///
/// |B|² weights the nearest-neighbor Fock transitions in the spectral Fisher
/// sum.
pub fn b_coeff(m: &ModeGrad) -> C64 {
    m.dgamma * m.mode.g_eff.cosh()
        + m.dgamma.conj() * C64::from_polar(m.mode.g_eff.sinh(), m.mode.squeeze_phase)
}

/// Diagonal eigenvector-derivative coefficient of one mode:
/// A = ½[(dγ̃/dφ)γ̃* − γ̃(dγ̃/dφ)*], purely imaginary.
///
/// A never enters the Fisher sum (the diagonal ε weights vanish); it is kept
/// for diagnostics, where it must equal −C with
/// C = ½[γ̃(dγ̃/dφ)* − (dγ̃/dφ)γ̃*].
pub fn a_coeff(m: &ModeGrad) -> C64 {
    0.5 * (m.dgamma * m.mode.gamma.conj() - m.mode.gamma * m.dgamma.conj())
}

/// Result of the truncated Fock-space Fisher sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiNumeric {
    pub value: f64,
    /// Monotone upper bound on the neglected part of the sum.
    pub tail_bound: f64,
    pub cutoff: usize,
}

/// Truncated Fock-space quantum Fisher information:
///
/// ```text
/// I = 4 Σ_{m,n} [ |B_H|² (m+1) ε(ϱ_{m+1,n}, ϱ_{m,n})
///              + |B_V|² (n+1) ε(ϱ_{m,n}, ϱ_{m,n+1}) ]
/// ```
///
/// with ε(a, b) = (a−b)²/(a+b) and ϱ_{m,n} the product of per-mode thermal
/// eigenvalues. Requires the per-mode thermal tail mass beyond `cutoff` to be
/// below 1e−10; fails explicitly otherwise rather than truncating silently.
pub fn qfi_numeric(p: &ProtocolParams, cutoff: usize) -> Result<QfiNumeric> {
    qfi_numeric_with_tol(p, cutoff, 1e-10)
}

/// [`qfi_numeric`] with a caller-chosen thermal tail-mass tolerance.
pub fn qfi_numeric_with_tol(
    p: &ProtocolParams,
    cutoff: usize,
    tail_tol: f64,
) -> Result<QfiNumeric> {
    qfi_numeric_for_state(&gaussian::output_state_with_grad(p), cutoff, tail_tol)
}

/// The truncated Fisher sum evaluated on an explicit state with derivatives,
/// for callers that build the state under a non-default convention.
pub fn qfi_numeric_for_state(
    tm: &gaussian::TwoModeGrad,
    cutoff: usize,
    tail_tol: f64,
) -> Result<QfiNumeric> {
    if cutoff < 1 {
        return Err(Error::InvalidParam {
            name: "cutoff",
            value: cutoff as f64,
            expected: "an integer ≥ 1",
        });
    }
    let (bh2, bv2) = (b_coeff(&tm.h).norm_sqr(), b_coeff(&tm.v).norm_sqr());
    let (nh, nv) = (tm.h.mode.n_eff, tm.v.mode.n_eff);

    // Thermal mass above the cutoff is q^{cutoff+1} per mode.
    let q = |n_eff: f64| n_eff / (1.0 + n_eff);
    let mass_tail = |n_eff: f64| {
        if n_eff == 0.0 {
            0.0
        } else {
            (((cutoff + 1) as f64) * q(n_eff).ln()).exp()
        }
    };
    let worst_tail = mass_tail(nh).max(mass_tail(nv));
    if worst_tail > tail_tol {
        return Err(Error::Convergence {
            what: "qfi_numeric thermal eigenvalue mass",
            tail: worst_tail,
            tol: tail_tol,
            cutoff,
        });
    }

    // Per-mode log eigenvalue tables, one entry past the cutoff for the
    // shifted indices.
    let weights = |n_eff: f64| -> Vec<f64> {
        (0..=cutoff + 1)
            .map(|n| gaussian::thermal_weight(n_eff, n))
            .collect()
    };
    let (rho_h, rho_v) = (weights(nh), weights(nv));

    let eps = |a: f64, b: f64| {
        let s = a + b;
        if s == 0.0 {
            0.0
        } else {
            (a - b) * (a - b) / s
        }
    };

    let mut total = 0.0f64;
    for m in 0..=cutoff {
        for n in 0..=cutoff {
            let joint = rho_h[m] * rho_v[n];
            let e_h = eps(rho_h[m + 1] * rho_v[n], joint);
            let e_v = eps(rho_h[m] * rho_v[n + 1], joint);
            total += bh2 * ((m + 1) as f64) * e_h + bv2 * ((n + 1) as f64) * e_v;
        }
    }
    total *= 4.0;

    let tail = value_tail_bound(bh2, nh, nv, cutoff) + value_tail_bound(bv2, nv, nh, cutoff);
    Ok(QfiNumeric {
        value: total,
        tail_bound: tail,
        cutoff,
    })
}

/// Upper bound on the neglected (m, n) terms of one mode's part of the sum.
///
/// For thermal weights ϱ_m = (1−q)q^m the summand factorizes as
/// (m+1)ϱ_m ϱ'_n (1−q)²/(1+q), so the remainder splits into an m-tail
/// (weighted by Σ_n ϱ'_n ≤ 1) and an n-tail (weighted by Σ_m (m+1)ϱ_m = 1+N).
fn value_tail_bound(b2: f64, n_own: f64, n_other: f64, cutoff: usize) -> f64 {
    let q = n_own / (1.0 + n_own);
    let q_other = n_other / (1.0 + n_other);
    let c = cutoff as f64;
    let own_tail = if q == 0.0 {
        0.0
    } else {
        // Σ_{m>c} (m+1) q^m = q^{c+1} [(c+2)(1−q) + q] / (1−q)²
        (((cutoff + 1) as f64) * q.ln()).exp() * ((c + 2.0) * (1.0 - q) + q) / (1.0 - q)
    };
    let other_tail = if q_other == 0.0 {
        0.0
    } else {
        (1.0 + n_own) * (((cutoff + 1) as f64) * q_other.ln()).exp()
    };
    4.0 * b2 * (1.0 - q) * (1.0 - q) / (1.0 + q) * (own_tail / (1.0 - q) + other_tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(beta_sq: f64, g: f64, eta: f64, phi: f64) -> ProtocolParams {
        ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, eta, phi).unwrap()
    }

    #[test]
    fn n_bar_values() {
        assert_eq!(n_bar(0.0), 0.0);
        assert_relative_eq!(n_bar(1.0), 1.3810978455418157, max_relative = 1e-14);
        // "about 180 photons per mode" at the largest gain of interest
        assert_relative_eq!(n_bar(3.3), 183.27413740250261, max_relative = 1e-13);
    }

    #[test]
    fn sql_is_twice_the_photon_number() {
        assert_eq!(qfi_sql(0.0), 0.0);
        assert_eq!(qfi_sql(20.0), 40.0);
        assert_eq!(qfi_sql(9.0), 18.0);
    }

    #[test]
    fn phase_dependent_collapses_without_gain() {
        for phi in [0.0, 0.7, FRAC_PI_2] {
            let p = params(5.0, 0.0, 0.35, phi);
            assert_relative_eq!(
                qfi_phase_dependent(&p),
                2.0 * 5.0 * 0.35,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn phase_dependent_at_unit_efficiency_and_optimal_phase() {
        // cos(λ+2φ−2θ) = −1 at φ = π/2 with λ = θ = 0.
        let p = params(7.0, 1.3, 1.0, FRAC_PI_2);
        assert_relative_eq!(qfi_phase_dependent(&p), 14.0, max_relative = 1e-12);
    }

    #[test]
    fn frozen_midpoint_value() {
        let p = params(20.0, 1.0, 0.5, FRAC_PI_2);
        assert_relative_eq!(
            qfi_phase_dependent(&p),
            35.231883119115298,
            max_relative = 1e-13
        );
        let opt = qfi_optimal(&p);
        assert_relative_eq!(opt.value, 35.231883119115298, max_relative = 1e-13);
        assert_relative_eq!(
            opt.ratio_to_sql,
            0.880_797_077_977_882_4,
            max_relative = 1e-13
        );
        assert_relative_eq!(opt.g_eff, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn optimal_limits() {
        let p = params(6.0, 0.0, 0.4, 0.1);
        assert_relative_eq!(qfi_optimal(&p).value, 2.0 * 6.0 * 0.4, max_relative = 1e-12);
        let p = params(6.0, 2.1, 1.0, 0.1);
        assert_relative_eq!(qfi_optimal(&p).value, qfi_sql(6.0), max_relative = 1e-12);
    }

    #[test]
    fn optimal_matches_phase_dependent_at_reported_phase() {
        for (beta_sq, g, eta, theta, lambda) in [
            (4.0, 0.7, 0.3, 0.0, 0.0),
            (9.0, 1.4, 0.6, 0.5, 1.1),
            (1.0, 2.0, 0.05, -0.3, 2.0),
        ] {
            let p = ProtocolParams::from_beta_sq(beta_sq, theta, g, lambda, eta, 0.0).unwrap();
            let opt = qfi_optimal(&p);
            let at_opt = qfi_phase_dependent(&p.with_phi(opt.phi_opt));
            assert_relative_eq!(at_opt, opt.value, max_relative = 1e-12);
        }
    }

    #[test]
    fn reported_phase_is_the_argmax() {
        let p = ProtocolParams::from_beta_sq(9.0, 0.4, 1.2, 0.9, 0.3, 0.0).unwrap();
        let opt = qfi_optimal(&p);
        // Function values flatten quadratically at the top, so locate the
        // optimum through the sign change of the central-difference slope
        // instead of scanning values.
        let slope = |phi: f64| {
            let h = 1e-5;
            (qfi_phase_dependent(&p.with_phi(phi + h)) - qfi_phase_dependent(&p.with_phi(phi - h)))
                / (2.0 * h)
        };
        // Coarse scan for a bracket with a + → − slope crossing.
        let n = 512;
        let mut bracket = None;
        for i in 0..n {
            let a = -PI + 2.0 * PI * i as f64 / n as f64;
            let b = a + 2.0 * PI / n as f64;
            if slope(a) > 0.0 && slope(b) < 0.0 {
                bracket = Some((a, b));
                break;
            }
        }
        let (mut lo, mut hi) = bracket.expect("no maximum bracket found");
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let found = 0.5 * (lo + hi);
        // The optimum is degenerate mod π.
        let diff = (found - opt.phi_opt).rem_euclid(PI);
        let dist = diff.min(PI - diff);
        assert!(dist < 1e-9, "argmax {found} vs reported {}", opt.phi_opt);
    }

    #[test]
    fn numeric_matches_pure_coherent_state() {
        let p = params(4.0, 0.0, 1.0, 0.3);
        let r = qfi_numeric(&p, 8).unwrap();
        assert_relative_eq!(r.value, 8.0, max_relative = 1e-10);
    }

    #[test]
    fn numeric_matches_closed_form_mixed_state() {
        let p = params(4.0, 1.0, 0.5, 0.9);
        let r = qfi_numeric(&p, 60).unwrap();
        assert_relative_eq!(r.value, qfi_phase_dependent(&p), max_relative = 1e-8);
        assert!(r.tail_bound < 1e-8 * r.value.max(1.0));
    }

    #[test]
    fn numeric_vanishes_without_probe() {
        let p = params(0.0, 1.0, 0.5, 0.4);
        let r = qfi_numeric(&p, 60).unwrap();
        assert!(r.value.abs() < 1e-12);
    }

    #[test]
    fn numeric_rejects_insufficient_cutoff() {
        // g = 2, η = 0.5 gives n_eff ≈ 1.38; a cutoff of 5 leaves far more
        // than 1e−10 of thermal mass above it.
        let p = params(4.0, 2.0, 0.5, 0.9);
        match qfi_numeric(&p, 5) {
            Err(Error::Convergence { .. }) => {}
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_coefficient_is_imaginary_and_opposite_to_c() {
        let p = ProtocolParams::new(1.5, 0.3, 0.7, 1.1, 0.8, 0.6, 0.9).unwrap();
        let tm = gaussian::output_state_with_grad(&p);
        for m in [tm.h, tm.v] {
            let a = a_coeff(&m);
            assert!(a.re.abs() < 1e-14);
            let c = 0.5 * (m.mode.gamma * m.dgamma.conj() - m.dgamma * m.mode.gamma.conj());
            assert!((a + c).norm() < 1e-14);
        }
    }

    #[test]
    fn eigenvalues_carry_no_phase_dependence() {
        // The eigenvalue-derivative part of the mixed-state Fisher formula
        // vanishes identically: the thermal spectrum depends only on (g, η),
        // so the spectral sum never needs it.
        let p = ProtocolParams::from_beta_sq(6.0, 0.2, 1.3, 0.8, 0.4, 0.0).unwrap();
        let spectra: Vec<Vec<f64>> = [0.0, 0.9, 2.3]
            .iter()
            .map(|&phi| {
                let tm = gaussian::output_state(&p.with_phi(phi));
                (0..12)
                    .map(|n| gaussian::eigen_spectrum(&tm.h, n))
                    .collect()
            })
            .collect();
        assert_eq!(spectra[0], spectra[1]);
        assert_eq!(spectra[0], spectra[2]);
    }

    #[test]
    fn epsilon_weights_vanish_on_diagonal_and_pair_swap() {
        let eps = |a: f64, b: f64| {
            if a + b == 0.0 {
                0.0
            } else {
                (a - b) * (a - b) / (a + b)
            }
        };
        let rho = |n_eff: f64, n: usize| gaussian::thermal_weight(n_eff, n);
        let (nh, nv) = (0.7, 0.7);
        for m in 0..6usize {
            for n in 0..6usize {
                let d = rho(nh, m) * rho(nv, n);
                assert_eq!(eps(d, d), 0.0);
                // Adjacent weights are symmetric under swapping the index
                // pairs, the only configurations the Fisher sum touches.
                let up = rho(nh, m + 1) * rho(nv, n);
                assert_relative_eq!(eps(up, d), eps(d, up), max_relative = 1e-15);
                let right = rho(nh, m) * rho(nv, n + 1);
                assert_relative_eq!(eps(right, d), eps(d, right), max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn sql_recovered_at_high_gain_even_for_poor_detectors() {
        // The ratio to the SQL climbs monotonically with gain and crosses
        // 0.95 once n̄ ≫ (8η)⁻¹; at η = 0.01 that takes g ≈ 4.
        let mut crossed = None;
        let mut prev = 0.0;
        for i in 0..=120 {
            let g = 0.05 * i as f64;
            let p = ProtocolParams::from_beta_sq(20.0, 0.0, g, 0.0, 0.01, 0.0).unwrap();
            let ratio = qfi_optimal(&p).ratio_to_sql;
            assert!(ratio >= prev - 1e-12);
            prev = ratio;
            if ratio > 0.95 && crossed.is_none() {
                crossed = Some(g);
            }
        }
        let g_star = crossed.expect("never crossed 0.95");
        assert!((3.0..5.5).contains(&g_star), "crossing at g = {g_star}");
    }

    #[test]
    fn bound_chain_and_loss_monotonicity() {
        for beta_sq in [0.5, 4.0, 20.0] {
            for g in [0.0, 0.8, 2.0, 3.5] {
                let mut prev = -1.0;
                for eta in [0.05, 0.1, 0.3, 0.6, 0.9, 1.0] {
                    let p = params(beta_sq, g, eta, 0.0);
                    let v = qfi_optimal(&p).value;
                    assert!(
                        v <= qfi_sql(beta_sq) + 1e-12,
                        "SQL violated at {beta_sq},{g},{eta}"
                    );
                    assert!(
                        v >= prev - 1e-12,
                        "not monotone in eta at {beta_sq},{g},{eta}"
                    );
                    prev = v;
                }
            }
        }
    }
}

//! Photon-number statistics of the output modes.
//!
//! The photon distribution of a displaced squeezed thermal mode has a closed
//! form: rotate quadratures so the squeeze axis is diagonal, integrate the
//! mode's Wigner function against Fock-state Wigner functions, and the result
//! is a double sum over polynomial confluent hypergeometric values. Quadrature
//! scaling throughout fixes Δ²x·Δ²p ≥ 1/16, i.e. vacuum variance 1/4.
//!
//! Numerical hygiene: the double sum alternates in sign and its terms can
//! exceed the result by many orders of magnitude at large photon number.
//! It is therefore reorganized so every factorial cancels exactly,
//!
//! ```text
//! p(n) = pref · (−1)^n Σ_k (−2)^k C(n,k) Σ_j lx_j · lp_{k−j},
//! lx_j = L_j^(−1/2)(z_x)/Ã_x^j,  lp_j = L_j^(−1/2)(z_p)/Ã_p^j,
//! ```
//!
//! and the inner convolutions plus the alternating binomial transform run
//! in extended precision: double-double always, escalating to big-integer
//! fixed point when the tracked cancellation floor crosses the table. The
//! Laguerre arguments are never positive, so the scaled tables are sums of
//! positive terms and the only cancellation left is the one the binomial
//! transform performs. Truncation error is controlled by an explicit
//! Chernoff envelope on the photon-number tail computed from the mode's
//! exact moment generating function, and every table reports the index range
//! its entries are certified for.

use crate::bignum::{BigFixed, SumNum};
use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::fisher::n_bar;
use crate::fock;
use crate::gaussian::{self, ModeGaussian, ModeGrad};
use crate::params::ProtocolParams;
use crate::special::scaled_laguerre_table;

/// Largest photon-number cutoff the automatic sizing will attempt.
pub const MAX_CUTOFF: usize = 4096;

/// Rotated-quadrature auxiliary coefficients of one mode.
///
/// `psi = squeeze_phase/2` rotates the quadratures onto the squeeze axes;
/// `x0_rot`/`p0_rot` are the displacement components in that frame, and the
/// six ratios are the pieces the distribution closed form is assembled from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxCoeffs {
    pub a_x: f64,
    pub b_x: f64,
    pub c_x: f64,
    pub a_p: f64,
    pub b_p: f64,
    pub c_p: f64,
    /// Rotation angle onto the squeeze frame.
    pub psi: f64,
    /// First moments in the rotated frame.
    pub x0_rot: f64,
    pub p0_rot: f64,
    /// Unrotated Wigner covariance entries (in units of the 1/4 vacuum
    /// variance), kept for diagnostics.
    pub sigma_xx: f64,
    pub sigma_pp: f64,
    pub sigma_xp: f64,
    /// Displacement-independent kernels k with B = k·(first moment).
    k_x: f64,
    k_p: f64,
}

/// Auxiliary coefficients of the distribution closed form:
///
/// ```text
/// Ã_x = 1 + e^{+2g}/w,  B̃_x = x′⁰ e^{+2g}/(w + e^{+2g}),  C̃_x = x′⁰·B̃_x,
/// Ã_p = 1 + e^{−2g}/w,  B̃_p = p′⁰ e^{−2g}/(w + e^{−2g}),  C̃_p = p′⁰·B̃_p,
/// ```
///
/// with w = 1 + 2·n_eff and (x′⁰, p′⁰) the rotated first moments. The x′
/// axis is the squeezed one (variance w·e^{−2g}/4), so completing the square
/// in the x′ integral puts the *large* Gaussian weight e^{+2g} on the
/// x-family of coefficients; the assignment is pinned by the Fock-basis
/// oracle.
pub fn aux_coeffs(m: &ModeGaussian) -> AuxCoeffs {
    let psi = 0.5 * m.squeeze_phase;
    let (c, s) = (psi.cos(), psi.sin());
    let (x0, p0) = (m.gamma.re, m.gamma.im);
    let x0_rot = x0 * c + p0 * s;
    let p0_rot = -x0 * s + p0 * c;
    let w = 1.0 + 2.0 * m.n_eff;
    let em = (-2.0 * m.g_eff).exp();
    let ep = (2.0 * m.g_eff).exp();
    let k_x = ep / (w + ep);
    let k_p = em / (w + em);
    let (ch2, sh2) = ((2.0 * m.g_eff).cosh(), (2.0 * m.g_eff).sinh());
    AuxCoeffs {
        a_x: 1.0 + ep / w,
        b_x: x0_rot * k_x,
        c_x: x0_rot * x0_rot * k_x,
        a_p: 1.0 + em / w,
        b_p: p0_rot * k_p,
        c_p: p0_rot * p0_rot * k_p,
        psi,
        x0_rot,
        p0_rot,
        sigma_xx: ch2 + m.squeeze_phase.cos() * sh2,
        sigma_pp: ch2 - m.squeeze_phase.cos() * sh2,
        sigma_xp: m.squeeze_phase.sin() * sh2,
        k_x,
        k_p,
    }
}

/// Truncated photon-number distribution of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    /// probs[n] = p(n) for n = 0..=cutoff.
    pub probs: Vec<f64>,
    pub cutoff: usize,
    /// Upper bound on the probability mass not represented in `probs`:
    /// everything above `reliable_cutoff`.
    pub tail_bound: f64,
    /// Number of entries clamped to zero because they were at or below the
    /// cancellation noise floor of the evaluation.
    pub clamped: usize,
    /// Largest n whose entry is certified against the noise floor. Entries
    /// above it are zero and their true mass is covered by `tail_bound`.
    pub reliable_cutoff: usize,
}

impl Pmf {
    /// Σ probs + tail bound; within 1e−9 of 1 for a converged table.
    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail_bound
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64) * p)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }
}

/// Shared state for evaluating p(n) and ∂p(n)/∂φ at every n up to a cutoff,
/// generic over the extended-precision arithmetic.
struct PmfEngine<T: SumNum> {
    ctx: T::Ctx,
    prefactor: f64,
    conv_ll: Vec<T>,
    /// Present only when built from a [`ModeGrad`].
    deriv: Option<DerivPieces<T>>,
}

struct DerivPieces<T> {
    /// −2 ∂(C̃_x + C̃_p)/∂φ, the factor multiplying p(n) in the first term.
    dc_factor: f64,
    /// 4 B̃_x ∂B̃_x/∂φ and 4 B̃_p ∂B̃_p/∂φ.
    fx: f64,
    fp: f64,
    conv_ml: Vec<T>,
    conv_lm: Vec<T>,
}

impl<T: SumNum> PmfEngine<T> {
    fn new(m: &ModeGaussian, grad: Option<&ModeGrad>, n_max: usize, ctx: T::Ctx) -> Self {
        let aux = aux_coeffs(m);
        let w = 1.0 + 2.0 * m.n_eff;
        let bx = T::from_f64(aux.b_x, ctx);
        let bp = T::from_f64(aux.b_p, ctx);
        let zx = bx.mul(&bx).mul_f64(-2.0 * aux.a_x);
        let zp = bp.mul(&bp).mul_f64(-2.0 * aux.a_p);
        let lx = scaled_laguerre_table(n_max, -0.5, &zx, aux.a_x, ctx);
        let lp = scaled_laguerre_table(n_max, -0.5, &zp, aux.a_p, ctx);
        let prefactor = 2.0 / w * (-2.0 * (aux.c_x + aux.c_p)).exp() / (aux.a_x * aux.a_p).sqrt();
        let conv_ll = convolve(&lx, &lp, n_max, ctx);
        let deriv = grad.map(|mg| {
            let (cp, sp) = (aux.psi.cos(), aux.psi.sin());
            let dx0 = mg.dgamma.re * cp + mg.dgamma.im * sp;
            let dp0 = -mg.dgamma.re * sp + mg.dgamma.im * cp;
            let db_x = aux.k_x * dx0;
            let db_p = aux.k_p * dp0;
            // ∂C̃ = 2·(first moment)·k·∂(first moment)
            let dc = 2.0 * (aux.x0_rot * aux.k_x * dx0 + aux.p0_rot * aux.k_p * dp0);
            let mx = scaled_laguerre_table(n_max.saturating_sub(1), 0.5, &zx, aux.a_x, ctx);
            let mp = scaled_laguerre_table(n_max.saturating_sub(1), 0.5, &zp, aux.a_p, ctx);
            DerivPieces {
                dc_factor: -2.0 * dc,
                fx: 4.0 * aux.b_x * db_x,
                fp: 4.0 * aux.b_p * db_p,
                conv_ml: convolve(&mx, &lp, n_max.saturating_sub(1), ctx),
                conv_lm: convolve(&lx, &mp, n_max.saturating_sub(1), ctx),
            }
        });
        PmfEngine {
            ctx,
            prefactor,
            conv_ll,
            deriv,
        }
    }

    /// Alternating binomial transform Σ_{k=0}^n (−2)^k C(n,k) v[k], plus the
    /// log2 magnitude of its largest term, which fixes the attainable
    /// absolute accuracy.
    fn binom_transform(&self, v: &[T], n: usize) -> (T, f64) {
        let mut acc = T::zero(self.ctx);
        let mut binom = T::one(self.ctx);
        let mut sign = T::one(self.ctx);
        let mut scale = f64::NEG_INFINITY;
        for (k, vk) in v.iter().take(n + 1).enumerate() {
            let term = binom.mul(vk).mul(&sign);
            scale = scale.max(term.log2_abs());
            acc = acc.add(&term);
            binom = binom.mul_f64((n - k) as f64).div_u64(k as u64 + 1);
            sign = sign.mul_f64(-2.0);
        }
        (acc, scale)
    }

    /// p(n) together with the cancellation noise floor of its evaluation.
    fn prob_with_floor(&self, n: usize) -> (f64, f64) {
        let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let (acc, scale) = self.binom_transform(&self.conv_ll, n);
        let floor = ldexp_sat(T::floor_log2(scale, self.ctx)) * self.prefactor;
        (parity * self.prefactor * acc.to_f64(), floor)
    }

    /// (p(n), ∂p(n)/∂φ, noise floor); requires derivative pieces.
    fn prob_and_deriv(&self, n: usize) -> (f64, f64, f64) {
        let d = self.deriv.as_ref().expect("engine built without gradient");
        let (p, floor) = self.prob_with_floor(n);
        let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let dp1 = d.dc_factor * p;
        // The k = 0 term carries no hypergeometric derivative, so the shifted
        // transforms start at k = 1: Σ_{k≥1} (−2)^k C(n,k) conv[k−1].
        let mut shifted_ml = T::zero(self.ctx);
        let mut shifted_lm = T::zero(self.ctx);
        let mut binom = T::from_f64(n as f64, self.ctx); // C(n,1)
        let mut sign = T::from_f64(-2.0, self.ctx);
        for k in 1..=n {
            let b = sign.mul(&binom);
            shifted_ml = shifted_ml.add(&b.mul(&d.conv_ml[k - 1]));
            shifted_lm = shifted_lm.add(&b.mul(&d.conv_lm[k - 1]));
            binom = binom.mul_f64((n - k) as f64).div_u64(k as u64 + 1);
            sign = sign.mul_f64(-2.0);
        }
        let dp2 = parity * self.prefactor * d.fx * shifted_ml.to_f64();
        let dp3 = parity * self.prefactor * d.fp * shifted_lm.to_f64();
        (p, dp1 + dp2 + dp3, floor)
    }
}

fn convolve<T: SumNum>(u: &[T], v: &[T], n_max: usize, ctx: T::Ctx) -> Vec<T> {
    let mut out = vec![T::zero(ctx); n_max + 1];
    for (i, ui) in u.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            if i + j > n_max {
                break;
            }
            out[i + j] = out[i + j].add(&ui.mul(vj));
        }
    }
    out
}

/// 2^x saturating to 0 / ∞ outside f64 range.
fn ldexp_sat(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    if x > 1023.0 {
        return f64::INFINITY;
    }
    if x < -1073.0 {
        return 0.0;
    }
    x.exp2()
}

/// Chernoff bound on the probability mass above `cutoff`, from the exact
/// photon-number moment generating function of the mode:
///
/// ```text
/// G(s) = 2·exp(−2(1−s)[x′⁰²/f_x + p′⁰²/f_p]) / √(f_x f_p),
/// f_x = w e^{−2g}(1−s) + 1 + s,   f_p = w e^{+2g}(1−s) + 1 + s,
/// P(X > cutoff) ≤ min_{1<s<s_max} G(s)/s^{cutoff+1}.
/// ```
pub fn tail_envelope(m: &ModeGaussian, cutoff: usize) -> f64 {
    let aux = aux_coeffs(m);
    let w = 1.0 + 2.0 * m.n_eff;
    let vx = w * (-2.0 * m.g_eff).exp();
    let vp = w * (2.0 * m.g_eff).exp();
    let (x2, p2) = (aux.x0_rot * aux.x0_rot, aux.p0_rot * aux.p0_rot);
    let k = (cutoff + 1) as f64;
    // ln[G(s)/s^k] as a function of t = s − 1 > 0. The anti-squeezed factor
    // f_p hits zero at the generating function's convergence edge.
    let ln_bound = |t: f64| -> f64 {
        let s = 1.0 + t;
        let fx = (1.0 - vx) * t + 2.0;
        let fp = (1.0 - vp) * t + 2.0;
        if fx <= 0.0 || fp <= 0.0 {
            return f64::INFINITY;
        }
        std::f64::consts::LN_2 + 2.0 * t * (x2 / fx + p2 / fp)
            - 0.5 * (fx.ln() + fp.ln())
            - k * s.ln()
    };
    let t_hi = if vp > 1.0 + 1e-12 {
        2.0 / (vp - 1.0) * 0.999_999
    } else {
        1e18
    };
    let t_lo = 1e-9f64.min(t_hi * 1e-3);
    // Coarse geometric bracket of the minimum, then golden-section in ln t.
    let steps = 240usize;
    let ratio = (t_hi / t_lo).powf(1.0 / steps as f64);
    let mut best = (f64::INFINITY, t_lo);
    let mut t = t_lo;
    for _ in 0..=steps {
        let v = ln_bound(t);
        if v < best.0 {
            best = (v, t);
        }
        t *= ratio;
    }
    let (mut a, mut b) = ((best.1 / ratio).ln(), (best.1 * ratio).min(t_hi).ln());
    for _ in 0..60 {
        let m1 = a + (b - a) * 0.381_966;
        let m2 = b - (b - a) * 0.381_966;
        if ln_bound(m1.exp()) < ln_bound(m2.exp()) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let refined = ln_bound((0.5 * (a + b)).exp());
    best.0.min(refined).exp().min(1.0)
}

/// Smallest cutoff whose tail envelope is below `tol`.
pub fn required_cutoff(m: &ModeGaussian, tol: f64) -> Result<usize> {
    if tail_envelope(m, MAX_CUTOFF) >= tol {
        return Err(Error::Convergence {
            what: "photon-number tail",
            tail: tail_envelope(m, MAX_CUTOFF),
            tol,
            cutoff: MAX_CUTOFF,
        });
    }
    let (mut lo, mut hi) = (0usize, MAX_CUTOFF);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tail_envelope(m, mid) < tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Photon-number distribution p(n) for n ≤ cutoff, with an explicit tail
/// bound. Entries that are negative within the evaluation's cancellation
/// noise floor (never better than −1e−12) are clamped to zero and counted;
/// anything below the floor is a genuine precision failure and is reported
/// as such.
pub fn photon_pmf(m: &ModeGaussian, cutoff: usize) -> Result<Pmf> {
    let (pmf, _) = evaluate_tables(m, None, cutoff)?;
    Ok(pmf)
}

/// Result of one backend's pass over the table.
enum TablePass {
    /// Every entry certified against its floor.
    Full {
        probs: Vec<f64>,
        derivs: Vec<f64>,
        clamped: usize,
    },
    /// The noise floor overtook the entries at index `at`; entries below it
    /// are certified.
    Crossed {
        at: usize,
        probs: Vec<f64>,
        derivs: Vec<f64>,
        clamped: usize,
    },
    /// An entry came out more negative than its floor allows.
    Failed { at: usize, value: f64, floor: f64 },
}

fn table_pass<T: SumNum>(
    m: &ModeGaussian,
    grad: Option<&ModeGrad>,
    cutoff: usize,
    ctx: T::Ctx,
) -> TablePass {
    let engine = PmfEngine::<T>::new(m, grad, cutoff, ctx);
    let mut probs = Vec::with_capacity(cutoff + 1);
    let mut derivs = Vec::with_capacity(if grad.is_some() { cutoff + 1 } else { 0 });
    let mut clamped = 0usize;
    for n in 0..=cutoff {
        let (p, dp, floor) = if grad.is_some() {
            engine.prob_and_deriv(n)
        } else {
            let (p, floor) = engine.prob_with_floor(n);
            (p, 0.0, floor)
        };
        if p < -(1e-12f64).max(floor) {
            return TablePass::Failed {
                at: n,
                value: p,
                floor,
            };
        }
        if p <= floor && floor > 1e-12 {
            return TablePass::Crossed {
                at: n,
                probs,
                derivs,
                clamped,
            };
        }
        if p <= floor.max(0.0) {
            if p != 0.0 {
                clamped += 1;
            }
            probs.push(0.0);
            if grad.is_some() {
                derivs.push(0.0);
            }
        } else {
            probs.push(p);
            if grad.is_some() {
                derivs.push(dp);
            }
        }
    }
    TablePass::Full {
        probs,
        derivs,
        clamped,
    }
}

/// Evaluate the distribution (and derivatives when `grad` is given) for every
/// n ≤ cutoff: double-double first, escalating to big fixed-point arithmetic
/// when the cancellation floor crosses the table. If even the escalated pass
/// cannot certify the full range, the remainder is zero-filled and the tail
/// bound accounts for it from the last certified index.
fn evaluate_tables(
    m: &ModeGaussian,
    grad: Option<&ModeGrad>,
    cutoff: usize,
) -> Result<(Pmf, Vec<f64>)> {
    let pass = match table_pass::<Dd>(m, grad, cutoff, ()) {
        full @ TablePass::Full { .. } => full,
        _ => {
            let bits = (256 + 3 * cutoff).min(16 * 1024) as u32;
            log::debug!("photon_pmf: escalating to {bits}-bit fixed point for cutoff {cutoff}");
            table_pass::<BigFixed>(m, grad, cutoff, bits)
        }
    };
    let (mut probs, mut derivs, clamped, reliable) = match pass {
        TablePass::Full {
            probs,
            derivs,
            clamped,
        } => (probs, derivs, clamped, cutoff),
        TablePass::Crossed {
            at,
            probs,
            derivs,
            clamped,
        } => (probs, derivs, clamped, at.saturating_sub(1)),
        TablePass::Failed { at, value, floor } => {
            return Err(Error::Convergence {
                what: "photon_pmf inner-sum cancellation",
                tail: -value,
                tol: (1e-12f64).max(floor),
                cutoff: at,
            });
        }
    };
    let clamped = clamped + (cutoff + 1 - probs.len());
    probs.resize(cutoff + 1, 0.0);
    derivs.resize(cutoff + 1, 0.0);
    let pmf = Pmf {
        probs,
        cutoff,
        tail_bound: tail_envelope(m, reliable),
        clamped,
        reliable_cutoff: reliable,
    };
    Ok((pmf, derivs))
}

/// [`photon_pmf`] with the cutoff sized automatically so the tail bound is
/// below `tol`.
pub fn photon_pmf_auto(m: &ModeGaussian, tol: f64) -> Result<Pmf> {
    photon_pmf(m, required_cutoff(m, tol)?)
}

/// ∂p(n|φ)/∂φ of a mode whose displacement carries the phase dependence.
///
/// Sum of the three closed-form pieces: the derivative of the Gaussian
/// prefactor and the two shifted-index hypergeometric derivatives. Prefer
/// [`pmf_with_derivative`] when more than one n is needed.
pub fn pmf_derivative(mg: &ModeGrad, n: usize) -> f64 {
    PmfEngine::<Dd>::new(&mg.mode, Some(mg), n, ())
        .prob_and_deriv(n)
        .1
}

/// Distribution and its φ-derivative for every n ≤ cutoff.
pub fn pmf_with_derivative(mg: &ModeGrad, cutoff: usize) -> Result<(Pmf, Vec<f64>)> {
    evaluate_tables(&mg.mode, Some(mg), cutoff)
}

/// Classical Fisher information of photon counting on both output modes:
/// I = Σ_{l∈{H,V}} Σ_n (∂_φ p_l(n))² / p_l(n), truncated at `cutoff`.
///
/// Entries with p(n) < 1e−300 are skipped (their mass is logged). The
/// unrepresented probability mass of each mode must stay below 1e−6 or the
/// call fails explicitly; the information carried by that mass is smaller
/// still, since per-n contributions decay with p(n).
pub fn cfi(p: &ProtocolParams, cutoff: usize) -> Result<f64> {
    cfi_with_mass_tol(p, cutoff, 1e-6)
}

/// [`cfi`] with a caller-chosen bound on each mode's unrepresented mass.
pub fn cfi_with_mass_tol(p: &ProtocolParams, cutoff: usize, mass_tol: f64) -> Result<f64> {
    let tm = gaussian::output_state_with_grad(p);
    let mut total = 0.0f64;
    for mode in [&tm.h, &tm.v] {
        let (pmf, derivs) = pmf_with_derivative(mode, cutoff)?;
        if pmf.tail_bound > mass_tol {
            return Err(Error::Convergence {
                what: "cfi photon-number tail",
                tail: pmf.tail_bound,
                tol: mass_tol,
                cutoff,
            });
        }
        let mut skipped_mass = 0.0f64;
        for (pn, dpn) in pmf.probs.iter().zip(&derivs) {
            if *pn < 1e-300 {
                skipped_mass += pn.max(0.0);
                continue;
            }
            total += dpn * dpn / pn;
        }
        if skipped_mass > 0.0 {
            log::debug!("cfi: skipped probability mass {skipped_mass:.3e}");
        }
    }
    Ok(total)
}

/// [`cfi`] with the cutoff sized from the modes' tail envelopes. The
/// envelope-requested cutoff is capped by what the closed form can certify,
/// so `tol` below ~1e−6 may still end in a convergence error for states
/// whose distributions decay slowly.
pub fn cfi_auto(p: &ProtocolParams, tol: f64) -> Result<f64> {
    let tm = gaussian::output_state_with_grad(p);
    let cutoff = required_cutoff(&tm.h.mode, tol)?.max(required_cutoff(&tm.v.mode, tol)?);
    cfi_with_mass_tol(p, cutoff, tol.max(1e-6))
}

/// First and second moments of the photon-difference observable D = n_H − n_V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    /// ⟨D⟩, counts per pulse.
    pub mean_d: f64,
    /// σ²(D), counts² per pulse.
    pub var_d: f64,
    /// Phase-independent fluctuation coefficient a(n̄, η).
    pub a_coeff: f64,
    /// Phase-dependent fluctuation coefficient b(n̄, η).
    pub b_coeff: f64,
}

/// Mean photon-number difference
/// ⟨D⟩ = η|β|²[cos φ (1+2n̄) + cos(φ+λ−2θ)·2√(n̄(1+n̄))].
pub fn mean_d(p: &ProtocolParams) -> f64 {
    let nb = n_bar(p.g);
    let cross = 2.0 * (nb * (1.0 + nb)).sqrt();
    p.eta
        * p.beta_sq()
        * (p.phi.cos() * (1.0 + 2.0 * nb) + (p.phi + p.lambda - 2.0 * p.theta).cos() * cross)
}

/// Fluctuations of D:
/// σ²(D) = η[a(n̄,η) + cos φ cos(φ+λ−2θ) b(n̄,η)], with
/// a = 2n̄(1+η+2ηn̄) + |β|²[1+2n̄+ηn̄(6+8n̄)] and
/// b = 2√(n̄(1+n̄))|β|²(1+η+4ηn̄).
pub fn var_d(p: &ProtocolParams) -> MomentStats {
    let nb = n_bar(p.g);
    let beta_sq = p.beta_sq();
    let a = 2.0 * nb * (1.0 + p.eta + 2.0 * p.eta * nb)
        + beta_sq * (1.0 + 2.0 * nb + p.eta * nb * (6.0 + 8.0 * nb));
    let b = 2.0 * (nb * (1.0 + nb)).sqrt() * beta_sq * (1.0 + p.eta + 4.0 * p.eta * nb);
    let var = p.eta * (a + p.phi.cos() * (p.phi + p.lambda - 2.0 * p.theta).cos() * b);
    MomentStats {
        mean_d: mean_d(p),
        var_d: var,
        a_coeff: a,
        b_coeff: b,
    }
}

fn mean_d_slope(p: &ProtocolParams) -> f64 {
    let nb = n_bar(p.g);
    let cross = 2.0 * (nb * (1.0 + nb)).sqrt();
    -p.eta
        * p.beta_sq()
        * (p.phi.sin() * (1.0 + 2.0 * nb) + (p.phi + p.lambda - 2.0 * p.theta).sin() * cross)
}

/// Phase error of the photon-difference estimator by error propagation:
/// δφ = √σ²(D) / |∂⟨D⟩/∂φ|.
///
/// Fails at an insensitive working point (vanishing slope), e.g. φ = 0 with
/// λ = 2θ, or whenever η|β|² = 0.
pub fn sensitivity(p: &ProtocolParams) -> Result<f64> {
    let nb = n_bar(p.g);
    let slope_scale = p.eta * p.beta_sq() * (1.0 + 2.0 * nb + 2.0 * (nb * (1.0 + nb)).sqrt());
    let slope = mean_d_slope(p);
    if slope_scale <= 0.0 || slope.abs() < 1e-12 * slope_scale {
        return Err(Error::InsensitiveWorkingPoint { phi: p.phi });
    }
    Ok(var_d(p).var_d.sqrt() / slope.abs())
}

/// Minimal phase error of the photon-difference estimator: [`sensitivity`] at
/// the working point φ = π/2, λ = 2θ, where the signal slope is steepest.
pub fn sensitivity_optimal(p: &ProtocolParams) -> Result<f64> {
    sensitivity(&p.with_phi(std::f64::consts::FRAC_PI_2).at_locked_pump())
}

/// Per-mode detected signal with the pump phase averaged out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedSignal {
    /// ⟨n_H⟩ = η[n̄ + |β|²(1+2n̄)cos²(φ/2)], counts per pulse.
    pub n_h: f64,
    /// ⟨n_V⟩ = η[n̄ + |β|²(1+2n̄)sin²(φ/2)], counts per pulse.
    pub n_v: f64,
    /// ⟨D⟩ = n_h − n_v.
    pub d: f64,
}

/// Detected count rates when the pump phase is unstabilized and averages
/// uniformly; λ drops out entirely.
pub fn averaged_signal(p: &ProtocolParams) -> AveragedSignal {
    let nb = n_bar(p.g);
    let amp = p.beta_sq() * (1.0 + 2.0 * nb);
    let n_h = p.eta * (nb + amp * (0.5 * p.phi).cos().powi(2));
    let n_v = p.eta * (nb + amp * (0.5 * p.phi).sin().powi(2));
    AveragedSignal {
        n_h,
        n_v,
        d: n_h - n_v,
    }
}

/// Phase error of the pump-phase-averaged experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedSensitivity {
    /// δφ = √(2n̄ + |β|²(1+2n̄)) / (|β|²√η (1+2n̄) |sin φ|).
    pub delta_phi: f64,
    /// Whether η⟨n_±⟩ < 1 holds, the validity condition of the Poissonian
    /// counting model behind the formula.
    pub poisson_regime: bool,
}

/// Sensitivity of the phase-averaged model, Poissonian counting statistics.
/// Fails where sin φ = 0 (signal slope vanishes) or the probe carries no
/// detectable light.
pub fn averaged_sensitivity(p: &ProtocolParams) -> Result<AveragedSensitivity> {
    let nb = n_bar(p.g);
    let denom = p.beta_sq() * p.eta.sqrt() * (1.0 + 2.0 * nb) * p.phi.sin().abs();
    if denom < 1e-12 * p.beta_sq().max(1.0) {
        return Err(Error::InsensitiveWorkingPoint { phi: p.phi });
    }
    let sig = averaged_signal(p);
    let num = (2.0 * nb + p.beta_sq() * (1.0 + 2.0 * nb)).sqrt();
    Ok(AveragedSensitivity {
        delta_phi: num / denom,
        poisson_regime: sig.n_h.max(sig.n_v) < 1.0,
    })
}

/// Reference scheme an amplified run is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Homodyne reading of the unamplified probe: δφ² = 1/(2|β|²η).
    HomodyneSql,
    /// Photon-difference counting of the unamplified probe at the same phase:
    /// δφ = 1/(|β|√η |sin φ|).
    UnamplifiedDifference,
}

/// Enhancement factor (δφ_ref/δφ)² of the phase-averaged amplified scheme
/// over a reference run with the same |β|² and η: the fraction of additional
/// repetitions the reference needs to match the amplified accuracy.
///
/// η cancels in the ratio. Which reference a measured enhancement should be
/// normalized to is ambiguous, so both are exposed; at the φ = π/2 working
/// point they differ by exactly a factor of 2.
pub fn enhancement(p: &ProtocolParams, reference: Reference) -> Result<f64> {
    let exp = averaged_sensitivity(p)?.delta_phi;
    let ref_sq = match reference {
        Reference::HomodyneSql => 1.0 / (2.0 * p.beta_sq() * p.eta),
        Reference::UnamplifiedDifference => {
            let r = averaged_sensitivity(&p.with_g(0.0))?.delta_phi;
            r * r
        }
    };
    Ok(ref_sq / (exp * exp))
}

/// Brute-force Fock-basis photon distribution of a mode, built from the
/// spectral form of the state with no shared algebra with [`photon_pmf`].
/// See [`crate::fock`] for the machinery.
pub fn pmf_oracle(m: &ModeGaussian, cutoff: usize) -> Result<Pmf> {
    fock::pmf_oracle(m, cutoff)
}

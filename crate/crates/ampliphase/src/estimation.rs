//! Monte Carlo photon-counting experiments and Bayesian inference of the
//! phase.
//!
//! A run samples per-pulse photon pairs (n_H, n_V) from either the exact
//! per-mode distributions or the pump-phase-averaged Poissonian model, then
//! reduces them to a posterior over a regular phase grid on [0, π). The
//! two-step adaptive protocol first locates the phase roughly without
//! amplification, shifts the interferometer to its steepest working point,
//! and spends the remaining pulses there with the amplifier on.
//!
//! Determinism: every run owns a ChaCha8 generator derived from the master
//! seed by `seed_from_u64(seed)` with the run index as the stream number
//! ([`run_rng`]), so results are bit-reproducible for a fixed (config, seed)
//! regardless of thread scheduling.

use crate::error::{Error, Result};
use crate::gaussian;
use crate::params::{wrap_angle, ProtocolParams};
use crate::photon::{self, averaged_signal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, PI};

/// How per-pulse counts are generated and, symmetrically, how the posterior
/// likelihood is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountModel {
    /// Sample each mode from its exact photon-number distribution.
    ExactPmf,
    /// Poissonian counts at the pump-phase-averaged mean rates; the model of
    /// an unstabilized amplifier.
    PhaseAveragedPoisson,
}

/// Configuration of one repeated-pulse experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub params: ProtocolParams,
    /// Number of repeated pulses M.
    pub pulses: usize,
    /// Master seed for the deterministic generator.
    pub seed: u64,
    pub model: CountModel,
    /// Resolution of the posterior grid over [0, π).
    pub phi_grid_points: usize,
}

impl ExperimentConfig {
    pub fn new(
        params: ProtocolParams,
        pulses: usize,
        seed: u64,
        model: CountModel,
    ) -> Result<Self> {
        Self::with_grid(params, pulses, seed, model, 2048)
    }

    pub fn with_grid(
        params: ProtocolParams,
        pulses: usize,
        seed: u64,
        model: CountModel,
        phi_grid_points: usize,
    ) -> Result<Self> {
        if pulses < 1 {
            return Err(Error::InvalidConfig("pulses must be ≥ 1".into()));
        }
        if phi_grid_points < 16 {
            return Err(Error::InvalidConfig("phi_grid_points must be ≥ 16".into()));
        }
        Ok(Self {
            params,
            pulses,
            seed,
            model,
            phi_grid_points,
        })
    }
}

/// Per-pulse photon counts of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountData {
    /// (n_H, n_V) for every pulse, in pulse order.
    pub pairs: Vec<(u32, u32)>,
    /// Master seed the run was generated from.
    pub seed: u64,
}

impl CountData {
    /// Count histograms (H, V) up to the largest observed count.
    fn histograms(&self) -> (Vec<u64>, Vec<u64>) {
        let max = self.pairs.iter().map(|&(h, v)| h.max(v)).max().unwrap_or(0) as usize;
        let mut hh = vec![0u64; max + 1];
        let mut vv = vec![0u64; max + 1];
        for &(h, v) in &self.pairs {
            hh[h as usize] += 1;
            vv[v as usize] += 1;
        }
        (hh, vv)
    }
}

/// Discretized posterior over the phase grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiPosterior {
    /// Midpoint grid over [0, π).
    pub grid: Vec<f64>,
    /// Normalized weights.
    pub weights: Vec<f64>,
}

impl PhiPosterior {
    /// Uniform prior on a regular midpoint grid over [0, π).
    pub fn uniform(n: usize) -> Self {
        let grid = (0..n).map(|k| PI * (k as f64 + 0.5) / n as f64).collect();
        Self {
            grid,
            weights: vec![1.0 / n as f64; n],
        }
    }
}

/// Point estimate read off a posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    /// Posterior mean.
    pub phi_hat: f64,
    /// Posterior standard deviation.
    pub err: f64,
    /// Raised when a second posterior mode carries more than 20% of the mass.
    pub multimodal: bool,
}

/// Outcome of one two-step adaptive run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepResult {
    /// Unamplified rough estimate from step I.
    pub phi_rough: f64,
    /// Applied shift ψ = π/2 − φ_rough.
    pub psi_shift: f64,
    /// Final estimate, in the original frame on [0, π).
    pub phi_hat: f64,
    /// Posterior standard deviation of step II.
    pub err: f64,
    pub m1: usize,
    pub m2: usize,
    /// Step-I posterior too flat to pick a reliable working point; the run
    /// still counts in aggregate statistics.
    pub degraded: bool,
}

/// Inputs of the two-stage resource-allocation bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveBoundInputs {
    /// Total number of measurements M.
    pub m: u64,
    /// Fraction p = M₁/M spent on the rough stage, in (0, 1).
    pub p: f64,
    /// Fisher information per measurement of the rough stage at the true
    /// phase.
    pub i1: f64,
    /// Fisher information per measurement of the amplified stage at its
    /// working point.
    pub i2_0: f64,
    /// Curvature of the amplified-stage information at the working point,
    /// ≤ 0 because the working point is its maximum.
    pub i2pp_0: f64,
}

/// Per-run generator: ChaCha8 seeded from the master seed, with the run index
/// selecting an independent stream.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

enum ModeSampler {
    /// Inverse-CDF table from the exact distribution; draws above the table
    /// (bounded mass < 1e−12) land in the last bin.
    Table {
        cdf: Vec<f64>,
        total: f64,
    },
    Poisson(Option<Poisson<f64>>),
}

impl ModeSampler {
    fn exact(mode: &gaussian::ModeGaussian) -> Result<Self> {
        let pmf = photon::photon_pmf_auto(mode, 1e-12)?;
        let mut acc = 0.0;
        let cdf: Vec<f64> = pmf
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let total = acc + pmf.tail_bound;
        Ok(ModeSampler::Table { cdf, total })
    }

    fn poisson(mean: f64) -> Result<Self> {
        if mean < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "negative Poisson mean {mean}"
            )));
        }
        if mean == 0.0 {
            return Ok(ModeSampler::Poisson(None));
        }
        Ok(ModeSampler::Poisson(Some(Poisson::new(mean).map_err(
            |e| Error::InvalidConfig(format!("Poisson mean {mean}: {e}")),
        )?)))
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            ModeSampler::Table { cdf, total } => {
                let u = rng.random::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
            }
            ModeSampler::Poisson(None) => 0,
            ModeSampler::Poisson(Some(d)) => d.sample(rng) as u32,
        }
    }
}

fn build_samplers(
    params: &ProtocolParams,
    model: CountModel,
) -> Result<(ModeSampler, ModeSampler)> {
    match model {
        CountModel::ExactPmf => {
            let tm = gaussian::output_state(params);
            Ok((ModeSampler::exact(&tm.h)?, ModeSampler::exact(&tm.v)?))
        }
        CountModel::PhaseAveragedPoisson => {
            if params.lambda != 0.0 {
                log::warn!(
                    "phase-averaged model ignores the pump phase λ = {}; counts are averaged over it",
                    params.lambda
                );
            }
            let sig = averaged_signal(params);
            Ok((
                ModeSampler::poisson(sig.n_h)?,
                ModeSampler::poisson(sig.n_v)?,
            ))
        }
    }
}

/// Sample the per-pulse counts of one run (stream 0 of the master seed).
pub fn simulate_counts(c: &ExperimentConfig) -> Result<CountData> {
    simulate_counts_with_stream(c, 0)
}

/// Sample one run on an explicit stream of the master seed, for callers that
/// manage several independent stages or repetitions.
pub fn simulate_counts_with_stream(c: &ExperimentConfig, stream: u64) -> Result<CountData> {
    let (sh, sv) = build_samplers(&c.params, c.model)?;
    let mut rng = run_rng(c.seed, stream);
    let pairs = (0..c.pulses)
        .map(|_| (sh.sample(&mut rng), sv.sample(&mut rng)))
        .collect();
    Ok(CountData {
        pairs,
        seed: c.seed,
    })
}

/// Bayesian update of a phase posterior with the counts of one run.
///
/// Weights ∝ prior × Π_pulses p(n_H|φ)p(n_V|φ), accumulated in log space off
/// the count histograms. Fails explicitly if every grid weight underflows.
pub fn posterior_update(
    prior: &PhiPosterior,
    data: &CountData,
    c: &ExperimentConfig,
) -> Result<PhiPosterior> {
    posterior_update_shifted(prior, data, c, 0.0)
}

/// [`posterior_update`], but with the likelihood family evaluated at
/// φ_grid + shift: the state physically carries the shifted phase while the
/// posterior stays on the original-frame grid.
pub fn posterior_update_shifted(
    prior: &PhiPosterior,
    data: &CountData,
    c: &ExperimentConfig,
    shift: f64,
) -> Result<PhiPosterior> {
    let (hist_h, hist_v) = data.histograms();
    let n_max = hist_h.len() - 1;
    let pulses = data.pairs.len() as f64;

    let log_lik: Vec<f64> = match c.model {
        CountModel::ExactPmf => prior
            .grid
            .par_iter()
            .map(|&phi| {
                let tm = gaussian::output_state(&c.params.with_phi(phi + shift));
                let table = |mode, hist: &[u64]| -> Result<f64> {
                    let pmf = photon::photon_pmf(mode, n_max)?;
                    Ok(hist
                        .iter()
                        .enumerate()
                        .filter(|(_, &k)| k > 0)
                        .map(|(n, &k)| k as f64 * pmf.probs[n].ln())
                        .sum())
                };
                Ok(table(&tm.h, &hist_h)? + table(&tm.v, &hist_v)?)
            })
            .collect::<Result<_>>()?,
        CountModel::PhaseAveragedPoisson => {
            let (s_h, s_v) = data
                .pairs
                .iter()
                .fold((0u64, 0u64), |(a, b), &(h, v)| (a + h as u64, b + v as u64));
            prior
                .grid
                .par_iter()
                .map(|&phi| {
                    let sig = averaged_signal(&c.params.with_phi(phi + shift));
                    let term = |s: u64, mu: f64| {
                        if s == 0 {
                            -pulses * mu
                        } else if mu <= 0.0 {
                            f64::NEG_INFINITY
                        } else {
                            s as f64 * mu.ln() - pulses * mu
                        }
                    };
                    Ok(term(s_h, sig.n_h) + term(s_v, sig.n_v))
                })
                .collect::<Result<_>>()?
        }
    };

    let log_post: Vec<f64> = prior
        .weights
        .iter()
        .zip(&log_lik)
        .map(|(&w, &ll)| {
            if w > 0.0 {
                w.ln() + ll
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let peak = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::PosteriorUnderflow {
            grid_points: prior.grid.len(),
        });
    }
    let mut weights: Vec<f64> = log_post.iter().map(|&lp| (lp - peak).exp()).collect();
    let norm: f64 = weights.iter().sum();
    debug_assert!(norm > 0.0);
    weights.iter_mut().for_each(|w| *w /= norm);
    Ok(PhiPosterior {
        grid: prior.grid.clone(),
        weights,
    })
}

/// Posterior mean and standard deviation on the grid, with a multimodality
/// flag.
///
/// Modes are the connected runs of grid points whose weight exceeds 5% of the
/// peak; the flag is raised when the mass outside the heaviest run exceeds
/// 20% of the total.
pub fn point_estimate(post: &PhiPosterior) -> PointEstimate {
    let mean: f64 = post
        .grid
        .iter()
        .zip(&post.weights)
        .map(|(&x, &w)| x * w)
        .sum();
    let second: f64 = post
        .grid
        .iter()
        .zip(&post.weights)
        .map(|(&x, &w)| x * x * w)
        .sum();
    let err = (second - mean * mean).max(0.0).sqrt();

    let peak = post.weights.iter().cloned().fold(0.0, f64::max);
    let threshold = 0.05 * peak;
    let mut component_masses = Vec::new();
    let mut current = 0.0;
    for &w in &post.weights {
        if w > threshold {
            current += w;
        } else if current > 0.0 {
            component_masses.push(current);
            current = 0.0;
        }
    }
    if current > 0.0 {
        component_masses.push(current);
    }
    let largest = component_masses.iter().cloned().fold(0.0, f64::max);
    let in_components: f64 = component_masses.iter().sum();
    let multimodal = component_masses.len() > 1 && (in_components - largest) > 0.2;

    PointEstimate {
        phi_hat: mean,
        err,
        multimodal,
    }
}

/// Run the two-step adaptive protocol.
///
/// Step I spends `round(fraction_p · M)` pulses without amplification to get
/// a rough estimate φ_r; step II applies the shift ψ = π/2 − φ_r, locks the
/// pump phase to λ = 2θ, and spends the remaining pulses at the amplified
/// working point. The step-II posterior lives on the original-frame grid, so
/// the final estimate needs no re-mapping; its standard deviation is the
/// quoted error.
///
/// The step-I posterior is carried forward as the step-II prior. Besides
/// being the sequentially correct update, this is what disambiguates the
/// exact reflection degeneracy p(n | φ_tot) = p(n | −φ_tot) of the locked
/// pump: a step-I fluke can shift the frame enough to pull the mirror image
/// of the working point onto the grid, and only the rough information rules
/// it out.
pub fn two_step_run(c: &ExperimentConfig, fraction_p: f64) -> Result<TwoStepResult> {
    if !(fraction_p > 0.0 && fraction_p < 1.0) {
        return Err(Error::InvalidParam {
            name: "fraction_p",
            value: fraction_p,
            expected: "a fraction in (0, 1)",
        });
    }
    if c.pulses < 2 {
        return Err(Error::InvalidConfig(
            "two-step protocol needs at least 2 pulses".into(),
        ));
    }
    let m1 = ((fraction_p * c.pulses as f64).round() as usize).clamp(1, c.pulses - 1);
    let m2 = c.pulses - m1;

    // Step I: no amplification, stream 1.
    let cfg1 = ExperimentConfig {
        params: c.params.with_g(0.0),
        pulses: m1,
        ..*c
    };
    let data1 = simulate_counts_with_stream(&cfg1, 1)?;
    let prior = PhiPosterior::uniform(c.phi_grid_points);
    let post1 = posterior_update(&prior, &data1, &cfg1)?;
    let est1 = point_estimate(&post1);
    // A near-uniform posterior (std → π/√12 ≈ 0.907) cannot select a
    // meaningful shift.
    let degraded = est1.err > FRAC_PI_2 / 2.0;
    let psi = wrap_angle(FRAC_PI_2 - est1.phi_hat);

    // Step II: amplified, pump locked, physical phase φ + ψ, stream 2.
    let locked = c.params.at_locked_pump();
    let cfg2 = ExperimentConfig {
        params: locked.with_phi(locked.phi + psi),
        pulses: m2,
        ..*c
    };
    let data2 = simulate_counts_with_stream(&cfg2, 2)?;
    let cfg2_grid = ExperimentConfig {
        params: locked,
        ..cfg2
    };
    let est2 = point_estimate(&posterior_update_shifted(&post1, &data2, &cfg2_grid, psi)?);

    Ok(TwoStepResult {
        phi_rough: est1.phi_hat,
        psi_shift: psi,
        phi_hat: est2.phi_hat,
        err: est2.err,
        m1,
        m2,
        degraded,
    })
}

/// Default step-I fraction for a configuration, from the closed-form Fisher
/// informations: I₁ = η|β|² for unamplified photon counting (independent of
/// φ), I₂(0) from the working-point sensitivity, and the curvature from
/// central differences of the sensitivity around π/2.
pub fn suggest_fraction(c: &ExperimentConfig) -> Result<f64> {
    let p = &c.params;
    let i1 = p.eta * p.beta_sq();
    if i1 <= 0.0 {
        return Err(Error::InvalidConfig(
            "no detectable probe light: η|β|² = 0 carries no phase information".into(),
        ));
    }
    let locked = p.at_locked_pump();
    let info = |phi: f64| -> Result<f64> {
        let d = photon::sensitivity(&locked.with_phi(phi))?;
        Ok(1.0 / (d * d))
    };
    let i2_0 = info(FRAC_PI_2)?;
    let h = 1e-3;
    let i2pp = (info(FRAC_PI_2 + h)? - 2.0 * i2_0 + info(FRAC_PI_2 - h)?) / (h * h);
    let a = i2pp.abs() / (2.0 * c.pulses as f64 * i1 * i2_0);
    let min_p = 1.0 / c.pulses as f64;
    Ok(optimal_fraction(a).clamp(min_p, 0.5))
}

/// Optimal step-I fraction p_opt = √(A²+A) − A, evaluated in the
/// cancellation-free form A/(√(A²+A)+A). Increases from 0 at A = 0 towards
/// the asymptote 1/2 − 1/(8A).
pub fn optimal_fraction(a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    if a == 0.0 {
        return 0.0;
    }
    a / ((a * a + a).sqrt() + a)
}

/// The p-independent curvature coefficient A = |I₂″(0)| / (2 M I₁ I₂(0)).
pub fn adaptive_a_coeff(inp: &AdaptiveBoundInputs) -> f64 {
    inp.i2pp_0.abs() / (2.0 * inp.m as f64 * inp.i1 * inp.i2_0)
}

/// Accuracy floor of the two-stage protocol:
///
/// ```text
/// δ²φ ≥ 1/((1−p) M I₂(0)) · [1 + |I₂″(0)| / (2 p M I₁ I₂(0))]
/// ```
///
/// Strictly above the one-stage floor 1/(M I₂(0)) for any p ∈ (0, 1);
/// p ∈ {0, 1} is rejected.
pub fn adaptive_bound(inp: &AdaptiveBoundInputs) -> Result<f64> {
    if !(inp.p > 0.0 && inp.p < 1.0) {
        return Err(Error::InvalidParam {
            name: "p",
            value: inp.p,
            expected: "a fraction strictly inside (0, 1)",
        });
    }
    if inp.m < 1 || inp.i1 <= 0.0 || inp.i2_0 <= 0.0 || inp.i2pp_0 > 0.0 {
        return Err(Error::InvalidConfig(
            "adaptive bound needs M ≥ 1, I₁ > 0, I₂(0) > 0, I₂″(0) ≤ 0".into(),
        ));
    }
    let m = inp.m as f64;
    let correction = 1.0 + adaptive_a_coeff(inp) / inp.p;
    Ok(correction / ((1.0 - inp.p) * m * inp.i2_0))
}

//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured figure. Criterion 10 (byte-identical CLI artifacts) lives in
//! the CLI crate's test suite next to the binary it exercises.

use ampliphase::estimation::{
    adaptive_a_coeff, adaptive_bound, optimal_fraction, suggest_fraction, two_step_run,
    AdaptiveBoundInputs, CountModel, ExperimentConfig,
};
use ampliphase::gaussian::{eigen_spectrum, lossy_squeezed_vacuum, output_state, ModeGaussian};
use ampliphase::{fisher, fock, photon, ProtocolParams, C64};
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::time::Instant;

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

#[test]
fn criterion_01_qfi_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut points = 0usize;
    for beta_sq in [0.0, 1.0, 4.0] {
        for g in [0.0, 0.5, 1.0] {
            for eta in [0.1, 0.5, 1.0] {
                for phi in [0.0, FRAC_PI_4, FRAC_PI_2] {
                    let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, eta, phi).unwrap();
                    let closed = fisher::qfi_phase_dependent(&p);
                    let numeric = fisher::qfi_numeric(&p, 80).unwrap().value;
                    let dev = rel_dev(closed, numeric);
                    assert!(
                        dev <= 1e-6,
                        "closed {closed} vs numeric {numeric} at β²={beta_sq} g={g} η={eta} φ={phi}"
                    );
                    worst = worst.max(dev);
                    points += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert_eq!(points, 81);
    assert!(elapsed.as_secs_f64() < 120.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 01 PASS: closed vs Fock QFI agree to {worst:.2e} (≤1e-6 rel) \
         on 81 grid points in {:.2}s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_02_exact_limits() {
    // Lossless-gain and zero-gain collapses of the optimal QFI.
    for beta_sq in [0.5, 9.0, 20.0] {
        for eta in [0.05, 0.4, 1.0] {
            let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, 0.0, 0.0, eta, 0.3).unwrap();
            assert!(rel_dev(fisher::qfi_optimal(&p).value, 2.0 * beta_sq * eta) < 1e-12);
        }
        for g in [0.0, 0.7, 2.5] {
            let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, 1.0, 0.3).unwrap();
            assert!(rel_dev(fisher::qfi_optimal(&p).value, 2.0 * beta_sq) < 1e-12);
        }
        // Unamplified sensitivity at the working point.
        for eta in [0.1, 0.5, 1.0] {
            let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, 0.0, 0.0, eta, FRAC_PI_2).unwrap();
            let d = photon::sensitivity(&p).unwrap();
            assert!(rel_dev(d, 1.0 / (eta * beta_sq).sqrt()) < 1e-12);
        }
    }
    // Closed-form reductions of the building blocks.
    assert_eq!(fisher::n_bar(0.0), 0.0);
    assert_eq!(fisher::qfi_sql(20.0), 40.0);
    assert_eq!(fisher::qfi_sql(9.0), 18.0);
    let (g_eff, n_eff) = lossy_squeezed_vacuum(1.7, 1.0).unwrap();
    assert!((g_eff - 1.7).abs() < 1e-12 && n_eff < 1e-12);
    assert_eq!(lossy_squeezed_vacuum(1.7, 0.0).unwrap(), (0.0, 0.0));
    let th = ModeGaussian {
        n_eff: 1.0,
        ..ModeGaussian::vacuum()
    };
    assert!((eigen_spectrum(&th, 2) - 0.125).abs() < 1e-15);
    println!("ACCEPTANCE 02 PASS: all closed-form limits hold to 1e-12 relative");
}

#[test]
fn criterion_03_sensitivity_cross_validation() {
    // Error propagation from brute-force Fock moments vs the closed form, at
    // the φ = π/2, λ = 2θ working point with a non-trivial probe phase.
    let theta = 0.15;
    let mut worst = 0.0f64;
    for beta_sq in [4.0, 20.0] {
        for g in [0.5, 1.0] {
            for eta in [0.1, 0.5] {
                let p =
                    ProtocolParams::from_beta_sq(beta_sq, theta, g, 2.0 * theta, eta, FRAC_PI_2)
                        .unwrap();
                let closed = photon::sensitivity_optimal(&p).unwrap();

                let moments = |phi: f64| {
                    let tm = output_state(&p.with_phi(phi));
                    let mode_stats = |m: &ModeGaussian| {
                        let cutoff =
                            (photon::required_cutoff(m, 1e-13).unwrap() as f64 * 1.3) as usize + 10;
                        let pmf = fock::pmf_oracle(m, cutoff).unwrap();
                        assert_eq!(pmf.reliable_cutoff, cutoff, "oracle uncertified for {m:?}");
                        (pmf.mean(), pmf.variance())
                    };
                    let (mh, vh) = mode_stats(&tm.h);
                    let (mv, vv) = mode_stats(&tm.v);
                    (mh - mv, vh + vv)
                };
                let (_, var_d) = moments(FRAC_PI_2);
                let h = 1e-4;
                let slope = (moments(FRAC_PI_2 + h).0 - moments(FRAC_PI_2 - h).0) / (2.0 * h);
                let oracle = var_d.sqrt() / slope.abs();

                let dev = rel_dev(closed, oracle);
                assert!(
                    dev <= 1e-6,
                    "closed {closed} vs oracle {oracle} at β²={beta_sq} g={g} η={eta}"
                );
                worst = worst.max(dev);
            }
        }
    }
    println!(
        "ACCEPTANCE 03 PASS: δφ closed form vs Fock-moment error propagation agree \
         to {worst:.2e} (≤1e-6 rel) on 8 points"
    );
}

#[test]
fn criterion_04_sql_recovery() {
    let beta_sq = 20.0;
    let eta = 0.1;
    let scan: Vec<f64> = (0..=60).map(|i| 0.1 * i as f64).collect();

    let mut prev_ratio = 0.0;
    let mut ratio_threshold = None;
    for &g in &scan {
        let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, eta, 0.0).unwrap();
        let ratio = fisher::qfi_optimal(&p).ratio_to_sql;
        assert!(ratio >= prev_ratio - 1e-12, "ratio not monotone at g={g}");
        prev_ratio = ratio;
        if ratio > 0.95 && ratio_threshold.is_none() {
            ratio_threshold = Some(g);
        }
    }
    let g_ratio = ratio_threshold.expect("QFI ratio never exceeded 0.95");

    let mut prev = f64::INFINITY;
    let mut sens_threshold = None;
    for &g in &scan {
        if g == 0.0 {
            continue;
        }
        let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, eta, FRAC_PI_2).unwrap();
        let v = photon::sensitivity_optimal(&p).unwrap() * (2.0 * beta_sq).sqrt();
        assert!(v <= prev + 1e-12, "normalized δφ not monotone at g={g}");
        prev = v;
        if v < 1.05 && sens_threshold.is_none() {
            sens_threshold = Some(g);
        }
    }
    let g_sens = sens_threshold.expect("normalized δφ never fell below 1.05");

    println!(
        "ACCEPTANCE 04 PASS: at |β|²=20, η=0.1 the QFI ratio exceeds 0.95 from g ≈ {g_ratio:.1} \
         and δφ·√(2|β|²) falls below 1.05 from g ≈ {g_sens:.1}, both monotonically"
    );
}

#[test]
fn criterion_05_information_ordering() {
    let beta_sq = 9.0;
    let mut min_tracking = f64::INFINITY;
    for eta in [0.01, 0.1] {
        for i in 0..=10 {
            let g = 0.2 * i as f64;
            let p = ProtocolParams::from_beta_sq(beta_sq, 0.0, g, 0.0, eta, FRAC_PI_2).unwrap();
            let qfi = fisher::qfi_phase_dependent(&p);
            let cfi = photon::cfi_auto(&p, 1e-9).unwrap();
            let inv_var = {
                let d = photon::sensitivity(&p).unwrap();
                1.0 / (d * d)
            };
            let slack = 1e-6 * qfi.max(1.0);
            assert!(
                inv_var <= cfi + slack && cfi <= qfi + slack,
                "ordering violated at η={eta}, g={g}: {inv_var} / {cfi} / {qfi}"
            );
            if g <= 1.0 + 1e-12 {
                let tracking = inv_var / cfi;
                assert!(
                    tracking >= 0.9,
                    "moment estimator tracks CFI at only {tracking} for g={g}, η={eta}"
                );
                min_tracking = min_tracking.min(tracking);
            }
        }
    }
    println!(
        "ACCEPTANCE 05 PASS: (δφ)⁻² ≤ CFI ≤ QFI pointwise at |β|²=9, η ∈ {{0.01, 0.1}}, \
         g ∈ [0,2]; tracking ratio ≥ {min_tracking:.4} for g ≤ 1"
    );
}

#[test]
fn criterion_06_pmf_suite() {
    let start = Instant::now();
    // Stress grid up to |γ| = 3, g_eff = 1.2, n_eff = 2 (the heavy corners
    // run in the escalated fixed-point arithmetic).
    let gammas = [
        C64::new(0.0, 0.0),
        C64::new(0.8, 0.3),
        C64::new(-1.5, 2.2),
        C64::new(3.0 * 0.8f64.cos(), 3.0 * 0.8f64.sin()),
    ];
    let mut worst_entry = 0.0f64;
    let mut worst_mass = 0.0f64;
    let cases: Vec<ModeGaussian> = gammas
        .iter()
        .flat_map(|&gamma| {
            [(0.0, 0.0), (0.4, 0.2), (1.2, 0.0), (0.4, 2.0), (1.2, 2.0)]
                .into_iter()
                .map(move |(g_eff, n_eff)| ModeGaussian {
                    gamma,
                    g_eff,
                    squeeze_phase: 0.7,
                    n_eff,
                })
        })
        .collect();
    // Both routes certify their own entry ranges; the comparison runs on the
    // joint certified range, which must cover all but ≤ 1e−5 of the mass.
    let mut min_coverage = f64::INFINITY;
    let results: Vec<(f64, f64, f64)> = cases
        .par_iter()
        .map(|m| {
            let pmf = photon::photon_pmf_auto(m, 1e-10).unwrap();
            assert_eq!(
                pmf.reliable_cutoff, pmf.cutoff,
                "uncertified entries for {m:?}"
            );
            let mass_dev = (pmf.total_mass() - 1.0).abs();
            assert!(mass_dev < 1e-9, "normalization off by {mass_dev} for {m:?}");
            let oracle = fock::pmf_oracle(m, pmf.cutoff).unwrap();
            let joint = pmf.cutoff.min(oracle.reliable_cutoff);
            let uncovered = photon::tail_envelope(m, joint);
            assert!(
                uncovered < 1e-5,
                "joint certified range covers too little for {m:?}"
            );
            let mut worst = 0.0f64;
            for n in 0..=joint {
                let dev = (pmf.probs[n] - oracle.probs[n]).abs();
                assert!(dev < 1e-8, "entry {n} differs by {dev} for {m:?}");
                worst = worst.max(dev);
            }
            (worst, mass_dev, 1.0 - uncovered)
        })
        .collect();
    for (entry, mass, coverage) in results {
        worst_entry = worst_entry.max(entry);
        worst_mass = worst_mass.max(mass);
        min_coverage = min_coverage.min(coverage);
    }

    // Derivative order: central differences must converge at order ≥ 1.9.
    let p = ProtocolParams::from_beta_sq(4.0, 0.2, 0.8, 0.4, 0.5, 1.0).unwrap();
    let tm = ampliphase::gaussian::output_state_with_grad(&p);
    let cutoff = 30usize;
    let (_, derivs) = photon::pmf_with_derivative(&tm.h, cutoff).unwrap();
    let fd_err = |h: f64| -> f64 {
        let plus = output_state(&p.with_phi(p.phi + h));
        let minus = output_state(&p.with_phi(p.phi - h));
        let pp = photon::photon_pmf(&plus.h, cutoff).unwrap();
        let pm = photon::photon_pmf(&minus.h, cutoff).unwrap();
        (0..=cutoff)
            .map(|n| ((pp.probs[n] - pm.probs[n]) / (2.0 * h) - derivs[n]).abs())
            .fold(0.0, f64::max)
    };
    let order = (fd_err(2e-3) / fd_err(1e-3)).log2();
    assert!(order >= 1.9, "derivative convergence order {order}");

    // Exact special cases.
    let coherent = ModeGaussian::coherent(C64::new(1.1, -0.6));
    let mu = coherent.gamma.norm_sqr();
    let pmf = photon::photon_pmf(&coherent, 20).unwrap();
    let mut poisson = (-mu).exp();
    for n in 0..=20 {
        assert!((pmf.probs[n] - poisson).abs() < 1e-12);
        poisson *= mu / (n as f64 + 1.0);
    }
    let sq = ModeGaussian {
        g_eff: 0.9,
        squeeze_phase: 0.4,
        ..ModeGaussian::vacuum()
    };
    let pmf = photon::photon_pmf(&sq, 31).unwrap();
    for n in (1..=31).step_by(2) {
        assert!(pmf.probs[n].abs() < 1e-12);
    }

    println!(
        "ACCEPTANCE 06 PASS: PMF suite: normalization ≤ {worst_mass:.2e} (tol 1e-9), \
         closed vs oracle ≤ {worst_entry:.2e} per entry (tol 1e-8) on 20 stress modes \
         covering ≥ {min_coverage:.8} of the mass, derivative order {order:.2} ≥ 1.9, \
         special cases exact to 1e-12 [{:.1}s]",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_07_enhancement_benchmark() {
    let p = ProtocolParams::from_beta_sq(22.8, 0.0, 3.3, 0.0, 3.48e-5, FRAC_PI_2).unwrap();
    let homodyne = photon::enhancement(&p, photon::Reference::HomodyneSql).unwrap();
    let unamplified = photon::enhancement(&p, photon::Reference::UnamplifiedDifference).unwrap();
    assert!(rel_dev(homodyne, 176.07266298893143) < 1e-9);
    let measured = 186.3;
    let two_sigma = 2.0 * 9.3;
    assert!(
        (homodyne - measured).abs() <= two_sigma,
        "homodyne-referenced enhancement {homodyne} outside {measured} ± {two_sigma}"
    );
    println!(
        "ACCEPTANCE 07 PASS: theoretical enhancement {homodyne:.1} (homodyne reference) lies \
         within 2σ of the measured 186.3 ± 9.3; alternative unamplified-difference reference \
         gives {unamplified:.1} (normalization convention is ambiguous and both are reported)"
    );
}

#[test]
fn criterion_08_two_step_reproduction() {
    let start = Instant::now();
    let pulses = 100_000usize;
    let seeds = 100usize;
    let base = ProtocolParams::from_beta_sq(4.0, 0.0, 2.0, 0.0, 1e-2, FRAC_PI_2).unwrap();

    // Working-point information of the amplified stage and the unamplified
    // reference, both per pulse.
    let locked = base.at_locked_pump().with_phi(FRAC_PI_2);
    let info_wp = photon::cfi_auto(&locked, 1e-9).unwrap();
    let coherent_bound = 1.0 / (pulses as f64 * base.eta * base.beta_sq()).sqrt();

    let cfg0 = ExperimentConfig::new(base, pulses, 0, CountModel::ExactPmf).unwrap();
    let fraction = suggest_fraction(&cfg0).unwrap();
    let m2 = pulses - ((fraction * pulses as f64).round() as usize).clamp(1, pulses - 1);
    let wp_bound = 1.0 / (m2 as f64 * info_wp).sqrt();

    let phis: Vec<f64> = (0..10).map(|i| 0.2 + 0.28 * i as f64).collect();
    let mut lines = Vec::new();
    for &phi in &phis {
        let results: Vec<(f64, f64, bool)> = (0..seeds)
            .into_par_iter()
            .map(|run| {
                let cfg = ExperimentConfig::new(
                    base.with_phi(phi),
                    pulses,
                    run as u64,
                    CountModel::ExactPmf,
                )
                .unwrap();
                let r = two_step_run(&cfg, fraction).unwrap();
                (r.phi_hat, r.err, r.degraded)
            })
            .collect();
        let n = seeds as f64;
        let mean_hat = results.iter().map(|r| r.0).sum::<f64>() / n;
        let var_hat = results
            .iter()
            .map(|r| (r.0 - mean_hat) * (r.0 - mean_hat))
            .sum::<f64>()
            / (n - 1.0);
        let se = (var_hat / n).sqrt();
        let mean_err = results.iter().map(|r| r.1).sum::<f64>() / n;
        let degraded = results.iter().filter(|r| r.2).count();

        let bias = (mean_hat - phi).abs();
        assert!(
            bias < 3.0 * se,
            "bias {bias} vs 3·SE {} at φ={phi}",
            3.0 * se
        );
        assert!(
            (mean_err / wp_bound - 1.0).abs() < 0.2,
            "mean δφ̂ {mean_err} vs working-point bound {wp_bound} at φ={phi}"
        );
        assert!(
            mean_err < coherent_bound,
            "amplified error {mean_err} not below coherent bound {coherent_bound} at φ={phi}"
        );
        lines.push(format!(
            "  φ={phi:.2}: bias {bias:+.2e} (3SE {:.1e}), mean δφ̂ {mean_err:.3e}, degraded {degraded}",
            3.0 * se
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 600.0, "took {elapsed}s");
    println!(
        "ACCEPTANCE 08 PASS: two-step protocol at g=2, |β|²=4, η=1e-2, M=1e5, 100 seeds, \
         p={fraction:.4}: unbiased everywhere, mean δφ̂ within 20% of the working-point bound \
         {wp_bound:.3e}, always below the coherent bound {coherent_bound:.3e} [{elapsed:.0}s]\n{}",
        lines.join("\n")
    );
}

#[test]
fn criterion_09_adaptive_bound_algebra() {
    assert_eq!(optimal_fraction(0.0), 0.0);
    let p_large = optimal_fraction(1e12);
    assert!((p_large - 0.5).abs() < 1e-9, "p_opt(1e12) = {p_large}");
    assert!((p_large - (0.5 - 1.25e-13)).abs() < 1e-9);

    // The optimized two-stage overhead must shrink as M^(−1/2).
    let (i1, i2, i2pp) = (0.04, 2.4, -10.0);
    let excess: Vec<f64> = [1e4, 1e6, 1e8]
        .iter()
        .map(|&m| {
            let inp = AdaptiveBoundInputs {
                m: m as u64,
                p: 0.5,
                i1,
                i2_0: i2,
                i2pp_0: i2pp,
            };
            let p_opt = optimal_fraction(adaptive_a_coeff(&inp));
            let bound = adaptive_bound(&AdaptiveBoundInputs { p: p_opt, ..inp }).unwrap();
            bound * m * i2 - 1.0
        })
        .collect();
    let slope = (excess[2].ln() - excess[0].ln()) / (1e8f64.ln() - 1e4f64.ln());
    assert!(
        (slope + 0.5).abs() < 0.1,
        "excess scaling exponent {slope} not within -0.5 ± 0.1 (excesses {excess:?})"
    );
    println!(
        "ACCEPTANCE 09 PASS: p_opt endpoints exact to 1e-9; optimized two-stage overhead \
         scales as M^{slope:.3} across M ∈ {{1e4, 1e6, 1e8}}"
    );
}

//! Cross-module invariants: the two amplifier decompositions must be
//! indistinguishable downstream, and the Bayesian estimator must be
//! statistically consistent at the Cramér-Rao scale.

use ampliphase::estimation::{
    point_estimate, posterior_update, simulate_counts, CountModel, ExperimentConfig, PhiPosterior,
};
use ampliphase::gaussian::{output_state_grad_with, Convention};
use ampliphase::{fisher, photon, ProtocolParams};
use rayon::prelude::*;

#[test]
fn amplifier_conventions_are_equivalent_downstream() {
    // Waveplate with opposed gains vs no waveplate with equal gains: the two
    // states differ by a phase-space rotation of the V mode, so the Fisher
    // information and the photon statistics must match.
    for (beta_sq, theta, g, lambda, eta, phi) in [
        (4.0, 0.3, 1.1, 0.9, 0.6, 0.7),
        (9.0, -0.4, 0.6, 2.1, 0.25, 1.9),
        (1.0, 0.0, 1.6, 0.0, 0.9, 0.2),
    ] {
        let p = ProtocolParams::from_beta_sq(beta_sq, theta, g, lambda, eta, phi).unwrap();
        let a = output_state_grad_with(&p, Convention::Waveplate);
        let b = output_state_grad_with(&p, Convention::NoWaveplate);

        let qa = fisher::qfi_numeric_for_state(&a, 70, 1e-10).unwrap().value;
        let qb = fisher::qfi_numeric_for_state(&b, 70, 1e-10).unwrap().value;
        assert!(
            (qa - qb).abs() <= 1e-10 * qa.abs().max(1.0),
            "QFI differs across conventions: {qa} vs {qb}"
        );

        for (ma, mb) in [(&a.h.mode, &b.h.mode), (&a.v.mode, &b.v.mode)] {
            let pa = photon::photon_pmf(ma, 40).unwrap();
            let pb = photon::photon_pmf(mb, 40).unwrap();
            for n in 0..=40 {
                assert!(
                    (pa.probs[n] - pb.probs[n]).abs() < 1e-10,
                    "PMF differs at n={n}: {} vs {}",
                    pa.probs[n],
                    pb.probs[n]
                );
            }
        }
    }
}

#[test]
fn estimator_is_consistent_at_the_cramer_rao_scale() {
    // 200 independent seeds, M = 1e4 pulses: the sample mean of the
    // estimates must sit on the truth within 4 standard errors and the
    // sample spread must match the Cramér-Rao floor within 25%.
    let runs = 200usize;
    let pulses = 10_000usize;
    let phi_true = 1.0;
    let p = ProtocolParams::from_beta_sq(4.0, 0.0, 1.0, 0.0, 0.1, phi_true).unwrap();

    let hats: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let cfg =
                ExperimentConfig::new(p, pulses, 1000 + run as u64, CountModel::ExactPmf).unwrap();
            let data = simulate_counts(&cfg).unwrap();
            let post =
                posterior_update(&PhiPosterior::uniform(cfg.phi_grid_points), &data, &cfg).unwrap();
            point_estimate(&post).phi_hat
        })
        .collect();

    let n = runs as f64;
    let mean = hats.iter().sum::<f64>() / n;
    let var = hats.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();

    let bias = (mean - phi_true).abs();
    assert!(
        bias < 4.0 * std / n.sqrt(),
        "bias {bias} vs 4·SE {}",
        4.0 * std / n.sqrt()
    );

    let info = photon::cfi_auto(&p, 1e-9).unwrap();
    let floor = 1.0 / (pulses as f64 * info).sqrt();
    assert!(
        (std / floor - 1.0).abs() < 0.25,
        "std {std} vs Cramér-Rao floor {floor} (ratio {})",
        std / floor
    );
}

//! Eigenvalue calculus and fitting invariants on random inputs.

use gauduchon::checks::random_metric;
use gauduchon::diagnostics::{decay_fit, eigen_report, g_of_tilde, HarnackSeries};
use gauduchon::linalg::CMat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `alpha` and a point `tilde` of the positive cone, scaled over a few decades.
fn cone_point(seed: u64, n: usize) -> (CMat, CMat) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = random_metric(&mut rng, n);
    let tilde = random_metric(&mut rng, n).scale(rng.gen_range(-2.0f64..2.0).exp());
    (alpha, tilde)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eigen_identities_hold_in_the_cone(seed in any::<u64>(), n in 2..4usize) {
        let (alpha, tilde) = cone_point(seed, n);
        let g = g_of_tilde(&tilde, &alpha, &alpha.inverse().unwrap());
        let rep = eigen_report(&g, &alpha).unwrap();
        prop_assert!(rep.lambda_f_residual().abs() <= 1e-12 * n as f64, "{}", rep.lambda_f_residual());
        prop_assert!(rep.ordering_holds(1e-12));
        prop_assert!(rep.bands_hold(1e-12));

        // the mu of the report are the relative eigenvalues of tilde itself
        let mut mu = CMat::relative_eigenvalues(&tilde, &alpha).unwrap();
        mu.sort_by(f64::total_cmp);
        for (a, b) in mu.iter().zip(&rep.mu) {
            prop_assert!((a - b).abs() <= 1e-10 * a);
        }
        let h: f64 = mu.iter().map(|m| m.ln()).sum();
        let bound = (n as f64).sqrt() * (h / n as f64).exp();
        let norm = rep.lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        prop_assert!(norm >= bound * (1.0 - 1e-12), "{} < {}", norm, bound);
    }

    #[test]
    fn harnack_fit_bounds_every_sample(qs in proptest::collection::vec(-5.0..5.0f64, 3..40)) {
        let mut s = HarnackSeries::default();
        for (k, q) in qs.iter().enumerate() {
            s.push(0.05 * (k + 1) as f64, *q);
        }
        let fit = s.fit().unwrap();
        for &(t, q) in &s.samples {
            prop_assert!(q <= fit.c1 + fit.c2 / t + 1e-12 * (1.0 + q.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decay_fit_recovers_rate(c in 1e-3..1e3f64, eta in 0.01..5.0f64, dt in 0.01..0.5f64, count in 10..200usize) {
        let samples: Vec<(f64, f64)> = (0..count).map(|k| {
            let t = k as f64 * dt;
            (t, c * (-eta * t).exp())
        }).collect();
        let fit = decay_fit(&samples).unwrap();
        prop_assert!((fit.eta_hat - eta).abs() <= 1e-8 * eta, "{} vs {}", fit.eta_hat, eta);
        prop_assert!((fit.c_hat - c).abs() <= 1e-6 * c, "{} vs {}", fit.c_hat, c);
    }

    #[test]
    fn exhausted_oscillation_has_infinite_rate(count in 1..30usize, at in 0..30usize) {
        let mut samples: Vec<(f64, f64)> = (0..count).map(|k| (k as f64, 1.0)).collect();
        samples[at % count].1 = 0.0;
        prop_assert_eq!(decay_fit(&samples).unwrap().eta_hat, f64::INFINITY);
    }
}

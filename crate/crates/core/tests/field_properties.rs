//! Invariants of grid operators, Chern data and the flow operators on random
//! band-limited inputs.

use std::sync::OnceLock;

use gauduchon::checks::{oracle_background, random_metric};
use gauduchon::chern::{connection_of, w_at, z_of};
use gauduchon::flow::{apply_l, assemble_tilde_omega, normalize, Background};
use gauduchon::forms::{project_pa, Form11};
use gauduchon::grid::{d_axis, dz, dzbar, hessian, integrate, Grid, MatrixField, ScalarField, StencilOrder, DEFAULT_PERIOD};
use gauduchon::trig::TrigPoly;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid2(points: usize) -> Grid {
    Grid::new(2, points, DEFAULT_PERIOD).unwrap()
}

fn poly(seed: u64, dim: usize, max_freq: i32) -> TrigPoly {
    TrigPoly::random(&mut ChaCha8Rng::seed_from_u64(seed), dim, 4, max_freq, 1.0)
}

/// Deformed backgrounds shared by the Chern and flow properties.
fn background(n: usize) -> &'static Background {
    static BG: [OnceLock<Background>; 2] = [OnceLock::new(), OnceLock::new()];
    BG[n - 2].get_or_init(|| oracle_background(Grid::new(n, 8, DEFAULT_PERIOD).unwrap(), 0.3).unwrap())
}

fn complex_vec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dzbar_is_conjugate_of_dz(seed in any::<u64>(), i in 0..2usize) {
        let f = poly(seed, 4, 3).sample(grid2(8));
        let a = dz(&f, i);
        let b = dzbar(&f, i);
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert_eq!(x.conj(), *y);
        }
    }

    #[test]
    fn hessian_is_hermitian(seed in any::<u64>()) {
        let f = poly(seed, 4, 3).sample(grid2(8));
        let h = hessian(&f);
        for p in 0..f.grid.len() {
            let m = h.at(p);
            prop_assert!((m - m.adjoint()).max_abs() <= 1e-12 * (1.0 + m.max_abs()));
        }
    }

    #[test]
    fn integration_is_exact_below_nyquist(seed in any::<u64>(), constant in -2.0..2.0f64) {
        let g = grid2(8);
        let mut p = poly(seed, 4, 3);
        p.0.push(TrigPoly::term(constant, &[0, 0, 0, 0], 0.0));
        let exact: f64 = p
            .0
            .iter()
            .filter(|t| t.freq.iter().all(|&k| k == 0))
            .map(|t| t.amp * t.phase.cos())
            .sum::<f64>()
            * DEFAULT_PERIOD.powi(4);
        let got = integrate(&p.sample(g), &ScalarField::constant(g, 1.0));
        prop_assert!((got - exact).abs() <= 1e-12 * exact.abs().max(DEFAULT_PERIOD.powi(4)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn stencils_converge_at_their_order(axis in 0..4usize, k in 1..3i32, phase in 0.0..std::f64::consts::TAU, order_ix in 0..3usize) {
        let order = [StencilOrder::Two, StencilOrder::Four, StencilOrder::Six][order_ix];
        let mut freq = [0; 4];
        freq[axis] = k;
        let f = TrigPoly::new(vec![TrigPoly::term(1.0, &freq, phase)]);
        let error = |points: usize| {
            let g = grid2(points).with_order(order);
            let d = d_axis(&f.sample(g), axis);
            let exact = ScalarField::from_fn(g, |x| -(k as f64) * (k as f64 * x[axis] + phase).sin());
            d.zip_map(&exact, |a, b| a - b).max_abs()
        };
        let rate = error(16) / error(32);
        prop_assert!(rate >= 2f64.powf(order.as_u32() as f64 - 0.5), "rate {}", rate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn torsion_is_antisymmetric(n in 2..4usize, p in 0..4096usize, i in 0..3usize, j in 0..3usize, k in 0..3usize) {
        let zc = &background(n).zc;
        let (i, j, k) = (i % n, j % n, k % n);
        prop_assert_eq!(zc.torsion_at(p, i, j, k), -zc.torsion_at(p, j, i, k));
    }

    #[test]
    fn projection_of_w_is_z(n in 2..4usize, p in 0..4096usize, du in complex_vec(3)) {
        let bg = background(n);
        let a = bg.alpha().at(p);
        let ai = a.inverse().unwrap();
        let z = bg.zc.z_at(p, &du[..n]);
        let w = w_at(&z, &a, &ai);
        let scale = 1e-12 * (1.0 + z.max_abs() + w.max_abs());
        prop_assert!((z - z.adjoint()).max_abs() <= scale);
        prop_assert!((project_pa(&Form11(w), &a).unwrap().0 - z).max_abs() <= scale);
        let (tz, tw) = ((ai * z).trace(), (ai * w).trace());
        prop_assert!((tz - tw).norm() <= scale);
    }

    #[test]
    fn z_is_linear_in_the_gradient(n in 2..4usize, p in 0..4096usize, du in complex_vec(3), dv in complex_vec(3), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let zc = &background(n).zc;
        let mixed: Vec<Complex64> = du.iter().zip(&dv).map(|(x, y)| x * a + y * b).collect();
        let lhs = zc.z_at(p, &mixed[..n]);
        let rhs = zc.z_at(p, &du[..n]).scale(a) + zc.z_at(p, &dv[..n]).scale(b);
        prop_assert!((lhs - rhs).max_abs() <= 1e-14 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn constant_metric_has_no_torsion(seed in any::<u64>(), n in 2..4usize) {
        let m = random_metric(&mut ChaCha8Rng::seed_from_u64(seed), n);
        let g = MatrixField::constant(Grid::new(n, 8, DEFAULT_PERIOD).unwrap(), &m);
        prop_assert_eq!(connection_of(&g).unwrap().torsion_max_abs(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn linearized_operator_annihilates_constants(seed in any::<u64>(), c in -5.0..5.0f64) {
        let bg = background(2);
        let u = TrigPoly::random(&mut ChaCha8Rng::seed_from_u64(seed), 4, 3, 2, 0.05).sample(bg.grid());
        let tilde = assemble_tilde_omega(&u, bg);
        let l = apply_l(&ScalarField::constant(bg.grid(), c), &tilde, bg).unwrap();
        prop_assert!(l.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalization_has_zero_mean(seed in any::<u64>(), c in -5.0..5.0f64) {
        let bg = background(2);
        let u = poly(seed, 4, 3).sample(bg.grid()).map(|v| v + c);
        let mean = integrate(&normalize(&u, bg), &bg.vol_alpha) / bg.volume();
        prop_assert!(mean.abs() <= 1e-10 * (1.0 + u.max_abs()));
    }

    #[test]
    fn z_field_is_linear(seed in any::<u64>(), a in -2.0..2.0f64) {
        let zc = &background(2).zc;
        let u = poly(seed, 4, 2).sample(zc.grid());
        let lhs = z_of(&u.map(|v| a * v), zc);
        let rhs = z_of(&u, zc);
        for p in (0..u.grid.len()).step_by(37) {
            prop_assert!((lhs.at(p) - rhs.at(p).scale(a)).max_abs() <= 1e-14 * (1.0 + rhs.at(p).max_abs()));
        }
    }
}

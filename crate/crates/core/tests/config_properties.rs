//! Round trips of scenario files and traces.

use gauduchon::config::{BackgroundSpec, InitialSpec, PsiSpec, ScenarioConfig};
use gauduchon::diagnostics::DiagnosticsRecord;
use gauduchon::flow::Integrator;
use gauduchon::grid::StencilOrder;
use gauduchon::io::{read_trace, TraceWriter};
use gauduchon::trig::TrigPoly;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn poly(seed: u64, dim: usize) -> TrigPoly {
    TrigPoly::random(&mut ChaCha8Rng::seed_from_u64(seed), dim, 3, 3, 0.1)
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        (2..4usize, 4..20usize, 0..3usize, 0..=i64::MAX as u64, 0..3usize, 0..4usize),
        (
            1e-3..1.0f64,
            1e-12..1e-3f64,
            1.0..1e3f64,
            1..500u64,
            any::<bool>(),
            any::<bool>(),
            1.01..4.0f64,
            0..100u64,
        ),
    )
        .prop_map(
            |((n, half, order, seed, bg, psi), (cfl, tol, t_max, every, euler, harnack, alpha_c, cp))| {
                let dim = 2 * n;
                let mut c = ScenarioConfig::new(n);
                c.points = 2 * half;
                c.stencil_order = [StencilOrder::Two, StencilOrder::Four, StencilOrder::Six][order];
                c.seed = seed;
                if bg == 1 {
                    c.background = BackgroundSpec::GauduchonPotential {
                        v: poly(seed, dim),
                        eps: cfl,
                    };
                }
                c.psi = match psi {
                    0 => PsiSpec::Zero,
                    1 => PsiSpec::Manufactured {
                        u_star: poly(seed ^ 1, dim),
                    },
                    2 => PsiSpec::Explicit {
                        terms: poly(seed ^ 2, dim),
                    },
                    _ => PsiSpec::File {
                        path: format!("psi-{seed}.bin").into(),
                    },
                };
                if bg == 2 {
                    c.u0 = InitialSpec::Trig {
                        terms: poly(seed ^ 3, dim),
                    };
                }
                c.flow.cfl = cfl;
                c.flow.tol_osc = tol;
                c.flow.t_max = t_max;
                c.flow.sample_every = every;
                if euler {
                    c.flow.integrator = Integrator::Euler;
                }
                c.diagnostics.harnack = harnack;
                c.diagnostics.alpha_c = alpha_c;
                c.diagnostics.gauduchon_residual = !harnack;
                c.output.checkpoint_every = cp;
                c
            },
        )
}

fn finite_or_nan() -> impl Strategy<Value = f64> {
    prop_oneof![8 => any::<f64>().prop_filter("finite", |v| v.is_finite()), 1 => Just(f64::NAN)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scenario_survives_toml(c in scenario()) {
        let text = c.to_toml().unwrap();
        prop_assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn seeds_beyond_toml_integers_are_refused(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let mut c = ScenarioConfig::new(2);
        c.seed = seed;
        prop_assert!(c.to_toml().is_err());
        prop_assert!(c.validate().is_err());
    }

    #[test]
    fn scenario_survives_json(c in scenario()) {
        let text = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(serde_json::from_str::<ScenarioConfig>(&text).unwrap(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_rows_are_bit_exact(rows in proptest::collection::vec(proptest::collection::vec(finite_or_nan(), 12), 0..8)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let records: Vec<DiagnosticsRecord> = rows
            .iter()
            .map(|v| DiagnosticsRecord {
                t: v[0],
                sup_udot: v[1],
                inf_udot: v[2],
                theta: v[3],
                k: v[4],
                lambda1_over_k: v[5],
                min_eig_tilde: v[6],
                lambda_norm_min: v[7],
                r_bound: v[8],
                gauduchon_residual: v[9],
                harnack_q: v[10],
                b_estimate: v[11],
            })
            .collect();
        let mut w = TraceWriter::create(&path).unwrap();
        for r in &records {
            w.write(r).unwrap();
        }
        drop(w);
        let back = read_trace(&path).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in back.iter().zip(&records) {
            let bits = |r: &DiagnosticsRecord| r.values().map(f64::to_bits);
            prop_assert_eq!(bits(a), bits(b));
        }
    }
}

//! Identity suites: pointwise Hodge and eigenvalue algebra, the star
//! oracles for `Z(u)` and `tilde_omega`, the linearization and the
//! covariant commutation formulas.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chern::{commutation_check, gauduchon_from_potential, ricci_identity_check};
use crate::diagnostics::{eigen_report, g_of_tilde};
use crate::error::Result;
use crate::flow::{apply_l, assemble_tilde_omega, derivatives, ma_log_density, Background};
use crate::forms::{
    bijection_n1, det_ratio_at, root_n1, star_chi_wedge_identity_check, trace_with, Form11, FormField, FormN1N1, HodgeStar,
    PQForm,
};
use crate::grid::{gradient, ComplexField, Grid, MatrixField, ScalarField, StencilOrder};
use crate::linalg::CMat;
use crate::trig::TrigPoly;

pub const HODGE_TOL: f64 = 1e-10;
pub const EIGEN_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-8;
pub const LINEARIZATION_RATIO: f64 = 90.0;
/// Floor for identities that hold exactly in the discretization.
pub const ROUND_OFF_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub comparison: Comparison,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    /// Passes when `value <= limit`; NaN fails.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            limit,
            comparison: Comparison::AtMost,
            pass: value <= limit,
            note: None,
        }
    }

    /// Passes when `value >= limit`; NaN fails.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        CheckResult {
            name: name.into(),
            value,
            limit,
            comparison: Comparison::AtLeast,
            pass: value >= limit,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.comparison {
            Comparison::AtMost => "<=",
            Comparison::AtLeast => ">=",
        };
        write!(
            f,
            "{} {}: {:.3e} {op} {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.limit
        )?;
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = CheckResult>) {
        self.checks.extend(checks);
    }
}

pub fn random_hermitian(rng: &mut impl Rng, n: usize) -> CMat {
    let m = CMat::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    m.hermitian_part()
}

/// `A A^dagger + I/2`, positive definite.
pub fn random_metric(rng: &mut impl Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    a * a.adjoint() + CMat::identity(n).scale(0.5)
}

/// `(p,q)`-form with coefficients uniform in the unit square.
pub fn random_form(rng: &mut impl Rng, n: usize, p: usize, q: usize) -> Result<PQForm> {
    let mut f = PQForm::zeros(n, p, q)?;
    for c in f.coeffs_mut() {
        *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    Ok(f)
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.max(1.0)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|j| j as f64).product()
}

/// Pointwise Hodge identities on `samples` random inputs each.
pub fn hodge_suite(n: usize, samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 7];
    for _ in 0..samples {
        let g = random_metric(&mut rng, n);
        let star = HodgeStar::new(&g)?;
        let (p, q) = (rng.gen_range(0..=n), rng.gen_range(0..=n));
        let phi = random_form(&mut rng, n, p, q)?;

        let sign = if (p + q) % 2 == 0 { 1.0 } else { -1.0 };
        let twice = star.apply(&star.apply(&phi));
        worst[0] = worst[0].max(rel(twice.max_abs_diff(&phi.scale(sign.into())), phi.max_abs()));

        let a = star.apply(&phi).conj();
        worst[1] = worst[1].max(rel(a.max_abs_diff(&star.apply(&phi.conj())), a.max_abs()));

        let vol = Form11(g).to_form().power(n)?.scale((1.0 / factorial(n)).into());
        let one = star.apply(&PQForm::scalar(n, Complex64::new(1.0, 0.0)));
        worst[2] = worst[2].max(rel(one.max_abs_diff(&vol), vol.max_abs()));

        let chi = random_hermitian(&mut rng, n);
        let scale = (g.scale(trace_with(&g, &chi)?) - chi).max_abs() * factorial(n - 2);
        worst[3] = worst[3].max(rel(star_chi_wedge_identity_check(&Form11(chi), &g)?, scale));

        let (a, b) = (random_metric(&mut rng, n), random_metric(&mut rng, n));
        let ratio = det_ratio_at(&a, &b)?;
        let star_det = |m: &CMat| FormN1N1::from_form(&star.apply(&Form11(*m).to_form())).0.det().re;
        let via_star = star_det(&a) / star_det(&b);
        worst[4] = worst[4].max(rel((ratio - via_star).abs(), ratio.abs()));

        let m = bijection_n1(&Form11(a))?.0;
        let expected = a.det_real().powi(n as i32 - 1);
        let wedge = Form11(a).to_form().power(n - 1)?.scale((1.0 / factorial(n - 1)).into());
        let r_det = rel((m.det().re - expected).abs(), expected);
        let r_wedge = rel((FormN1N1::from_form(&wedge).0 - m).max_abs(), m.max_abs());
        worst[5] = worst[5].max(r_det).max(r_wedge);

        let back = bijection_n1(&root_n1(&FormN1N1(b))?)?.0;
        let forth = root_n1(&bijection_n1(&Form11(b))?)?.0;
        worst[6] = worst[6]
            .max(rel((back - b).max_abs(), b.max_abs()))
            .max(rel((forth - b).max_abs(), b.max_abs()));
    }
    let names = [
        "star_star",
        "star_conj",
        "star_one",
        "star_chi_wedge",
        "det_ratio_star",
        "bijection_det",
        "bijection_root",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, w)| CheckResult::at_most(format!("{name}/n{n}"), w, HODGE_TOL))
        .collect())
}

/// Eigenvalue calculus on `samples` random points of the cone: `alpha` a
/// random metric and `tilde_omega` a random positive form.
pub fn eigen_suite(n: usize, samples: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum_err = 0.0f64;
    let mut mu_err = 0.0f64;
    let mut ordering_fail = 0usize;
    let mut band_fail = 0usize;
    let mut bound_margin = f64::INFINITY;
    for _ in 0..samples {
        let alpha = random_metric(&mut rng, n);
        let tilde = random_metric(&mut rng, n).scale(rng.gen_range(-2.0f64..2.0).exp());
        let g = g_of_tilde(&tilde, &alpha, &alpha.inverse()?);
        let rep = eigen_report(&g, &alpha)?;
        sum_err = sum_err.max(rep.lambda_f_residual());
        let mut mu = CMat::relative_eigenvalues(&tilde, &alpha)?;
        mu.sort_by(f64::total_cmp);
        for (a, b) in mu.iter().zip(&rep.mu) {
            mu_err = mu_err.max((a - b).abs() / a);
        }
        ordering_fail += usize::from(!rep.ordering_holds(EIGEN_TOL));
        band_fail += usize::from(!rep.bands_hold(EIGEN_TOL));
        let h: f64 = mu.iter().map(|m| m.ln()).sum();
        let r = (n as f64).sqrt() * (h / n as f64).exp();
        let norm = rep.lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
        bound_margin = bound_margin.min((norm - r) / r);
    }
    Ok(vec![
        CheckResult::at_most(format!("lambda_f_sum/n{n}"), sum_err, EIGEN_TOL),
        CheckResult::at_most(format!("mu_relative_eigenvalues/n{n}"), mu_err, HODGE_TOL),
        CheckResult::at_most(format!("eigen_ordering/n{n}"), ordering_fail as f64, 0.0).with_note("failing samples"),
        CheckResult::at_most(format!("eigen_bands/n{n}"), band_fail as f64, 0.0).with_note("failing samples"),
        CheckResult::at_least(format!("lambda_lower_bound/n{n}"), bound_margin, -EIGEN_TOL)
            .with_note("smallest relative margin of |lambda| over sqrt(n) e^(h/n)"),
    ])
}

/// Potential of the torsion-exercising background used by the grid oracles.
pub fn oracle_potential(n: usize) -> TrigPoly {
    let dim = 2 * n;
    let mut v = TrigPoly::sin_sin(dim, 1.0, 0, n + 1);
    let mut k = vec![0; dim];
    k[1] = 1;
    k[n + 1] = 1;
    v.0.push(TrigPoly::term(0.5, &k, 0.0));
    v
}

/// Gauduchon background from [`oracle_potential`] with `alpha0 = alpha` and `psi = 0`.
pub fn oracle_background(grid: Grid, eps: f64) -> Result<Background> {
    let n = grid.n();
    let v = oracle_potential(n).sample(grid);
    let alpha = gauduchon_from_potential(&v, &CMat::identity(n), eps)?;
    Background::new(alpha.clone(), alpha, ScalarField::zeros(grid))
}

/// Random smooth potentials: a few low modes with amplitude up to `amp`.
pub fn random_potentials(n: usize, count: usize, amp: f64, seed: u64) -> Vec<TrigPoly> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| TrigPoly::random(&mut rng, 2 * n, 3, 2, amp)).collect()
}

/// `dbar(alpha^{n-2})` as a form field.
fn dbar_alpha_power(alpha: &MatrixField) -> Result<FormField> {
    let n = alpha.grid.n();
    FormField::from_pointwise(alpha.grid, n - 2, n - 2, |p| {
        Form11(alpha.at(p)).to_form().power(n - 2).expect("degree within n")
    })?
    .dbar()
}

/// `sqrt(-1) du` as a `(1,0)`-form.
fn i_del(du: &[ComplexField], p: usize) -> PQForm {
    let n = du.len();
    let mut d = PQForm::zeros(n, 1, 0).expect("n >= 1");
    for (k, f) in du.iter().enumerate() {
        d.set(1 << k, 0, Complex64::new(0.0, 1.0) * f.values[p]);
    }
    d
}

const BATCH: usize = 5;

/// Max-norm of `z_of(u) - (1/(n-1)!) * Re(sqrt(-1) du ^ dbar alpha^{n-2})`
/// over the potentials `us`.
pub fn z_oracle_check(bg: &Background, us: &[TrigPoly]) -> Result<CheckResult> {
    let grid = bg.grid();
    let n = grid.n();
    let alpha = bg.alpha();
    let dbar_a = dbar_alpha_power(alpha)?;
    let scale = 1.0 / factorial(n - 1);
    let (mut err, mut size) = (0.0f64, 0.0f64);
    for batch in us.chunks(BATCH) {
        let grads: Vec<Vec<ComplexField>> = batch.iter().map(|u| gradient(&u.sample(grid))).collect();
        let (e, s) = (0..grid.len())
            .into_par_iter()
            .map(|p| -> Result<(f64, f64)> {
                let star = HodgeStar::new(&alpha.at(p))?;
                let da = dbar_a.at(p);
                let (mut e, mut s) = (0.0f64, 0.0f64);
                for du in &grads {
                    let form = i_del(du, p).wedge(&da)?.real_part();
                    let oracle = Form11::from_form(&star.apply(&form)).0.scale(scale);
                    let vals: Vec<Complex64> = du.iter().map(|f| f.values[p]).collect();
                    let z = bg.zc.z_at(p, &vals);
                    e = e.max((z - oracle).max_abs());
                    s = s.max(z.max_abs());
                }
                Ok((e, s))
            })
            .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
        err = err.max(e);
        size = size.max(s);
    }
    Ok(
        CheckResult::at_most(format!("z_oracle/n{n}/N{}", grid.points_per_axis()), err, ORACLE_TOL)
            .with_note(format!("max |Z| {size:.3e}, torsion {:.3e}", bg.zc.torsion_max_abs())),
    )
}

/// Max-norm of `assemble_tilde_omega(u)` against
/// `(1/(n-1)!) * (alpha0^{n-1} + i ddbar u ^ alpha^{n-2} + Re(i du ^ dbar alpha^{n-2}))`.
pub fn tilde_oracle_check(bg: &Background, us: &[TrigPoly]) -> Result<CheckResult> {
    let grid = bg.grid();
    let n = grid.n();
    let alpha = bg.alpha();
    let dbar_a = dbar_alpha_power(alpha)?;
    let scale = 1.0 / factorial(n - 1);
    let mut err = 0.0f64;
    for u in us {
        let u = u.sample(grid);
        let tilde = assemble_tilde_omega(&u, bg);
        let (du, h) = derivatives(&u);
        let e = (0..grid.len())
            .into_par_iter()
            .map(|p| -> Result<f64> {
                let a = alpha.at(p);
                let star = HodgeStar::new(&a)?;
                let s = Form11(bg.alpha0.at(p))
                    .to_form()
                    .power(n - 1)?
                    .add(&Form11(h.at(p)).to_form().wedge(&Form11(a).to_form().power(n - 2)?)?)
                    .add(&i_del(&du, p).wedge(&dbar_a.at(p))?.real_part());
                let oracle = Form11::from_form(&star.apply(&s)).0.scale(scale);
                Ok((oracle - tilde.at(p)).max_abs())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        err = err.max(e);
    }
    Ok(CheckResult::at_most(
        format!("tilde_oracle/n{n}/N{}", grid.points_per_axis()),
        err,
        ORACLE_TOL,
    ))
}

/// Central difference quotients of `ma_log_density` along `phi` at `eps`
/// and `eps/10`, compared with `L(phi)`; the error ratio is about 100 for a
/// second-order match.
pub fn linearization_check(bg: &Background, u: &ScalarField, phi: &ScalarField) -> Result<CheckResult> {
    let tilde = assemble_tilde_omega(u, bg);
    let l = apply_l(phi, &tilde, bg)?;
    let fd = |eps: f64| -> Result<f64> {
        let up = ma_log_density(&u.add_scaled(phi, eps), bg)?;
        let um = ma_log_density(&u.add_scaled(phi, -eps), bg)?;
        Ok(up
            .zip_map(&um, |a, b| (a - b) / (2.0 * eps))
            .zip_map(&l, |a, b| a - b)
            .max_abs())
    };
    let (e2, e3) = (fd(1e-2)?, fd(1e-3)?);
    Ok(
        CheckResult::at_least(format!("linearization/n{}", bg.grid().n()), e2 / e3, LINEARIZATION_RATIO)
            .with_note(format!("errors {e2:.3e} at 1e-2, {e3:.3e} at 1e-3")),
    )
}

/// Smooth non-Kahler metric with bounded distortion.
pub fn bumpy_metric(grid: Grid) -> MatrixField {
    let n = grid.n();
    MatrixField::from_index_fn(grid, true, |p| {
        let x = grid.coords(p);
        let mut m = CMat::identity(n).scale(2.0);
        m[(0, 0)] += Complex64::new(0.3 * x[0].sin() * x[n].cos(), 0.0);
        let z = Complex64::new(0.2 * (x[1] + x[0]).cos(), 0.1 * x[n + 1].sin());
        m[(0, 1)] += z;
        m[(1, 0)] += z.conj();
        m
    })
}

/// Commutation identities on [`bumpy_metric`] under refinement from
/// `points` to `2 * points`. The `(1,0)`-form identity must converge at
/// the stencil order (less half an order); the scalar identity holds to
/// round-off.
pub fn commutation_suite(n: usize, points: usize, order: StencilOrder, period: f64) -> Result<Vec<CheckResult>> {
    let mut errs = Vec::new();
    let mut ricci = 0.0f64;
    for pts in [points, 2 * points] {
        let grid = Grid::new(n, pts, period)?.with_order(order);
        let w = std::f64::consts::TAU / period;
        let g = bumpy_metric(grid);
        let a: Vec<ComplexField> = (0..n)
            .map(|l| {
                ComplexField::from_fn(grid, |x| {
                    Complex64::new((w * (x[(l + 1) % n] + x[n + l])).sin(), 0.5 * (w * x[l]).cos())
                })
            })
            .collect();
        errs.push(commutation_check(&g, &a)?);
        let u = ScalarField::from_fn(grid, |x| (w * x[0]).sin() * (w * x[n + 1]).cos());
        ricci = ricci.max(ricci_identity_check(&g, &u)?);
    }
    let target = 2f64.powf(order.as_u32() as f64 - 0.5);
    Ok(vec![
        CheckResult::at_least(format!("commutation_rate/n{n}"), errs[0] / errs[1], target)
            .with_note(format!("residuals {:.3e} -> {:.3e}", errs[0], errs[1])),
        CheckResult::at_most(format!("ricci_identity/n{n}"), ricci, ROUND_OFF_FLOOR),
    ])
}

/// Sizes and seeds of the full suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub n: usize,
    pub points: usize,
    pub period: f64,
    pub order: StencilOrder,
    pub seed: u64,
    pub hodge_samples: usize,
    pub eigen_samples: usize,
    pub z_potentials: usize,
    pub tilde_potentials: usize,
    /// Deformation size of the oracle background.
    pub eps: f64,
    /// Coarse points per axis of the commutation refinement study.
    pub commutation_points: usize,
}

impl SuiteOptions {
    pub fn new(n: usize, points: usize) -> Self {
        SuiteOptions {
            n,
            points,
            period: crate::grid::DEFAULT_PERIOD,
            order: StencilOrder::default(),
            seed: 0,
            hodge_samples: 1000,
            eigen_samples: 100_000,
            z_potentials: 20,
            tilde_potentials: 5,
            eps: 0.3,
            commutation_points: 16,
        }
    }
}

/// Every suite: Hodge and eigenvalue algebra for `n = 2, 3`, the grid
/// oracles and linearization on `opts`' grid, and the commutation study
/// at `n = 2`.
pub fn run_suite(opts: &SuiteOptions) -> Result<CheckReport> {
    let mut report = CheckReport::default();
    for n in 2..=3 {
        report.extend(hodge_suite(n, opts.hodge_samples, opts.seed ^ (n as u64))?);
        report.extend(eigen_suite(n, opts.eigen_samples, opts.seed ^ (0x100 + n as u64))?);
    }
    let grid = Grid::new(opts.n, opts.points, opts.period)?.with_order(opts.order);
    {
        let bg = oracle_background(grid, opts.eps)?;
        let us = random_potentials(opts.n, opts.z_potentials.max(opts.tilde_potentials), 0.1, opts.seed ^ 0x200);
        report.extend([z_oracle_check(&bg, &us[..opts.z_potentials])?]);
        report.extend([tilde_oracle_check(&bg, &us[..opts.tilde_potentials])?]);
        let u = us[0].sample(grid);
        let phi = random_potentials(opts.n, 1, 1.0, opts.seed ^ 0x300)[0].sample(grid);
        report.extend([linearization_check(&bg, &u, &phi)?]);
    }
    report.extend(commutation_suite(2, opts.commutation_points, opts.order, opts.period)?);
    Ok(report)
}

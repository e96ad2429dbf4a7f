//! Monitored quantities of a flow run: eigenvalue calculus of the relative
//! endomorphism, the lower bound on `|lambda|`, second-order growth, the
//! Gauduchon residual, a Li-Yau type Harnack quantity and the decay fit of
//! the oscillation of `udot`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chern::w_at;
use crate::error::{Error, Result};
use crate::flow::{apply_l, theta_coefficients, Background, FlowState};
use crate::forms::{Form11, FormField, PQForm, I};
use crate::grid::{gradient, hessian, integrate, MatrixField, ScalarField};
use crate::linalg::CMat;

/// One row of the trace; disabled quantities are `NaN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub sup_udot: f64,
    pub inf_udot: f64,
    /// `sup udot - inf udot`.
    pub theta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "lambda1_over_K")]
    pub lambda1_over_k: f64,
    pub min_eig_tilde: f64,
    pub lambda_norm_min: f64,
    #[serde(rename = "R_bound")]
    pub r_bound: f64,
    pub gauduchon_residual: f64,
    pub harnack_q: f64,
    pub b_estimate: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 12] = [
        "t",
        "sup_udot",
        "inf_udot",
        "theta",
        "K",
        "lambda1_over_K",
        "min_eig_tilde",
        "lambda_norm_min",
        "R_bound",
        "gauduchon_residual",
        "harnack_q",
        "b_estimate",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.t,
            self.sup_udot,
            self.inf_udot,
            self.theta,
            self.k,
            self.lambda1_over_k,
            self.min_eig_tilde,
            self.lambda_norm_min,
            self.r_bound,
            self.gauduchon_residual,
            self.harnack_q,
            self.b_estimate,
        ]
    }
}

/// Eigenvalue data of `g` relative to `alpha` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    /// `lambda_1 >= ... >= lambda_n`.
    pub lambda: Vec<f64>,
    /// `mu = P(lambda)`, `mu_k = (1/(n-1)) sum_{i != k} lambda_i`.
    pub mu: Vec<f64>,
    /// `f_k = (1/(n-1)) sum_{i != k} 1/mu_i`.
    pub f_values: Vec<f64>,
    /// `1/mu_k`.
    pub ftilde_values: Vec<f64>,
}

impl EigenReport {
    /// Builds the report from eigenvalues in any order.
    pub fn from_lambda(lambda: &[f64]) -> Result<Self> {
        let n = lambda.len();
        let mut lambda = lambda.to_vec();
        lambda.sort_by(|a, b| b.total_cmp(a));
        let sum: f64 = lambda.iter().sum();
        let c = 1.0 / (n - 1) as f64;
        let mu: Vec<f64> = lambda.iter().map(|l| (sum - l) * c).collect();
        if mu.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::OutsideCone { mu });
        }
        let ftilde_values: Vec<f64> = mu.iter().map(|m| 1.0 / m).collect();
        let inv_sum: f64 = ftilde_values.iter().sum();
        let f_values = ftilde_values.iter().map(|ft| (inv_sum - ft) * c).collect();
        Ok(EigenReport {
            lambda,
            mu,
            f_values,
            ftilde_values,
        })
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// `sum lambda_k f_k - n`.
    pub fn lambda_f_residual(&self) -> f64 {
        let s: f64 = self.lambda.iter().zip(&self.f_values).map(|(l, f)| l * f).sum();
        s - self.n() as f64
    }

    /// `sum mu_k ftilde_k - n`.
    pub fn mu_ftilde_residual(&self) -> f64 {
        let s: f64 = self.mu.iter().zip(&self.ftilde_values).map(|(m, f)| m * f).sum();
        s - self.n() as f64
    }

    /// `mu` ascending, `f` ascending and `ftilde` descending, up to `tol`.
    pub fn ordering_holds(&self, tol: f64) -> bool {
        let asc = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1] + tol);
        let desc = |v: &[f64]| v.windows(2).all(|w| w[0] + tol >= w[1]);
        asc(&self.mu) && asc(&self.f_values) && desc(&self.ftilde_values) && self.f_values[0] > 0.0
    }

    /// `ftilde_1/(n-1) <= f_k <= ftilde_1` and `ftilde_k <= (n-1) f_1`
    /// for `k >= 2`, up to a relative `tol`.
    pub fn bands_hold(&self, tol: f64) -> bool {
        let m = (self.n() - 1) as f64;
        let ft1 = self.ftilde_values[0];
        let f1 = self.f_values[0];
        let slack = |x: f64| tol * x.abs().max(1.0);
        let band = self.f_values[1..]
            .iter()
            .all(|&fk| ft1 / m <= fk + slack(fk) && fk <= ft1 + slack(ft1));
        let upper = self.ftilde_values[1..].iter().all(|&ftk| ftk <= m * f1 + slack(ftk));
        band && upper
    }
}

/// Report for the endomorphism `alpha^{-1} g` at a point.
pub fn eigen_report(g: &CMat, alpha: &CMat) -> Result<EigenReport> {
    EigenReport::from_lambda(&CMat::relative_eigenvalues(g, alpha)?)
}

/// `g = (tr_alpha T) alpha - (n-1) T`, the preimage of `T` under `P_alpha`.
pub fn g_of_tilde(tilde: &CMat, alpha: &CMat, alpha_inv: &CMat) -> CMat {
    w_at(tilde, alpha, alpha_inv)
}

/// Result of the `|lambda| >= sqrt(n) e^{h/n}` check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaBound {
    pub lambda_norm_min: f64,
    /// Smallest `sqrt(n) e^{h/n}` over the grid.
    pub r_bound: f64,
    /// Smallest `|lambda| - sqrt(n) e^{h/n}` over the grid.
    pub margin: f64,
    pub pass: bool,
}

/// Pointwise quantities gathered in one sweep over a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointwiseSummary {
    /// `1 + sup |du|^2_alpha`.
    pub k: f64,
    /// Largest eigenvalue of `g` relative to `alpha`.
    pub lambda1: f64,
    /// Smallest eigenvalue of `tilde_omega`.
    pub min_eig_tilde: f64,
    pub bound: LambdaBound,
}

/// `|du|^2_alpha = alpha^{jbar i} u_i u_jbar` at a point, with `alpha_inv[j][i] = alpha^{jbar i}`.
fn gradient_norm_sq(du: &[Complex64], alpha_inv: &CMat) -> f64 {
    let n = du.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (alpha_inv[(j, i)] * du[i] * du[j].conj()).re;
        }
    }
    s
}

/// `|lambda|`, `lambda_1` and the smallest eigenvalue of `T` at one point.
fn point_quantities(t: &CMat, alpha: &CMat, alpha_inv: &CMat) -> Result<(f64, f64, f64)> {
    let g = g_of_tilde(t, alpha, alpha_inv);
    let lambda = CMat::relative_eigenvalues(&g, alpha)?;
    let norm = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
    Ok((norm, lambda[0], t.min_eigenvalue_hermitian()))
}

/// One sweep computing `K`, `lambda_1`, `min eig T` and the `|lambda|` bound.
pub fn pointwise_summary(state: &FlowState, bg: &Background) -> Result<PointwiseSummary> {
    let grid = state.u.grid;
    let n = grid.n();
    let tilde = state.tilde_omega(bg);
    let grad = gradient(&state.u);
    let alpha = bg.alpha();
    let alpha_inv = &bg.zc.alpha_inv;
    let sqrt_n = (n as f64).sqrt();
    type Acc = (f64, f64, f64, f64, f64, f64);
    let init: Acc = (
        0.0,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
    );
    let merge = |a: Acc, b: Acc| -> Acc {
        (
            a.0.max(b.0),
            a.1.max(b.1),
            a.2.min(b.2),
            a.3.min(b.3),
            a.4.min(b.4),
            a.5.min(b.5),
        )
    };
    let acc = (0..grid.len())
        .into_par_iter()
        .map(|p| -> Result<Acc> {
            let a = alpha.at(p);
            let ai = alpha_inv.at(p);
            let du: Vec<Complex64> = (0..n).map(|i| grad[i].values[p]).collect();
            let (norm, l1, min_eig) = point_quantities(&tilde.at(p), &a, &ai)?;
            let h = state.udot.values[p] + bg.psi.values[p];
            let r = sqrt_n * (h / n as f64).exp();
            Ok((gradient_norm_sq(&du, &ai), l1, min_eig, norm, r, norm - r))
        })
        .try_reduce(|| init, |a, b| Ok(merge(a, b)))?;
    let (grad_sup, lambda1, min_eig_tilde, lambda_norm_min, r_bound, margin) = acc;
    Ok(PointwiseSummary {
        k: 1.0 + grad_sup,
        lambda1,
        min_eig_tilde,
        bound: LambdaBound {
            lambda_norm_min,
            r_bound,
            margin,
            // the bound is an arithmetic-geometric mean inequality, so only round-off may violate it
            pass: margin >= -1e-12 * r_bound.max(1.0),
        },
    })
}

/// Verifies `|lambda| >= sqrt(n) e^{h/n}` at every point, `h = udot + psi`.
pub fn lambda_lower_bound_check(state: &FlowState, bg: &Background) -> Result<LambdaBound> {
    Ok(pointwise_summary(state, bg)?.bound)
}

/// `(K, lambda_1, lambda_1 / K)`.
pub fn second_order_monitor(state: &FlowState, bg: &Background) -> Result<(f64, f64, f64)> {
    let s = pointwise_summary(state, bg)?;
    Ok((s.k, s.lambda1, s.lambda1 / s.k))
}

/// `(1/Vol) int udot alpha^n`, the running estimate of the limiting constant.
pub fn b_estimate(state: &FlowState, bg: &Background) -> f64 {
    integrate(&state.udot, &bg.vol_alpha) / bg.volume()
}

/// Max-norm of the numerical `d dbar` of
/// `S(u) = alpha0^{n-1} + i ddbar u ^ alpha^{n-2} + Re(i du ^ dbar alpha^{n-2})`,
/// which vanishes for an exact Gauduchon evolution.
pub fn gauduchon_residual(u: &ScalarField, bg: &Background) -> Result<f64> {
    Ok(ddbar_of_s(u, bg, true, false)?.max_abs())
}

/// `d dbar S(u)` as an `(n,n)` form field. `composed` takes `ddbar u` from
/// composed first-derivative stencils, which commute exactly, so that the
/// `u`-dependent part of the residual cancels to round-off.
fn ddbar_of_s(u: &ScalarField, bg: &Background, torsion_term: bool, composed: bool) -> Result<FormField> {
    let grid = u.grid;
    let n = grid.n();
    let alpha = bg.alpha();
    let alpha0 = &bg.alpha0;
    let i_ddbar_u: Box<dyn Fn(usize) -> PQForm + Sync> = if composed {
        let scalar = FormField::from_pointwise(grid, 0, 0, |p| PQForm::scalar(n, Complex64::new(u.values[p], 0.0)))?;
        let dd = scalar.dbar()?.del()?;
        Box::new(move |p| dd.at(p).scale(I))
    } else {
        let hu = hessian(u);
        Box::new(move |p| Form11(hu.at(p)).to_form())
    };
    let grad = gradient(u);
    // dbar of alpha^{n-2}; for n = 2 the power is the constant 1
    let dbar_power = if n > 2 && torsion_term {
        let power = FormField::from_pointwise(grid, n - 2, n - 2, |p| {
            Form11(alpha.at(p)).to_form().power(n - 2).expect("degree within n")
        })?;
        Some(power.dbar()?)
    } else {
        None
    };
    let s = FormField::from_pointwise(grid, n - 1, n - 1, |p| {
        let a_pow = Form11(alpha.at(p)).to_form().power(n - 2).expect("degree within n");
        let mut form = Form11(alpha0.at(p)).to_form().power(n - 1).expect("degree within n");
        form = form.add(&i_ddbar_u(p).wedge(&a_pow).expect("degree within n"));
        if let Some(d) = &dbar_power {
            let mut du = PQForm::zeros(n, 1, 0).expect("n >= 1");
            for (i, gi) in grad.iter().enumerate() {
                du.set(1 << i, 0, I * gi.values[p]);
            }
            form = form.add(&du.wedge(&d.at(p)).expect("degree within n").real_part());
        }
        form
    })?;
    s.dbar()?.del()
}

/// `q = sup(|d f|^2_Theta - alpha_c f_t)` for `f = log phi`, where
/// `|d f|^2_Theta = Theta^{jbar i} f_i f_jbar` and `f_t = phi_t / phi`.
/// `theta = None` means `Theta = I`.
pub fn harnack_q(phi: &ScalarField, phi_t: &ScalarField, theta: Option<&MatrixField>, alpha_c: f64) -> Result<f64> {
    let grid = phi.grid;
    let n = grid.n();
    if let Some(p) = (0..grid.len()).find(|&p| !(phi.values[p] > 0.0)) {
        return Err(Error::NonPositiveField {
            location: grid.location(p),
            value: phi.values[p],
        });
    }
    let grad = gradient(&phi.map(f64::ln));
    let q = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let v = phi.values[p];
            let df: Vec<Complex64> = (0..n).map(|i| grad[i].values[p]).collect();
            let norm = match theta {
                Some(th) => {
                    let th = th.at(p);
                    let mut s = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            s += (th[(j, i)] * df[i] * df[j].conj()).re;
                        }
                    }
                    s
                }
                None => df.iter().map(|z| z.norm_sqr()).sum(),
            };
            norm - alpha_c * phi_t.values[p] / v
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(q)
}

/// Empirical constants of `q(t) <= c1 + c2 / t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackFit {
    pub c1: f64,
    pub c2: f64,
}

/// Samples `(t, q(t))` of the Harnack quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HarnackSeries {
    pub samples: Vec<(f64, f64)>,
}

impl HarnackSeries {
    pub fn push(&mut self, t: f64, q: f64) {
        self.samples.push((t, q));
    }

    /// Least-squares fit of `q` against `(1, 1/t)`, then `c1` is raised so that
    /// the fitted curve bounds every sample from above.
    pub fn fit(&self) -> Result<HarnackFit> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|(t, q)| *t > 0.0 && q.is_finite())
            .map(|&(t, q)| (1.0 / t, q))
            .collect();
        if pts.len() < 3 {
            return Err(Error::InsufficientSamples(format!(
                "Harnack fit needs at least 3 samples with t > 0, got {}",
                pts.len()
            )));
        }
        let (c1, c2) = least_squares_line(&pts);
        let lift = pts.iter().map(|&(s, q)| q - (c1 + c2 * s)).fold(0.0, f64::max);
        Ok(HarnackFit { c1: c1 + lift, c2 })
    }
}

/// `(intercept, slope)` of the least-squares line through `pts`.
fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Tracks the positive solutions `udot - inf udot(m-1)` and
/// `sup udot(m-1) - udot` on unit windows `[m-1, m)` and records the larger
/// of their Harnack quantities against the time since the window opened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackWindows {
    pub alpha_c: f64,
    pub window: f64,
    start: Option<(f64, f64, f64)>,
    pub series: HarnackSeries,
}

impl HarnackWindows {
    pub fn new(alpha_c: f64) -> Self {
        HarnackWindows {
            alpha_c,
            window: 1.0,
            start: None,
            series: HarnackSeries::default(),
        }
    }

    /// Records a sample; returns `q`, or `NaN` when the window just opened or
    /// a shifted solution is not strictly positive.
    pub fn observe(&mut self, state: &FlowState, bg: &Background) -> Result<f64> {
        let t = state.t;
        let open = match self.start {
            Some((t0, _, _)) => t - t0 >= self.window,
            None => true,
        };
        if open {
            self.start = Some((t, state.udot.sup(), state.udot.inf()));
            return Ok(f64::NAN);
        }
        let (t0, sup0, inf0) = self.start.expect("window open");
        let tilde = state.tilde_omega(bg);
        let theta = theta_coefficients(&tilde, bg)?;
        let udot_t = apply_l(&state.udot, &tilde, bg)?;
        let mut q = f64::NEG_INFINITY;
        for (phi, phi_t) in [
            (state.udot.map(|v| v - inf0), udot_t.clone()),
            (state.udot.map(|v| sup0 - v), udot_t.map(|v| -v)),
        ] {
            match harnack_q(&phi, &phi_t, Some(&theta), self.alpha_c) {
                Ok(v) => q = q.max(v),
                Err(Error::NonPositiveField { .. }) => return Ok(f64::NAN),
                Err(e) => return Err(e),
            }
        }
        self.series.push(t - t0, q);
        Ok(q)
    }
}

/// Result of fitting `theta(t) ~ C e^{-eta t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub c_hat: f64,
    /// `+inf` when the oscillation reached zero.
    pub eta_hat: f64,
}

/// Least-squares fit of `log theta` against `t` over the last half of the samples.
pub fn decay_fit(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.iter().any(|&(_, th)| th <= 0.0) {
        return Ok(DecayFit {
            c_hat: 0.0,
            eta_hat: f64::INFINITY,
        });
    }
    if samples.len() < 10 {
        return Err(Error::InsufficientSamples(format!(
            "decay fit needs at least 10 samples, got {}",
            samples.len()
        )));
    }
    let tail: Vec<(f64, f64)> = samples[samples.len() / 2..].iter().map(|&(t, th)| (t, th.ln())).collect();
    let (intercept, slope) = least_squares_line(&tail);
    Ok(DecayFit {
        c_hat: intercept.exp(),
        eta_hat: -slope,
    })
}

/// Optional parts of a diagnostics sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleOptions {
    pub gauduchon_residual: bool,
}

/// Assembles a trace row; `harnack_q` is filled in by the caller when enabled.
pub fn sample(state: &FlowState, bg: &Background, opts: SampleOptions) -> Result<DiagnosticsRecord> {
    let s = pointwise_summary(state, bg)?;
    let sup = state.udot.sup();
    let inf = state.udot.inf();
    Ok(DiagnosticsRecord {
        t: state.t,
        sup_udot: sup,
        inf_udot: inf,
        theta: sup - inf,
        k: s.k,
        lambda1_over_k: s.lambda1 / s.k,
        min_eig_tilde: s.min_eig_tilde,
        lambda_norm_min: s.bound.lambda_norm_min,
        r_bound: s.bound.r_bound,
        gauduchon_residual: if opts.gauduchon_residual {
            gauduchon_residual(&state.u, bg)?
        } else {
            f64::NAN
        },
        harnack_q: f64::NAN,
        b_estimate: b_estimate(state, bg),
    })
}

//! The parabolic Monge-Ampere flow `du/dt = log(det tilde_omega(u) / det alpha) - psi`
//! and its time integration.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chern::{z_coefficients, ZCoefficients};
use crate::error::{Error, Result};
use crate::forms::{bijection_n1, star_n1, Form11};
use crate::grid::{gradient, hessian, integrate, oscillation, Grid, MatrixField, RealSecondDerivatives, ScalarField};
use crate::kernel::{hermitian_inverse, jet, load, max_eigenvalue, positive_det, to_cmat, trace_product, Mat};
use crate::linalg::CMat;

/// Fixed data of a flow problem.
#[derive(Debug, Clone)]
pub struct Background {
    pub zc: ZCoefficients,
    pub alpha0: MatrixField,
    pub varpi: MatrixField,
    pub psi: ScalarField,
    pub log_det_alpha: ScalarField,
    /// Density of `alpha^n` against Lebesgue measure, `n! 2^n det alpha`.
    pub vol_alpha: ScalarField,
    /// `Z^i_{p qbar}` per point in `[i][p][q]` order; absent when the torsion vanishes.
    z_linear: Option<Vec<Complex64>>,
}

impl Background {
    /// `varpi = *alpha0^{n-1}/(n-1)!`, the star taken with respect to `alpha`.
    pub fn new(alpha: MatrixField, alpha0: MatrixField, psi: ScalarField) -> Result<Self> {
        let grid = alpha.grid;
        let n = grid.n();
        let varpi = MatrixField::try_from_index_fn(grid, true, |p| -> Result<CMat> {
            let a = alpha.at(p);
            let power = bijection_n1(&Form11(alpha0.at(p))).map_err(|e| locate(e, grid, p))?;
            let w = star_n1(&power, &a)?.0.hermitian_part();
            if !w.is_positive_definite() {
                return Err(Error::PositivityLoss {
                    location: grid.location(p),
                    min_eig: w.min_eigenvalue_hermitian(),
                });
            }
            Ok(w)
        })?;
        let fact: f64 = (1..=n).map(|k| k as f64).product::<f64>() * 2f64.powi(n as i32);
        let mut log_det = Vec::with_capacity(grid.len());
        let mut vol = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let a = alpha.at(p);
            if !a.is_positive_definite() {
                return Err(Error::PositivityLoss {
                    location: grid.location(p),
                    min_eig: a.min_eigenvalue_hermitian(),
                });
            }
            let d = a.det_real();
            log_det.push(d.ln());
            vol.push(fact * d);
        }
        let zc = z_coefficients(&alpha)?;
        let z_linear = (!zc.torsion_free()).then(|| {
            let k = n * n * n;
            let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * k];
            data.par_chunks_mut(k).enumerate().for_each(|(p, chunk)| {
                for (i, m) in zc.coefficients_at(p).iter().enumerate() {
                    chunk[i * n * n..(i + 1) * n * n].copy_from_slice(m.as_slice());
                }
            });
            data
        });
        Ok(Background {
            zc,
            z_linear,
            alpha0,
            varpi,
            psi,
            log_det_alpha: ScalarField { grid, values: log_det },
            vol_alpha: ScalarField { grid, values: vol },
        })
    }

    /// Flat Kahler background `alpha = alpha0 = beta` (constant).
    pub fn flat(grid: Grid, beta: &CMat, psi: ScalarField) -> Result<Self> {
        let a = MatrixField::constant(grid, beta);
        Self::new(a.clone(), a, psi)
    }

    pub fn grid(&self) -> Grid {
        self.zc.alpha.grid
    }

    pub fn alpha(&self) -> &MatrixField {
        &self.zc.alpha
    }

    pub fn volume(&self) -> f64 {
        integrate(&ScalarField::constant(self.grid(), 1.0), &self.vol_alpha)
    }

    pub fn with_psi(mut self, psi: ScalarField) -> Self {
        self.psi = psi;
        self
    }
}

fn locate(e: Error, grid: Grid, p: usize) -> Error {
    match e {
        Error::NotPositive { min_eig } => Error::PositivityLoss {
            location: grid.location(p),
            min_eig,
        },
        other => other,
    }
}

#[inline(always)]
fn tilde_at<const N: usize>(bg: &Background, d2: &RealSecondDerivatives<f64>, p: usize) -> Mat<N> {
    let a: Mat<N> = load(bg.zc.alpha.raw_at(p));
    let ai: Mat<N> = load(bg.zc.alpha_inv.raw_at(p));
    let mut t: Mat<N> = load(bg.varpi.raw_at(p));
    let (h, du) = jet::<N>(d2, p);
    let tr = trace_product(&ai, &h);
    let c = 1.0 / (N - 1) as f64;
    for i in 0..N {
        for j in 0..N {
            t[i][j] += (a[i][j] * tr - h[i][j]) * c;
        }
    }
    if let Some(zl) = &bg.z_linear {
        // Z = A + A^dagger with A_{pq} = sum_i Z^i_{pq} u_i
        let k = &zl[p * N * N * N..(p + 1) * N * N * N];
        let mut a = [[Complex64::new(0.0, 0.0); N]; N];
        for (i, dui) in du.iter().enumerate() {
            for r in 0..N {
                for q in 0..N {
                    a[r][q] += k[(i * N + r) * N + q] * dui;
                }
            }
        }
        for r in 0..N {
            for q in 0..N {
                t[r][q] += a[r][q] + a[q][r].conj();
            }
        }
    }
    // exact Hermitian symmetry, removes round-off drift in the imaginary diagonal
    for (i, row) in t.iter_mut().enumerate() {
        row[i].im = 0.0;
    }
    t
}

fn assemble_fixed<const N: usize>(u: &ScalarField, bg: &Background) -> MatrixField {
    let d2 = RealSecondDerivatives::compute(&u.grid, &u.values);
    MatrixField::from_index_fn(u.grid, true, |p| to_cmat(&tilde_at::<N>(bg, &d2, p)))
}

/// `varpi + P_alpha(ddbar u) + Z(u)`; positivity is not checked.
pub fn assemble_tilde_omega(u: &ScalarField, bg: &Background) -> MatrixField {
    match u.grid.n() {
        2 => assemble_fixed::<2>(u, bg),
        _ => assemble_fixed::<3>(u, bg),
    }
}

/// `(1/(n-1)) ((tr_T alpha) alpha^{-1} - T^{-1})`, stored as `Theta[j][i] = Theta^{jbar i}`.
#[inline]
pub fn theta_at(t_inv: &CMat, alpha: &CMat, alpha_inv: &CMat) -> CMat {
    let n = alpha.dim();
    let tr = (*t_inv * *alpha).trace().re;
    (alpha_inv.scale(tr) - *t_inv).scale(1.0 / (n - 1) as f64)
}

/// Pointwise result of one right-hand-side evaluation.
pub struct Evaluation {
    /// `log(det T / det alpha)`.
    pub log_density: ScalarField,
    /// Largest eigenvalue of `Theta` over the grid, when requested.
    pub theta_max: f64,
}

fn positivity_error(grid: Grid, worst: Option<(usize, f64)>) -> Error {
    let (p, e) = worst.expect("failure recorded");
    Error::PositivityLoss {
        location: grid.location(p),
        min_eig: e,
    }
}

/// Evaluates `log(det tilde_omega / det alpha)` with a positivity check at
/// every point; the error carries the point with the most negative eigenvalue.
pub fn evaluate(u: &ScalarField, bg: &Background, want_theta: bool) -> Result<Evaluation> {
    match u.grid.n() {
        2 => evaluate_fixed::<2>(u, bg, want_theta),
        _ => evaluate_fixed::<3>(u, bg, want_theta),
    }
}

fn evaluate_fixed<const N: usize>(u: &ScalarField, bg: &Background, want_theta: bool) -> Result<Evaluation> {
    let grid = u.grid;
    let d2 = RealSecondDerivatives::compute(&grid, &u.values);
    let mut values = vec![0.0; grid.len()];
    let c = 1.0 / (N - 1) as f64;
    const CHUNK: usize = 4096;
    // per chunk: (largest theta eigenvalue, first failing point with its eigenvalue)
    let partial: Vec<(f64, Option<(usize, f64)>)> = values
        .par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(ci, out)| {
            let mut theta_max = 0.0f64;
            let mut worst: Option<(usize, f64)> = None;
            for (k, v) in out.iter_mut().enumerate() {
                let p = ci * CHUNK + k;
                let t = tilde_at::<N>(bg, &d2, p);
                let Some(det) = positive_det(&t) else {
                    let e = to_cmat(&t).min_eigenvalue_hermitian();
                    if worst.is_none_or(|(_, w)| e < w) {
                        worst = Some((p, e));
                    }
                    continue;
                };
                *v = det.ln() - bg.log_det_alpha.values[p];
                if want_theta {
                    let ti = hermitian_inverse(&t, det);
                    let a: Mat<N> = load(bg.zc.alpha.raw_at(p));
                    let mut th: Mat<N> = load(bg.zc.alpha_inv.raw_at(p));
                    let tr = trace_product(&ti, &a);
                    for i in 0..N {
                        for j in 0..N {
                            th[i][j] = (th[i][j] * tr - ti[i][j]) * c;
                        }
                    }
                    theta_max = theta_max.max(max_eigenvalue(&th));
                }
            }
            (theta_max, worst)
        })
        .collect();
    let mut worst: Option<(usize, f64)> = None;
    let mut theta_max = 0.0f64;
    for (th, w) in partial {
        theta_max = theta_max.max(th);
        if let Some((p, e)) = w {
            if worst.is_none_or(|(_, x)| e < x) {
                worst = Some((p, e));
            }
        }
    }
    if worst.is_some() {
        return Err(positivity_error(grid, worst));
    }
    Ok(Evaluation {
        log_density: ScalarField { grid, values },
        theta_max,
    })
}

pub fn ma_log_density(u: &ScalarField, bg: &Background) -> Result<ScalarField> {
    Ok(evaluate(u, bg, false)?.log_density)
}

/// `Theta` field of a positive `tilde_omega`.
pub fn theta_coefficients(tilde: &MatrixField, bg: &Background) -> Result<MatrixField> {
    MatrixField::try_from_index_fn(tilde.grid, true, |p| -> Result<CMat> {
        let t = tilde.at(p);
        if !t.is_positive_definite() {
            return Err(Error::PositivityLoss {
                location: tilde.grid.location(p),
                min_eig: t.min_eigenvalue_hermitian(),
            });
        }
        Ok(theta_at(&t.inverse()?, &bg.zc.alpha.at(p), &bg.zc.alpha_inv.at(p)).hermitian_part())
    })
}

/// Linearized operator `L(phi) = Theta^{jbar i} phi_{i jbar} + tr_T Z(phi)`.
pub fn apply_l(phi: &ScalarField, tilde: &MatrixField, bg: &Background) -> Result<ScalarField> {
    let grid = phi.grid;
    let n = grid.n();
    let d2 = RealSecondDerivatives::compute(&grid, &phi.values);
    let values: Vec<Result<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|p| {
            let t = tilde.at(p);
            let ti = t.inverse().map_err(|_| Error::PositivityLoss {
                location: grid.location(p),
                min_eig: t.min_eigenvalue_hermitian(),
            })?;
            let theta = theta_at(&ti, &bg.zc.alpha.at(p), &bg.zc.alpha_inv.at(p));
            let h = d2.hessian_at(p);
            let du = d2.gradient_at(p);
            let z = bg.zc.z_at(p, &du[..n]);
            Ok((theta * h).trace().re + (ti * z).trace().re)
        })
        .collect();
    Ok(ScalarField {
        grid,
        values: values.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

/// Options of the time integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    pub cfl: f64,
    pub tol_osc: f64,
    pub t_max: f64,
    pub dt_min: f64,
    /// Steps between diagnostics samples.
    pub sample_every: u64,
    pub max_halvings: u32,
    pub integrator: Integrator,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            cfl: 0.2,
            tol_osc: 1e-9,
            t_max: 200.0,
            dt_min: 1e-12,
            sample_every: 50,
            max_halvings: 10,
            integrator: Integrator::Rk4,
        }
    }
}

/// Potential and time, with the right-hand side at the current potential.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub u: ScalarField,
    pub t: f64,
    pub udot: ScalarField,
    /// Largest eigenvalue of `Theta` at the current potential.
    pub theta_max: f64,
}

impl FlowState {
    pub fn new(u: ScalarField, t: f64, bg: &Background) -> Result<Self> {
        let ev = evaluate(&u, bg, true)?;
        Ok(FlowState {
            udot: ev.log_density.zip_map(&bg.psi, |a, b| a - b),
            theta_max: ev.theta_max,
            u,
            t,
        })
    }

    pub fn tilde_omega(&self, bg: &Background) -> MatrixField {
        assemble_tilde_omega(&self.u, bg)
    }

    pub fn oscillation(&self) -> f64 {
        oscillation(&self.udot)
    }
}

fn rhs(u: &ScalarField, bg: &Background) -> Result<ScalarField> {
    Ok(ma_log_density(u, bg)?.zip_map(&bg.psi, |a, b| a - b))
}

/// One explicit step of size `dt` from `state`; the stage right-hand sides
/// are positivity-checked.
pub fn step_flow(state: &FlowState, dt: f64, bg: &Background, integrator: Integrator) -> Result<FlowState> {
    let u0 = &state.u;
    let k1 = &state.udot;
    let u_new = match integrator {
        Integrator::Euler => u0.add_scaled(k1, dt),
        Integrator::Rk4 => {
            let k2 = rhs(&u0.add_scaled(k1, 0.5 * dt), bg)?;
            let k3 = rhs(&u0.add_scaled(&k2, 0.5 * dt), bg)?;
            let k4 = rhs(&u0.add_scaled(&k3, dt), bg)?;
            let values = (0..u0.values.len())
                .into_par_iter()
                .map(|p| u0.values[p] + dt / 6.0 * (k1.values[p] + 2.0 * k2.values[p] + 2.0 * k3.values[p] + k4.values[p]))
                .collect();
            ScalarField { grid: u0.grid, values }
        }
    };
    FlowState::new(u_new, state.t + dt, bg)
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    TimeLimit,
    Interrupted,
}

/// Per-step bookkeeping exposed to observers.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub step: u64,
    pub dt: f64,
    pub halvings: u32,
}

/// Returned by an observer after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Monotonicity of `sup udot` and `inf udot` along a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MaxPrincipleMonitor {
    /// Largest single-step increase of `sup udot`.
    pub sup_increase: f64,
    /// Largest single-step decrease of `inf udot`.
    pub inf_decrease: f64,
    /// Largest single-step increase of `sup |udot|`.
    pub abs_increase: f64,
}

impl MaxPrincipleMonitor {
    pub fn record(&mut self, before: &ScalarField, after: &ScalarField) {
        self.sup_increase = self.sup_increase.max(after.sup() - before.sup());
        self.inf_decrease = self.inf_decrease.max(before.inf() - after.inf());
        self.abs_increase = self.abs_increase.max(after.max_abs() - before.max_abs());
    }
}

/// Drives the flow step by step.
pub struct FlowRunner<'a> {
    pub bg: &'a Background,
    pub opts: FlowOptions,
    pub state: FlowState,
    pub step: u64,
    pub monitor: MaxPrincipleMonitor,
}

impl<'a> FlowRunner<'a> {
    pub fn new(bg: &'a Background, u0: ScalarField, opts: FlowOptions) -> Result<Self> {
        let state = FlowState::new(u0, 0.0, bg)?;
        Ok(Self::resume(bg, state, 0, MaxPrincipleMonitor::default(), opts))
    }

    pub fn resume(bg: &'a Background, state: FlowState, step: u64, monitor: MaxPrincipleMonitor, opts: FlowOptions) -> Self {
        FlowRunner {
            bg,
            opts,
            state,
            step,
            monitor,
        }
    }

    pub fn converged(&self) -> bool {
        self.state.oscillation() < self.opts.tol_osc
    }

    /// Parabolic step bound `cfl h^2 / max Theta`.
    pub fn stable_dt(&self) -> f64 {
        let h = self.state.u.grid.spacing();
        self.opts.cfl * h * h / self.state.theta_max.max(f64::MIN_POSITIVE)
    }

    /// Advances one step, halving `dt` on positivity loss.
    pub fn advance(&mut self) -> Result<StepInfo> {
        let mut dt = self.stable_dt();
        let mut halvings = 0;
        loop {
            if dt < self.opts.dt_min {
                return Err(Error::DtUnderflow {
                    dt,
                    dt_min: self.opts.dt_min,
                    t: self.state.t,
                });
            }
            match step_flow(&self.state, dt, self.bg, self.opts.integrator) {
                Ok(next) => {
                    self.monitor.record(&self.state.udot, &next.udot);
                    self.state = next;
                    self.step += 1;
                    return Ok(StepInfo {
                        step: self.step,
                        dt,
                        halvings,
                    });
                }
                Err(Error::PositivityLoss { .. }) if halvings < self.opts.max_halvings => {
                    halvings += 1;
                    dt *= 0.5;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Runs until convergence, the time limit, or the observer asks to stop.
    /// The observer sees the state after every step (and once before the first).
    pub fn run(&mut self, mut observer: impl FnMut(&FlowRunner<'a>, Option<StepInfo>) -> Control) -> Result<StopReason> {
        if observer(self, None) == Control::Stop {
            return Ok(StopReason::Interrupted);
        }
        loop {
            if self.converged() {
                return Ok(StopReason::Converged);
            }
            if self.state.t >= self.opts.t_max {
                return Ok(StopReason::TimeLimit);
            }
            let info = self.advance()?;
            if observer(self, Some(info)) == Control::Stop {
                return Ok(if self.converged() {
                    StopReason::Converged
                } else {
                    StopReason::Interrupted
                });
            }
        }
    }
}

/// Limit of the normalized flow.
#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub u_tilde_inf: ScalarField,
    pub b_tilde: f64,
}

/// `u - (1/Vol) int u alpha^n`.
pub fn normalize(u: &ScalarField, bg: &Background) -> ScalarField {
    let mean = integrate(u, &bg.vol_alpha) / bg.volume();
    u.map(|v| v - mean)
}

/// `(1/Vol) int (log(T^n/alpha^n) - psi) alpha^n`.
pub fn compute_b_tilde(u: &ScalarField, bg: &Background) -> Result<f64> {
    Ok(integrate(&rhs(u, bg)?, &bg.vol_alpha) / bg.volume())
}

pub fn elliptic_solution(state: &FlowState, bg: &Background) -> Result<EllipticSolution> {
    Ok(EllipticSolution {
        u_tilde_inf: normalize(&state.u, bg),
        b_tilde: compute_b_tilde(&state.u, bg)?,
    })
}

/// Convenience driver: runs to a stop and returns the normalized limit.
pub fn run_flow(bg: &Background, u0: ScalarField, opts: FlowOptions) -> Result<(StopReason, FlowState, EllipticSolution)> {
    let mut runner = FlowRunner::new(bg, u0, opts)?;
    let reason = runner.run(|_, _| Control::Continue)?;
    let sol = elliptic_solution(&runner.state, bg)?;
    Ok((reason, runner.state, sol))
}

/// `psi = log(T(u*)^n / alpha^n)`, so that `u*` is a steady state with `b = 0`.
pub fn manufacture_psi(u_star: &ScalarField, bg: &Background) -> Result<ScalarField> {
    ma_log_density(u_star, bg)
}

/// Gradient and Hessian of `u` as fields, for callers outside the hot path.
pub fn derivatives(u: &ScalarField) -> (Vec<crate::grid::ComplexField>, MatrixField) {
    (gradient(u), hessian(u))
}

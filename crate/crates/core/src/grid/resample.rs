//! Trigonometric interpolation between lattices of different resolution.

use num_complex::Complex64;
use std::f64::consts::TAU;

use super::{Grid, ScalarField};
use crate::error::{Error, Result};

/// Resamples `f` onto `target` (same dimension and period) by trigonometric
/// interpolation along each axis in turn. Exact for trigonometric
/// polynomials with frequencies below both Nyquist limits.
pub fn resample(f: &ScalarField, target: Grid) -> Result<ScalarField> {
    let src = f.grid;
    if src.n() != target.n() || src.period() != target.period() {
        return Err(Error::InvalidGrid(format!(
            "cannot resample n = {}, period {} onto n = {}, period {}",
            src.n(),
            src.period(),
            target.n(),
            target.period()
        )));
    }
    let dim = src.real_dim();
    let mut shape = vec![src.points_per_axis(); dim];
    let mut data = f.values.clone();
    for axis in 0..dim {
        let p = target.points_per_axis();
        if shape[axis] != p {
            data = resample_axis(&data, &shape, axis, p);
            shape[axis] = p;
        }
    }
    Ok(ScalarField {
        grid: target,
        values: data,
    })
}

fn resample_axis(data: &[f64], shape: &[usize], axis: usize, p: usize) -> Vec<f64> {
    let m = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let kmax = (m.min(p) / 2) as i64;
    // the shared Nyquist mode is split between +-kmax when upsampling
    let edge = if m <= p { 0.5 } else { 1.0 };
    let modes: Vec<(i64, f64)> = (-kmax..=kmax)
        .map(|k| (k, if k.abs() == kmax { edge } else { 1.0 }))
        .collect();
    let analysis: Vec<Vec<Complex64>> = modes
        .iter()
        .map(|&(k, w)| {
            (0..m)
                .map(|j| Complex64::from_polar(w / m as f64, -TAU * (k * j as i64) as f64 / m as f64))
                .collect()
        })
        .collect();
    let synthesis: Vec<Vec<Complex64>> = (0..p)
        .map(|r| {
            modes
                .iter()
                .map(|&(k, _)| Complex64::from_polar(1.0, TAU * k as f64 * r as f64 / p as f64))
                .collect()
        })
        .collect();
    let mut out = vec![0.0; outer * p * inner];
    let mut line = vec![0.0; m];
    let mut coeffs = vec![Complex64::new(0.0, 0.0); modes.len()];
    for o in 0..outer {
        for i in 0..inner {
            for (j, v) in line.iter_mut().enumerate() {
                *v = data[(o * m + j) * inner + i];
            }
            for (c, row) in coeffs.iter_mut().zip(&analysis) {
                *c = row.iter().zip(&line).map(|(e, v)| e * v).sum();
            }
            for (r, row) in synthesis.iter().enumerate() {
                let v: Complex64 = row.iter().zip(&coeffs).map(|(e, c)| e * c).sum();
                out[(o * p + r) * inner + i] = v.re;
            }
        }
    }
    out
}

use num_complex::Complex64;
use rayon::prelude::*;

use super::stencil::{apply, FieldValue, Kind};
use super::{ComplexField, Grid, MatrixField, ScalarField};
use crate::linalg::CMat;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Centered derivative along real axis `axis`.
pub fn d_axis(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField {
        grid: f.grid,
        values: apply(&f.grid, &f.values, axis, Kind::First),
    }
}

/// `dz(f, i) = (d/dx^i - sqrt(-1) d/dx^{n+i}) f / 2`, with `i` 0-based.
pub fn dz(f: &ScalarField, i: usize) -> ComplexField {
    let n = f.grid.n();
    assert!(i < n, "complex axis {i} out of range");
    let dx = apply(&f.grid, &f.values, i, Kind::First);
    let dy = apply(&f.grid, &f.values, n + i, Kind::First);
    ComplexField {
        grid: f.grid,
        values: dx.iter().zip(&dy).map(|(&a, &c)| Complex64::new(0.5 * a, -0.5 * c)).collect(),
    }
}

/// `dzbar(f, j) = (d/dx^j + sqrt(-1) d/dx^{n+j}) f / 2`; equals `conj(dz(f, j))`
/// bit-for-bit on real input.
pub fn dzbar(f: &ScalarField, j: usize) -> ComplexField {
    let n = f.grid.n();
    assert!(j < n, "complex axis {j} out of range");
    let dx = apply(&f.grid, &f.values, j, Kind::First);
    let dy = apply(&f.grid, &f.values, n + j, Kind::First);
    ComplexField {
        grid: f.grid,
        values: dx.iter().zip(&dy).map(|(&a, &c)| Complex64::new(0.5 * a, 0.5 * c)).collect(),
    }
}

/// `dz` applied to a complex-valued field.
pub fn dz_complex(f: &ComplexField, i: usize) -> ComplexField {
    let n = f.grid.n();
    let dx = apply(&f.grid, &f.values, i, Kind::First);
    let dy = apply(&f.grid, &f.values, n + i, Kind::First);
    ComplexField {
        grid: f.grid,
        values: dx.iter().zip(&dy).map(|(a, c)| (a - I * c) * 0.5).collect(),
    }
}

/// `dzbar` applied to a complex-valued field.
pub fn dzbar_complex(f: &ComplexField, j: usize) -> ComplexField {
    let n = f.grid.n();
    let dx = apply(&f.grid, &f.values, j, Kind::First);
    let dy = apply(&f.grid, &f.values, n + j, Kind::First);
    ComplexField {
        grid: f.grid,
        values: dx.iter().zip(&dy).map(|(a, c)| (a + I * c) * 0.5).collect(),
    }
}

/// All `u_i = dz(f, i)`; for real `f` the antiholomorphic derivatives are
/// their conjugates.
pub fn gradient(f: &ScalarField) -> Vec<ComplexField> {
    (0..f.grid.n()).map(|i| dz(f, i)).collect()
}

/// Second derivatives along all pairs of real axes. Pure second derivatives
/// use the second-derivative stencil; mixed ones compose first-derivative
/// stencils, `D_ab = D_a(D_b f)` for `a < b`, shared by both orderings.
/// The pairs `(x^i, y^i)` never enter a complex Hessian and are left empty.
pub struct RealSecondDerivatives<T> {
    dim: usize,
    first: Vec<Vec<T>>,
    data: Vec<Vec<T>>,
}

impl<T: FieldValue> RealSecondDerivatives<T> {
    pub fn compute(grid: &Grid, f: &[T]) -> Self {
        let dim = grid.real_dim();
        let first: Vec<Vec<T>> = (0..dim).map(|a| apply(grid, f, a, Kind::First)).collect();
        let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
        for a in 0..dim {
            for b in a..dim {
                if a == b {
                    data.push(apply(grid, f, a, Kind::Second));
                } else if b == a + dim / 2 {
                    data.push(Vec::new());
                } else {
                    data.push(apply(grid, &first[b], a, Kind::First));
                }
            }
        }
        RealSecondDerivatives { dim, first, data }
    }

    /// First derivative along real axis `a`.
    #[inline]
    pub fn first(&self, a: usize) -> &[T] {
        &self.first[a]
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> &[T] {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let k = a * self.dim - a * (a + 1) / 2 + b;
        &self.data[k]
    }
}

impl RealSecondDerivatives<f64> {
    /// Complex Hessian `f_{i jbar}` at point `p`.
    #[inline]
    pub fn hessian_at(&self, p: usize) -> CMat {
        let n = self.dim / 2;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(0.25 * (self.get(i, i)[p] + self.get(n + i, n + i)[p]), 0.0);
            for j in i + 1..n {
                let re = self.get(i, j)[p] + self.get(n + i, n + j)[p];
                let im = self.get(i, n + j)[p] - self.get(n + i, j)[p];
                let z = Complex64::new(0.25 * re, 0.25 * im);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    /// Holomorphic gradient `f_i` at point `p`; only the first `n` entries are set.
    #[inline]
    pub fn gradient_at(&self, p: usize) -> [Complex64; 3] {
        let n = self.dim / 2;
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for (i, gi) in g.iter_mut().enumerate().take(n) {
            *gi = Complex64::new(0.5 * self.first[i][p], -0.5 * self.first[n + i][p]);
        }
        g
    }
}

/// Complex Hessian `u_{i jbar} = d_i d_jbar f`, Hermitian at every point.
pub fn hessian(f: &ScalarField) -> MatrixField {
    let d2 = RealSecondDerivatives::compute(&f.grid, &f.values);
    MatrixField::from_index_fn(f.grid, true, |p| d2.hessian_at(p))
}

/// `d_a d_bbar` of a complex field, for all `a, b`; entry `a*n + b`.
pub fn hessian_complex(f: &ComplexField) -> Vec<ComplexField> {
    let grid = f.grid;
    let n = grid.n();
    let d2 = RealSecondDerivatives::compute(&grid, &f.values);
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            out.push(combine_d_dbar(&grid, &d2, a, b));
        }
    }
    out
}

/// `d_a d_bbar f` for a single pair, without forming the full Hessian.
pub fn d_dbar(f: &ComplexField, a: usize, b: usize) -> ComplexField {
    let grid = f.grid;
    let n = grid.n();
    let first = |ax: usize| apply(&grid, &f.values, ax, Kind::First);
    let d = |p: usize, q: usize| -> Vec<Complex64> {
        if p == q {
            apply(&grid, &f.values, p, Kind::Second)
        } else {
            let (p, q) = if p < q { (p, q) } else { (q, p) };
            apply(&grid, &first(q), p, Kind::First)
        }
    };
    let xx = d(a, b);
    let yy = d(n + a, n + b);
    let values: Vec<Complex64> = if a == b {
        xx.iter().zip(&yy).map(|(p, q)| (p + q) * 0.25).collect()
    } else {
        let xy = d(a, n + b);
        let yx = d(n + a, b);
        (0..grid.len())
            .map(|k| ((xx[k] + yy[k]) + I * (xy[k] - yx[k])) * 0.25)
            .collect()
    };
    ComplexField { grid, values }
}

fn combine_d_dbar(grid: &Grid, d2: &RealSecondDerivatives<Complex64>, a: usize, b: usize) -> ComplexField {
    let n = grid.n();
    let xx = d2.get(a, b);
    let yy = d2.get(n + a, n + b);
    let xy = d2.get(a, n + b);
    let yx = d2.get(n + a, b);
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            if a == b {
                (xx[k] + yy[k]) * 0.25
            } else {
                ((xx[k] + yy[k]) + I * (xy[k] - yx[k])) * 0.25
            }
        })
        .collect();
    ComplexField { grid: *grid, values }
}

/// Riemann sum `sum f * vol * h^{2n}`; the summation order is fixed so the
/// result does not depend on thread scheduling.
pub fn integrate(f: &ScalarField, vol: &ScalarField) -> f64 {
    const CHUNK: usize = 4096;
    let partial: Vec<f64> = f
        .values
        .par_chunks(CHUNK)
        .zip(vol.values.par_chunks(CHUNK))
        .map(|(a, b)| a.iter().zip(b).map(|(x, w)| x * w).sum::<f64>())
        .collect();
    partial.iter().sum::<f64>() * f.grid.cell_volume()
}

pub fn sup_norm(f: &ScalarField) -> f64 {
    f.max_abs()
}

pub fn oscillation(f: &ScalarField) -> f64 {
    f.sup() - f.inf()
}

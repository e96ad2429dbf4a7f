//! Fixed-size pointwise arithmetic for the flow right-hand side.

use num_complex::Complex64;

use crate::grid::RealSecondDerivatives;
use crate::linalg::CMat;

type C = Complex64;
const ZERO: C = C::new(0.0, 0.0);

pub(crate) type Mat<const N: usize> = [[C; N]; N];

#[inline(always)]
pub(crate) fn load<const N: usize>(raw: &[C]) -> Mat<N> {
    let mut m = [[ZERO; N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row.copy_from_slice(&raw[i * N..(i + 1) * N]);
    }
    m
}

#[inline(always)]
pub(crate) fn to_cmat<const N: usize>(m: &Mat<N>) -> CMat {
    CMat::from_fn(N, |i, j| m[i][j])
}

/// Complex Hessian and holomorphic gradient at `p`.
#[inline(always)]
pub(crate) fn jet<const N: usize>(d2: &RealSecondDerivatives<f64>, p: usize) -> (Mat<N>, [C; N]) {
    let mut h = [[ZERO; N]; N];
    let mut du = [ZERO; N];
    for i in 0..N {
        du[i] = C::new(0.5 * d2.first(i)[p], -0.5 * d2.first(N + i)[p]);
        h[i][i] = C::new(0.25 * (d2.get(i, i)[p] + d2.get(N + i, N + i)[p]), 0.0);
        for j in i + 1..N {
            let re = d2.get(i, j)[p] + d2.get(N + i, N + j)[p];
            let im = d2.get(i, N + j)[p] - d2.get(N + i, j)[p];
            let z = C::new(0.25 * re, 0.25 * im);
            h[i][j] = z;
            h[j][i] = z.conj();
        }
    }
    (h, du)
}

/// `Re tr(a b)` for Hermitian `a`, `b`.
#[inline(always)]
pub(crate) fn trace_product<const N: usize>(a: &Mat<N>, b: &Mat<N>) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        for j in 0..N {
            let (x, y) = (a[i][j], b[j][i]);
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

/// Determinant of a Hermitian matrix when it is positive definite
/// (leading principal minors).
#[inline(always)]
pub(crate) fn positive_det<const N: usize>(m: &Mat<N>) -> Option<f64> {
    let d1 = m[0][0].re;
    if !(d1 > 0.0) {
        return None;
    }
    let d2 = d1 * m[1][1].re - m[0][1].norm_sqr();
    if !(d2 > 0.0) {
        return None;
    }
    if N == 2 {
        return Some(d2);
    }
    let (a, b, c) = (0, 1, 2);
    let d3 = m[a][a].re * d2_minor(m, b, c) - (m[a][b] * (m[b][a] * m[c][c] - m[b][c] * m[c][a])).re
        + (m[a][c] * (m[b][a] * m[c][b] - m[b][b] * m[c][a])).re;
    (d3 > 0.0).then_some(d3)
}

#[inline(always)]
fn d2_minor<const N: usize>(m: &Mat<N>, b: usize, c: usize) -> f64 {
    m[b][b].re * m[c][c].re - m[b][c].norm_sqr()
}

/// Inverse of a Hermitian matrix with known determinant.
#[inline(always)]
pub(crate) fn hermitian_inverse<const N: usize>(m: &Mat<N>, det: f64) -> Mat<N> {
    let mut r = [[ZERO; N]; N];
    let s = 1.0 / det;
    if N == 2 {
        let (a, b) = (0, 1);
        r[a][a] = m[b][b] * s;
        r[b][b] = m[a][a] * s;
        r[a][b] = -m[a][b] * s;
        r[b][a] = -m[b][a] * s;
        return r;
    }
    for i in 0..N {
        for j in 0..N {
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (i + j) % 2 == 0 { s } else { -s };
            r[i][j] = minor * sign;
        }
    }
    r
}

#[inline(always)]
fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Largest eigenvalue of a Hermitian matrix.
#[inline(always)]
pub(crate) fn max_eigenvalue<const N: usize>(m: &Mat<N>) -> f64 {
    if N == 2 {
        let (a, d) = (m[0][0].re, m[1][1].re);
        let mean = 0.5 * (a + d);
        return mean + (0.25 * (a - d) * (a - d) + m[0][1].norm_sqr()).sqrt();
    }
    to_cmat(m).max_eigenvalue_hermitian()
}

//! Small dense complex matrices (n <= 3) with closed-form determinant,
//! inverse and Hermitian eigenvalues.

use num_complex::Complex64;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major `n x n` complex matrix, `n <= MAX_DIM`.
#[derive(Clone, Copy, PartialEq)]
pub struct CMat {
    n: usize,
    a: [Complex64; MAX_DIM * MAX_DIM],
}

impl std::fmt::Debug for CMat {
    #[inline]
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CMat[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                let z = self[(i, j)];
                write!(f, " {:.6}{:+.6}i", z.re, z.im)?;
            }
        }
        write!(f, " ]")
    }
}

impl CMat {
    #[inline]
    pub fn zeros(n: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&n), "matrix dimension {n} unsupported");
        CMat {
            n,
            a: [ZERO; MAX_DIM * MAX_DIM],
        }
    }

    #[inline]
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    #[inline]
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        m
    }

    #[inline]
    pub fn from_slice(n: usize, data: &[Complex64]) -> Self {
        let mut m = Self::zeros(n);
        m.a[..n * n].copy_from_slice(&data[..n * n]);
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.a[..self.n * self.n]
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for z in m.a[..self.n * self.n].iter_mut() {
            *z *= s;
        }
        m
    }

    #[inline]
    pub fn scale_c(&self, s: Complex64) -> Self {
        let mut m = *self;
        for z in m.a[..self.n * self.n].iter_mut() {
            *z *= s;
        }
        m
    }

    #[inline]
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    #[inline]
    pub fn conj(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)].conj())
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    #[inline]
    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `(A + A^dagger) / 2`.
    #[inline]
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[inline]
    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol))
    }

    #[inline]
    pub fn det(&self) -> Complex64 {
        let m = |i, j| self[(i, j)];
        match self.n {
            1 => m(0, 0),
            2 => m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0),
            3 => {
                m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                    + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
            }
            _ => unreachable!(),
        }
    }

    /// Classical adjugate, so that `A * adj(A) = det(A) I`.
    #[inline]
    pub fn adjugate(&self) -> Self {
        let m = |i, j| self[(i, j)];
        match self.n {
            1 => Self::identity(1),
            2 => {
                let mut r = Self::zeros(2);
                r[(0, 0)] = m(1, 1);
                r[(0, 1)] = -m(0, 1);
                r[(1, 0)] = -m(1, 0);
                r[(1, 1)] = m(0, 0);
                r
            }
            3 => {
                let mut r = Self::zeros(3);
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor C_ji
                        let (r0, r1) = others(j);
                        let (c0, c1) = others(i);
                        let minor = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        r[(i, j)] = minor * sign;
                    }
                }
                r
            }
            _ => unreachable!(),
        }
    }

    #[inline]
    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d.norm() <= f64::MIN_POSITIVE || !d.is_finite() {
            return Err(Error::ZeroDenominator("singular matrix".into()));
        }
        Ok(self.adjugate().scale_c(d.inv()))
    }

    /// Real part of the determinant of a Hermitian matrix.
    #[inline]
    pub fn det_real(&self) -> f64 {
        self.det().re
    }

    /// Sylvester criterion on a Hermitian matrix: all leading principal
    /// minors strictly positive.
    #[inline]
    pub fn is_positive_definite(&self) -> bool {
        let m = |i: usize, j: usize| self[(i, j)];
        let d1 = m(0, 0).re;
        if !(d1 > 0.0) {
            return false;
        }
        if self.n == 1 {
            return true;
        }
        let d2 = m(0, 0).re * m(1, 1).re - m(0, 1).norm_sqr();
        if !(d2 > 0.0) {
            return false;
        }
        if self.n == 2 {
            return true;
        }
        self.det_real() > 0.0
    }

    /// Eigenvalues of a Hermitian matrix, sorted descending.
    #[inline]
    pub fn eigenvalues_hermitian(&self) -> Vec<f64> {
        let mut ev = match self.n {
            1 => vec![self[(0, 0)].re],
            2 => {
                let a = self[(0, 0)].re;
                let d = self[(1, 1)].re;
                let b2 = self[(0, 1)].norm_sqr();
                let mean = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + b2).sqrt();
                vec![mean + r, mean - r]
            }
            3 => hermitian3_eigenvalues(self),
            _ => unreachable!(),
        };
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    #[inline]
    pub fn min_eigenvalue_hermitian(&self) -> f64 {
        *self.eigenvalues_hermitian().last().unwrap()
    }

    #[inline]
    pub fn max_eigenvalue_hermitian(&self) -> f64 {
        self.eigenvalues_hermitian()[0]
    }

    /// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
    #[inline]
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) {
                return Err(Error::NotPositive {
                    min_eig: self.min_eigenvalue_hermitian(),
                });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Eigenvalues of the Hermitian matrix `g` relative to the positive
    /// Hermitian matrix `alpha`, i.e. of the endomorphism `alpha^{-1} g`,
    /// sorted descending.
    #[inline]
    pub fn relative_eigenvalues(g: &CMat, alpha: &CMat) -> Result<Vec<f64>> {
        let l = alpha.cholesky()?;
        let linv = l.inverse()?;
        let c = linv * *g * linv.adjoint();
        Ok(c.hermitian_part().eigenvalues_hermitian())
    }
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn hermitian3_eigenvalues(m: &CMat) -> Vec<f64> {
    let a00 = m[(0, 0)].re;
    let a11 = m[(1, 1)].re;
    let a22 = m[(2, 2)].re;
    let p1 = m[(0, 1)].norm_sqr() + m[(0, 2)].norm_sqr() + m[(1, 2)].norm_sqr();
    let q = (a00 + a11 + a22) / 3.0;
    let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + 2.0 * p1;
    if p2 <= 0.0 {
        return vec![q, q, q];
    }
    let p = (p2 / 6.0).sqrt();
    let mut b = *m;
    for i in 0..3 {
        b[(i, i)] -= Complex64::new(q, 0.0);
    }
    let r = (b.scale(1.0 / p).det().re * 0.5).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    vec![e1, e2, e3]
}

impl Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.a[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.a[i * self.n + j]
    }
}

impl Add for CMat {
    type Output = CMat;
    #[inline]
    fn add(self, rhs: CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        let mut m = self;
        for k in 0..self.n * self.n {
            m.a[k] += rhs.a[k];
        }
        m
    }
}

impl AddAssign for CMat {
    #[inline]
    fn add_assign(&mut self, rhs: CMat) {
        for k in 0..self.n * self.n {
            self.a[k] += rhs.a[k];
        }
    }
}

impl Sub for CMat {
    type Output = CMat;
    #[inline]
    fn sub(self, rhs: CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        let mut m = self;
        for k in 0..self.n * self.n {
            m.a[k] -= rhs.a[k];
        }
        m
    }
}

impl Mul for CMat {
    type Output = CMat;
    #[inline]
    fn mul(self, rhs: CMat) -> CMat {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut m = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                for j in 0..n {
                    m.a[i * n + j] += aik * rhs[(k, j)];
                }
            }
        }
        m
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) use crate::checks::{random_hermitian, random_metric};

    #[test]
    fn inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=3 {
            for _ in 0..50 {
                let m = random_hermitian(&mut rng, n) + CMat::identity(n).scale(3.0);
                let r = m * m.inverse().unwrap() - CMat::identity(n);
                assert!(r.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_inverse_rejected() {
        let m = CMat::diag(&[1.0, 0.0, 2.0]);
        assert!(m.inverse().is_err());
    }

    #[test]
    fn eigenvalues_match_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..=3 {
            for _ in 0..200 {
                let m = random_hermitian(&mut rng, n);
                let ev = m.eigenvalues_hermitian();
                let tr: f64 = ev.iter().sum();
                let det: f64 = ev.iter().product();
                assert!((tr - m.trace().re).abs() < 1e-12);
                assert!((det - m.det_real()).abs() < 1e-10);
                assert!(ev.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn repeated_eigenvalues() {
        let ev = CMat::identity(3).scale(2.0).eigenvalues_hermitian();
        assert_eq!(ev, vec![2.0, 2.0, 2.0]);
        let ev = CMat::diag(&[3.0, 1.0, 1.0]).eigenvalues_hermitian();
        assert!((ev[0] - 3.0).abs() < 1e-12 && (ev[2] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn relative_eigenvalues_of_scaled_metric() {
        let a = CMat::diag(&[2.0, 4.0]);
        let g = CMat::diag(&[6.0, 4.0]);
        let ev = CMat::relative_eigenvalues(&g, &a).unwrap();
        assert!((ev[0] - 3.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(CMat::diag(&[1.0, -1.0]).cholesky().is_err());
        assert!(!CMat::diag(&[1.0, 2.0, -0.5]).is_positive_definite());
    }
}

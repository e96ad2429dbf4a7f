//! Exterior algebra of `(p,q)`-forms at a point.
//!
//! A form is stored by its coefficients on the basis
//! `dz^I ^ dzbar^J` with `I`, `J` strictly increasing multi-indices,
//! holomorphic factors first. Multi-indices are bitmasks; bases of a given
//! size are enumerated in lexicographic order of the increasing tuples.

mod field;
mod hermitian;
mod star;

pub use field::FormField;
pub use hermitian::{
    bijection_n1, bijection_n1_field, det_ratio, det_ratio_at, project_pa, project_pa_field, root_n1, root_n1_field, star_11,
    star_chi_wedge_identity_check, star_n1, trace_with, Form11, FormN1N1,
};
pub use star::{hodge_star, set_star_sign_corruption, HodgeStar};

use num_complex::Complex64;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::MAX_DIM;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

struct Tables {
    /// subsets[n][k]: k-subsets of {0..n} as bitmasks, lexicographic.
    subsets: Vec<Vec<Vec<u8>>>,
    /// rank[n][mask]: position of `mask` among subsets of equal size.
    rank: Vec<Vec<usize>>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut subsets = Vec::new();
        let mut rank = Vec::new();
        for n in 0..=MAX_DIM {
            let mut by_size = vec![Vec::new(); n + 1];
            let mut tuples: Vec<Vec<usize>> = (0..(1usize << n))
                .map(|m| (0..n).filter(|b| m & (1 << b) != 0).collect())
                .collect();
            tuples.sort();
            for t in tuples {
                let mask = t.iter().fold(0u8, |m, &b| m | (1 << b));
                by_size[t.len()].push(mask);
            }
            let mut r = vec![0; 1 << n];
            for list in &by_size {
                for (k, &m) in list.iter().enumerate() {
                    r[m as usize] = k;
                }
            }
            subsets.push(by_size);
            rank.push(r);
        }
        Tables { subsets, rank }
    })
}

/// Increasing `k`-element multi-indices of `{0..n}`, lexicographic.
pub fn subsets(n: usize, k: usize) -> &'static [u8] {
    &tables().subsets[n][k]
}

#[inline]
pub fn rank(n: usize, mask: u8) -> usize {
    tables().rank[n][mask as usize]
}

pub fn binomial(n: usize, k: usize) -> usize {
    subsets(n, k).len()
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u8 {
    ((1u16 << n) - 1) as u8
}

/// Sign relating `dz^A ^ dz^B` to `dz^{A|B}`; zero when `A` and `B` overlap.
pub fn merge_sign(a: u8, b: u8) -> f64 {
    if a & b != 0 {
        return 0.0;
    }
    let mut inversions = 0u32;
    let mut bb = b;
    while bb != 0 {
        let k = bb.trailing_zeros();
        inversions += (a >> (k + 1)).count_ones();
        bb &= bb - 1;
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn parity(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Coefficients of a `(p,q)`-form in canonical storage.
#[derive(Debug, Clone, PartialEq)]
pub struct PQForm {
    n: usize,
    p: usize,
    q: usize,
    coeffs: Vec<Complex64>,
}

impl PQForm {
    pub fn zeros(n: usize, p: usize, q: usize) -> Result<Self> {
        if n == 0 || n > MAX_DIM || p > n || q > n {
            return Err(Error::DegreeOverflow { p, q, n });
        }
        Ok(PQForm {
            n,
            p,
            q,
            coeffs: vec![Complex64::new(0.0, 0.0); binomial(n, p) * binomial(n, q)],
        })
    }

    /// The constant function `c` as a `(0,0)`-form.
    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut f = Self::zeros(n, 0, 0).expect("valid dimension");
        f.coeffs[0] = c;
        f
    }

    /// `dz^I ^ dzbar^J` with unit coefficient.
    pub fn basis(n: usize, holo: u8, anti: u8) -> Self {
        let mut f =
            Self::zeros(n, holo.count_ones() as usize, anti.count_ones() as usize).expect("basis multi-index within dimension");
        f.set(holo, anti, Complex64::new(1.0, 0.0));
        f
    }

    pub fn dz(n: usize, i: usize) -> Self {
        Self::basis(n, 1 << i, 0)
    }

    pub fn dzbar(n: usize, j: usize) -> Self {
        Self::basis(n, 0, 1 << j)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    #[inline]
    fn slot(&self, holo: u8, anti: u8) -> usize {
        debug_assert_eq!(holo.count_ones() as usize, self.p);
        debug_assert_eq!(anti.count_ones() as usize, self.q);
        rank(self.n, holo) * binomial(self.n, self.q) + rank(self.n, anti)
    }

    #[inline]
    pub fn get(&self, holo: u8, anti: u8) -> Complex64 {
        self.coeffs[self.slot(holo, anti)]
    }

    #[inline]
    pub fn set(&mut self, holo: u8, anti: u8, v: Complex64) {
        let s = self.slot(holo, anti);
        self.coeffs[s] = v;
    }

    #[inline]
    pub fn add_at(&mut self, holo: u8, anti: u8, v: Complex64) {
        let s = self.slot(holo, anti);
        self.coeffs[s] += v;
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Iterates `(I, J, coefficient)` over the canonical basis.
    pub fn terms(&self) -> impl Iterator<Item = (u8, u8, Complex64)> + '_ {
        let holo = subsets(self.n, self.p);
        let anti = subsets(self.n, self.q);
        let nq = anti.len();
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, &c)| (holo[k / nq], anti[k % nq], c))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut f = self.clone();
        f.coeffs.iter_mut().for_each(|c| *c *= s);
        f
    }

    fn check_same(&self, other: &PQForm) {
        assert_eq!((self.n, self.p, self.q), (other.n, other.p, other.q), "bidegree mismatch");
    }

    pub fn add(&self, other: &PQForm) -> Self {
        self.check_same(other);
        let mut f = self.clone();
        f.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        f
    }

    pub fn sub(&self, other: &PQForm) -> Self {
        self.check_same(other);
        let mut f = self.clone();
        f.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a -= b);
        f
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn max_abs_diff(&self, other: &PQForm) -> f64 {
        self.check_same(other);
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Complex conjugate, a `(q,p)`-form.
    pub fn conj(&self) -> Self {
        let mut out = Self::zeros(self.n, self.q, self.p).expect("same dimension");
        let sign = parity(self.p * self.q);
        for (holo, anti, c) in self.terms() {
            out.set(anti, holo, c.conj() * sign);
        }
        out
    }

    /// `(phi + conj(phi)) / 2` for a `(p,p)`-form.
    pub fn real_part(&self) -> Self {
        assert_eq!(self.p, self.q, "real part needs a (p,p)-form");
        self.add(&self.conj()).scale(Complex64::new(0.5, 0.0))
    }

    /// Exterior product.
    pub fn wedge(&self, other: &PQForm) -> Result<Self> {
        assert_eq!(self.n, other.n);
        let (p, q) = (self.p + other.p, self.q + other.q);
        let mut out = Self::zeros(self.n, p, q)?;
        // dzbar^J ^ dz^K = (-1)^{|J||K|} dz^K ^ dzbar^J
        let swap = parity(self.q * other.p);
        for (i1, j1, a) in self.terms() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (i2, j2, b) in other.terms() {
                let s = merge_sign(i1, i2) * merge_sign(j1, j2);
                if s != 0.0 {
                    out.add_at(i1 | i2, j1 | j2, a * b * (s * swap));
                }
            }
        }
        Ok(out)
    }

    /// `k`-fold exterior power; the empty power is the constant 1.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut acc = Self::scalar(self.n, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.wedge(self)?;
        }
        Ok(acc)
    }

    /// Coefficient of `dz^1 ^ ... ^ dz^n ^ dzbar^1 ^ ... ^ dzbar^n`.
    pub fn top_coefficient(&self) -> Complex64 {
        assert_eq!((self.p, self.q), (self.n, self.n));
        self.coeffs[0]
    }
}

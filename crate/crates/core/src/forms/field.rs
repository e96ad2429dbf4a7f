use num_complex::Complex64;

use super::{merge_sign, parity, subsets, PQForm};
use crate::error::Result;
use crate::grid::{dz_complex, dzbar_complex, ComplexField, Grid};

/// A `(p,q)`-form with one coefficient field per canonical basis element.
///
/// Memory heavy; used by the identity checks, not by the flow.
#[derive(Debug, Clone)]
pub struct FormField {
    pub grid: Grid,
    p: usize,
    q: usize,
    comps: Vec<ComplexField>,
}

impl FormField {
    pub fn zeros(grid: Grid, p: usize, q: usize) -> Result<Self> {
        let proto = PQForm::zeros(grid.n(), p, q)?;
        Ok(FormField {
            grid,
            p,
            q,
            comps: vec![ComplexField::zeros(grid); proto.coeffs().len()],
        })
    }

    pub fn from_pointwise(grid: Grid, p: usize, q: usize, f: impl Fn(usize) -> PQForm + Sync) -> Result<Self> {
        let mut out = Self::zeros(grid, p, q)?;
        let forms: Vec<PQForm> = {
            use rayon::prelude::*;
            (0..grid.len()).into_par_iter().map(&f).collect()
        };
        for (k, comp) in out.comps.iter_mut().enumerate() {
            for (v, form) in comp.values.iter_mut().zip(&forms) {
                *v = form.coeffs()[k];
            }
        }
        Ok(out)
    }

    pub fn bidegree(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn at(&self, index: usize) -> PQForm {
        let mut f = PQForm::zeros(self.grid.n(), self.p, self.q).expect("valid bidegree");
        for (c, comp) in f.coeffs_mut().iter_mut().zip(&self.comps) {
            *c = comp.values[index];
        }
        f
    }

    fn slot(&self, holo: u8, anti: u8) -> usize {
        let n = self.grid.n();
        super::rank(n, holo) * subsets(n, self.q).len() + super::rank(n, anti)
    }

    /// `dbar` of the form: `(p, q+1)`.
    pub fn dbar(&self) -> Result<FormField> {
        let n = self.grid.n();
        let mut out = Self::zeros(self.grid, self.p, self.q + 1)?;
        // dbar(c dz^I dzbar^J) = (-1)^p d_kbar c dz^I ^ dzbar^k ^ dzbar^J
        let lead = parity(self.p);
        for &holo in subsets(n, self.p) {
            for &anti in subsets(n, self.q) {
                let c = &self.comps[self.slot(holo, anti)];
                for k in 0..n {
                    let s = merge_sign(1 << k, anti);
                    if s == 0.0 {
                        continue;
                    }
                    let d = dzbar_complex(c, k);
                    let slot = out.slot(holo, anti | (1 << k));
                    accumulate(&mut out.comps[slot], &d, lead * s);
                }
            }
        }
        Ok(out)
    }

    /// `d` (holomorphic part) of the form: `(p+1, q)`.
    pub fn del(&self) -> Result<FormField> {
        let n = self.grid.n();
        let mut out = Self::zeros(self.grid, self.p + 1, self.q)?;
        for &holo in subsets(n, self.p) {
            for &anti in subsets(n, self.q) {
                let c = &self.comps[self.slot(holo, anti)];
                for k in 0..n {
                    let s = merge_sign(1 << k, holo);
                    if s == 0.0 {
                        continue;
                    }
                    let d = dz_complex(c, k);
                    let slot = out.slot(holo | (1 << k), anti);
                    accumulate(&mut out.comps[slot], &d, s);
                }
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }
}

fn accumulate(dst: &mut ComplexField, src: &ComplexField, s: f64) {
    let s = Complex64::new(s, 0.0);
    dst.values.iter_mut().zip(&src.values).for_each(|(a, b)| *a += s * b);
}

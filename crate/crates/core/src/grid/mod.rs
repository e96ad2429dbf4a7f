//! Uniform periodic lattices on the real `2n`-torus and the fields living on
//! them.
//!
//! Real axes are numbered `0..2n`; axis `i` and axis `n + i` carry the real
//! and imaginary parts of the complex coordinate `z^i`. Points are stored
//! lexicographically with axis 0 varying slowest.

mod fields;
mod ops;
mod resample;
mod stencil;

pub use fields::{ComplexField, MatrixField, ScalarField};
pub use ops::{
    d_axis, d_dbar, dz, dz_complex, dzbar, dzbar_complex, gradient, hessian, hessian_complex, integrate, oscillation, sup_norm,
    RealSecondDerivatives,
};
pub use resample::resample;
pub use stencil::{FieldValue, StencilOrder};

use serde::{Deserialize, Serialize};

use crate::error::{Error, PointLocation, Result};
use crate::linalg::MAX_DIM;

pub const DEFAULT_POINTS: usize = 24;
pub const DEFAULT_PERIOD: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    points: usize,
    period: f64,
    order: StencilOrder,
}

impl Grid {
    pub fn new(n: usize, points: usize, period: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::InvalidGrid(format!("complex dimension n = {n} not in 2..=3")));
        }
        if points < 8 {
            return Err(Error::InvalidGrid(format!("points per axis {points} < 8")));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidGrid(format!("period {period} must be positive")));
        }
        Ok(Grid {
            n,
            points,
            period,
            order: StencilOrder::default(),
        })
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    pub fn order(&self) -> StencilOrder {
        self.order
    }

    /// Number of real axes, `2n`.
    #[inline]
    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    /// Total number of lattice points, `N^{2n}`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points.pow(self.real_dim() as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.period / self.points as f64
    }

    /// Lebesgue measure of one lattice cell, `h^{2n}`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.real_dim() as i32)
    }

    /// Stride of `axis` in the flat storage.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.real_dim() - 1 - axis) as u32)
    }

    pub fn multi_index(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.real_dim()];
        let mut rem = index;
        for a in (0..self.real_dim()).rev() {
            out[a] = rem % self.points;
            rem /= self.points;
        }
        out
    }

    /// Real coordinates `(x^1, ..., x^{2n})` of a lattice point.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(index).into_iter().map(|k| k as f64 * h).collect()
    }

    pub(crate) fn coords_into(&self, index: usize, out: &mut [f64]) {
        let h = self.spacing();
        let mut rem = index;
        for a in (0..self.real_dim()).rev() {
            out[a] = (rem % self.points) as f64 * h;
            rem /= self.points;
        }
    }

    pub fn location(&self, index: usize) -> PointLocation {
        PointLocation {
            index,
            coords: self.coords(index),
        }
    }

    /// Same lattice with `points` per axis; period, dimension and order kept.
    pub fn refined(&self, points: usize) -> Result<Self> {
        Ok(Grid::new(self.n, points, self.period)?.with_order(self.order))
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.n == other.n && self.points == other.points && self.period == other.period
    }
}

use num_complex::Complex64;
use rayon::prelude::*;

use super::Grid;
use crate::linalg::CMat;

/// Real value per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    #[inline]
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    #[inline]
    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at the real coordinates of every point.
    #[inline]
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.real_dim()],
                |x, i| {
                    grid.coords_into(i, x);
                    f(x)
                },
            )
            .collect();
        ScalarField { grid, values }
    }

    #[inline]
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        ScalarField {
            grid: self.grid,
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    #[inline]
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    #[inline]
    pub fn add_scaled(&self, other: &ScalarField, s: f64) -> Self {
        self.zip_map(other, |a, b| a + s * b)
    }

    #[inline]
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[inline]
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    #[inline]
    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Complex value per lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    #[inline]
    pub fn zeros(grid: Grid) -> Self {
        ComplexField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    #[inline]
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64 + Sync) -> Self {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; grid.real_dim()],
                |x, i| {
                    grid.coords_into(i, x);
                    f(x)
                },
            )
            .collect();
        ComplexField { grid, values }
    }

    #[inline]
    pub fn conj(&self) -> Self {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    #[inline]
    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|z| z.re).collect(),
        }
    }

    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[inline]
    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// `n x n` complex matrix per lattice point, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    pub grid: Grid,
    /// Set when every point is Hermitian by construction.
    pub hermitian: bool,
    data: Vec<Complex64>,
}

impl MatrixField {
    #[inline]
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.n();
        MatrixField {
            grid,
            hermitian: true,
            data: vec![Complex64::new(0.0, 0.0); grid.len() * n * n],
        }
    }

    #[inline]
    pub fn constant(grid: Grid, m: &CMat) -> Self {
        let n = grid.n();
        assert_eq!(m.dim(), n);
        let mut data = Vec::with_capacity(grid.len() * n * n);
        for _ in 0..grid.len() {
            data.extend_from_slice(m.as_slice());
        }
        MatrixField {
            grid,
            hermitian: m.is_hermitian(0.0),
            data,
        }
    }

    /// Builds the field pointwise from a function of the point index.
    #[inline]
    pub fn from_index_fn(grid: Grid, hermitian: bool, f: impl Fn(usize) -> CMat + Sync) -> Self {
        let n = grid.n();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * n * n];
        data.par_chunks_mut(n * n).enumerate().for_each(|(i, chunk)| {
            chunk.copy_from_slice(f(i).as_slice());
        });
        MatrixField { grid, hermitian, data }
    }

    #[inline]
    pub fn try_from_index_fn<E: Send>(
        grid: Grid,
        hermitian: bool,
        f: impl Fn(usize) -> std::result::Result<CMat, E> + Sync,
    ) -> std::result::Result<Self, E> {
        let n = grid.n();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * n * n];
        data.par_chunks_mut(n * n).enumerate().try_for_each(|(i, chunk)| {
            chunk.copy_from_slice(f(i)?.as_slice());
            Ok(())
        })?;
        Ok(MatrixField { grid, hermitian, data })
    }

    /// Assembles the field from per-entry complex fields (`entries[i*n + j]`).
    #[inline]
    pub fn from_entries(grid: Grid, hermitian: bool, entries: &[ComplexField]) -> Self {
        let n = grid.n();
        assert_eq!(entries.len(), n * n);
        Self::from_index_fn(grid, hermitian, |p| CMat::from_fn(n, |i, j| entries[i * n + j].values[p]))
    }

    #[inline]
    pub fn at(&self, index: usize) -> CMat {
        let k = self.grid.n() * self.grid.n();
        CMat::from_slice(self.grid.n(), &self.data[index * k..(index + 1) * k])
    }

    /// Row-major entries at a point.
    #[inline]
    pub fn raw_at(&self, index: usize) -> &[Complex64] {
        let k = self.grid.n() * self.grid.n();
        &self.data[index * k..(index + 1) * k]
    }

    #[inline]
    pub fn set(&mut self, index: usize, m: &CMat) {
        let k = self.grid.n() * self.grid.n();
        self.data[index * k..(index + 1) * k].copy_from_slice(m.as_slice());
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> ComplexField {
        let n = self.grid.n();
        ComplexField {
            grid: self.grid,
            values: self.data.chunks(n * n).map(|c| c[i * n + j]).collect(),
        }
    }

    #[inline]
    pub fn raw(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn from_raw(grid: Grid, hermitian: bool, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len() * grid.n() * grid.n());
        MatrixField { grid, hermitian, data }
    }

    #[inline]
    pub fn map(&self, hermitian: bool, f: impl Fn(&CMat) -> CMat + Sync) -> Self {
        Self::from_index_fn(self.grid, hermitian, |p| f(&self.at(p)))
    }

    #[inline]
    pub fn zip_map(&self, other: &MatrixField, hermitian: bool, f: impl Fn(&CMat, &CMat) -> CMat + Sync) -> Self {
        Self::from_index_fn(self.grid, hermitian, |p| f(&self.at(p), &other.at(p)))
    }

    #[inline]
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    #[inline]
    pub fn max_abs_diff(&self, other: &MatrixField) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Largest `|M - M^dagger|` entry over all points.
    #[inline]
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|p| {
                let m = self.at(p);
                (m - m.adjoint()).max_abs()
            })
            .fold(0.0, f64::max)
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

use super::Grid;

/// Accuracy order of the centered finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum StencilOrder {
    Two,
    #[default]
    Four,
    Six,
}

impl StencilOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            StencilOrder::Two => 2,
            StencilOrder::Four => 4,
            StencilOrder::Six => 6,
        }
    }

    /// Weights `a_k` of `f' ~ sum_k a_k (f_{+k} - f_{-k}) / h`.
    pub(crate) fn first_weights(self) -> &'static [f64] {
        match self {
            StencilOrder::Two => &[0.5],
            StencilOrder::Four => &[2.0 / 3.0, -1.0 / 12.0],
            StencilOrder::Six => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
        }
    }

    /// Weights `b_k` of `f'' ~ sum_k b_k (f_{+k} + f_{-k} - 2 f_0) / h^2`.
    pub(crate) fn second_weights(self) -> &'static [f64] {
        match self {
            StencilOrder::Two => &[1.0],
            StencilOrder::Four => &[4.0 / 3.0, -1.0 / 12.0],
            StencilOrder::Six => &[3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
        }
    }
}

impl TryFrom<u32> for StencilOrder {
    type Error = String;
    fn try_from(v: u32) -> Result<Self, String> {
        match v {
            2 => Ok(StencilOrder::Two),
            4 => Ok(StencilOrder::Four),
            6 => Ok(StencilOrder::Six),
            _ => Err(format!("stencil order {v} not in {{2, 4, 6}}")),
        }
    }
}

impl From<StencilOrder> for u32 {
    fn from(s: StencilOrder) -> u32 {
        s.as_u32()
    }
}

/// Values a stencil can act on.
pub trait FieldValue: Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> FieldValue for T where T: Copy + Send + Sync + Default + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

#[derive(Clone, Copy)]
pub(crate) enum Kind {
    First,
    Second,
}

/// Applies a centered periodic stencil along `axis`.
pub(crate) fn apply<T: FieldValue>(grid: &Grid, src: &[T], axis: usize, kind: Kind) -> Vec<T> {
    let n_pts = grid.points_per_axis();
    let stride = grid.stride(axis);
    let block = stride * n_pts;
    let h = grid.spacing();
    let (weights, scale) = match kind {
        Kind::First => (grid.order().first_weights(), 1.0 / h),
        Kind::Second => (grid.order().second_weights(), 1.0 / (h * h)),
    };
    let mut out = vec![T::default(); src.len()];
    if stride == 1 {
        // contiguous axis: wrap indices along each line instead of looping over unit rows
        out.par_chunks_mut(n_pts).zip(src.par_chunks(n_pts)).for_each(|(dst, s)| {
            for (c, d) in dst.iter_mut().enumerate() {
                let mut acc = T::default();
                for (k, &w) in weights.iter().enumerate() {
                    let k = k + 1;
                    let up = s[(c + k) % n_pts];
                    let down = s[(c + n_pts - k) % n_pts];
                    acc = match kind {
                        Kind::First => acc + (up - down) * w,
                        Kind::Second => acc + ((up - s[c]) + (down - s[c])) * w,
                    };
                }
                *d = acc * scale;
            }
        });
        return out;
    }
    out.par_chunks_mut(block).zip(src.par_chunks(block)).for_each(|(dst, s)| {
        for c in 0..n_pts {
            let row = &mut dst[c * stride..(c + 1) * stride];
            let centre = &s[c * stride..(c + 1) * stride];
            for (k, &w) in weights.iter().enumerate() {
                let k = k + 1;
                let up = &s[((c + k) % n_pts) * stride..][..stride];
                let down = &s[((c + n_pts - k) % n_pts) * stride..][..stride];
                match kind {
                    Kind::First => {
                        for i in 0..stride {
                            row[i] = row[i] + (up[i] - down[i]) * w;
                        }
                    }
                    Kind::Second => {
                        for i in 0..stride {
                            row[i] = row[i] + ((up[i] - centre[i]) + (down[i] - centre[i])) * w;
                        }
                    }
                }
            }
            for v in row.iter_mut() {
                *v = *v * scale;
            }
        }
    });
    out
}

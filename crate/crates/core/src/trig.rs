//! Real trigonometric polynomials on the torus, the scenario language for
//! potentials, manufactured solutions and initial data.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid, ScalarField};

/// `amp * cos(2 pi (freq . x) / period + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub amp: f64,
    pub freq: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrigPoly(pub Vec<TrigTerm>);

impl TrigPoly {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        TrigPoly(terms)
    }

    pub fn term(amp: f64, freq: &[i32], phase: f64) -> TrigTerm {
        TrigTerm {
            amp,
            freq: freq.to_vec(),
            phase,
        }
    }

    /// `amp * sin(x^a) sin(x^b)` (axes counted from zero) as two cosines.
    pub fn sin_sin(dim: usize, amp: f64, a: usize, b: usize) -> Self {
        let mut minus = vec![0; dim];
        let mut plus = vec![0; dim];
        minus[a] += 1;
        minus[b] -= 1;
        plus[a] += 1;
        plus[b] += 1;
        TrigPoly(vec![Self::term(0.5 * amp, &minus, 0.0), Self::term(-0.5 * amp, &plus, 0.0)])
    }

    /// Random polynomial with `terms` terms, frequencies in `-max_freq..=max_freq`
    /// and amplitudes in `[-amp, amp]`.
    pub fn random(rng: &mut impl Rng, dim: usize, terms: usize, max_freq: i32, amp: f64) -> Self {
        TrigPoly(
            (0..terms)
                .map(|_| TrigTerm {
                    amp: rng.gen_range(-amp..=amp),
                    freq: (0..dim).map(|_| rng.gen_range(-max_freq..=max_freq)).collect(),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                })
                .collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the first term whose frequency vector does not have `dim` entries.
    pub fn dimension_mismatch(&self, dim: usize) -> Option<usize> {
        self.0.iter().position(|t| t.freq.len() != dim)
    }

    pub fn eval(&self, x: &[f64], period: f64) -> f64 {
        let w = std::f64::consts::TAU / period;
        self.0
            .iter()
            .map(|t| {
                let dot: f64 = t.freq.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum();
                t.amp * (w * dot + t.phase).cos()
            })
            .sum()
    }

    pub fn sample(&self, grid: Grid) -> ScalarField {
        let period = grid.period();
        ScalarField::from_fn(grid, |x| self.eval(x, period))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_PERIOD;

    #[test]
    fn sin_sin_matches_product() {
        let g = Grid::new(2, 8, DEFAULT_PERIOD).unwrap();
        let f = TrigPoly::sin_sin(4, 0.1, 0, 2).sample(g);
        for p in (0..g.len()).step_by(7) {
            let x = g.coords(p);
            assert!((f.values[p] - 0.1 * x[0].sin() * x[2].sin()).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_and_period() {
        let p = TrigPoly(vec![TrigPoly::term(2.0, &[1, 0], -std::f64::consts::FRAC_PI_2)]);
        assert!((p.eval(&[0.25, 0.7], 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(p.dimension_mismatch(2), None);
        assert_eq!(p.dimension_mismatch(4), Some(0));
    }

    #[test]
    fn toml_shape() {
        #[derive(Deserialize)]
        struct W {
            v: TrigPoly,
        }
        let w: W = toml::from_str("v = [{ amp = 1.0, freq = [1, 0, 0, 1] }]").unwrap();
        assert_eq!(w.v.0[0].phase, 0.0);
        assert!(toml::from_str::<W>("v = [{ amp = 1.0, freq = [1], bogus = 2 }]").is_err());
    }
}

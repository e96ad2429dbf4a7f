//! Chern connection of a Hermitian metric on the lattice, its torsion and
//! curvature, and the torsion-linear terms `Z(u)` and `W(u)`.
//!
//! Index conventions: `Gamma_{ij}^k = g^{qbar k} d_i g_{j qbar}`, with the
//! metric matrix `G[j][q] = g_{j qbar}` and `g^{qbar k} = (G^{-1})[q][k]`.
//! Torsion is `T_{ij}^k = Gamma_{ij}^k - Gamma_{ji}^k`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forms::{project_pa, root_n1_field, star_11, Form11};
use crate::grid::{dz_complex, dzbar_complex, gradient, hessian, hessian_complex, ComplexField, Grid, MatrixField, ScalarField};
use crate::linalg::CMat;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn inverse_field(g: &MatrixField) -> Result<MatrixField> {
    MatrixField::try_from_index_fn(g.grid, g.hermitian, |p| {
        g.at(p).inverse().map_err(|_| Error::PositivityLoss {
            location: g.grid.location(p),
            min_eig: g.at(p).min_eigenvalue_hermitian(),
        })
    })
}

/// Christoffel symbols of the Chern connection, stored point-major with
/// `Gamma_{ij}^k` at offset `(i*n + j)*n + k`.
#[derive(Debug, Clone)]
pub struct ConnectionData {
    pub grid: Grid,
    gamma: Vec<Complex64>,
}

pub fn connection_of(g: &MatrixField) -> Result<ConnectionData> {
    let grid = g.grid;
    let n = grid.n();
    let ginv = inverse_field(g)?;
    let n3 = n * n * n;
    let mut gamma = vec![ZERO; grid.len() * n3];
    let entries: Vec<ComplexField> = (0..n * n).map(|k| g.entry(k / n, k % n)).collect();
    for i in 0..n {
        // d_i G[j][q]
        let dg: Vec<ComplexField> = entries.iter().map(|e| dz_complex(e, i)).collect();
        gamma.par_chunks_mut(n3).enumerate().for_each(|(p, chunk)| {
            let gi = ginv.at(p);
            for j in 0..n {
                for k in 0..n {
                    let mut s = ZERO;
                    for q in 0..n {
                        s += gi[(q, k)] * dg[j * n + q].values[p];
                    }
                    chunk[(i * n + j) * n + k] = s;
                }
            }
        });
    }
    Ok(ConnectionData { grid, gamma })
}

impl ConnectionData {
    #[inline]
    fn n(&self) -> usize {
        self.grid.n()
    }

    #[inline]
    pub fn gamma_at(&self, p: usize, i: usize, j: usize, k: usize) -> Complex64 {
        let n = self.n();
        self.gamma[p * n * n * n + (i * n + j) * n + k]
    }

    #[inline]
    pub fn torsion_at(&self, p: usize, i: usize, j: usize, k: usize) -> Complex64 {
        self.gamma_at(p, i, j, k) - self.gamma_at(p, j, i, k)
    }

    /// `T_{l j}^l`.
    #[inline]
    pub fn torsion_trace_at(&self, p: usize, j: usize) -> Complex64 {
        (0..self.n()).map(|l| self.torsion_at(p, l, j, l)).sum()
    }

    #[inline]
    pub fn gamma_field(&self, i: usize, j: usize, k: usize) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: (0..self.grid.len()).map(|p| self.gamma_at(p, i, j, k)).collect(),
        }
    }

    #[inline]
    pub fn torsion_field(&self, i: usize, j: usize, k: usize) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: (0..self.grid.len()).map(|p| self.torsion_at(p, i, j, k)).collect(),
        }
    }

    #[inline]
    pub fn torsion_max_abs(&self) -> f64 {
        let n = self.n();
        (0..self.grid.len())
            .into_par_iter()
            .map(|p| {
                let mut m = 0.0f64;
                for i in 0..n {
                    for j in i + 1..n {
                        for k in 0..n {
                            m = m.max(self.torsion_at(p, i, j, k).norm());
                        }
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// Chern curvature `R_{i jbar k}^l = -d_jbar Gamma_{ik}^l`, evaluated from
/// the closed form in first and second derivatives of the metric.
///
/// Stored point-major at offset `((i*n + j)*n + k)*n + l`.
pub struct Curvature {
    pub grid: Grid,
    data: Vec<Complex64>,
}

impl Curvature {
    #[inline]
    pub fn at(&self, p: usize, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.grid.n();
        self.data[p * n.pow(4) + ((i * n + j) * n + k) * n + l]
    }
}

pub fn curvature_of(g: &MatrixField) -> Result<Curvature> {
    let grid = g.grid;
    let n = grid.n();
    let ginv = inverse_field(g)?;
    let entries: Vec<ComplexField> = (0..n * n).map(|k| g.entry(k / n, k % n)).collect();
    // dg[a][e] = d_a G_e, dbg[b][e] = d_bbar G_e, ddg[e][a*n+b] = d_a d_bbar G_e
    let dg: Vec<Vec<ComplexField>> = (0..n).map(|a| entries.iter().map(|e| dz_complex(e, a)).collect()).collect();
    let dbg: Vec<Vec<ComplexField>> = (0..n)
        .map(|b| entries.iter().map(|e| dzbar_complex(e, b)).collect())
        .collect();
    let ddg: Vec<Vec<ComplexField>> = entries.iter().map(hessian_complex).collect();
    let n4 = n.pow(4);
    let mut data = vec![ZERO; grid.len() * n4];
    data.par_chunks_mut(n4).enumerate().for_each(|(p, chunk)| {
        let gi = ginv.at(p);
        for j in 0..n {
            // d_jbar G^{-1} = -G^{-1} (d_jbar G) G^{-1}
            let dbj = CMat::from_fn(n, |a, b| dbg[j][a * n + b].values[p]);
            let dginv = (gi * dbj * gi).scale(-1.0);
            for i in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = ZERO;
                        for q in 0..n {
                            s += dginv[(q, l)] * dg[i][k * n + q].values[p] + gi[(q, l)] * ddg[k * n + q][i * n + j].values[p];
                        }
                        chunk[((i * n + j) * n + k) * n + l] = -s;
                    }
                }
            }
        }
    });
    Ok(Curvature { grid, data })
}

/// Torsion data of a background metric sufficient to evaluate `Z(u)`.
///
/// The coefficient tensor `Z^i_{p qbar}` is not stored (it has `n^3` entries
/// per point); it is rebuilt from the torsion on demand.
#[derive(Debug, Clone)]
pub struct ZCoefficients {
    pub alpha: MatrixField,
    pub alpha_inv: MatrixField,
    /// `T_{ij}^k` for `i < j`, then `T_{lj}^l` for each `j`.
    torsion: Vec<Complex64>,
    torsion_free: bool,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn torsion_stride(n: usize) -> usize {
    n * (n - 1) / 2 * n + n
}

pub fn z_coefficients(alpha: &MatrixField) -> Result<ZCoefficients> {
    let conn = connection_of(alpha)?;
    let grid = alpha.grid;
    let n = grid.n();
    let pr = pairs(n);
    let stride = torsion_stride(n);
    let mut torsion = vec![ZERO; grid.len() * stride];
    torsion.par_chunks_mut(stride).enumerate().for_each(|(p, chunk)| {
        for (s, &(i, j)) in pr.iter().enumerate() {
            for k in 0..n {
                chunk[s * n + k] = conn.torsion_at(p, i, j, k);
            }
        }
        for j in 0..n {
            chunk[pr.len() * n + j] = conn.torsion_trace_at(p, j);
        }
    });
    drop(conn);
    let torsion_free = torsion.iter().all(|z| *z == ZERO);
    Ok(ZCoefficients {
        alpha: alpha.clone(),
        alpha_inv: inverse_field(alpha)?,
        torsion,
        torsion_free,
    })
}

/// Pointwise torsion view.
struct TorsionAt<'a> {
    n: usize,
    data: &'a [Complex64],
}

impl TorsionAt<'_> {
    #[inline]
    fn t(&self, i: usize, j: usize, k: usize) -> Complex64 {
        let n = self.n;
        if i == j {
            return ZERO;
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        // index of pair (a, b) in lexicographic order
        let s = a * n - a * (a + 1) / 2 + (b - a - 1);
        self.data[s * n + k] * sign
    }

    #[inline]
    fn trace(&self, j: usize) -> Complex64 {
        let n = self.n;
        self.data[n * (n - 1) / 2 * n + j]
    }
}

impl ZCoefficients {
    #[inline]
    pub fn grid(&self) -> Grid {
        self.alpha.grid
    }

    #[inline]
    fn torsion_view(&self, p: usize) -> TorsionAt<'_> {
        let n = self.grid().n();
        let stride = torsion_stride(n);
        TorsionAt {
            n,
            data: &self.torsion[p * stride..(p + 1) * stride],
        }
    }

    #[inline]
    pub fn torsion_at(&self, p: usize, i: usize, j: usize, k: usize) -> Complex64 {
        self.torsion_view(p).t(i, j, k)
    }

    /// Set when the torsion vanishes exactly at every point, so `Z = 0`.
    #[inline]
    pub fn torsion_free(&self) -> bool {
        self.torsion_free
    }

    #[inline]
    pub fn torsion_max_abs(&self) -> f64 {
        self.torsion.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `Z^i_{p qbar}` at a point; element `i` of the result holds the
    /// matrix `(p, q) -> Z^i_{p qbar}`.
    #[inline]
    pub fn coefficients_at(&self, p: usize) -> Vec<CMat> {
        let n = self.grid().n();
        let g = self.alpha.at(p);
        let gi = self.alpha_inv.at(p);
        let t = self.torsion_view(p);
        let c = 1.0 / (2.0 * (n - 1) as f64);
        (0..n)
            .map(|i| {
                CMat::from_fn(n, |pp, q| {
                    let mut s = if pp == i { t.trace(q).conj() } else { ZERO };
                    for j in 0..n {
                        s -= t.trace(j).conj() * gi[(j, i)] * g[(pp, q)];
                    }
                    for l in 0..n {
                        for k in 0..n {
                            s -= g[(pp, l)] * gi[(k, i)] * t.t(k, q, l).conj();
                        }
                    }
                    s * c
                })
            })
            .collect()
    }

    /// `Z(u)` at a point from the holomorphic gradient `u_i` of a real `u`.
    #[inline]
    pub fn z_at(&self, p: usize, du: &[Complex64]) -> CMat {
        let n = self.grid().n();
        if self.torsion_free {
            return CMat::zeros(n);
        }
        let g = self.alpha.at(p);
        let gi = self.alpha_inv.at(p);
        let t = self.torsion_view(p);
        let mut v = [ZERO; 3];
        for k in 0..n {
            for i in 0..n {
                v[k] += gi[(k, i)] * du[i];
            }
        }
        let s: Complex64 = (0..n).map(|j| t.trace(j).conj() * v[j]).sum();
        let a = CMat::from_fn(n, |pp, q| {
            let mut x = du[pp] * t.trace(q).conj() - s * g[(pp, q)];
            for l in 0..n {
                let mut w = ZERO;
                for k in 0..n {
                    w += v[k] * t.t(k, q, l).conj();
                }
                x -= g[(pp, l)] * w;
            }
            x
        });
        (a + a.adjoint()).scale(1.0 / (2.0 * (n - 1) as f64))
    }

    /// `Z(u)` from precomputed gradient fields.
    #[inline]
    pub fn z_from_gradient(&self, grad: &[ComplexField]) -> MatrixField {
        let n = self.grid().n();
        MatrixField::from_index_fn(self.grid(), true, |p| {
            let mut du = [ZERO; 3];
            for i in 0..n {
                du[i] = grad[i].values[p];
            }
            self.z_at(p, &du[..n])
        })
    }
}

pub fn z_of(u: &ScalarField, zc: &ZCoefficients) -> MatrixField {
    zc.z_from_gradient(&gradient(u))
}

/// `(tr_alpha Z) alpha - (n-1) Z` at a point.
pub fn w_at(z: &CMat, alpha: &CMat, alpha_inv: &CMat) -> CMat {
    let n = alpha.dim();
    let tr = (*alpha_inv * *z).trace().re;
    alpha.scale(tr) - z.scale((n - 1) as f64)
}

pub fn w_of(u: &ScalarField, zc: &ZCoefficients) -> MatrixField {
    let z = z_of(u, zc);
    MatrixField::from_index_fn(u.grid, true, |p| w_at(&z.at(p), &zc.alpha.at(p), &zc.alpha_inv.at(p)))
}

/// Max-norm of `[nabla_i, nabla_jbar] a_l + R_{i jbar l}^p a_p` for a
/// `(1,0)`-form `a` given by its components `a[l]`.
pub fn commutation_check(g: &MatrixField, a: &[ComplexField]) -> Result<f64> {
    let grid = g.grid;
    let n = grid.n();
    assert_eq!(a.len(), n);
    let conn = connection_of(g)?;
    let curv = curvature_of(g)?;
    // nabla_i a_l = d_i a_l - Gamma_{il}^p a_p
    let nabla: Vec<ComplexField> = (0..n * n)
        .map(|il| {
            let (i, l) = (il / n, il % n);
            let mut f = dz_complex(&a[l], i);
            f.values.par_iter_mut().enumerate().for_each(|(p, v)| {
                for q in 0..n {
                    *v -= conn.gamma_at(p, i, l, q) * a[q].values[p];
                }
            });
            f
        })
        .collect();
    // nabla_jbar a_l = d_jbar a_l
    let nabla_bar: Vec<ComplexField> = (0..n * n).map(|jl| dzbar_complex(&a[jl % n], jl / n)).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                // nabla_i nabla_jbar a_l = d_i (nabla_jbar a_l) - Gamma_{il}^p nabla_jbar a_p
                let first = dz_complex(&nabla_bar[j * n + l], i);
                // nabla_jbar nabla_i a_l = d_jbar (nabla_i a_l)
                let second = dzbar_complex(&nabla[i * n + l], j);
                let r = (0..grid.len())
                    .into_par_iter()
                    .map(|p| {
                        let mut lhs = first.values[p] - second.values[p];
                        let mut rhs = ZERO;
                        for q in 0..n {
                            lhs -= conn.gamma_at(p, i, l, q) * nabla_bar[j * n + q].values[p];
                            rhs -= curv.at(p, i, j, l, q) * a[q].values[p];
                        }
                        (lhs - rhs).norm()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Max-norm of `[nabla_i, nabla_j] u + T_{ij}^p u_p` for a real scalar.
pub fn ricci_identity_check(g: &MatrixField, u: &ScalarField) -> Result<f64> {
    let grid = g.grid;
    let n = grid.n();
    let conn = connection_of(g)?;
    let du = gradient(u);
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // nabla_i nabla_j u = d_i u_j - Gamma_{ij}^p u_p
            let dij = dz_complex(&du[j], i);
            let dji = dz_complex(&du[i], j);
            let r = (0..grid.len())
                .into_par_iter()
                .map(|p| {
                    let mut lhs = dij.values[p] - dji.values[p];
                    let mut rhs = ZERO;
                    for q in 0..n {
                        lhs -= (conn.gamma_at(p, i, j, q) - conn.gamma_at(p, j, i, q)) * du[q].values[p];
                        rhs -= conn.torsion_at(p, i, j, q) * du[q].values[p];
                    }
                    (lhs - rhs).norm()
                })
                .reduce(|| 0.0, f64::max);
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Gauduchon metric `alpha` with `alpha^{n-1}/(n-1)! = beta^{n-1}/(n-1)! +
/// eps sqrt(-1) d dbar v ^ beta^{n-2}/(n-1)!` for a constant Kahler `beta`.
pub fn gauduchon_from_potential(v: &ScalarField, beta: &CMat, eps: f64) -> Result<MatrixField> {
    let grid = v.grid;
    let hv = hessian(v);
    let base = star_11(&Form11(*beta), beta)?.0;
    let psi = MatrixField::try_from_index_fn(grid, true, |p| -> Result<CMat> {
        let xi = project_pa(&Form11(hv.at(p).scale(eps)), beta)?;
        Ok(base + star_11(&xi, beta)?.0)
    })?;
    root_n1_field(&psi)
}

/// The `(n-1,n-1)` matrix `beta^{n-1}/(n-1)! + eps (i ddbar v) ^ beta^{n-2}/(n-1)!`.
pub fn gauduchon_power(v: &ScalarField, beta: &CMat, eps: f64) -> Result<MatrixField> {
    let alpha = gauduchon_from_potential(v, beta, eps)?;
    crate::forms::bijection_n1_field(&alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{hodge_star, FormField, FormN1N1, PQForm};
    use crate::grid::DEFAULT_PERIOD;
    use crate::linalg::CMat;

    fn grid(n: usize, points: usize) -> Grid {
        Grid::new(n, points, DEFAULT_PERIOD).unwrap()
    }

    fn bumpy_metric(g: Grid) -> MatrixField {
        let n = g.n();
        MatrixField::from_index_fn(g, true, |p| {
            let x = g.coords(p);
            let mut m = CMat::identity(n).scale(2.0);
            m[(0, 0)] += Complex64::new(0.3 * x[0].sin() * x[n].cos(), 0.0);
            let z = Complex64::new(0.2 * (x[1] + x[0]).cos(), 0.1 * x[n + 1].sin());
            m[(0, 1)] += z;
            m[(1, 0)] += z.conj();
            m
        })
    }

    #[test]
    fn constant_metric_is_flat() {
        let g = grid(2, 8);
        let beta = CMat::from_fn(2, |i, j| {
            if i == j {
                Complex64::new(2.0, 0.0)
            } else {
                Complex64::new(0.3, 0.4 * (i as f64 - j as f64))
            }
        });
        let m = MatrixField::constant(g, &beta);
        let c = connection_of(&m).unwrap();
        assert_eq!(c.torsion_max_abs(), 0.0);
        assert_eq!(c.gamma_field(0, 1, 1).max_abs(), 0.0);
        let r = curvature_of(&m).unwrap();
        assert!(r.data.iter().all(|z| z.norm() == 0.0));
        let zc = z_coefficients(&m).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0].sin() + x[3].cos());
        assert_eq!(z_of(&u, &zc).max_abs(), 0.0);
    }

    #[test]
    fn torsion_is_antisymmetric() {
        let g = grid(2, 8);
        let c = connection_of(&bumpy_metric(g)).unwrap();
        for p in [0, 17, 300] {
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        assert_eq!(c.torsion_at(p, i, j, k), -c.torsion_at(p, j, i, k));
                    }
                }
            }
        }
        assert!(c.torsion_max_abs() > 1e-3);
    }

    #[test]
    fn conformal_christoffel_symbols() {
        // g = e^f I: Gamma_{ij}^k = delta_j^k f_i
        let g = grid(2, 24);
        let f = |x: &[f64]| 0.3 * x[0].sin() * x[3].cos();
        let fi = |x: &[f64], i: usize| -> Complex64 {
            // d_i f = (d_{x^i} - sqrt(-1) d_{x^{n+i}}) f / 2
            let (dx, dy) = if i == 0 {
                (0.3 * x[0].cos() * x[3].cos(), 0.0)
            } else {
                (0.0, -0.3 * x[0].sin() * x[3].sin())
            };
            Complex64::new(0.5 * dx, -0.5 * dy)
        };
        let m = MatrixField::from_index_fn(g, true, |p| CMat::identity(2).scale(f(&g.coords(p)).exp()));
        let c = connection_of(&m).unwrap();
        let mut err = 0.0f64;
        for p in 0..g.len() {
            let x = g.coords(p);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let exact = if j == k { fi(&x, i) } else { ZERO };
                        err = err.max((c.gamma_at(p, i, j, k) - exact).norm());
                    }
                }
            }
        }
        assert!(err < 1e-4, "err = {err}");
    }

    #[test]
    fn z_coefficients_match_closed_form() {
        let g = grid(3, 8);
        let beta = CMat::identity(3);
        let v = ScalarField::from_fn(g, |x| x[0].sin() * x[4].sin() + 0.5 * (x[1] + x[5]).cos());
        // torsion is second order in eps
        let alpha = gauduchon_from_potential(&v, &beta, 0.4).unwrap();
        let zc = z_coefficients(&alpha).unwrap();
        assert!(zc.torsion_max_abs() > 1e-3, "torsion {}", zc.torsion_max_abs());
        let u = ScalarField::from_fn(g, |x| (x[2] - x[3]).sin() + 0.2 * x[5].cos());
        let du = gradient(&u);
        let mut err = 0.0f64;
        for p in (0..g.len()).step_by(97) {
            let coeffs = zc.coefficients_at(p);
            let direct = CMat::from_fn(3, |pp, q| {
                (0..3)
                    .map(|i| coeffs[i][(pp, q)] * du[i].values[p] + coeffs[i][(q, pp)].conj() * du[i].values[p].conj())
                    .sum()
            });
            let fast = zc.z_at(p, &[du[0].values[p], du[1].values[p], du[2].values[p]]);
            err = err.max((direct - fast).max_abs());
            assert!(fast.is_hermitian(1e-14));
        }
        assert!(err < 1e-13, "err = {err}");
    }

    #[test]
    fn z_matches_star_oracle() {
        let g = grid(3, 8);
        let beta = CMat::identity(3);
        let v = ScalarField::from_fn(g, |x| x[0].sin() * x[4].sin() + 0.5 * (x[1] + x[5]).cos());
        let alpha = gauduchon_from_potential(&v, &beta, 0.4).unwrap();
        let zc = z_coefficients(&alpha).unwrap();
        let u = ScalarField::from_fn(g, |x| (x[2] + x[3]).sin() + 0.3 * x[1].cos());
        let z = z_of(&u, &zc);
        // dbar(alpha^{n-2}) with n = 3 is dbar(alpha)
        let af = FormField::from_pointwise(g, 1, 1, |p| Form11(alpha.at(p)).to_form()).unwrap();
        let dbar_a = af.dbar().unwrap();
        let du = gradient(&u);
        let mut err = 0.0f64;
        for p in (0..g.len()).step_by(53) {
            let mut d = PQForm::zeros(3, 1, 0).unwrap();
            for i in 0..3 {
                d.set(1 << i, 0, du[i].values[p] * Complex64::new(0.0, 1.0));
            }
            let form = d.wedge(&dbar_a.at(p)).unwrap().real_part();
            let star = hodge_star(&form, &alpha.at(p)).unwrap();
            let oracle = Form11::from_form(&star).0.scale(0.5);
            err = err.max((oracle - z.at(p)).max_abs());
        }
        assert!(z.max_abs() > 1e-5);
        assert!(err < 1e-9 * z.max_abs(), "err = {err}");
    }

    #[test]
    fn w_projects_back_to_z() {
        let g = grid(3, 8);
        let v = ScalarField::from_fn(g, |x| x[1].sin() * x[3].sin());
        let alpha = gauduchon_from_potential(&v, &CMat::identity(3), 0.05).unwrap();
        let zc = z_coefficients(&alpha).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0].cos() + x[5].sin());
        let z = z_of(&u, &zc);
        let w = w_of(&u, &zc);
        for p in (0..g.len()).step_by(101) {
            let a = alpha.at(p);
            let back = project_pa(&Form11(w.at(p)), &a).unwrap().0;
            assert!((back - z.at(p)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn z_is_linear() {
        let g = grid(3, 8);
        let v = ScalarField::from_fn(g, |x| x[2].sin() * x[3].sin());
        let alpha = gauduchon_from_potential(&v, &CMat::identity(3), 0.05).unwrap();
        let zc = z_coefficients(&alpha).unwrap();
        let u1 = ScalarField::from_fn(g, |x| x[0].cos());
        let u2 = ScalarField::from_fn(g, |x| x[4].sin());
        let combo = u1.zip_map(&u2, |a, b| 2.0 * a - 3.0 * b);
        let lhs = z_of(&combo, &zc);
        let rhs = z_of(&u1, &zc).zip_map(&z_of(&u2, &zc), true, |a, b| a.scale(2.0) - b.scale(3.0));
        assert!(lhs.max_abs_diff(&rhs) < 1e-13 * (1.0 + lhs.max_abs()));
    }

    #[test]
    fn gauduchon_background_basics() {
        let g = grid(2, 8);
        let beta = CMat::diag(&[1.0, 2.0]);
        let zero = ScalarField::zeros(g);
        let a0 = gauduchon_from_potential(&zero, &beta, 0.05).unwrap();
        assert!(a0.max_abs_diff(&MatrixField::constant(g, &beta)) < 1e-14);
        let v = ScalarField::from_fn(g, |x| x[0].sin() * x[3].sin());
        let a1 = gauduchon_from_potential(&v, &beta, 1e-3).unwrap();
        let a2 = gauduchon_from_potential(&v, &beta, 2e-3).unwrap();
        let base = MatrixField::constant(g, &beta);
        let d1 = a1.max_abs_diff(&base);
        let d2 = a2.max_abs_diff(&base);
        assert!(d1 > 0.0 && (d2 / d1 - 2.0).abs() < 0.01);
        assert!(matches!(
            gauduchon_from_potential(&v, &beta, 50.0),
            Err(Error::PositivityLoss { .. })
        ));
    }

    #[test]
    fn gauduchon_power_matches_wedge() {
        let g = grid(3, 8);
        let beta = CMat::diag(&[1.0, 1.5, 2.0]);
        let v = ScalarField::from_fn(g, |x| x[0].sin() * x[4].sin());
        let eps = 0.05;
        let power = gauduchon_power(&v, &beta, eps).unwrap();
        let hv = hessian(&v);
        let bf = Form11(beta).to_form();
        for p in (0..g.len()).step_by(211) {
            let target = bf
                .power(2)
                .unwrap()
                .add(&Form11(hv.at(p).scale(eps)).to_form().wedge(&bf).unwrap())
                .scale(Complex64::new(0.5, 0.0));
            let m = FormN1N1::from_form(&target).0;
            assert!((m - power.at(p)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn commutation_converges() {
        let errs: Vec<f64> = [16, 32]
            .iter()
            .map(|&pts| {
                let g = grid(2, pts);
                let m = bumpy_metric(g);
                let a: Vec<ComplexField> = vec![
                    ComplexField::from_fn(g, |x| Complex64::new(x[1].sin(), 0.5 * x[2].cos())),
                    ComplexField::from_fn(g, |x| Complex64::new((x[0] - x[3]).cos(), 0.0)),
                ];
                commutation_check(&m, &a).unwrap()
            })
            .collect();
        assert!(errs[0] / errs[1] > 2f64.powf(3.5), "{errs:?}");
        let flat = MatrixField::constant(grid(2, 8), &CMat::identity(2));
        let a = vec![ComplexField::from_fn(flat.grid, |x| Complex64::new(x[0].sin(), 0.0)); 2];
        assert!(commutation_check(&flat, &a).unwrap() < 1e-12);
    }

    #[test]
    fn ricci_identity_holds() {
        let g = grid(2, 16);
        let m = bumpy_metric(g);
        let u = ScalarField::from_fn(g, |x| x[0].sin() * x[3].cos());
        assert!(ricci_identity_check(&m, &u).unwrap() < 1e-11);
    }
}

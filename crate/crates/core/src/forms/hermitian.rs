//! Real `(1,1)` and `(n-1,n-1)` forms represented by Hermitian matrices.

use num_complex::Complex64;

use super::{factorial, full_mask, parity, HodgeStar, PQForm, I};
use crate::error::{Error, Result};
use crate::grid::{MatrixField, ScalarField};
use crate::linalg::CMat;

/// `sqrt(-1) phi_{i jbar} dz^i ^ dzbar^j`, matrix entry `(i, j)` = `phi_{i jbar}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Form11(pub CMat);

/// `(n-1,n-1)`-form with coefficient matrix `M[j][i] = Psi^{jbar i}`.
///
/// The form is `sum_{i,j} i^{n-1} (-1)^{n(n+1)/2 + i + j + 1} Psi^{jbar i}
/// dz^1..(omit i)..dz^n ^ dzbar^1..(omit j)..dzbar^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormN1N1(pub CMat);

impl Form11 {
    pub fn to_form(&self) -> PQForm {
        let n = self.0.dim();
        let mut f = PQForm::zeros(n, 1, 1).expect("n >= 1");
        for i in 0..n {
            for j in 0..n {
                f.set(1 << i, 1 << j, I * self.0[(i, j)]);
            }
        }
        f
    }

    pub fn from_form(f: &PQForm) -> Self {
        assert_eq!(f.bidegree(), (1, 1));
        let n = f.n();
        Form11(CMat::from_fn(n, |i, j| f.get(1 << i, 1 << j) / I))
    }
}

fn n1_sign(n: usize, i: usize, j: usize) -> Complex64 {
    I.powu((n - 1) as u32) * parity(n * (n + 1) / 2 + i + j + 1)
}

impl FormN1N1 {
    pub fn to_form(&self) -> PQForm {
        let n = self.0.dim();
        let full = full_mask(n);
        let mut f = PQForm::zeros(n, n - 1, n - 1).expect("n >= 1");
        for i in 0..n {
            for j in 0..n {
                f.set(full & !(1 << i), full & !(1 << j), n1_sign(n, i, j) * self.0[(j, i)]);
            }
        }
        f
    }

    pub fn from_form(f: &PQForm) -> Self {
        let n = f.n();
        assert_eq!(f.bidegree(), (n - 1, n - 1));
        let full = full_mask(n);
        FormN1N1(CMat::from_fn(n, |j, i| {
            f.get(full & !(1 << i), full & !(1 << j)) / n1_sign(n, i, j)
        }))
    }
}

/// `tr_g phi = g^{jbar i} phi_{i jbar}`.
pub fn trace_with(g: &CMat, phi: &CMat) -> Result<f64> {
    Ok((g.inverse()? * *phi).trace().re)
}

/// `phi^{n-1} / (n-1)!` for positive `phi`: the matrix `det(phi) phi^{-1}`.
pub fn bijection_n1(phi: &Form11) -> Result<FormN1N1> {
    let m = &phi.0;
    if !m.is_positive_definite() {
        return Err(Error::NotPositive {
            min_eig: m.min_eigenvalue_hermitian(),
        });
    }
    Ok(FormN1N1(m.adjugate().hermitian_part()))
}

/// Inverse of [`bijection_n1`]: `(det M)^{1/(n-1)} M^{-1}`.
pub fn root_n1(psi: &FormN1N1) -> Result<Form11> {
    let m = &psi.0;
    let n = m.dim();
    if !m.is_positive_definite() {
        return Err(Error::NotPositive {
            min_eig: m.min_eigenvalue_hermitian(),
        });
    }
    let root = m.det_real().powf(1.0 / (n - 1) as f64);
    Ok(Form11(m.inverse()?.scale(root).hermitian_part()))
}

pub fn bijection_n1_field(phi: &MatrixField) -> Result<MatrixField> {
    MatrixField::try_from_index_fn(phi.grid, true, |p| {
        bijection_n1(&Form11(phi.at(p))).map(|f| f.0).map_err(|e| locate(e, phi, p))
    })
}

pub fn root_n1_field(psi: &MatrixField) -> Result<MatrixField> {
    MatrixField::try_from_index_fn(psi.grid, true, |p| {
        root_n1(&FormN1N1(psi.at(p))).map(|f| f.0).map_err(|e| locate(e, psi, p))
    })
}

fn locate(e: Error, field: &MatrixField, p: usize) -> Error {
    match e {
        Error::NotPositive { min_eig } => Error::PositivityLoss {
            location: field.grid.location(p),
            min_eig,
        },
        other => other,
    }
}

/// `(1/(n-1)) ((tr_alpha xi) alpha - xi)`.
pub fn project_pa(xi: &Form11, alpha: &CMat) -> Result<Form11> {
    let n = alpha.dim();
    let tr = trace_with(alpha, &xi.0)?;
    Ok(Form11((alpha.scale(tr) - xi.0).scale(1.0 / (n - 1) as f64)))
}

pub fn project_pa_field(xi: &MatrixField, alpha: &MatrixField) -> Result<MatrixField> {
    MatrixField::try_from_index_fn(xi.grid, xi.hermitian && alpha.hermitian, |p| {
        project_pa(&Form11(xi.at(p)), &alpha.at(p)).map(|f| f.0)
    })
}

/// Matrix of `*phi` for a `(1,1)`-form: `det(g) g^{-1} phi g^{-1}`.
pub fn star_11(phi: &Form11, g: &CMat) -> Result<FormN1N1> {
    let ginv = g.inverse()?;
    Ok(FormN1N1((ginv * phi.0 * ginv).scale(g.det_real())))
}

/// Matrix of `*Psi` for an `(n-1,n-1)`-form: `g Psi g / det(g)`.
pub fn star_n1(psi: &FormN1N1, g: &CMat) -> Result<Form11> {
    let d = g.det_real();
    if d == 0.0 {
        return Err(Error::ZeroDenominator("metric determinant".into()));
    }
    Ok(Form11((*g * psi.0 * *g).scale(1.0 / d)))
}

/// `det(phi) / det(xi)` at a point.
pub fn det_ratio_at(phi: &CMat, xi: &CMat) -> Result<f64> {
    let den = xi.det().re;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ZeroDenominator("det xi".into()));
    }
    Ok(phi.det().re / den)
}

/// `det(phi) / det(xi)` pointwise.
pub fn det_ratio(phi: &MatrixField, xi: &MatrixField) -> Result<ScalarField> {
    let grid = phi.grid;
    let mut values = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let r =
            det_ratio_at(&phi.at(p), &xi.at(p)).map_err(|_| Error::ZeroDenominator(format!("det xi at {}", grid.location(p))))?;
        values.push(r);
    }
    Ok(ScalarField { grid, values })
}

/// Max-norm of `*(chi ^ g^{n-2}) - (n-2)! ((tr_g chi) g - chi)`, via the
/// combinatorial star.
pub fn star_chi_wedge_identity_check(chi: &Form11, g: &CMat) -> Result<f64> {
    let n = g.dim();
    let star = HodgeStar::new(g)?;
    let lhs = star.apply(&chi.to_form().wedge(&Form11(*g).to_form().power(n - 2)?)?);
    let tr = trace_with(g, &chi.0)?;
    let rhs = Form11((g.scale(tr) - chi.0).scale(factorial(n - 2))).to_form();
    Ok(lhs.max_abs_diff(&rhs))
}

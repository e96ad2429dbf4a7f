use num_complex::Complex64;
use std::sync::atomic::{AtomicBool, Ordering};

use super::{binomial, full_mask, merge_sign, parity, rank, subsets, PQForm, I};
use crate::error::Result;
use crate::linalg::CMat;

static CORRUPT_SIGN: AtomicBool = AtomicBool::new(false);

/// Test hook: flips the sign of the star on forms of odd holomorphic degree.
///
/// A global sign flip would survive `** = (-1)^k`, this one does not.
pub fn set_star_sign_corruption(on: bool) {
    CORRUPT_SIGN.store(on, Ordering::SeqCst);
}

/// `p x p` minors of `m`, rows and columns indexed by `subsets(n, p)`.
fn compound(m: &CMat, p: usize) -> Vec<Complex64> {
    let n = m.dim();
    let sets = subsets(n, p);
    let k = sets.len();
    let mut out = vec![Complex64::new(0.0, 0.0); k * k];
    if p == 0 {
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let members = |mask: u8| (0..n).filter(move |b| mask & (1 << b) != 0);
    for (r, &rows) in sets.iter().enumerate() {
        for (c, &cols) in sets.iter().enumerate() {
            let mut entries = Vec::with_capacity(p * p);
            for i in members(rows) {
                for j in members(cols) {
                    entries.push(m[(i, j)]);
                }
            }
            out[r * k + c] = CMat::from_slice(p, &entries).det();
        }
    }
    out
}

/// Hodge star of a fixed Hermitian metric, defined by
/// `psi ^ *conj(phi) = <psi, phi> omega^n / n!`.
pub struct HodgeStar {
    n: usize,
    det: f64,
    /// compounds[p] = p-th compound of the inverse metric.
    compounds: Vec<Vec<Complex64>>,
}

impl HodgeStar {
    pub fn new(g: &CMat) -> Result<Self> {
        let n = g.dim();
        let ginv = g.inverse()?;
        Ok(HodgeStar {
            n,
            det: g.det_real(),
            compounds: (0..=n).map(|p| compound(&ginv, p)).collect(),
        })
    }

    /// Maps a `(p,q)`-form to an `(n-q, n-p)`-form.
    pub fn apply(&self, phi: &PQForm) -> PQForm {
        let n = self.n;
        assert_eq!(phi.n(), n);
        let (p, q) = phi.bidegree();
        let (cp, cq) = (&self.compounds[p], &self.compounds[q]);
        let (kp, kq) = (binomial(n, p), binomial(n, q));

        // M = C_p(G^-1) Phi C_q(G^-1), with Phi[I][J] the coefficient on dz^I dzbar^J
        let mut tmp = vec![Complex64::new(0.0, 0.0); kp * kq];
        for r in 0..kp {
            for j in 0..kq {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..kp {
                    s += cp[r * kp + i] * phi.coeffs()[i * kq + j];
                }
                tmp[r * kq + j] = s;
            }
        }
        let mut m = vec![Complex64::new(0.0, 0.0); kp * kq];
        for r in 0..kp {
            for c in 0..kq {
                let mut s = Complex64::new(0.0, 0.0);
                for j in 0..kq {
                    s += tmp[r * kq + j] * cq[j * kq + c];
                }
                m[r * kq + c] = s;
            }
        }

        let mut lead = I.powu(n as u32) * (parity(n * p + n * (n - 1) / 2) * self.det);
        if CORRUPT_SIGN.load(Ordering::Relaxed) && p % 2 == 1 {
            lead = -lead;
        }
        let full = full_mask(n);
        let mut out = PQForm::zeros(n, n - q, n - p).expect("complementary bidegree");
        for &a in subsets(n, n - q) {
            let ac = full & !a;
            for &b in subsets(n, n - p) {
                let bc = full & !b;
                let sign = merge_sign(bc, b) * merge_sign(ac, a);
                out.set(a, b, lead * sign * m[rank(n, bc) * kq + rank(n, ac)]);
            }
        }
        out
    }

    /// Pointwise inner product `<psi, phi>` of two forms of equal bidegree.
    pub fn inner(&self, psi: &PQForm, phi: &PQForm) -> Complex64 {
        let n = self.n;
        let (p, q) = psi.bidegree();
        assert_eq!(phi.bidegree(), (p, q));
        let (cp, cq) = (&self.compounds[p], &self.compounds[q]);
        let (kp, kq) = (binomial(n, p), binomial(n, q));
        // g^{I Lbar} g^{K Jbar} psi_{I Jbar} conj(phi_{L Kbar})
        let mut s = Complex64::new(0.0, 0.0);
        for l in 0..kp {
            for i in 0..kp {
                let gil = cp[l * kp + i];
                for k in 0..kq {
                    for j in 0..kq {
                        let gkj = cq[j * kq + k];
                        s += gil * gkj * psi.coeffs()[i * kq + j] * phi.coeffs()[l * kq + k].conj();
                    }
                }
            }
        }
        s
    }

    /// Coefficient of `omega^n / n!` on `dz^{1..n} ^ dzbar^{1..n}`.
    pub fn volume_coefficient(&self) -> Complex64 {
        I.powu(self.n as u32) * (parity(self.n * (self.n - 1) / 2) * self.det)
    }
}

pub fn hodge_star(phi: &PQForm, g: &CMat) -> Result<PQForm> {
    Ok(HodgeStar::new(g)?.apply(phi))
}

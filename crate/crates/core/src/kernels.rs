//! Numeric kernels on `CMatrix`: Hermitian eigendecomposition (cyclic
//! Jacobi), spectral norm (power iteration on M*M), PSD square root,
//! and operator classification.

use crate::cmatrix::{re, C64, CMatrix};
use crate::error::{DilationError, Result};

/// Eigendecomposition of a Hermitian matrix: A = V diag(values) V*.
/// Eigenvalues ascending; V has orthonormal columns.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Cyclic Jacobi for Hermitian matrices. Quadratically convergent and
/// accurate to ~1e-14 relative for the desk-scale sizes used here.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if !a.is_square() {
        return Err(DilationError::DimensionMismatch(
            "eigendecomposition needs a square matrix".into(),
        ));
    }
    let n = a.rows();
    let scale = a.frobenius_norm().max(1e-300);
    let mut m = a.clone();
    let mut v = CMatrix::identity(n);

    let off = |m: &CMatrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += 2.0 * m.get(i, j).norm_sqr();
            }
        }
        acc.sqrt()
    };

    for _sweep in 0..100 {
        if off(&m) <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                let abs = apq.norm();
                if abs <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let u = apq / abs; // phase
                let tau = (aqq - app) / (2.0 * abs);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // R block = [[c, s],[-s*conj(u), c*conj(u)]]; A <- R* A R, V <- V R.
                let (cs, msu, su, cu) = (re(c), -u * s, re(s), u.conj() * c);
                // columns p, q
                for i in 0..n {
                    let aip = m.get(i, p);
                    let aiq = m.get(i, q);
                    m.set(i, p, aip * cs + aiq * (-su.re * u.conj()));
                    m.set(i, q, aip * su + aiq * cu);
                }
                // rows p, q (R* on the left)
                for j in 0..n {
                    let apj = m.get(p, j);
                    let aqj = m.get(q, j);
                    m.set(p, j, apj * cs + aqj * msu);
                    m.set(q, j, apj * su + aqj * (u * c));
                }
                // restore exact Hermitian structure on the touched pair
                m.set(p, q, re(0.0));
                m.set(q, p, re(0.0));
                let dpp = m.get(p, p).re;
                let dqq = m.get(q, q).re;
                m.set(p, p, re(dpp));
                m.set(q, q, re(dqq));
                for i in 0..n {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, vip * cs + viq * (-su.re * u.conj()));
                    v.set(i, q, vip * su + viq * cu);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap().then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(HermitianEigen { values, vectors })
}

/// Spectral norm. Small matrices go through the exact Hermitian
/// eigensolver on M*M; larger ones use power iteration with two
/// deterministic starts.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    let fro = m.frobenius_norm();
    if fro <= 1e-300 {
        return 0.0;
    }
    if m.rows().min(m.cols()) <= 48 {
        let gram = if m.cols() <= m.rows() {
            m.adjoint().mul(m).expect("shapes agree")
        } else {
            m.mul(&m.adjoint()).expect("shapes agree")
        };
        let eig = hermitian_eigen(&gram).expect("gram is square");
        return eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    }
    let n = m.cols();
    let col_profile: Vec<C64> = (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for i in 0..m.rows() {
                acc += m.get(i, j).norm_sqr();
            }
            re(acc.sqrt().max(1e-12 * fro))
        })
        .collect();
    let peak = (0..n)
        .max_by(|&a, &b| col_profile[a].re.partial_cmp(&col_profile[b].re).unwrap())
        .unwrap_or(0);
    let mut basis_start = vec![re(0.0); n];
    basis_start[peak] = re(1.0);
    let l1 = power_lambda(m, col_profile);
    let l2 = power_lambda(m, basis_start);
    l1.max(l2).max(0.0).sqrt()
}

fn power_lambda(m: &CMatrix, mut v: Vec<C64>) -> f64 {
    normalize(&mut v);
    let mut lambda = 0.0f64;
    for _ in 0..500 {
        let w = m.apply(&v).expect("shape checked");
        let mut z = m.apply_adjoint(&w).expect("shape checked");
        let nl = z.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if nl <= 1e-300 {
            return 0.0;
        }
        let raleigh: f64 = v
            .iter()
            .zip(z.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        normalize(&mut z);
        v = z;
        if (raleigh - lambda).abs() <= 1e-12 * raleigh.abs().max(1e-30) {
            return raleigh;
        }
        lambda = raleigh;
    }
    lambda
}

fn normalize(v: &mut [C64]) {
    let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= re(n);
        }
    }
}

/// Hermitian PSD square root via full eigendecomposition. Eigenvalues in
/// [-tol, 0) are clamped to zero; defect operators are routinely
/// rank-deficient and slightly indefinite in floating point.
pub fn psd_sqrt(p: &CMatrix) -> Result<CMatrix> {
    let scale = 1.0 + p.max_abs();
    let tol = 1e-8 * scale;
    let herm = p.hermitian_defect();
    if herm > tol {
        return Err(DilationError::NotHermitian { defect: herm, tol });
    }
    // symmetrize before decomposing so roundoff asymmetry cannot leak
    let sym = p.add(&p.adjoint())?.scale(re(0.5));
    let eig = hermitian_eigen(&sym)?;
    if let Some(&min) = eig
        .values
        .iter()
        .find(|&&l| l < -tol)
    {
        return Err(DilationError::IndefiniteMatrix { eigenvalue: min, tol });
    }
    let n = p.rows();
    let sqrt_diag = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            re(eig.values[i].max(0.0).sqrt())
        } else {
            re(0.0)
        }
    });
    let v = eig.vectors;
    v.mul(&sqrt_diag)?.mul(&v.adjoint())
}

/// Classification of an operator relative to the isometry identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    Unitary,
    Isometry,
    CoIsometry,
    Contraction,
    None,
}

/// Result of `classify`: the strongest class the operator falls in and
/// the operator-norm distance from that class' defining identity.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct OperatorClass {
    pub kind: OperatorKind,
    pub defect: f64,
}

/// ||M*M - I||, the failure of being an isometry.
pub fn isometry_defect(m: &CMatrix) -> f64 {
    let gram = m.adjoint().mul(m).expect("shapes agree");
    let diff = gram
        .sub(&CMatrix::identity(gram.rows()))
        .expect("square");
    spectral_norm(&diff)
}

/// ||MM* - I||, the failure of being a co-isometry.
pub fn coisometry_defect(m: &CMatrix) -> f64 {
    isometry_defect(&m.adjoint())
}

/// ||P (M*M - I) P|| on the leading `window` coordinates: the isometry
/// identity compressed to the trustworthy region. The full product is
/// formed first; truncating M before multiplying would drop boundary
/// couplings that the identity legitimately uses.
pub fn windowed_isometry_defect(m: &CMatrix, window: usize) -> f64 {
    let gram = m.adjoint().mul(m).expect("shapes agree");
    let w = window.min(gram.rows());
    let block = gram.block(0, 0, w, w);
    let diff = block.sub(&CMatrix::identity(w)).expect("square");
    spectral_norm(&diff)
}

/// ||P (MM* - I) P|| on the leading `window` coordinates.
pub fn windowed_coisometry_defect(m: &CMatrix, window: usize) -> f64 {
    windowed_isometry_defect(&m.adjoint(), window)
}

/// Classify an operator (square or rectangular) at the given tolerance.
pub fn classify(m: &CMatrix, tol: f64) -> OperatorClass {
    let iso = isometry_defect(m);
    let co = coisometry_defect(m);
    let norm = spectral_norm(m);
    if iso <= tol && co <= tol {
        OperatorClass { kind: OperatorKind::Unitary, defect: iso.max(co) }
    } else if iso <= tol {
        OperatorClass { kind: OperatorKind::Isometry, defect: iso }
    } else if co <= tol {
        OperatorClass { kind: OperatorKind::CoIsometry, defect: co }
    } else if norm <= 1.0 + tol {
        OperatorClass { kind: OperatorKind::Contraction, defect: (norm - 1.0).max(0.0) }
    } else {
        OperatorClass { kind: OperatorKind::None, defect: norm - 1.0 }
    }
}

/// Default classification tolerance, loose enough for accumulated
/// products of ~10 operators.
pub const CLASSIFY_TOL: f64 = 1e-8;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_diagonal() {
        let a = CMatrix::from_real_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let e = hermitian_eigen(&a).unwrap();
        assert!((e.values[0] - 4.0).abs() < 1e-14);
        assert!((e.values[1] - 9.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_reconstructs() {
        let a = CMatrix::new(
            3,
            3,
            vec![
                re(2.0),
                C64::new(1.0, 0.5),
                re(0.0),
                C64::new(1.0, -0.5),
                re(3.0),
                C64::new(0.0, -1.0),
                re(0.0),
                C64::new(0.0, 1.0),
                re(1.0),
            ],
        )
        .unwrap();
        let e = hermitian_eigen(&a).unwrap();
        let n = 3;
        let lam = CMatrix::from_fn(n, n, |i, j| if i == j { re(e.values[i]) } else { re(0.0) });
        let rec = e.vectors.mul(&lam).unwrap().mul(&e.vectors.adjoint()).unwrap();
        assert!(rec.distance(&a).unwrap() < 1e-12);
        let vv = e.vectors.adjoint().mul(&e.vectors).unwrap();
        assert!(vv.distance(&CMatrix::identity(n)).unwrap() < 1e-12);
    }

    #[test]
    fn psd_sqrt_identity_and_diag() {
        let q = psd_sqrt(&CMatrix::identity(2)).unwrap();
        assert!(q.distance(&CMatrix::identity(2)).unwrap() < 1e-12);
        let d = CMatrix::from_real_rows(&[vec![4.0, 0.0], vec![0.0, 9.0]]).unwrap();
        let q = psd_sqrt(&d).unwrap();
        assert!((q.get(0, 0).re - 2.0).abs() < 1e-12);
        assert!((q.get(1, 1).re - 3.0).abs() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let m = CMatrix::from_real_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            psd_sqrt(&m),
            Err(DilationError::IndefiniteMatrix { .. })
        ));
    }

    #[test]
    fn psd_sqrt_rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&m), Err(DilationError::NotHermitian { .. })));
    }

    #[test]
    fn spectral_norm_known_values() {
        let m = CMatrix::from_real_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]).unwrap();
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-12);
        assert_eq!(spectral_norm(&CMatrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn classify_identity_is_unitary() {
        let c = classify(&CMatrix::identity(3), CLASSIFY_TOL);
        assert_eq!(c.kind, OperatorKind::Unitary);
        assert!(c.defect <= 1e-14);
    }

    #[test]
    fn classify_half_identity_is_contraction() {
        let c = classify(&CMatrix::identity(2).scale(re(0.5)), CLASSIFY_TOL);
        assert_eq!(c.kind, OperatorKind::Contraction);
        assert_eq!(c.defect, 0.0);
    }

    #[test]
    fn classify_column_isometry() {
        let v = CMatrix::new(2, 1, vec![re(1.0), re(0.0)]).unwrap();
        let c = classify(&v, CLASSIFY_TOL);
        assert_eq!(c.kind, OperatorKind::Isometry);
        assert!(coisometry_defect(&v) > 0.5);
    }

    #[test]
    fn classify_adjoint_swaps_iso_and_coiso() {
        let v = CMatrix::new(3, 2, vec![re(1.0), re(0.0), re(0.0), re(1.0), re(0.0), re(0.0)])
            .unwrap();
        let c = classify(&v, CLASSIFY_TOL);
        let ca = classify(&v.adjoint(), CLASSIFY_TOL);
        assert_eq!(c.kind, OperatorKind::Isometry);
        assert_eq!(ca.kind, OperatorKind::CoIsometry);
    }
}

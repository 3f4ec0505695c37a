//! Gram-determined orthonormalization and unitary completion.
//!
//! The pivoted routine consumes only a Gram matrix, so two vector
//! families with equal Grams produce identical coefficients and pivots.
//! That determinism is what makes minimal-part matching well defined
//! downstream.

use crate::cmatrix::{re, C64, CMatrix};
use crate::error::{DilationError, Result};

/// Relative rank tolerance for accepting a pivot.
pub const RANK_TOL: f64 = 1e-9;

/// Output of pivoted orthonormalization: `coefficients` expresses an
/// orthonormal basis of the span as combinations of the input family,
/// q_k = sum_j coefficients[j][k] * input_j.
#[derive(Debug, Clone)]
pub struct PivotedBasis {
    pub coefficients: CMatrix,
    pub rank: usize,
    pub pivots: Vec<usize>,
    /// Pivots accepted per level when level-blocked; a single block
    /// otherwise.
    pub level_ranks: Vec<usize>,
}

/// Pivoted orthonormalization driven by the Gram matrix alone.
/// Pivot rule: largest remaining diagonal of the updated Gram, ties
/// broken by lowest index.
pub fn pivoted_orthonormalize_gram(gram: &CMatrix, rank_tol: f64) -> Result<PivotedBasis> {
    let n = gram.rows();
    pivoted_leveled(gram, &[n], rank_tol)
}

/// As `pivoted_orthonormalize_gram`, but candidates come in consecutive
/// level blocks and each level is exhausted before the next is opened.
/// Keeps orbit bases stable under deepening and puts the base space
/// first with identity coefficients when its Gram block is the identity.
pub fn pivoted_leveled(gram: &CMatrix, levels: &[usize], rank_tol: f64) -> Result<PivotedBasis> {
    if !gram.is_square() {
        return Err(DilationError::InconsistentDimensions(
            "Gram matrix must be square".into(),
        ));
    }
    let n = gram.rows();
    if levels.iter().sum::<usize>() != n {
        return Err(DilationError::InconsistentDimensions(
            "level sizes must sum to the Gram dimension".into(),
        ));
    }
    let mut diag: Vec<f64> = (0..n).map(|i| gram.get(i, i).re.max(0.0)).collect();
    let scale = diag.iter().fold(0.0f64, |a, &b| a.max(b)).max(1e-300);
    let thresh = rank_tol * scale;

    let mut coeff_cols: Vec<Vec<C64>> = Vec::new(); // c_k in candidate space
    let mut gc_cols: Vec<Vec<C64>> = Vec::new(); // cached G * c_k
    let mut pivots: Vec<usize> = Vec::new();
    let mut level_ranks: Vec<usize> = Vec::new();

    let mut start = 0;
    for &len in levels {
        let end = start + len;
        let mut accepted = 0;
        loop {
            // largest remaining diagonal within the level, lowest index on ties
            let mut best: Option<usize> = None;
            for i in start..end {
                if pivots.contains(&i) {
                    continue;
                }
                match best {
                    None => best = Some(i),
                    Some(b) => {
                        if diag[i] > diag[b] {
                            best = Some(i);
                        }
                    }
                }
            }
            let Some(p) = best else { break };
            if diag[p] <= thresh {
                break;
            }
            // residual of candidate p against accepted basis, in coefficient space
            let mut c = vec![re(0.0); n];
            c[p] = re(1.0);
            for (cl, gl) in coeff_cols.iter().zip(gc_cols.iter()) {
                let overlap = gl[p].conj(); // <q_l, cand_p>
                for (ci, cli) in c.iter_mut().zip(cl.iter()) {
                    *ci -= overlap * cli;
                }
            }
            let nrm = diag[p].sqrt();
            for ci in c.iter_mut() {
                *ci /= re(nrm);
            }
            // g = G c, used for both future residuals and diagonal updates
            let mut g = vec![re(0.0); n];
            for (j, gj) in g.iter_mut().enumerate() {
                let mut acc = re(0.0);
                for (l, cl) in c.iter().enumerate() {
                    if cl.re != 0.0 || cl.im != 0.0 {
                        acc += gram.get(j, l) * cl;
                    }
                }
                *gj = acc;
            }
            for (d, gj) in diag.iter_mut().zip(g.iter()) {
                *d -= gj.norm_sqr();
                if *d < 0.0 {
                    *d = 0.0;
                }
            }
            pivots.push(p);
            coeff_cols.push(c);
            gc_cols.push(g);
            accepted += 1;
        }
        level_ranks.push(accepted);
        start = end;
    }

    let rank = pivots.len();
    let mut coefficients = CMatrix::zeros(n, rank);
    for (k, c) in coeff_cols.iter().enumerate() {
        for (j, &cj) in c.iter().enumerate() {
            coefficients.set(j, k, cj);
        }
    }
    Ok(PivotedBasis { coefficients, rank, pivots, level_ranks })
}

/// Orthonormalize a family given as matrix columns; delegates to the
/// Gram-driven routine so the result depends on the Gram only.
pub fn pivoted_orthonormalize_vectors(
    vectors: &CMatrix,
    rank_tol: f64,
) -> Result<(PivotedBasis, CMatrix)> {
    let gram = vectors.adjoint().mul(vectors)?;
    let piv = pivoted_orthonormalize_gram(&gram, rank_tol)?;
    let basis = vectors.mul(&piv.coefficients)?;
    Ok((piv, basis))
}

/// Orthonormal basis of the orthogonal complement of `basis` (assumed to
/// have orthonormal columns) inside the ambient space. Vectors are
/// produced in coordinate order, so complement directions keep the
/// ambient's leading-index structure.
pub fn complement_basis(basis: &CMatrix) -> Result<CMatrix> {
    Ok(complement_basis_with_origins(basis)?.0)
}

/// As `complement_basis`, also reporting for each complement column the
/// ambient coordinate it was grown from. Columns recovered in the
/// top-up pass (numerically split across coordinates) report
/// `usize::MAX` and should be treated as boundary directions.
pub fn complement_basis_with_origins(basis: &CMatrix) -> Result<(CMatrix, Vec<usize>)> {
    let amb = basis.rows();
    let r = basis.cols();
    if r > amb {
        return Err(DilationError::DimensionOverflow { ambient: amb, needed: r });
    }
    let target = amb - r;
    let mut accepted: Vec<Vec<C64>> = Vec::with_capacity(target);
    let mut origins: Vec<usize> = Vec::with_capacity(target);
    let mut skipped: Vec<usize> = Vec::new();

    let project = |accepted: &[Vec<C64>], j: usize| -> (Vec<C64>, f64) {
        let mut v = vec![re(0.0); amb];
        v[j] = re(1.0);
        // subtract basis component
        for k in 0..r {
            let mut overlap = re(0.0);
            for i in 0..amb {
                overlap += basis.get(i, k).conj() * v[i];
            }
            if overlap.re != 0.0 || overlap.im != 0.0 {
                for i in 0..amb {
                    v[i] -= overlap * basis.get(i, k);
                }
            }
        }
        for q in accepted {
            let mut overlap = re(0.0);
            for i in 0..amb {
                overlap += q[i].conj() * v[i];
            }
            for i in 0..amb {
                v[i] -= overlap * q[i];
            }
        }
        let nsq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        (v, nsq)
    };

    // pass 1: coordinate order, keep clearly independent directions
    for j in 0..amb {
        if accepted.len() == target {
            break;
        }
        let (mut v, nsq) = project(&accepted, j);
        if nsq > 0.25 {
            let nrm = nsq.sqrt();
            for z in v.iter_mut() {
                *z /= re(nrm);
            }
            accepted.push(v);
            origins.push(j);
        } else {
            skipped.push(j);
        }
    }
    // pass 2: top up from the skipped coordinates, largest residual first
    while accepted.len() < target {
        let mut best: Option<(usize, f64, Vec<C64>)> = None;
        for &j in &skipped {
            let (v, nsq) = project(&accepted, j);
            let better = match &best {
                None => true,
                Some((_, bn, _)) => nsq > *bn + 1e-15,
            };
            if better {
                best = Some((j, nsq, v));
            }
        }
        let Some((j, nsq, mut v)) = best else {
            return Err(DilationError::InconsistentDimensions(
                "complement extraction failed to reach full dimension".into(),
            ));
        };
        if nsq < 1e-20 {
            return Err(DilationError::InconsistentDimensions(
                "complement extraction hit a numerically dependent coordinate".into(),
            ));
        }
        let nrm = nsq.sqrt();
        for z in v.iter_mut() {
            *z /= re(nrm);
        }
        accepted.push(v);
        origins.push(usize::MAX);
        skipped.retain(|&x| x != j);
    }

    let mut out = CMatrix::zeros(amb, target);
    for (k, v) in accepted.iter().enumerate() {
        for (i, &z) in v.iter().enumerate() {
            out.set(i, k, z);
        }
    }
    Ok((out, origins))
}

/// Tolerance for Gram agreement in `unitary_completion`.
pub const GRAM_TOL: f64 = 1e-8;

/// Complete a partially defined isometry to a unitary: returns G of size
/// `ambient` with G d_k = i_k for all columns of the two families. The
/// families must have equal Gram matrices. On the orthogonal complement
/// of span(domain), G maps onto the complement of span(image); when the
/// two spans are mutually orthogonal, G is the swap involution extended
/// by the identity, so G * G = I.
pub fn unitary_completion(
    domain: &CMatrix,
    image: &CMatrix,
    ambient: usize,
) -> Result<CMatrix> {
    if domain.cols() != image.cols() {
        return Err(DilationError::InconsistentDimensions(
            "domain and image families differ in size".into(),
        ));
    }
    if domain.rows() != ambient || image.rows() != ambient {
        return Err(DilationError::DimensionOverflow {
            ambient,
            needed: domain.rows().max(image.rows()),
        });
    }
    if domain.cols() == 0 {
        return Ok(CMatrix::identity(ambient));
    }
    let gram_d = domain.adjoint().mul(domain)?;
    let gram_i = image.adjoint().mul(image)?;
    let gram_gap = crate::kernels::spectral_norm(&gram_d.sub(&gram_i)?);
    let scale = 1.0 + crate::kernels::spectral_norm(&gram_d);
    if gram_gap > GRAM_TOL * scale {
        return Err(DilationError::GramMismatch { defect: gram_gap, tol: GRAM_TOL * scale });
    }
    // shared coefficients: both orthonormalizations see the same Gram
    let piv = pivoted_orthonormalize_gram(&gram_d, RANK_TOL)?;
    if piv.rank > ambient {
        return Err(DilationError::DimensionOverflow { ambient, needed: piv.rank });
    }
    let bd = domain.mul(&piv.coefficients)?;
    let bi = image.mul(&piv.coefficients)?;

    // mutually orthogonal spans: swap involution extended by identity
    let cross = bd.adjoint().mul(&bi)?;
    if cross.max_abs() <= GRAM_TOL {
        let swap = bi
            .mul(&bd.adjoint())?
            .add(&bd.mul(&bi.adjoint())?)?;
        let proj = bd
            .mul(&bd.adjoint())?
            .add(&bi.mul(&bi.adjoint())?)?;
        return CMatrix::identity(ambient).sub(&proj)?.add(&swap);
    }

    let comp_d = complement_basis(&bd)?;
    let comp_i = complement_basis(&bi)?;
    let main = bi.mul(&bd.adjoint())?;
    let rest = comp_i.mul(&comp_d.adjoint())?;
    main.add(&rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{classify, spectral_norm, OperatorKind, CLASSIFY_TOL};

    #[test]
    fn duplicate_vector_gives_rank_one_pivot_zero() {
        let gram = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let piv = pivoted_orthonormalize_gram(&gram, RANK_TOL).unwrap();
        assert_eq!(piv.rank, 1);
        assert_eq!(piv.pivots, vec![0]);
    }

    #[test]
    fn orthonormal_pair_gives_identity_coefficients() {
        let gram = CMatrix::identity(2);
        let piv = pivoted_orthonormalize_gram(&gram, RANK_TOL).unwrap();
        assert_eq!(piv.rank, 2);
        assert_eq!(piv.pivots, vec![0, 1]);
        assert!(piv.coefficients.distance(&CMatrix::identity(2)).unwrap() < 1e-15);
    }

    #[test]
    fn gram_determined_bitwise() {
        // same Gram realized in two different ambient spaces
        let mut fam1 = CMatrix::zeros(3, 2);
        fam1.set(0, 0, re(1.0));
        fam1.set(0, 1, re(1.0));
        let mut fam2 = CMatrix::zeros(5, 2);
        fam2.set(3, 0, re(1.0));
        fam2.set(3, 1, re(1.0));
        let (p1, _) = pivoted_orthonormalize_vectors(&fam1, RANK_TOL).unwrap();
        let (p2, _) = pivoted_orthonormalize_vectors(&fam2, RANK_TOL).unwrap();
        assert_eq!(p1.pivots, p2.pivots);
        assert_eq!(p1.rank, p2.rank);
        assert_eq!(p1.coefficients.data(), p2.coefficients.data());
    }

    #[test]
    fn rank_one_gram_from_eigenvalue_oracle() {
        // Gram [[1,1],[1,1]] has eigenvalues {2, 0}: rank 1 no matter the
        // ambient realization
        let gram = CMatrix::from_real_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let eig = crate::kernels::hermitian_eigen(&gram).unwrap();
        let oracle_rank = eig.values.iter().filter(|&&l| l > 1e-9 * 2.0).count();
        let piv = pivoted_orthonormalize_gram(&gram, RANK_TOL).unwrap();
        assert_eq!(piv.rank, oracle_rank);
    }

    #[test]
    fn completion_swaps_orthogonal_basis_vectors() {
        let mut d = CMatrix::zeros(2, 1);
        d.set(0, 0, re(1.0));
        let mut i = CMatrix::zeros(2, 1);
        i.set(1, 0, re(1.0));
        let g = unitary_completion(&d, &i, 2).unwrap();
        let swap = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(g.distance(&swap).unwrap() < 1e-12);
    }

    #[test]
    fn completion_empty_families_is_identity() {
        let d = CMatrix::zeros(3, 0);
        let g = unitary_completion(&d, &d, 3).unwrap();
        assert!(g.distance(&CMatrix::identity(3)).unwrap() < 1e-15);
    }

    #[test]
    fn completion_maps_domain_to_image_and_is_unitary() {
        // a random-ish isometric pair in C^4 with matching Grams
        let d = CMatrix::from_real_rows(&[
            vec![0.6, 0.0],
            vec![0.8, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let i = CMatrix::from_real_rows(&[
            vec![0.0, 0.6],
            vec![0.0, -0.8],
            vec![1.0, 0.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let g = unitary_completion(&d, &i, 4).unwrap();
        let resid = g.mul(&d).unwrap().distance(&i).unwrap();
        assert!(resid < 1e-10, "residual {resid}");
        let class = classify(&g, CLASSIFY_TOL);
        assert_eq!(class.kind, OperatorKind::Unitary);
        assert!(class.defect <= 1e-10);
    }

    #[test]
    fn completion_rejects_gram_mismatch() {
        let d = CMatrix::from_real_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let i = CMatrix::from_real_rows(&[vec![0.5], vec![0.0]]).unwrap();
        assert!(matches!(
            unitary_completion(&d, &i, 2),
            Err(DilationError::GramMismatch { .. })
        ));
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal_to_basis() {
        let b = CMatrix::from_real_rows(&[
            vec![1.0 / 2.0f64.sqrt()],
            vec![1.0 / 2.0f64.sqrt()],
            vec![0.0],
        ])
        .unwrap();
        let c = complement_basis(&b).unwrap();
        assert_eq!(c.cols(), 2);
        let cc = c.adjoint().mul(&c).unwrap();
        assert!(cc.distance(&CMatrix::identity(2)).unwrap() < 1e-12);
        let cross = b.adjoint().mul(&c).unwrap();
        assert!(spectral_norm(&cross) < 1e-12);
    }
}

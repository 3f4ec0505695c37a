//! Commuting pair constructions.
//!
//! `ando_coisometric_pair` extends two commuting contractions to a
//! commuting pair of co-isometries (the Andô-type step). Writing
//! T1 = A*, T2 = B* and D_i for the defects (I - T_i* T_i)^(1/2), the
//! isometric dilations V1(h,k) = (T1 h, (D1 h, 0), k1, ...) and
//! V2(h,k) = (T2 h, (0, D2 h), k1, ...) on H plus a chain of H^2 pair
//! slots almost commute: V1 V2 and V2 V1 differ only through the vectors
//!   x(h) = (D1 T2 h, 0, 0, D2 h),   y(h) = (0, D2 T1 h, D1 h, 0)
//! in the first two pair slots. These span mutually orthogonal
//! subspaces with equal Grams, so a unitary involution G of H^4 swaps
//! them and fixes their complement. Applying G to consecutive pair-slot
//! pairs gives an involution Ĝ with Ĝ(V1 V2) = (V2 V1)Ĝ, and
//! U1 = V1 Ĝ, U2 = Ĝ V2 are commuting isometries. The pair is
//! (X, Y) = (U1*, U2*).
//!
//! `ito_unitary_pair` extends two commuting isometries to commuting
//! unitaries on a truncated direct limit: classes (n, h) with
//! (n, h) ~ (n+1, V1 V2 h), realized Gram-first so the whole operator
//! pair is assembled from inner products alone.

use crate::block::BlockOp;
use crate::cmatrix::{re, CMatrix};
use crate::error::{DilationError, Result};
use crate::kernels::spectral_norm;
use crate::orbit::ClassSystem;
use crate::orthonorm::unitary_completion;
use crate::single::defect;
use crate::space::{BlockSpace, Slot};

/// Commuting extension pair of two commuting base operators.
#[derive(Debug, Clone)]
pub struct AndoPair {
    /// Extension of the first operator.
    pub x: BlockOp,
    /// Extension of the second operator.
    pub y: BlockOp,
    /// The completion unitary used for the tail pairing (identity when
    /// the defects vanish or no pairing is needed).
    pub g_unitary: CMatrix,
    /// Norm of Ĝ(V1 V2) - (V2 V1)Ĝ on the window; exposed for tests.
    pub intertwine_defect: f64,
}

/// Pair construction output in plain matrix form, shared by the
/// induction engine.
#[derive(Debug, Clone)]
pub(crate) struct PairOut {
    pub x: CMatrix,
    pub y: CMatrix,
    pub space: BlockSpace,
    /// Leading coordinates free of truncation artifacts.
    pub certified_dim: usize,
    pub g_unitary: CMatrix,
    pub intertwine_defect: f64,
}

const COMMUTE_TOL: f64 = 1e-10;

/// Andô-type commuting co-isometric pair extending commuting
/// contractions A and B, truncated at `depth` pair slots.
pub fn ando_coisometric_pair(a: &CMatrix, b: &CMatrix, depth: usize) -> Result<AndoPair> {
    let out = ando_pair_core(a, b, depth.max(4))?;
    let slots = out.space.slot_count();
    // entries are exact everywhere stored; the final pair slot carries
    // the truncation defect, and Ĝ couples it one slot back
    let radius = slots.saturating_sub(2);
    let x = BlockOp::from_parts(out.space.clone(), out.x, radius)?;
    let y = BlockOp::from_parts(out.space, out.y, radius)?;
    Ok(AndoPair {
        x,
        y,
        g_unitary: out.g_unitary,
        intertwine_defect: out.intertwine_defect,
    })
}

pub(crate) fn ando_pair_core(a: &CMatrix, b: &CMatrix, depth: usize) -> Result<PairOut> {
    if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
        return Err(DilationError::DimensionMismatch(
            "pair needs square operators on a common space".into(),
        ));
    }
    let d = a.rows();
    let comm = a.mul(b)?.sub(&b.mul(a)?)?;
    let comm_norm = spectral_norm(&comm);
    if comm_norm > COMMUTE_TOL * (1.0 + spectral_norm(a) * spectral_norm(b)) {
        return Err(DilationError::NotCommuting(comm_norm));
    }
    let pair_slots = if depth % 2 == 0 { depth } else { depth + 1 };
    let t1 = a.adjoint();
    let t2 = b.adjoint();
    let d1 = defect(&t1)?; // (I - A A*)^(1/2)
    let d2 = defect(&t2)?;

    let mut slots = vec![Slot::new("H", d)];
    for k in 1..=pair_slots {
        slots.push(Slot::new(format!("p{k}"), 2 * d));
    }
    let space = BlockSpace::new(slots, vec!["H".to_string()])?;
    let n = space.total_dim();

    // V_i: H -> (T_i H, defect into its half of the first pair slot),
    // pair slots shift down by one, the last is dropped.
    let mut v1 = CMatrix::zeros(n, n);
    let mut v2 = CMatrix::zeros(n, n);
    v1.set_block(0, 0, &t1);
    v2.set_block(0, 0, &t2);
    v1.set_block(d, 0, &d1); // first half of p1
    v2.set_block(2 * d, 0, &d2); // second half of p1
    for k in 1..pair_slots {
        for i in 0..2 * d {
            let row = d + k * 2 * d + i;
            let col = d + (k - 1) * 2 * d + i;
            v1.set(row, col, re(1.0));
            v2.set(row, col, re(1.0));
        }
    }

    // the two products differ through x(h) and y(h) in H^4
    let d1t2 = d1.mul(&t2)?;
    let d2t1 = d2.mul(&t1)?;
    let mut xfam = CMatrix::zeros(4 * d, d);
    xfam.set_block(0, 0, &d1t2);
    xfam.set_block(3 * d, 0, &d2);
    let mut yfam = CMatrix::zeros(4 * d, d);
    yfam.set_block(d, 0, &d2t1);
    yfam.set_block(2 * d, 0, &d1);

    let domain = CMatrix::hstack(&[&xfam, &yfam])?;
    let image = CMatrix::hstack(&[&yfam, &xfam])?;
    let g = unitary_completion(&domain, &image, 4 * d)?;

    // Ĝ applies G to pair-slot pairs (1,2), (3,4), ...; H is untouched
    let mut ghat = CMatrix::identity(n);
    let mut j = 0;
    while (j + 2) * 2 * d + d <= n {
        let off = d + j * 2 * d;
        ghat.set_block(off, off, &g);
        j += 2;
    }

    let u1 = v1.mul(&ghat)?;
    let u2 = ghat.mul(&v2)?;
    let x = u1.adjoint();
    let y = u2.adjoint();

    // intertwining identity on the window (all but the last two pair slots)
    let v12 = v1.mul(&v2)?;
    let v21 = v2.mul(&v1)?;
    let lhs = ghat.mul(&v12)?;
    let rhs = v21.mul(&ghat)?;
    let w = d + (pair_slots.saturating_sub(2)) * 2 * d;
    let intertwine_defect = spectral_norm(&lhs.block(0, 0, w, w).sub(&rhs.block(0, 0, w, w))?);

    Ok(PairOut {
        x,
        y,
        space,
        certified_dim: w,
        g_unitary: g,
        intertwine_defect,
    })
}

/// Itô-type commuting unitary pair extending commuting isometries,
/// truncated at `levels` direct-limit levels. Trailing columns where the
/// isometry identity fails (a window isometry's truncation boundary) are
/// detected and exempted automatically.
pub fn ito_unitary_pair(v1: &CMatrix, v2: &CMatrix, levels: usize) -> Result<AndoPair> {
    if !v1.is_square() || !v2.is_square() || v1.rows() != v2.rows() {
        return Err(DilationError::DimensionMismatch(
            "pair needs square operators on a common space".into(),
        ));
    }
    let dim = v1.rows();
    let interior = detect_isometric_interior(v1)?.min(detect_isometric_interior(v2)?);
    let mut certified = CMatrix::zeros(dim, interior);
    for i in 0..interior {
        certified.set(i, i, re(1.0));
    }
    let base_space = BlockSpace::h_only(dim)?;
    let out = ito_pair_core(v1, v2, levels, &base_space, &certified)?;
    let radius = out.space.slot_count().saturating_sub(1).max(1);
    let x = BlockOp::from_parts(out.space.clone(), out.x, radius)?;
    let y = BlockOp::from_parts(out.space, out.y, radius)?;
    Ok(AndoPair {
        x,
        y,
        g_unitary: out.g_unitary,
        intertwine_defect: out.intertwine_defect,
    })
}

/// Largest leading coordinate count on which V*V = I holds within
/// tolerance; everything after it must be a contiguous defective tail,
/// otherwise the operator is rejected as not an isometry.
pub(crate) fn detect_isometric_interior(v: &CMatrix) -> Result<usize> {
    let dim = v.rows();
    let gram = v.adjoint().mul(v)?;
    let delta = gram.sub(&CMatrix::identity(dim))?;
    let col_defect: Vec<f64> = (0..dim)
        .map(|j| {
            (0..dim)
                .map(|i| delta.get(i, j).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let tol = 1e-8;
    let mut interior = dim;
    while interior > 0 && col_defect[interior - 1] > tol {
        interior -= 1;
    }
    let worst_interior = col_defect[..interior].iter().fold(0.0f64, |a, &b| a.max(b));
    if worst_interior > tol {
        return Err(DilationError::NotIsometry(worst_interior));
    }
    if interior == 0 {
        return Err(DilationError::NotIsometry(col_defect[0]));
    }
    Ok(interior)
}

pub(crate) fn ito_pair_core(
    v1: &CMatrix,
    v2: &CMatrix,
    levels: usize,
    base_space: &BlockSpace,
    base_certified: &CMatrix,
) -> Result<PairOut> {
    let dim = v1.rows();
    // commutation on the certified base
    let comm = v1.mul(v2)?.sub(&v2.mul(v1)?)?;
    let comm_proj = base_certified.adjoint().mul(&comm)?.mul(base_certified)?;
    let comm_norm = spectral_norm(&comm_proj);
    if comm_norm > 1e-8 {
        return Err(DilationError::NotCommuting(comm_norm));
    }

    let product = v1.mul(v2)?;
    let adj = product.adjoint(); // (V1 V2)* = V2* V1*, the toward direction
    // new directions per level span the full coker(V1 V2); restricting
    // to certified directions would drop the preimages that keep the
    // extension surjective on the window
    let coker_defect = CMatrix::identity(dim).sub(&product.mul(&product.adjoint())?)?;
    let cands = crate::orbit::cokernel_candidates(&coker_defect, &CMatrix::identity(dim), 1e-7)?;

    if cands.cols() == 0 || levels == 0 {
        // both operators already unitary on the window: the limit collapses
        return Ok(PairOut {
            x: v1.clone(),
            y: v2.clone(),
            space: base_space.clone(),
            certified_dim: base_certified.cols(),
            g_unitary: CMatrix::identity(1),
            intertwine_defect: 0.0,
        });
    }

    let sys = ClassSystem::new(adj, &cands, levels)?;
    let gram = sys.gram()?;
    let levels_sizes = sys.level_sizes();
    let piv = crate::orthonorm::pivoted_leveled(&gram, &levels_sizes, 1e-9)?;
    let r = piv.rank;
    let coeff = &piv.coefficients;

    // operators assembled purely from Gram data: U_i maps (n, h) to
    // (n, V_i h), a class again within the truncation
    let g1 = sys.image_gram(v1)?;
    let g2 = sys.image_gram(v2)?;
    let u1 = coeff.adjoint().mul(&g1)?.mul(coeff)?;
    let u2 = coeff.adjoint().mul(&g2)?.mul(coeff)?;

    // class space: base slots, then one slot per populated level
    let mut slots = base_space.slots().to_vec();
    let mut certified_dim = dim;
    let mut placed = dim;
    for (lvl, &rank) in piv.level_ranks.iter().enumerate().skip(1) {
        if rank == 0 {
            continue;
        }
        slots.push(Slot::new(format!("q{lvl}"), rank));
        placed += rank;
        if lvl + 1 < piv.level_ranks.len() {
            certified_dim = placed;
        }
    }
    debug_assert_eq!(placed, r);
    let space = BlockSpace::new(slots, base_space.h_slots().to_vec())?;

    Ok(PairOut {
        x: u1,
        y: u2,
        space,
        certified_dim,
        g_unitary: CMatrix::identity(1),
        intertwine_defect: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::windowed_coisometry_defect;

    fn h_col(m: &CMatrix, d: usize) -> CMatrix {
        m.block(0, 0, m.rows(), d)
    }

    #[test]
    fn ando_zero_pair_swaps_third_and_fourth_components() {
        // A = B = 0 on C^1: x(h) = (0,0,0,h), y(h) = (0,0,h,0); G swaps
        // the third and fourth components of the pair space
        let z = CMatrix::scalar(1, re(0.0));
        let pair = ando_coisometric_pair(&z, &z, 6).unwrap();
        let g = &pair.g_unitary;
        assert!((g.get(2, 3).re - 1.0).abs() < 1e-12);
        assert!((g.get(3, 2).re - 1.0).abs() < 1e-12);
        assert!((g.get(0, 0).re - 1.0).abs() < 1e-12);
        assert!(pair.intertwine_defect < 1e-12);
        // both extend 0 and are co-isometric on the window
        let w = pair.x.space().prefix_dim(pair.x.exact_radius());
        assert!(windowed_coisometry_defect(pair.x.matrix(), w) < 1e-10);
        assert_eq!(pair.x.matrix().get(0, 0), re(0.0));
    }

    #[test]
    fn ando_unitary_pair_has_identity_g() {
        let u = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pair = ando_coisometric_pair(&u, &u, 6).unwrap();
        assert!(pair.g_unitary.distance(&CMatrix::identity(8)).unwrap() < 1e-7);
        // extension blocks are exact
        assert!(h_col(pair.x.matrix(), 2).block(0, 0, 2, 2).distance(&u).unwrap() < 1e-12);
        assert!(h_col(pair.y.matrix(), 2).block(0, 0, 2, 2).distance(&u).unwrap() < 1e-12);
    }

    #[test]
    fn ando_scalar_pair_invariants() {
        let a = CMatrix::scalar(1, re(0.5));
        let b = CMatrix::scalar(1, re(0.3));
        let pair = ando_coisometric_pair(&a, &b, 10).unwrap();
        // extension residual
        assert!((pair.x.matrix().get(0, 0).re - 0.5).abs() < 1e-12);
        assert!((pair.y.matrix().get(0, 0).re - 0.3).abs() < 1e-12);
        for j in 1..pair.x.dim() {
            assert!(pair.x.matrix().get(j, 0).norm() < 2.0); // defect rows may be nonzero
        }
        // H-columns below H vanish beyond the defect slot structure:
        // X h = A h exactly means column 0 has only row 0 nonzero
        for m in [pair.x.matrix(), pair.y.matrix()] {
            for i in 1..m.rows() {
                assert!(m.get(i, 0).norm() < 1e-12, "H column leak at row {i}");
            }
        }
        // co-isometry and commutation on the window
        let w = pair.x.space().prefix_dim(pair.x.exact_radius());
        assert!(crate::kernels::windowed_coisometry_defect(pair.x.matrix(), w) < 1e-8);
        assert!(crate::kernels::windowed_coisometry_defect(pair.y.matrix(), w) < 1e-8);
        let (comm, _) = BlockOp::commutator_defect(&pair.x, &pair.y).unwrap();
        assert!(comm < 1e-8, "commutator {comm}");
        assert!(pair.intertwine_defect < 1e-10);
    }

    #[test]
    fn ando_gram_precondition_of_g() {
        // <x(h), x(g)> = <y(h), y(g)> = <h,g> - <T1 T2 h, T1 T2 g>
        let a = CMatrix::from_real_rows(&[vec![0.5, 0.2], vec![0.0, 0.4]]).unwrap();
        let b = a.mul(&a).unwrap().scale(re(0.9)); // commutes with a
        let d = 2;
        let t1 = a.adjoint();
        let t2 = b.adjoint();
        let d1 = defect(&t1).unwrap();
        let d2 = defect(&t2).unwrap();
        let d1t2 = d1.mul(&t2).unwrap();
        let d2t1 = d2.mul(&t1).unwrap();
        let mut xfam = CMatrix::zeros(4 * d, d);
        xfam.set_block(0, 0, &d1t2);
        xfam.set_block(3 * d, 0, &d2);
        let mut yfam = CMatrix::zeros(4 * d, d);
        yfam.set_block(d, 0, &d2t1);
        yfam.set_block(2 * d, 0, &d1);
        let gx = xfam.adjoint().mul(&xfam).unwrap();
        let gy = yfam.adjoint().mul(&yfam).unwrap();
        let t12 = t1.mul(&t2).unwrap();
        let expect = CMatrix::identity(d)
            .sub(&t12.adjoint().mul(&t12).unwrap())
            .unwrap();
        assert!(gx.distance(&expect).unwrap() < 1e-10);
        assert!(gy.distance(&expect).unwrap() < 1e-10);
        let cross = xfam.adjoint().mul(&yfam).unwrap();
        assert!(cross.max_abs() < 1e-14);
    }

    #[test]
    fn ando_rejects_non_commuting() {
        let x = CMatrix::from_real_rows(&[vec![0.0, 0.9], vec![0.9, 0.0]]).unwrap();
        let z = CMatrix::from_real_rows(&[vec![0.9, 0.0], vec![0.0, -0.9]]).unwrap();
        assert!(matches!(
            ando_coisometric_pair(&x, &z, 6),
            Err(DilationError::NotCommuting(_))
        ));
    }

    #[test]
    fn ito_identity_collapses() {
        let id = CMatrix::identity(3);
        let pair = ito_unitary_pair(&id, &id, 5).unwrap();
        assert_eq!(pair.x.dim(), 3);
        assert!(pair.x.matrix().distance(&id).unwrap() < 1e-14);
        assert!(pair.y.matrix().distance(&id).unwrap() < 1e-14);
    }

    #[test]
    fn ito_commuting_unitaries_collapse() {
        let u = CMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let w = CMatrix::from_real_rows(&[vec![-1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // u and w anticommute; use powers of one unitary instead
        let pair = ito_unitary_pair(&u, &CMatrix::identity(2), 4).unwrap();
        assert!(pair.x.matrix().distance(&u).unwrap() < 1e-12);
        let _ = w;
    }

    #[test]
    fn ito_shift_truncation_extends_to_window_unitaries() {
        // unilateral shift truncation on C^4: boundary column detected
        let n = 4;
        let mut s = CMatrix::zeros(n, n);
        for i in 0..n - 1 {
            s.set(i + 1, i, re(1.0));
        }
        let pair = ito_unitary_pair(&s, &s, 6).unwrap();
        let dim = pair.x.dim();
        assert!(dim > n, "space must grow, got {dim}");
        // extension on the interior columns of the base
        for j in 0..n - 1 {
            for i in 0..n {
                let expect = s.get(i, j);
                assert!(
                    (pair.x.matrix().get(i, j) - expect).norm() < 1e-10,
                    "extension mismatch at ({i},{j})"
                );
            }
            for i in n..dim {
                // nothing leaks below the base on interior columns except
                // through the added unitary completion levels
                let _ = i;
            }
        }
        // commutation is exact at matrix level on the window
        let (comm, _) = BlockOp::commutator_defect(&pair.x, &pair.y).unwrap();
        assert!(comm < 1e-10, "commutator {comm}");
        // unitary on the certified region: interior base columns plus
        // the added levels below the boundary
        let mut keep: Vec<usize> = (0..n - 1).collect();
        let w = pair.x.space().prefix_dim(pair.x.exact_radius());
        keep.extend(n..w);
        let f = {
            let mut f = CMatrix::zeros(dim, keep.len());
            for (k, &i) in keep.iter().enumerate() {
                f.set(i, k, re(1.0));
            }
            f
        };
        let gram = pair.x.matrix().adjoint().mul(pair.x.matrix()).unwrap();
        let compressed = f.adjoint().mul(&gram).unwrap().mul(&f).unwrap();
        let defect = crate::kernels::spectral_norm(
            &compressed.sub(&CMatrix::identity(keep.len())).unwrap(),
        );
        assert!(defect < 1e-8, "certified isometry defect {defect}");
    }

    #[test]
    fn ito_pair_product_lowers_level() {
        // U1 U2 = U2 U1 must hold exactly within the window
        let n = 3;
        let mut s = CMatrix::zeros(n, n);
        for i in 0..n - 1 {
            s.set(i + 1, i, re(1.0));
        }
        let pair = ito_unitary_pair(&s, &s, 5).unwrap();
        let p12 = pair.x.matrix().mul(pair.y.matrix()).unwrap();
        let p21 = pair.y.matrix().mul(pair.x.matrix()).unwrap();
        let w = pair.x.space().prefix_dim(pair.x.exact_radius());
        assert!(p12.block(0, 0, w, w).distance(&p21.block(0, 0, w, w)).unwrap() < 1e-10);
    }
}

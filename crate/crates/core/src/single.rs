//! Machinery for a single contraction: the Schäffer-style minimal
//! co-isometric extension, minimal-part extraction and matching, and the
//! two-step unitary dilation.
//!
//! The extension of a contraction A lives on H plus a chain of H-sized
//! tail slots. Writing D for the defect (I - A A*)^(1/2) of the adjoint,
//! the isometry V(h, k1, k2, ...) = (A*h, Dh, k1, ...) is truncated at
//! `depth` tail slots; W = V* is then a co-isometric extension of A:
//! exact on all slots but the last, and equal to A on H by construction.

use crate::block::BlockOp;
use crate::cmatrix::{re, CMatrix};
use crate::error::{DilationError, Result};
use crate::kernels::{psd_sqrt, spectral_norm};
use crate::orthonorm::{complement_basis, pivoted_leveled, RANK_TOL};
use crate::space::{BlockSpace, Slot};

/// Defect operator (I - T*T)^(1/2) of a contraction.
pub fn defect(t: &CMatrix) -> Result<CMatrix> {
    if !t.is_square() {
        return Err(DilationError::DimensionMismatch(
            "defect needs a square operator".into(),
        ));
    }
    let norm = spectral_norm(t);
    if norm > 1.0 + 1e-8 {
        return Err(DilationError::NotContraction(norm - 1.0));
    }
    let gram = t.adjoint().mul(t)?;
    let arg = CMatrix::identity(t.rows()).sub(&gram)?;
    psd_sqrt(&arg)
}

/// How an extension was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Schaffer,
    Restricted,
    Composed,
}

/// A co-isometric extension or unitary dilation together with the
/// identification of H inside its space.
#[derive(Debug, Clone)]
pub struct ExtensionResult {
    pub op: BlockOp,
    /// H occupies the leading `h_dim` coordinates.
    pub h_dim: usize,
    pub provenance: Provenance,
}

/// Minimal co-isometric extension of a contraction, truncated at `depth`
/// tail slots. The result extends A exactly on H and satisfies WW* = I
/// on every slot but the last.
pub fn min_coisometric_extension(a: &CMatrix, depth: usize) -> Result<ExtensionResult> {
    if !a.is_square() {
        return Err(DilationError::DimensionMismatch(
            "extension needs a square operator".into(),
        ));
    }
    if depth == 0 {
        return Err(DilationError::BadDimension("depth must be at least 1".into()));
    }
    let d = a.rows();
    let dstar = defect(&a.adjoint())?; // (I - A A*)^(1/2), Hermitian
    let mut slots = vec![Slot::new("H", d)];
    for k in 1..=depth {
        slots.push(Slot::new(format!("t{k}"), d));
    }
    let space = BlockSpace::new(slots, vec!["H".to_string()])?;
    let n = space.total_dim();
    let mut m = CMatrix::zeros(n, n);
    // W(h, k1, ..., kN) = (A h + D k1, k2, ..., kN, 0)
    m.set_block(0, 0, a);
    m.set_block(0, d, &dstar);
    for k in 1..depth {
        for i in 0..d {
            m.set(k * d + i, (k + 1) * d + i, re(1.0));
        }
    }
    // every stored entry is exact, but identity checks compressed to a
    // window that includes the final slot would see the truncation
    // defect, so the declared window stops one slot short
    let op = BlockOp::from_parts(space, m, depth)?;
    Ok(ExtensionResult { op, h_dim: d, provenance: Provenance::Schaffer })
}

/// Gram matrix of the adjoint orbit {W*^n e_i} of any co-isometric
/// extension W of A, indexed level-major by (n, i) for n <= n_max.
/// Depends on A only: <W*^n h, W*^m g> = <h, A^(n-m) g> for n >= m.
pub fn orbit_gram(a: &CMatrix, n_max: usize) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(DilationError::DimensionMismatch(
            "orbit Gram needs a square operator".into(),
        ));
    }
    let norm = spectral_norm(a);
    if norm > 1.0 + 1e-8 {
        return Err(DilationError::NotContraction(norm - 1.0));
    }
    let d = a.rows();
    let mut powers = Vec::with_capacity(n_max + 1);
    powers.push(CMatrix::identity(d));
    for _ in 0..n_max {
        let next = a.mul(powers.last().unwrap())?;
        powers.push(next);
    }
    let size = (n_max + 1) * d;
    let mut gram = CMatrix::zeros(size, size);
    for n in 0..=n_max {
        for mm in 0..=n {
            let p = &powers[n - mm]; // <W*^n e_i, W*^m e_j> = <e_i, A^(n-m) e_j>
            for i in 0..d {
                for j in 0..d {
                    let v = p.get(i, j);
                    gram.set(n * d + i, mm * d + j, v);
                    if n != mm {
                        gram.set(mm * d + j, n * d + i, v.conj());
                    }
                }
            }
        }
    }
    Ok(gram)
}

/// Adjoint orbit of the leading `base_dim` coordinates under W*, as
/// columns ordered level-major: (W*)^n e_i for n = 0..=orbit_depth.
pub(crate) fn orbit_vectors(w: &CMatrix, base_dim: usize, orbit_depth: usize) -> Result<CMatrix> {
    let dim = w.rows();
    let mut cols = CMatrix::zeros(dim, (orbit_depth + 1) * base_dim);
    let mut current = CMatrix::zeros(dim, base_dim);
    for i in 0..base_dim {
        current.set(i, i, re(1.0));
    }
    let wadj = w.adjoint();
    for n in 0..=orbit_depth {
        cols.set_block(0, n * base_dim, &current);
        if n < orbit_depth {
            current = wadj.mul(&current)?;
        }
    }
    Ok(cols)
}

/// Restriction of a co-isometric extension to the truncated span of the
/// adjoint orbit of H, plus the complementary summand.
#[derive(Debug, Clone)]
pub struct MinimalPart {
    /// Orthonormal columns spanning the truncated minimal subspace.
    pub basis: CMatrix,
    /// New orbit directions accepted per level.
    pub level_ranks: Vec<usize>,
    /// W restricted to the minimal subspace, in the orbit basis.
    pub restricted_op: CMatrix,
    /// Orthonormal basis of the complement.
    pub complement: CMatrix,
    /// W restricted to the complement.
    pub complement_op: CMatrix,
    /// Norm of the off-diagonal blocks of W in this decomposition,
    /// measured on the certified part of the window.
    pub reduce_defect: f64,
}

const GRAM_CHECK_TOL: f64 = 1e-7;

/// Compute the minimal part of a co-isometric extension `w` of `a`.
/// The orbit basis is Gram-determined: pivoting runs on `orbit_gram(a)`
/// level by level, so any two extensions of the same `a` decompose with
/// identical coefficients.
pub fn minimal_part(w: &BlockOp, a: &CMatrix, orbit_depth: usize) -> Result<MinimalPart> {
    let d = a.rows();
    let h_idx = w.space().h_indices();
    if h_idx.len() != d || h_idx.iter().enumerate().any(|(i, &x)| i != x) {
        return Err(DilationError::BadEmbedding(
            "minimal part expects H embedded as the leading coordinates".into(),
        ));
    }
    let max_depth = w.exact_radius().saturating_sub(w.band().max(1));
    if orbit_depth.saturating_mul(w.band().max(1)) + w.band().max(1) > w.exact_radius()
        && orbit_depth > max_depth
    {
        return Err(DilationError::WindowExhausted(format!(
            "orbit depth {} too deep for window {} at band {}",
            orbit_depth,
            w.exact_radius(),
            w.band()
        )));
    }
    let co = crate::kernels::windowed_coisometry_defect(
        w.matrix(),
        w.space().prefix_dim(w.exact_radius()),
    );
    if co > 1e-6 {
        return Err(DilationError::NotCoisometry(co));
    }
    split_by_orbit(w.matrix(), a, d, orbit_depth)
}

/// Orbit split in plain matrix coordinates; shared by the public
/// `minimal_part` and the engine internals.
pub(crate) fn split_by_orbit(
    w: &CMatrix,
    a: &CMatrix,
    base_dim: usize,
    orbit_depth: usize,
) -> Result<MinimalPart> {
    let gram = orbit_gram(a, orbit_depth)?;
    let vectors = orbit_vectors(w, base_dim, orbit_depth)?;
    // the computed orbit must realize the abstract Gram, otherwise w is
    // not actually an extension of a
    let realized = vectors.adjoint().mul(&vectors)?;
    let gap = realized.sub(&gram)?.max_abs();
    if gap > GRAM_CHECK_TOL {
        return Err(DilationError::GramMismatch { defect: gap, tol: GRAM_CHECK_TOL });
    }
    let levels = vec![base_dim; orbit_depth + 1];
    let piv = pivoted_leveled(&gram, &levels, RANK_TOL)?;
    let basis = vectors.mul(&piv.coefficients)?;
    let complement = complement_basis(&basis)?;
    let restricted_op = basis.adjoint().mul(w)?.mul(&basis)?;
    let complement_op = complement.adjoint().mul(w)?.mul(&complement)?;

    // off-diagonal blocks, certified part only: drop the deepest orbit
    // level (rows there may see the truncation boundary)
    let r = piv.rank;
    let last = *piv.level_ranks.last().unwrap_or(&0);
    let certified = r - last;
    let wb = w.mul(&basis)?;
    let lower = complement.adjoint().mul(&wb)?; // complement <- orbit
    let upper = basis.adjoint().mul(w)?.mul(&complement)?; // orbit <- complement
    let lower_cert = lower.block(0, 0, lower.rows(), certified.min(lower.cols()));
    let upper_cert = upper.block(0, 0, certified.min(upper.rows()), upper.cols());
    let reduce_defect = spectral_norm(&lower_cert).max(spectral_norm(&upper_cert));

    Ok(MinimalPart {
        basis,
        level_ranks: piv.level_ranks,
        restricted_op,
        complement,
        complement_op,
        reduce_defect,
    })
}

/// Unitary matching of two minimal parts: returns the unitary from the
/// truncated minimal subspace of `w2` onto the one of `w1`, mapping
/// W2*^n h to W1*^n h and restricting to the identity on H. Both sides
/// are orthonormalized with one shared run on `orbit_gram(a)`, so the
/// map is well defined even with rank-deficient orbits.
pub fn match_minimal_parts(
    w1: &BlockOp,
    w2: &BlockOp,
    a: &CMatrix,
    orbit_depth: usize,
) -> Result<CMatrix> {
    let d = a.rows();
    let gram = orbit_gram(a, orbit_depth)?;
    let o1 = orbit_vectors(w1.matrix(), d, orbit_depth)?;
    let o2 = orbit_vectors(w2.matrix(), d, orbit_depth)?;
    for o in [&o1, &o2] {
        let realized = o.adjoint().mul(o)?;
        let gap = realized.sub(&gram)?.max_abs();
        if gap > GRAM_CHECK_TOL {
            return Err(DilationError::GramMismatch { defect: gap, tol: GRAM_CHECK_TOL });
        }
    }
    let levels = vec![d; orbit_depth + 1];
    let piv = pivoted_leveled(&gram, &levels, RANK_TOL)?;
    let b1 = o1.mul(&piv.coefficients)?;
    let b2 = o2.mul(&piv.coefficients)?;
    b1.mul(&b2.adjoint())
}

/// Sz.-Nagy style unitary dilation of a contraction, realized in two
/// steps: a co-isometric extension of T*, then a unitary extension of
/// the resulting window isometry X*. The output is unitary on the
/// window and satisfies P U^n |_H = T^n for all n within it.
pub fn unitary_dilation_single(t: &CMatrix, depth: usize) -> Result<ExtensionResult> {
    let ext = min_coisometric_extension(&t.adjoint(), depth)?;
    let x = ext.op; // co-isometric extension of T*, so X* has H-row [T, 0]
    let v = x.matrix().adjoint(); // isometry on the window
    let boundary = t.rows(); // columns over the final slot carry the truncation defect
    let unit = unitary_extension_of_isometry(&v, depth, x.space().clone(), boundary)?;
    Ok(ExtensionResult { op: unit.op, h_dim: t.rows(), provenance: Provenance::Composed })
}

/// Unitary extension of a window isometry V: the space grows by
/// `levels` copies of coker(V) and
/// U(h, t1, t2, ...) = (V h + J t1, t2, ..., t_levels, 0), where J
/// embeds the tail fiber isometrically onto coker(V). The base row gives
/// UU* = VV* + JJ* = I exactly; the defect of U sits at the final tail
/// slot only. This realizes the minimal part of a co-isometric extension
/// of the adjoint directly in defect-compressed coordinates; it is the
/// base case of the unitary induction.
///
/// `boundary_dims` trailing coordinates are exempt from the isometry
/// check: a window isometry carries its truncation defect there.
pub(crate) struct IsometryExtension {
    pub op: BlockOp,
    pub fiber_dim: usize,
    /// Leading fiber directions that are genuine cokernel copies; the
    /// rest mix with boundary junk.
    pub clean_fiber: usize,
}

pub(crate) fn unitary_extension_of_isometry(
    v: &CMatrix,
    levels: usize,
    base_space: BlockSpace,
    boundary_dims: usize,
) -> Result<IsometryExtension> {
    let dim = v.rows();
    let interior = dim.saturating_sub(boundary_dims);
    let gram = v.adjoint().mul(v)?;
    let interior_defect = spectral_norm(
        &gram
            .block(0, 0, interior, interior)
            .sub(&CMatrix::identity(interior))?,
    );
    if interior_defect > 1e-6 {
        return Err(DilationError::NotIsometry(interior_defect));
    }
    // The tail fiber embeds through a spectral factor J of I - V V*, so
    // that V V* + J J* = I holds exactly and the extension is exactly
    // co-isometric on the base row even when V carries boundary junk.
    // Directions with eigenvalue 1 are the genuine cokernel (J acts
    // isometrically there); smaller eigenvalues are boundary artifacts
    // and their fiber copies are left out of certified subspaces.
    let vv = v.mul(&v.adjoint())?;
    let defect_op = CMatrix::identity(dim).sub(&vv)?;
    let eig = crate::kernels::hermitian_eigen(
        &defect_op.add(&defect_op.adjoint())?.scale(re(0.5)),
    )?;
    let mut picked: Vec<(f64, usize)> = eig
        .values
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, l)| l > 1e-12)
        .map(|(i, l)| (l, i))
        .collect();
    // genuine cokernel first (eigenvalues descending)
    picked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let c = picked.len();
    let mut coker = CMatrix::zeros(dim, c);
    let mut clean = 0usize;
    for (k, &(l, idx)) in picked.iter().enumerate() {
        let w = l.sqrt();
        for i in 0..dim {
            coker.set(i, k, eig.vectors.get(i, idx) * re(w));
        }
        if (l - 1.0).abs() <= 1e-9 && clean == k {
            clean += 1;
        }
    }
    if c == 0 || levels == 0 {
        // V is already unitary on the window: nothing to add
        let radius = base_space.slot_count();
        let op = BlockOp::from_parts(base_space, v.clone(), radius)?;
        return Ok(IsometryExtension { op, fiber_dim: 0, clean_fiber: 0 });
    }
    let mut slots = base_space.slots().to_vec();
    for k in 1..=levels {
        slots.push(Slot::new(format!("u{k}"), c));
    }
    let space = BlockSpace::new(slots, base_space.h_slots().to_vec())?;
    let n = space.total_dim();
    let mut m = CMatrix::zeros(n, n);
    m.set_block(0, 0, v);
    m.set_block(0, dim, &coker); // J maps the first tail fiber onto coker(V)
    for k in 1..levels {
        for i in 0..c {
            m.set(dim + (k - 1) * c + i, dim + k * c + i, re(1.0));
        }
    }
    // the certified prefix must stop before the base's own boundary
    // slot: a window isometry keeps its truncation defect there, and a
    // coordinate prefix cannot skip past it to reach the fibers
    let h_end = space
        .h_slot_indices()
        .into_iter()
        .max()
        .map_or(1, |k| k + 1);
    let radius = base_space.slot_count().saturating_sub(1).max(h_end);
    let op = BlockOp::from_parts(space, m, radius)?;
    Ok(IsometryExtension { op, fiber_dim: c, clean_fiber: clean })
}

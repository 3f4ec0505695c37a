//! Internal orbit machinery: abstract class Grams for adjoint orbits,
//! their ambient realizations, and Gram-determined level-blocked splits.
//!
//! For any co-isometric (or window-unitary) extension W of a base
//! operator A, the adjoint orbit satisfies
//! <W*^n x, W*^m y> = <x, A^(n-m) y> for n >= m. All Gram entries are
//! computed through chains of A* applications (the direction that maps
//! certified content toward the base), never through powers of A applied
//! to vectors, so entries stay exact however deep the level index runs.

use crate::cmatrix::{C64, CMatrix};
use crate::error::{DilationError, Result};
use crate::orthonorm::{pivoted_leveled, PivotedBasis};

/// Candidate system for a truncated adjoint orbit: level 0 carries the
/// full base (identity columns), levels 1..=depth carry the `cands`
/// columns (base coordinates). For small bases `cands` is simply the
/// identity again; for large bases it is a spanning set of the new
/// directions per level (a cokernel basis), which the pivoting prunes.
pub(crate) struct ClassSystem {
    pub base_dim: usize,
    pub depth: usize,
    pub all: CMatrix,
    extra: usize,
    /// chains[k] = (A*)^k applied to `cands`.
    chains: Vec<CMatrix>,
    adj: CMatrix,
    p0: CMatrix,
}

impl ClassSystem {
    /// `adj` is the matrix of A*; `cands` the per-level candidate
    /// vectors in base coordinates.
    pub fn new(adj: CMatrix, cands: &CMatrix, depth: usize) -> Result<Self> {
        let base_dim = adj.rows();
        if !adj.is_square() || cands.rows() != base_dim {
            return Err(DilationError::DimensionMismatch(
                "candidate vectors must live on the base space".into(),
            ));
        }
        let mut all = CMatrix::zeros(base_dim, base_dim + cands.cols());
        for i in 0..base_dim {
            all.set(i, i, crate::cmatrix::re(1.0));
        }
        all.set_block(0, base_dim, cands);
        let mut chains = Vec::with_capacity(depth + 1);
        chains.push(cands.clone());
        for _ in 0..depth {
            let next = adj.mul(chains.last().unwrap())?;
            chains.push(next);
        }
        let p0 = all.adjoint().mul(&all)?;
        Ok(ClassSystem { base_dim, depth, all, extra: cands.cols(), chains, adj, p0 })
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut v = vec![self.base_dim];
        v.extend(std::iter::repeat(self.extra).take(self.depth));
        v
    }

    pub fn n_cands(&self) -> usize {
        self.base_dim + self.depth * self.extra
    }

    /// Global candidate index of (level, i).
    fn index(&self, level: usize, i: usize) -> usize {
        if level == 0 {
            i
        } else {
            self.base_dim + (level - 1) * self.extra + i
        }
    }

    /// Column of `all` realizing candidate (level, i) in base coords.
    fn all_col(&self, level: usize, i: usize) -> usize {
        if level == 0 {
            i
        } else {
            self.base_dim + i
        }
    }

    fn level_size(&self, level: usize) -> usize {
        if level == 0 {
            self.base_dim
        } else {
            self.extra
        }
    }

    /// Abstract Gram of the class family, level-major.
    pub fn gram(&self) -> Result<CMatrix> {
        let n = self.n_cands();
        let mut g = CMatrix::zeros(n, n);
        // precompute Z_k^H * all for the extra candidates
        let mut pk: Vec<CMatrix> = Vec::with_capacity(self.depth + 1);
        for k in 0..=self.depth {
            pk.push(self.chains[k].adjoint().mul(&self.all)?);
        }
        for lvl_n in 0..=self.depth {
            for lvl_m in 0..=lvl_n {
                let k = lvl_n - lvl_m;
                for i in 0..self.level_size(lvl_n) {
                    for j in 0..self.level_size(lvl_m) {
                        // <a_(n,i), A^k a_(m,j)> = ((A*)^k a_i)^H a_j
                        let v = if lvl_n == 0 {
                            self.p0.get(self.all_col(0, i), self.all_col(0, j))
                        } else {
                            pk[k].get(i, self.all_col(lvl_m, j))
                        };
                        let (gi, gj) = (self.index(lvl_n, i), self.index(lvl_m, j));
                        g.set(gi, gj, v);
                        if gi != gj {
                            g.set(gj, gi, v.conj());
                        }
                    }
                }
            }
        }
        Ok(g)
    }

    /// Gram between the class family and its image under the same-level
    /// map (n, x) -> (n, V x): entries <a_(m,p), (n, V a_(n,q))>.
    pub fn image_gram(&self, v: &CMatrix) -> Result<CMatrix> {
        let n = self.n_cands();
        let w = v.mul(&self.all)?; // V a_q for every candidate
        // toward-chains on the image columns
        let mut wchain: Vec<CMatrix> = Vec::with_capacity(self.depth + 1);
        wchain.push(w);
        for _ in 0..self.depth {
            let next = self.adj.mul(wchain.last().unwrap())?;
            wchain.push(next);
        }
        let mut g = CMatrix::zeros(n, n);
        // case m >= n: ((A*)^(m-n) a_p)^H (V a_q)
        let mut zh_w: Vec<CMatrix> = Vec::with_capacity(self.depth + 1);
        for k in 0..=self.depth {
            zh_w.push(self.chains[k].adjoint().mul(&wchain[0])?);
        }
        // case m < n: a_p^H ((A*)^(n-m) V a_q)
        let all_h_wk: Vec<CMatrix> = {
            let mut acc = Vec::with_capacity(self.depth + 1);
            for k in 0..=self.depth {
                acc.push(self.all.adjoint().mul(&wchain[k])?);
            }
            acc
        };
        for lvl_m in 0..=self.depth {
            for lvl_n in 0..=self.depth {
                for p in 0..self.level_size(lvl_m) {
                    for q in 0..self.level_size(lvl_n) {
                        let val: C64 = if lvl_m >= lvl_n {
                            let k = lvl_m - lvl_n;
                            if lvl_m == 0 {
                                all_h_wk[0].get(self.all_col(0, p), self.all_col(0, q))
                            } else {
                                zh_w[k].get(p, self.all_col(lvl_n, q))
                            }
                        } else {
                            let k = lvl_n - lvl_m;
                            all_h_wk[k].get(self.all_col(lvl_m, p), self.all_col(lvl_n, q))
                        };
                        g.set(self.index(lvl_m, p), self.index(lvl_n, q), val);
                    }
                }
            }
        }
        Ok(g)
    }
}

/// Ambient realization of the class family under repeated application of
/// the adjoint of `op`: column (n, i) is (op*)^n (embedded candidate i of
/// level n). The embedding places base coordinates first.
pub(crate) fn realize_orbit(
    op: &CMatrix,
    sys: &ClassSystem,
) -> Result<CMatrix> {
    let dim = op.rows();
    if dim < sys.base_dim {
        return Err(DilationError::DimensionMismatch(
            "ambient space smaller than base".into(),
        ));
    }
    let mut out = CMatrix::zeros(dim, sys.n_cands());
    // level 0: identity embedding of the base
    for i in 0..sys.base_dim {
        out.set(i, i, crate::cmatrix::re(1.0));
    }
    if sys.depth == 0 {
        return Ok(out);
    }
    // embed the extra candidates and walk the adjoint orbit
    let mut current = CMatrix::zeros(dim, sys.extra);
    current.set_block(0, 0, &sys.all.block(0, sys.base_dim, sys.base_dim, sys.extra));
    let adj = op.adjoint();
    for n in 1..=sys.depth {
        current = adj.mul(&current)?;
        out.set_block(0, sys.base_dim + (n - 1) * sys.extra, &current);
    }
    Ok(out)
}

/// How far a realized orbit may deviate from the abstract Gram before
/// the ambient operator is rejected as not extending the base operator.
pub(crate) const ORBIT_GRAM_TOL: f64 = 2e-7;

/// Validate a realized orbit against the abstract Gram on the entries
/// whose candidates both lie in the certified part of the base; window
/// operators are allowed to misrealize the orbit of boundary junk.
pub(crate) fn validate_orbit(
    realized: &CMatrix,
    gram: &CMatrix,
    cand_certified: &[bool],
) -> Result<()> {
    let fp = realized.adjoint().mul(realized)?;
    let delta = fp.sub(gram)?;
    let mut gap = 0.0f64;
    for i in 0..delta.rows() {
        if !cand_certified[i] {
            continue;
        }
        for j in 0..delta.cols() {
            if cand_certified[j] {
                gap = gap.max(delta.get(i, j).norm());
            }
        }
    }
    if gap > ORBIT_GRAM_TOL {
        if std::env::var("DILATIONS_DEBUG").is_ok() {
            let mut worst = (0usize, 0usize, 0.0f64);
            for i in 0..delta.rows() {
                for j in 0..delta.cols() {
                    if cand_certified[i] && cand_certified[j] && delta.get(i, j).norm() > worst.2 {
                        worst = (i, j, delta.get(i, j).norm());
                    }
                }
            }
            eprintln!(
                "orbit gram mismatch: worst entry ({}, {}) = {:.3e} of {} candidates",
                worst.0, worst.1, worst.2, delta.rows()
            );
            // profile: worst mismatch per level pair band
            let n = delta.rows();
            let mut per_tail = vec![0.0f64; 12];
            for i in 0..n {
                for j in 0..n {
                    if cand_certified[i] && cand_certified[j] {
                        let tail = ((n - 1 - i).min(n - 1 - j)).min(11);
                        per_tail[tail] = per_tail[tail].max(delta.get(i, j).norm());
                    }
                }
            }
            eprintln!("mismatch by distance-from-end: {:?}", per_tail);
        }
        return Err(DilationError::GramMismatch { defect: gap, tol: ORBIT_GRAM_TOL });
    }
    Ok(())
}

/// Certification mask for a class system's candidates: a candidate
/// counts as certified when it lies inside the certified subspace of
/// the base (its projection has norm near 1). Level-0 candidates are
/// coordinate vectors; deeper levels repeat the extra candidate block.
pub(crate) fn candidate_mask(sys: &ClassSystem, base_certified: &CMatrix) -> Vec<bool> {
    let mut mask = Vec::with_capacity(sys.n_cands());
    for i in 0..sys.base_dim {
        let row_norm: f64 = (0..base_certified.cols())
            .map(|j| base_certified.get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        mask.push(row_norm >= 1.0 - 1e-9);
    }
    let extras = sys.all.block(0, sys.base_dim, sys.base_dim, sys.all.cols() - sys.base_dim);
    let proj = base_certified.adjoint().mul(&extras).expect("shapes agree");
    let mut extra_mask = Vec::with_capacity(extras.cols());
    for j in 0..extras.cols() {
        let p: f64 = (0..proj.rows()).map(|i| proj.get(i, j).norm_sqr()).sum::<f64>().sqrt();
        let full: f64 = (0..extras.rows())
            .map(|i| extras.get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        extra_mask.push(p >= full * (1.0 - 1e-9));
    }
    for _ in 0..sys.depth {
        mask.extend(extra_mask.iter().copied());
    }
    mask
}

/// Level-blocked Gram-determined split of an orbit.
pub(crate) struct OrbitBasis {
    pub pivot: PivotedBasis,
    /// Ambient orthonormal basis columns, level-major.
    pub basis: CMatrix,
    /// Number of basis columns excluding the deepest level (the deepest
    /// level sees the truncation boundary and is left out of certified
    /// subspaces).
    pub certified_cols: usize,
}

pub(crate) fn orbit_basis(
    realized: &CMatrix,
    gram: &CMatrix,
    level_sizes: &[usize],
    rank_tol: f64,
) -> Result<OrbitBasis> {
    let pivot = pivoted_leveled(gram, level_sizes, rank_tol)?;
    let basis = realized.mul(&pivot.coefficients)?;
    let last = pivot.level_ranks.last().copied().unwrap_or(0);
    let certified_cols = pivot.rank - last;
    Ok(OrbitBasis { pivot, basis, certified_cols })
}

/// Spanning candidates for the per-level new directions of an orbit on a
/// large base: an orthonormal set spanning the range of `defect`
/// restricted to the certified subspace. `defect` should be I - A A* (or
/// I - ran-projector) of the base operator; its range on the certified
/// region spans everything a single adjoint application adds.
pub(crate) fn cokernel_candidates(
    defect: &CMatrix,
    certified: &CMatrix,
    rank_tol: f64,
) -> Result<CMatrix> {
    let projected = defect.mul(certified)?;
    let (piv, basis) = crate::orthonorm::pivoted_orthonormalize_vectors(&projected, rank_tol)?;
    let _ = piv;
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::re;
    use crate::single::{min_coisometric_extension, orbit_gram};

    #[test]
    fn class_gram_matches_orbit_gram_for_full_base() {
        let a = CMatrix::from_real_rows(&[vec![0.4, 0.2], vec![0.0, 0.5]]).unwrap();
        let sys = ClassSystem::new(a.adjoint(), &CMatrix::identity(2), 3).unwrap();
        let g = sys.gram().unwrap();
        let reference = orbit_gram(&a, 3).unwrap();
        assert!(g.distance(&reference).unwrap() < 1e-13);
    }

    #[test]
    fn realized_schaffer_orbit_validates() {
        let a = CMatrix::from_real_rows(&[vec![0.4, 0.1], vec![0.1, 0.3]]).unwrap();
        let ext = min_coisometric_extension(&a, 8).unwrap();
        let sys = ClassSystem::new(a.adjoint(), &CMatrix::identity(2), 4).unwrap();
        let gram = sys.gram().unwrap();
        let realized = realize_orbit(ext.op.matrix(), &sys).unwrap();
        validate_orbit(&realized, &gram, &vec![true; sys.n_cands()]).unwrap();
        let split = orbit_basis(&realized, &gram, &sys.level_sizes(), 1e-9).unwrap();
        // basis columns orthonormal
        let check = split.basis.adjoint().mul(&split.basis).unwrap();
        assert!(
            check
                .distance(&CMatrix::identity(split.pivot.rank))
                .unwrap()
                < 1e-10
        );
        // level 0 embeds the base identically
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((split.basis.get(i, j) - re(expect)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mismatched_operator_fails_validation() {
        let a = CMatrix::scalar(1, re(0.5));
        let wrong = CMatrix::scalar(1, re(0.9));
        let ext = min_coisometric_extension(&wrong, 6).unwrap();
        let sys = ClassSystem::new(a.adjoint(), &CMatrix::identity(1), 3).unwrap();
        let gram = sys.gram().unwrap();
        let realized = realize_orbit(ext.op.matrix(), &sys).unwrap();
        assert!(validate_orbit(&realized, &gram, &vec![true; sys.n_cands()]).is_err());
    }
}

//! Operators on block spaces with band-width and exactness-window
//! metadata.
//!
//! Truncations of infinite block operators are trustworthy only on a
//! window: `exact_radius` counts the leading slots whose matrix entries
//! agree with the untruncated construction. Banded operators propagate
//! information at most `band` slots per factor, so composition shrinks
//! the window by the larger band. Defect measurements restrict to the
//! declared window before taking norms.

use crate::cmatrix::CMatrix;
use crate::error::{DilationError, Result};
use crate::kernels::{classify, spectral_norm, OperatorClass};
use crate::space::BlockSpace;

/// Operator on a `BlockSpace`.
#[derive(Debug, Clone)]
pub struct BlockOp {
    space: BlockSpace,
    matrix: CMatrix,
    band: usize,
    exact_radius: usize,
}

/// Entries below this magnitude do not count as occupying a block.
const BAND_THRESH: f64 = 1e-12;

impl BlockOp {
    /// Wrap a matrix with measured band and a declared exactness window.
    pub fn from_parts(space: BlockSpace, matrix: CMatrix, exact_radius: usize) -> Result<Self> {
        let n = space.total_dim();
        if matrix.rows() != n || matrix.cols() != n {
            return Err(DilationError::DimensionMismatch(format!(
                "matrix is {}x{}, space has dimension {}",
                matrix.rows(),
                matrix.cols(),
                n
            )));
        }
        if exact_radius > space.slot_count() {
            return Err(DilationError::WindowExhausted(format!(
                "exact radius {} exceeds slot count {}",
                exact_radius,
                space.slot_count()
            )));
        }
        let band = measured_band(&space, &matrix);
        Ok(BlockOp { space, matrix, band, exact_radius })
    }

    /// Wrap with an explicitly declared band; nonzero blocks must lie
    /// within it.
    pub fn with_band(
        space: BlockSpace,
        matrix: CMatrix,
        band: usize,
        exact_radius: usize,
    ) -> Result<Self> {
        let op = Self::from_parts(space, matrix, exact_radius)?;
        if op.band > band {
            return Err(DilationError::InconsistentDimensions(format!(
                "nonzero blocks reach distance {}, declared band {}",
                op.band, band
            )));
        }
        Ok(BlockOp { band, ..op })
    }

    pub fn identity(space: BlockSpace) -> Self {
        let n = space.total_dim();
        let e = space.slot_count();
        BlockOp { space, matrix: CMatrix::identity(n), band: 0, exact_radius: e }
    }

    /// Shift by one slot toward higher indices: output slot k holds the
    /// input's slot k-1. All slots must share one dimension. Cyclic mode
    /// wraps around and is exactly unitary; one-sided mode drops the last
    /// slot and is unitary except at the boundary.
    pub fn shift(space: BlockSpace, cyclic: bool) -> Result<Self> {
        let slots = space.slots();
        let d = slots[0].dim;
        if slots.iter().any(|s| s.dim != d) {
            return Err(DilationError::BadDimension(
                "shift needs equal slot dimensions".into(),
            ));
        }
        let count = slots.len();
        let n = space.total_dim();
        let mut m = CMatrix::zeros(n, n);
        for k in 1..count {
            for i in 0..d {
                m.set(k * d + i, (k - 1) * d + i, crate::cmatrix::re(1.0));
            }
        }
        if cyclic {
            // wrap-around block; a 1-cycle shift is the identity
            for i in 0..d {
                m.set(i, (count - 1) * d + i, crate::cmatrix::re(1.0));
            }
        }
        let band = if cyclic { count.saturating_sub(1).max(1) } else { 1 };
        Ok(BlockOp { space, matrix: m, band, exact_radius: count })
    }

    pub fn space(&self) -> &BlockSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn exact_radius(&self) -> usize {
        self.exact_radius
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// Adjoint on the same space; exactness is preserved entrywise.
    pub fn adjoint(&self) -> BlockOp {
        BlockOp {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
            band: self.band,
            exact_radius: self.exact_radius,
        }
    }

    /// Matrix restricted to the first `k` slots.
    pub fn prefix_matrix(&self, k: usize) -> CMatrix {
        let n = self.space.prefix_dim(k);
        self.matrix.block(0, 0, n, n)
    }

    /// Matrix restricted to the declared exactness window.
    pub fn window_matrix(&self) -> CMatrix {
        self.prefix_matrix(self.exact_radius)
    }

    /// Classify the operator on its exactness window. The defining
    /// identities are compressed to the window after forming the full
    /// products, so boundary couplings that the identities legitimately
    /// use are not dropped.
    pub fn classify_on_window(&self, tol: f64) -> Result<OperatorClass> {
        if self.exact_radius == 0 {
            return Err(DilationError::WindowExhausted(
                "no exact window to classify on".into(),
            ));
        }
        let w = self.space.prefix_dim(self.exact_radius);
        let iso = crate::kernels::windowed_isometry_defect(&self.matrix, w);
        let co = crate::kernels::windowed_coisometry_defect(&self.matrix, w);
        let norm = crate::kernels::spectral_norm(&self.window_matrix());
        let class = if iso <= tol && co <= tol {
            OperatorClass { kind: crate::kernels::OperatorKind::Unitary, defect: iso.max(co) }
        } else if iso <= tol {
            OperatorClass { kind: crate::kernels::OperatorKind::Isometry, defect: iso }
        } else if co <= tol {
            OperatorClass { kind: crate::kernels::OperatorKind::CoIsometry, defect: co }
        } else if norm <= 1.0 + tol {
            OperatorClass {
                kind: crate::kernels::OperatorKind::Contraction,
                defect: (norm - 1.0).max(0.0),
            }
        } else {
            OperatorClass { kind: crate::kernels::OperatorKind::None, defect: norm - 1.0 }
        };
        Ok(class)
    }

    /// Block-diagonal sum. Band is the maximum of the bands, the window
    /// the minimum over the summands.
    pub fn direct_sum(ops: &[&BlockOp]) -> Result<BlockOp> {
        if ops.is_empty() {
            return Err(DilationError::InconsistentDimensions(
                "direct sum of nothing".into(),
            ));
        }
        let spaces: Vec<&BlockSpace> = ops.iter().map(|o| o.space()).collect();
        let space = BlockSpace::concat(&spaces)?;
        let mats: Vec<&CMatrix> = ops.iter().map(|o| o.matrix()).collect();
        let matrix = CMatrix::block_diag(&mats);
        let band = ops.iter().map(|o| o.band).max().unwrap();
        let exact_radius = ops.iter().map(|o| o.exact_radius).min().unwrap();
        Ok(BlockOp { space, matrix, band, exact_radius })
    }

    /// Product on a shared space. The window shrinks by the larger band:
    /// entries inside the new radius provably equal the untruncated
    /// product because banded factors move information at most `band`
    /// slots.
    pub fn compose(x: &BlockOp, y: &BlockOp) -> Result<BlockOp> {
        if x.space != y.space {
            return Err(DilationError::SpaceMismatch);
        }
        let matrix = x.matrix.mul(&y.matrix)?;
        let cap = x.space.slot_count().saturating_sub(1);
        let band = (x.band + y.band).min(cap.max(x.band.max(y.band)));
        let exact_radius = x
            .exact_radius
            .min(y.exact_radius)
            .saturating_sub(x.band.max(y.band));
        Ok(BlockOp { space: x.space.clone(), matrix, band, exact_radius })
    }

    /// k-fold power via repeated composition.
    pub fn power(&self, k: usize) -> Result<BlockOp> {
        let mut acc = BlockOp::identity(self.space.clone());
        for _ in 0..k {
            acc = BlockOp::compose(self, &acc)?;
        }
        Ok(acc)
    }

    /// The H-corner of the matrix. Requires every H slot to lie inside
    /// the exactness window.
    pub fn compress_to_h(&self) -> Result<CMatrix> {
        let h_slots = self.space.h_slot_indices();
        if h_slots.is_empty() {
            return Err(DilationError::InconsistentDimensions(
                "space carries no H slots".into(),
            ));
        }
        if h_slots.iter().any(|&k| k >= self.exact_radius) {
            return Err(DilationError::WindowExhausted(format!(
                "H slots {:?} extend beyond exact radius {}",
                h_slots, self.exact_radius
            )));
        }
        let idx = self.space.h_indices();
        Ok(self.matrix.gather(&idx, &idx))
    }

    /// Operator norm of XY - YX on the common exact window of both
    /// products. Returns the defect and the window (in slots) used.
    pub fn commutator_defect(x: &BlockOp, y: &BlockOp) -> Result<(f64, usize)> {
        if x.space != y.space {
            return Err(DilationError::SpaceMismatch);
        }
        let xy = BlockOp::compose(x, y)?;
        let yx = BlockOp::compose(y, x)?;
        let window = xy.exact_radius.min(yx.exact_radius);
        if window == 0 {
            return Err(DilationError::WindowExhausted(
                "no common exact window for the commutator".into(),
            ));
        }
        let diff = xy.prefix_matrix(window).sub(&yx.prefix_matrix(window))?;
        Ok((spectral_norm(&diff), window))
    }

    /// Measured band of the stored matrix (for tests and reports).
    pub fn measured_band(&self) -> usize {
        measured_band(&self.space, &self.matrix)
    }
}

fn measured_band(space: &BlockSpace, matrix: &CMatrix) -> usize {
    let count = space.slot_count();
    let mut band = 0usize;
    for bi in 0..count {
        for bj in 0..count {
            let dist = bi.abs_diff(bj);
            if dist <= band {
                continue;
            }
            let (r0, c0) = (space.offset(bi), space.offset(bj));
            let (nr, nc) = (space.slots()[bi].dim, space.slots()[bj].dim);
            'scan: for i in 0..nr {
                for j in 0..nc {
                    if matrix.get(r0 + i, c0 + j).norm() > BAND_THRESH {
                        band = dist;
                        break 'scan;
                    }
                }
            }
        }
    }
    band
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmatrix::re;
    use crate::space::Slot;
    use crate::kernels::{OperatorKind, CLASSIFY_TOL};

    fn chain(dim: usize, count: usize) -> BlockSpace {
        BlockSpace::chain("s", dim, count, true).unwrap()
    }

    #[test]
    fn direct_sum_single_is_same_operator() {
        let id = BlockOp::identity(BlockSpace::h_only(2).unwrap());
        let s = BlockOp::direct_sum(&[&id]).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.matrix().distance(&CMatrix::identity(2)).unwrap() < 1e-15);
    }

    #[test]
    fn direct_sum_scalar_and_identity() {
        let a_space = BlockSpace::h_only(1).unwrap();
        let a = BlockOp::from_parts(
            a_space.clone(),
            CMatrix::scalar(1, re(0.5)),
            1,
        )
        .unwrap();
        let id = BlockOp::identity(BlockSpace::h_only(1).unwrap());
        let s = BlockOp::direct_sum(&[&a, &id]).unwrap();
        assert_eq!(s.matrix().get(0, 0), re(0.5));
        assert_eq!(s.matrix().get(1, 1), re(1.0));
        assert_eq!(s.matrix().get(0, 1), re(0.0));
    }

    #[test]
    fn shift_compose_doubles_band() {
        let s = BlockOp::shift(chain(1, 5), false).unwrap();
        assert_eq!(s.band(), 1);
        let s2 = BlockOp::compose(&s, &s).unwrap();
        assert_eq!(s2.band(), 2);
        assert_eq!(s2.measured_band(), 2);
        // content moved two slots toward higher indices
        assert_eq!(s2.matrix().get(2, 0), re(1.0));
        assert_eq!(s2.matrix().get(1, 0), re(0.0));
    }

    #[test]
    fn compose_identity_keeps_metadata_of_partner() {
        let s = BlockOp::shift(chain(2, 4), false).unwrap();
        let id = BlockOp::identity(s.space().clone());
        let c = BlockOp::compose(&id, &s).unwrap();
        assert!(c.matrix().distance(s.matrix()).unwrap() < 1e-15);
        assert_eq!(c.band(), 1);
        assert_eq!(c.exact_radius(), s.exact_radius().saturating_sub(1));
    }

    #[test]
    fn cyclic_shift_is_exactly_unitary() {
        let s = BlockOp::shift(chain(1, 4), true).unwrap();
        let m = s.matrix();
        let prod = m.mul(&m.adjoint()).unwrap();
        assert!(prod.distance(&CMatrix::identity(4)).unwrap() == 0.0);
        let class = s.classify_on_window(CLASSIFY_TOL).unwrap();
        assert_eq!(class.kind, OperatorKind::Unitary);
    }

    #[test]
    fn compress_identity_gives_identity_on_h() {
        let sp = chain(3, 4);
        let id = BlockOp::identity(sp);
        let h = id.compress_to_h().unwrap();
        assert!(h.distance(&CMatrix::identity(3)).unwrap() < 1e-15);
    }

    #[test]
    fn compress_without_window_is_refused() {
        let sp = chain(1, 3);
        let m = CMatrix::identity(3);
        let op = BlockOp::from_parts(sp, m, 0).unwrap();
        assert!(matches!(
            op.compress_to_h(),
            Err(DilationError::WindowExhausted(_))
        ));
    }

    #[test]
    fn commutator_of_op_with_itself_vanishes() {
        let s = BlockOp::shift(chain(2, 5), false).unwrap();
        let (defect, window) = BlockOp::commutator_defect(&s, &s).unwrap();
        assert_eq!(defect, 0.0);
        assert!(window >= 3);
    }

    #[test]
    fn commutator_of_diagonal_ops_vanishes() {
        let sp = chain(1, 4);
        let d1 = BlockOp::from_parts(
            sp.clone(),
            CMatrix::from_fn(4, 4, |i, j| {
                if i == j {
                    re(1.0 / (1.0 + i as f64))
                } else {
                    re(0.0)
                }
            }),
            4,
        )
        .unwrap();
        let d2 = BlockOp::from_parts(
            sp,
            CMatrix::from_fn(4, 4, |i, j| if i == j { re(i as f64) } else { re(0.0) }),
            4,
        )
        .unwrap();
        let (defect, _) = BlockOp::commutator_defect(&d1, &d2).unwrap();
        assert!(defect < 1e-15);
    }

    #[test]
    fn commutator_against_dense_oracle() {
        // shift against a non-circulant diagonal: defect equals the dense
        // commutator norm on the window
        let sp = chain(1, 6);
        let s = BlockOp::shift(sp.clone(), false).unwrap();
        let diag = CMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                re(0.1 * (i as f64) + 0.3)
            } else {
                re(0.0)
            }
        });
        let d = BlockOp::from_parts(sp, diag.clone(), 6).unwrap();
        let (defect, window) = BlockOp::commutator_defect(&s, &d).unwrap();
        let dense = s
            .matrix()
            .mul(&diag)
            .unwrap()
            .sub(&diag.mul(s.matrix()).unwrap())
            .unwrap();
        let n = window; // slot dim 1
        let dense_window = dense.block(0, 0, n, n);
        assert!((defect - spectral_norm(&dense_window)).abs() < 1e-12);
        assert!(defect > 0.0);
    }

    #[test]
    fn direct_sum_preserves_coisometry_exactly() {
        // backward-shift style co-isometry: adjoint of the one-sided shift
        let s = BlockOp::shift(chain(1, 4), false).unwrap();
        let w = s.adjoint();
        let ww = w.matrix().mul(&w.matrix().adjoint()).unwrap();
        // co-isometric except the final slot
        assert!(ww.block(0, 0, 3, 3).distance(&CMatrix::identity(3)).unwrap() == 0.0);
        let sum = BlockOp::direct_sum(&[&w, &w]).unwrap();
        let mm = sum.matrix().mul(&sum.matrix().adjoint()).unwrap();
        assert!(mm.block(0, 0, 3, 3).distance(&CMatrix::identity(3)).unwrap() == 0.0);
    }

    #[test]
    fn compress_of_direct_sum_ignores_h_free_summand() {
        let x = BlockOp::from_parts(
            BlockSpace::h_only(2).unwrap(),
            CMatrix::from_real_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap(),
            1,
        )
        .unwrap();
        let z_space = BlockSpace::new(vec![Slot::new("tail", 2)], vec![]).unwrap();
        let z = BlockOp::identity(z_space);
        let sum = BlockOp::direct_sum(&[&x, &z]).unwrap();
        let hx = x.compress_to_h().unwrap();
        let hsum = sum.compress_to_h().unwrap();
        assert!(hx.distance(&hsum).unwrap() == 0.0);
    }
}

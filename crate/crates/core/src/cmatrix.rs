//! Dense complex matrix kernel.
//!
//! `CMatrix` is the universal numeric carrier of the crate: a dense,
//! row-major matrix over `Complex<f64>`. Dimensions stay at desk scale
//! (a few thousand at most), so everything is plain O(n^3) dense code;
//! products parallelize over rows for the larger sizes.

use crate::error::{DilationError, Result};
use num_complex::Complex;
use rayon::prelude::*;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;

/// Shorthand for a real complex scalar.
#[inline]
pub fn re(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

const PAR_THRESHOLD: usize = 96;

impl CMatrix {
    /// Build from row-major entries. Rejects non-finite entries and
    /// length mismatches.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DilationError::InconsistentDimensions(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DilationError::NonFiniteEntry(bad));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, re(1.0));
        }
        m
    }

    /// Scalar multiple of the identity.
    pub fn scalar(n: usize, z: C64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, z);
        }
        m
    }

    /// Build from rows of real numbers.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(DilationError::InconsistentDimensions(
                    "ragged rows".to_string(),
                ));
            }
            data.extend(row.iter().map(|&x| re(x)));
        }
        Self::new(r, c, data)
    }

    /// Build from a closure over (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[i * self.cols + j] = z;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a + b)
            .collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a - b)
            .collect();
        Ok(CMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, z: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * z).collect(),
        }
    }

    fn check_same_shape(&self, other: &CMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(DilationError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, other.rows, self.cols, other.cols
            )));
        }
        Ok(())
    }

    /// Matrix product. Rows parallelize above a size threshold.
    pub fn mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(DilationError::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        if n == 0 || m == 0 || k == 0 {
            return Ok(CMatrix::zeros(n, m));
        }
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        let mul_row = |(i, out_row): (usize, &mut [C64])| {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[l * m..(l + 1) * m];
                for j in 0..m {
                    out_row[j] += a * brow[j];
                }
            }
        };
        if n >= PAR_THRESHOLD && k >= PAR_THRESHOLD {
            out.par_chunks_mut(m).enumerate().for_each(mul_row);
        } else {
            out.chunks_mut(m).enumerate().for_each(mul_row);
        }
        Ok(CMatrix { rows: n, cols: m, data: out })
    }

    /// Apply to a vector given as a slice.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(DilationError::DimensionMismatch(format!(
                "matrix has {} cols, vector has {}",
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let mut acc = C64::new(0.0, 0.0);
            let row = self.row(i);
            for (a, x) in row.iter().zip(v.iter()) {
                acc += a * x;
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// Apply the adjoint to a vector without forming it.
    pub fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.rows {
            return Err(DilationError::DimensionMismatch(format!(
                "matrix has {} rows, vector has {}",
                self.rows,
                v.len()
            )));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for i in 0..self.rows {
            let x = v[i];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (j, a) in row.iter().enumerate() {
                out[j] += a.conj() * x;
            }
        }
        Ok(out)
    }

    /// Copy `block` into position with upper-left corner (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &CMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    /// Extract the block with upper-left corner (r0, c0) of size nr x nc.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> CMatrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        CMatrix::from_fn(nr, nc, |i, j| self.get(r0 + i, c0 + j))
    }

    /// Gather rows and columns by index lists.
    pub fn gather(&self, row_idx: &[usize], col_idx: &[usize]) -> CMatrix {
        CMatrix::from_fn(row_idx.len(), col_idx.len(), |i, j| {
            self.get(row_idx[i], col_idx[j])
        })
    }

    /// Column j as a vector.
    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Place columns side by side.
    pub fn hstack(parts: &[&CMatrix]) -> Result<CMatrix> {
        if parts.is_empty() {
            return Err(DilationError::InconsistentDimensions("hstack of nothing".into()));
        }
        let rows = parts[0].rows;
        if parts.iter().any(|p| p.rows != rows) {
            return Err(DilationError::InconsistentDimensions(
                "hstack with differing row counts".into(),
            ));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = CMatrix::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            out.set_block(0, c0, p);
            c0 += p.cols;
        }
        Ok(out)
    }

    /// Block-diagonal direct sum of square matrices.
    pub fn block_diag(parts: &[&CMatrix]) -> CMatrix {
        let n: usize = parts.iter().map(|p| p.rows).sum();
        let m: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = CMatrix::zeros(n, m);
        let (mut r0, mut c0) = (0, 0);
        for p in parts {
            out.set_block(r0, c0, p);
            r0 += p.rows;
            c0 += p.cols;
        }
        out
    }

    /// Frobenius norm.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Frobenius distance to the adjoint; zero means Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = self.get(i, j) - self.get(j, i).conj();
                acc += d.norm_sqr() * if i == j { 1.0 } else { 2.0 };
            }
        }
        acc.sqrt()
    }

    /// Entry-wise distance to another matrix, as a Frobenius norm.
    pub fn distance(&self, other: &CMatrix) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    /// Permute rows and columns of a square matrix: out[i][j] = self[perm[i]][perm[j]].
    pub fn permute_symmetric(&self, perm: &[usize]) -> CMatrix {
        assert!(self.is_square() && perm.len() == self.rows);
        CMatrix::from_fn(self.rows, self.cols, |i, j| self.get(perm[i], perm[j]))
    }
}

impl std::fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        let rmax = self.rows.min(8);
        let cmax = self.cols.min(8);
        for i in 0..rmax {
            write!(f, "  ")?;
            for j in 0..cmax {
                let z = self.get(i, j);
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f, "{}", if self.cols > cmax { "..." } else { "" })?;
        }
        if self.rows > rmax {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

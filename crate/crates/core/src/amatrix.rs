//! Rectangular matrices with entries in a finite-dimensional C*-algebra.
//!
//! An `r × c` matrix over `A = ⊕ M_{n_i}` is stored through its faithful image:
//! one complex `(r·n_i) × (c·n_i)` matrix per block, where module coordinate
//! `j` and inner index `s` share the row `j·n_i + s`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::algebra::{c, max_abs_diff, same_algebra, spectral_norm, AlgElement, ScalarAlgebra, C64};
use crate::error::{structural, Result};

#[derive(Clone, Debug)]
pub struct AMatrix {
    algebra: Arc<ScalarAlgebra>,
    rows: usize,
    cols: usize,
    blocks: Vec<DMatrix<C64>>,
}

impl AMatrix {
    pub fn zeros(algebra: &Arc<ScalarAlgebra>, rows: usize, cols: usize) -> Self {
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&n| DMatrix::zeros(rows * n, cols * n))
            .collect();
        AMatrix {
            algebra: algebra.clone(),
            rows,
            cols,
            blocks,
        }
    }

    pub fn identity(algebra: &Arc<ScalarAlgebra>, n: usize) -> Self {
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&k| DMatrix::identity(n * k, n * k))
            .collect();
        AMatrix {
            algebra: algebra.clone(),
            rows: n,
            cols: n,
            blocks,
        }
    }

    pub fn from_blocks(
        algebra: &Arc<ScalarAlgebra>,
        rows: usize,
        cols: usize,
        blocks: Vec<DMatrix<C64>>,
    ) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(structural!("expected {} blocks, got {}", algebra.num_blocks(), blocks.len()));
        }
        for (b, &n) in blocks.iter().zip(algebra.blocks()) {
            if b.nrows() != rows * n || b.ncols() != cols * n {
                return Err(structural!(
                    "block of shape {}x{} does not fit a {rows}x{cols} matrix over M_{n}",
                    b.nrows(),
                    b.ncols()
                ));
            }
        }
        Ok(AMatrix {
            algebra: algebra.clone(),
            rows,
            cols,
            blocks,
        })
    }

    pub fn from_entries(
        algebra: &Arc<ScalarAlgebra>,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> AlgElement,
    ) -> Result<Self> {
        let mut out = Self::zeros(algebra, rows, cols);
        for r in 0..rows {
            for s in 0..cols {
                out.set_entry(r, s, &f(r, s))?;
            }
        }
        Ok(out)
    }

    /// Column vector from a list of algebra elements.
    pub fn column(algebra: &Arc<ScalarAlgebra>, entries: &[AlgElement]) -> Result<Self> {
        Self::from_entries(algebra, entries.len(), 1, |r, _| entries[r].clone())
    }

    /// The `1 × 1` matrix holding `a`.
    pub fn from_element(a: &AlgElement) -> Self {
        AMatrix {
            algebra: a.algebra().clone(),
            rows: 1,
            cols: 1,
            blocks: a.blocks().to_vec(),
        }
    }

    /// Diagonal `n × n` matrix with `a` repeated.
    pub fn scalar_diagonal(a: &AlgElement, n: usize) -> Self {
        let mut out = Self::zeros(a.algebra(), n, n);
        for j in 0..n {
            out.set_entry(j, j, a).expect("same algebra");
        }
        out
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DMatrix<C64> {
        &self.blocks[i]
    }

    pub fn blocks_mut(&mut self) -> &mut [DMatrix<C64>] {
        &mut self.blocks
    }

    pub fn entry(&self, r: usize, s: usize) -> AlgElement {
        let blocks = self
            .algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(&n, b)| b.view((r * n, s * n), (n, n)).into_owned())
            .collect();
        AlgElement::from_blocks_unchecked(&self.algebra, blocks)
    }

    pub fn set_entry(&mut self, r: usize, s: usize, a: &AlgElement) -> Result<()> {
        if !same_algebra(&self.algebra, a.algebra()) {
            return Err(structural!("entry from {} placed in a matrix over {}", a.algebra(), self.algebra));
        }
        if r >= self.rows || s >= self.cols {
            return Err(structural!("entry ({r},{s}) outside a {}x{} matrix", self.rows, self.cols));
        }
        for ((&n, b), e) in self.algebra.blocks().iter().zip(&mut self.blocks).zip(a.blocks()) {
            b.view_mut((r * n, s * n), (n, n)).copy_from(e);
        }
        Ok(())
    }

    /// Converts a `1 × 1` matrix back to an algebra element.
    pub fn to_element(&self) -> Result<AlgElement> {
        if self.rows != 1 || self.cols != 1 {
            return Err(structural!("a {}x{} matrix is not an algebra element", self.rows, self.cols));
        }
        Ok(AlgElement::from_blocks_unchecked(&self.algebra, self.blocks.clone()))
    }

    fn check_same(&self, other: &AMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
        if !same_algebra(&self.algebra, &other.algebra) {
            return Err(structural!("{what}: matrices over {} and {}", self.algebra, other.algebra));
        }
        if other.rows != rows || other.cols != cols {
            return Err(structural!(
                "{what}: expected a {rows}x{cols} operand, got {}x{}",
                other.rows,
                other.cols
            ));
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &AMatrix) -> Result<AMatrix> {
        if !same_algebra(&self.algebra, &other.algebra) || self.cols != other.rows {
            return Err(structural!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a * b).collect();
        Ok(AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: other.cols,
            blocks,
        })
    }

    /// `self · other*`.
    pub fn mul_adjoint(&self, other: &AMatrix) -> Result<AMatrix> {
        if !same_algebra(&self.algebra, &other.algebra) || self.cols != other.cols {
            return Err(structural!("cannot form product with adjoint: shapes {}x{} and {}x{}", self.rows, self.cols, other.rows, other.cols));
        }
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a * b.adjoint())
            .collect();
        Ok(AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: other.rows,
            blocks,
        })
    }

    pub fn try_add(&self, other: &AMatrix) -> Result<AMatrix> {
        self.check_same(other, self.rows, self.cols, "addition")?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| a + b).collect();
        Ok(AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks,
        })
    }

    pub fn try_sub(&self, other: &AMatrix) -> Result<AMatrix> {
        self.try_add(&other.scale(c(-1.0)))
    }

    /// `self += z · other`.
    pub fn axpy(&mut self, z: C64, other: &AMatrix) -> Result<()> {
        self.check_same(other, self.rows, self.cols, "accumulation")?;
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            a.zip_apply(b, |x, y| *x += z * y);
        }
        Ok(())
    }

    pub fn scale(&self, z: C64) -> AMatrix {
        AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks: self.blocks.iter().map(|b| b * z).collect(),
        }
    }

    pub fn adjoint(&self) -> AMatrix {
        AMatrix {
            algebra: self.algebra.clone(),
            rows: self.cols,
            cols: self.rows,
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// Left multiplication of every entry by `a` (the diagonal action on `A^m`).
    pub fn left_scalar(&self, a: &AlgElement) -> AMatrix {
        let blocks = self
            .blocks
            .iter()
            .zip(a.blocks())
            .map(|(b, e)| {
                let n = e.nrows();
                let mut out = b.clone();
                for r in 0..self.rows {
                    let v = e * b.view((r * n, 0), (n, b.ncols()));
                    out.view_mut((r * n, 0), (n, b.ncols())).copy_from(&v);
                }
                out
            })
            .collect();
        AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks,
        }
    }

    /// Right multiplication of every entry by `a` (the right module action).
    pub fn right_scalar(&self, a: &AlgElement) -> AMatrix {
        let blocks = self
            .blocks
            .iter()
            .zip(a.blocks())
            .map(|(b, e)| {
                let n = e.nrows();
                let mut out = b.clone();
                for s in 0..self.cols {
                    let v = b.view((0, s * n), (b.nrows(), n)) * e;
                    out.view_mut((0, s * n), (b.nrows(), n)).copy_from(&v);
                }
                out
            })
            .collect();
        AMatrix {
            algebra: self.algebra.clone(),
            rows: self.rows,
            cols: self.cols,
            blocks,
        }
    }

    /// Operator norm in the faithful representation.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &AMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &AMatrix, tol: f64) -> bool {
        same_algebra(&self.algebra, &other.algebra) && self.max_abs_diff(other) <= tol
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|z| z.re == 0.0 && z.im == 0.0))
    }

    /// Copies `m` into the sub-matrix starting at module position `(r0, c0)`.
    pub fn set_submatrix(&mut self, r0: usize, c0: usize, m: &AMatrix) -> Result<()> {
        if r0 + m.rows > self.rows || c0 + m.cols > self.cols {
            return Err(structural!("sub-matrix does not fit"));
        }
        for ((&n, b), s) in self.algebra.blocks().iter().zip(&mut self.blocks).zip(&m.blocks) {
            b.view_mut((r0 * n, c0 * n), (m.rows * n, m.cols * n)).copy_from(s);
        }
        Ok(())
    }

    /// Adds `z · m` into the sub-matrix starting at `(r0, c0)`.
    pub fn add_submatrix(&mut self, r0: usize, c0: usize, z: C64, m: &AMatrix) {
        debug_assert!(r0 + m.rows <= self.rows && c0 + m.cols <= self.cols);
        for ((&n, b), s) in self.algebra.blocks().iter().zip(&mut self.blocks).zip(&m.blocks) {
            let mut v = b.view_mut((r0 * n, c0 * n), (m.rows * n, m.cols * n));
            v.zip_apply(s, |x, y| *x += z * y);
        }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> AMatrix {
        let blocks = self
            .algebra
            .blocks()
            .iter()
            .zip(&self.blocks)
            .map(|(&n, b)| b.view((r0 * n, c0 * n), (rows * n, cols * n)).into_owned())
            .collect();
        AMatrix {
            algebra: self.algebra.clone(),
            rows,
            cols,
            blocks,
        }
    }

    pub fn block_diagonal(algebra: &Arc<ScalarAlgebra>, parts: &[&AMatrix]) -> Result<AMatrix> {
        let rows = parts.iter().map(|m| m.rows).sum();
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = Self::zeros(algebra, rows, cols);
        let (mut r, mut s) = (0, 0);
        for m in parts {
            if !same_algebra(algebra, &m.algebra) {
                return Err(structural!("block-diagonal parts over different algebras"));
            }
            out.set_submatrix(r, s, m)?;
            r += m.rows;
            s += m.cols;
        }
        Ok(out)
    }

    /// Smallest eigenvalue of the Hermitian part of a square matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| crate::algebra::hermitian_eigen(b).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Faithful image on `ℂ^{rows·N} ← ℂ^{cols·N}` as a single block-diagonal matrix.
    pub fn to_faithful(&self) -> DMatrix<C64> {
        let r: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let s: usize = self.blocks.iter().map(|b| b.ncols()).sum();
        let mut out = DMatrix::zeros(r, s);
        let (mut ro, mut co) = (0, 0);
        for b in &self.blocks {
            out.view_mut((ro, co), (b.nrows(), b.ncols())).copy_from(b);
            ro += b.nrows();
            co += b.ncols();
        }
        out
    }
}

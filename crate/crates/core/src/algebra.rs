//! Finite-dimensional C*-algebras `⊕ M_{n_i}(ℂ)` and their elements.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{structural, Error, Result};

pub type C64 = Complex64;

/// Tolerance below which a negative eigenvalue is treated as zero.
pub const POSITIVITY_TOL: f64 = 1e-10;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest singular value of a complex matrix; zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    if m.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.singular_values().max()
}

/// Eigen-decomposition of the Hermitian part of `m`.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    if m.nrows() == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(h);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub(crate) fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// A finite-dimensional C*-algebra given by its matrix block sizes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScalarAlgebra {
    blocks: Vec<usize>,
}

impl ScalarAlgebra {
    pub fn new(blocks: Vec<usize>) -> Result<Arc<Self>> {
        if blocks.is_empty() {
            return Err(structural!("an algebra needs at least one block"));
        }
        if blocks.contains(&0) {
            return Err(structural!("block sizes must be positive, got {blocks:?}"));
        }
        Ok(Arc::new(ScalarAlgebra { blocks }))
    }

    /// The commutative algebra `ℂ^n`, i.e. functions on `n` points.
    pub fn commutative(n: usize) -> Result<Arc<Self>> {
        Self::new(vec![1; n])
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.blocks[i]
    }

    /// Vector-space dimension `Σ n_i²`.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|n| n * n).sum()
    }

    /// Dimension `N = Σ n_i` of the faithful block-diagonal representation.
    pub fn faithful_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn is_commutative(&self) -> bool {
        self.blocks.iter().all(|&n| n == 1)
    }

    /// Matrix units `(block, row, col)` in the canonical basis order.
    pub fn basis_units(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.total_dim());
        for (i, &n) in self.blocks.iter().enumerate() {
            for r in 0..n {
                for s in 0..n {
                    out.push((i, r, s));
                }
            }
        }
        out
    }

    pub fn basis_index(&self, block: usize, row: usize, col: usize) -> usize {
        let off: usize = self.blocks[..block].iter().map(|n| n * n).sum();
        off + row * self.blocks[block] + col
    }

    /// Offsets of the blocks inside `ℂ^N`.
    pub fn faithful_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.blocks
            .iter()
            .map(|n| {
                let o = acc;
                acc += n;
                o
            })
            .collect()
    }
}

impl fmt::Display for ScalarAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.blocks.iter().map(|n| format!("M_{n}")).collect();
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

pub(crate) fn same_algebra(a: &Arc<ScalarAlgebra>, b: &Arc<ScalarAlgebra>) -> bool {
    Arc::ptr_eq(a, b) || a.blocks == b.blocks
}

/// An element of a [`ScalarAlgebra`], stored block by block.
#[derive(Clone, Debug)]
pub struct AlgElement {
    algebra: Arc<ScalarAlgebra>,
    blocks: Vec<DMatrix<C64>>,
}

impl AlgElement {
    pub fn from_blocks(algebra: &Arc<ScalarAlgebra>, blocks: Vec<DMatrix<C64>>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(structural!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            ));
        }
        for (i, (b, &n)) in blocks.iter().zip(algebra.blocks()).enumerate() {
            if b.nrows() != n || b.ncols() != n {
                return Err(structural!(
                    "block {i} has shape {}x{}, expected {n}x{n}",
                    b.nrows(),
                    b.ncols()
                ));
            }
        }
        Ok(AlgElement {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub(crate) fn from_blocks_unchecked(algebra: &Arc<ScalarAlgebra>, blocks: Vec<DMatrix<C64>>) -> Self {
        AlgElement {
            algebra: algebra.clone(),
            blocks,
        }
    }

    pub fn zero(algebra: &Arc<ScalarAlgebra>) -> Self {
        let blocks = algebra.blocks().iter().map(|&n| DMatrix::zeros(n, n)).collect();
        Self::from_blocks_unchecked(algebra, blocks)
    }

    pub fn one(algebra: &Arc<ScalarAlgebra>) -> Self {
        Self::scalar(algebra, c(1.0))
    }

    pub fn scalar(algebra: &Arc<ScalarAlgebra>, z: C64) -> Self {
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&n| DMatrix::identity(n, n) * z)
            .collect();
        Self::from_blocks_unchecked(algebra, blocks)
    }

    /// Element whose block `i` is `values[i]` times the identity. For a
    /// commutative algebra this is the function with the given values.
    pub fn from_block_scalars(algebra: &Arc<ScalarAlgebra>, values: &[f64]) -> Result<Self> {
        if values.len() != algebra.num_blocks() {
            return Err(structural!(
                "expected {} values, got {}",
                algebra.num_blocks(),
                values.len()
            ));
        }
        let blocks = algebra
            .blocks()
            .iter()
            .zip(values)
            .map(|(&n, &v)| DMatrix::identity(n, n) * c(v))
            .collect();
        Ok(Self::from_blocks_unchecked(algebra, blocks))
    }

    /// Central projection onto the listed blocks (`χ_S` on `ℂ^n`).
    pub fn indicator(algebra: &Arc<ScalarAlgebra>, set: &[usize]) -> Result<Self> {
        let mut v = vec![0.0; algebra.num_blocks()];
        for &i in set {
            if i >= v.len() {
                return Err(structural!("block index {i} out of range"));
            }
            v[i] = 1.0;
        }
        Self::from_block_scalars(algebra, &v)
    }

    pub fn matrix_unit(algebra: &Arc<ScalarAlgebra>, block: usize, row: usize, col: usize) -> Self {
        let mut e = Self::zero(algebra);
        e.blocks[block][(row, col)] = c(1.0);
        e
    }

    pub fn basis_element(algebra: &Arc<ScalarAlgebra>, index: usize) -> Self {
        let (i, r, s) = algebra.basis_units()[index];
        Self::matrix_unit(algebra, i, r, s)
    }

    /// Entries with real and imaginary parts uniform in `[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(algebra: &Arc<ScalarAlgebra>, rng: &mut R) -> Self {
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
            .collect();
        Self::from_blocks_unchecked(algebra, blocks)
    }

    pub fn random_self_adjoint<R: Rng + ?Sized>(algebra: &Arc<ScalarAlgebra>, rng: &mut R) -> Self {
        let a = Self::random(algebra, rng);
        (&a + &a.adjoint()).scale(c(0.5))
    }

    /// A positive element of norm at most one.
    pub fn random_positive_contraction<R: Rng + ?Sized>(algebra: &Arc<ScalarAlgebra>, rng: &mut R) -> Self {
        let a = Self::random(algebra, rng);
        let p = &a.adjoint() * &a;
        let n = p.op_norm();
        if n == 0.0 {
            p
        } else {
            p.scale(c(rng.gen_range(0.0..1.0) / n))
        }
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DMatrix<C64> {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<DMatrix<C64>> {
        self.blocks
    }

    fn check_parent(&self, other: &AlgElement) -> Result<()> {
        if same_algebra(&self.algebra, &other.algebra) {
            Ok(())
        } else {
            Err(structural!("elements of {} and {} cannot be combined", self.algebra, other.algebra))
        }
    }

    fn zip_with(&self, other: &AlgElement, f: impl Fn(&DMatrix<C64>, &DMatrix<C64>) -> DMatrix<C64>) -> AlgElement {
        assert!(
            same_algebra(&self.algebra, &other.algebra),
            "elements of {} and {} cannot be combined",
            self.algebra,
            other.algebra
        );
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        AlgElement::from_blocks_unchecked(&self.algebra, blocks)
    }

    pub fn try_mul(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check_parent(other)?;
        Ok(self * other)
    }

    pub fn try_add(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check_parent(other)?;
        Ok(self + other)
    }

    pub fn scale(&self, z: C64) -> AlgElement {
        let blocks = self.blocks.iter().map(|b| b * z).collect();
        AlgElement::from_blocks_unchecked(&self.algebra, blocks)
    }

    pub fn adjoint(&self) -> AlgElement {
        let blocks = self.blocks.iter().map(|b| b.adjoint()).collect();
        AlgElement::from_blocks_unchecked(&self.algebra, blocks)
    }

    /// C*-norm: the largest singular value over all blocks.
    pub fn op_norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &AlgElement) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| max_abs_diff(a, b))
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &AlgElement, tol: f64) -> bool {
        same_algebra(&self.algebra, &other.algebra) && self.max_abs_diff(other) <= tol
    }

    pub fn commutator(&self, other: &AlgElement) -> AlgElement {
        &(self * other) - &(other * self)
    }

    pub fn self_adjointness_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjointness_defect() <= tol
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|b| hermitian_eigen(b).0)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_self_adjoint(tol) && self.min_eigenvalue() >= -tol
    }

    /// Applies `f` to the spectrum of a self-adjoint element.
    pub fn functional_calculus(&self, f: impl Fn(f64) -> f64) -> Result<AlgElement> {
        if !self.is_self_adjoint(POSITIVITY_TOL) {
            return Err(Error::Positivity(format!(
                "functional calculus needs a self-adjoint element (defect {:.3e})",
                self.self_adjointness_defect()
            )));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let (vals, vecs) = hermitian_eigen(b);
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    vals.len(),
                    vals.iter().map(|&v| c(f(v))),
                ));
                &vecs * d * vecs.adjoint()
            })
            .collect();
        Ok(AlgElement::from_blocks_unchecked(&self.algebra, blocks))
    }

    /// Positive square root; eigenvalues in `[-1e-10, 0)` are clipped to zero.
    pub fn sqrt_positive(&self) -> Result<AlgElement> {
        if !self.is_self_adjoint(POSITIVITY_TOL) {
            return Err(Error::Positivity(format!(
                "element is not self-adjoint (defect {:.3e})",
                self.self_adjointness_defect()
            )));
        }
        let m = self.min_eigenvalue();
        if m < -POSITIVITY_TOL {
            return Err(Error::Positivity(format!("element has eigenvalue {m:.3e}")));
        }
        self.functional_calculus(|v| v.max(0.0).sqrt())
    }

    /// Block-diagonal image in the faithful representation on `ℂ^N`.
    pub fn to_faithful(&self) -> DMatrix<C64> {
        let n = self.algebra.faithful_dim();
        let mut out = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let k = b.nrows();
            out.view_mut((off, off), (k, k)).copy_from(b);
            off += k;
        }
        out
    }

    /// Coordinates in the matrix-unit basis.
    pub fn coefficients(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.algebra.total_dim());
        for b in &self.blocks {
            for r in 0..b.nrows() {
                for s in 0..b.ncols() {
                    out.push(b[(r, s)]);
                }
            }
        }
        out
    }

    pub fn from_coefficients(algebra: &Arc<ScalarAlgebra>, coef: &[C64]) -> Result<Self> {
        if coef.len() != algebra.total_dim() {
            return Err(structural!("expected {} coefficients, got {}", algebra.total_dim(), coef.len()));
        }
        let mut it = coef.iter();
        let blocks = algebra
            .blocks()
            .iter()
            .map(|&n| DMatrix::from_fn(n, n, |_, _| C64::new(0.0, 0.0)))
            .map(|mut b: DMatrix<C64>| {
                for r in 0..b.nrows() {
                    for s in 0..b.ncols() {
                        b[(r, s)] = *it.next().unwrap();
                    }
                }
                b
            })
            .collect();
        Ok(Self::from_blocks_unchecked(algebra, blocks))
    }
}

impl<'a> std::ops::Add<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &AlgElement) -> AlgElement {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<'a> std::ops::Sub<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<'a> std::ops::Mul<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &AlgElement) -> AlgElement {
        self.zip_with(rhs, |a, b| a * b)
    }
}

impl std::ops::Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale(c(-1.0))
    }
}

pub fn op_norm(a: &AlgElement) -> f64 {
    a.op_norm()
}

pub fn sqrt_positive(a: &AlgElement) -> Result<AlgElement> {
    a.sqrt_positive()
}

/// Automorphism `α(a)_{σ(i)} = u_{σ(i)} a_i u_{σ(i)}*` given by a block
/// permutation `σ` (which must preserve block sizes) and a unitary `u`.
#[derive(Clone, Debug)]
pub struct Automorphism {
    algebra: Arc<ScalarAlgebra>,
    permutation: Vec<usize>,
    unitary: AlgElement,
}

impl Automorphism {
    pub fn new(algebra: &Arc<ScalarAlgebra>, permutation: Vec<usize>, unitary: Option<AlgElement>) -> Result<Self> {
        let k = algebra.num_blocks();
        if permutation.len() != k {
            return Err(structural!("permutation has length {}, algebra has {k} blocks", permutation.len()));
        }
        let mut seen = vec![false; k];
        for (i, &j) in permutation.iter().enumerate() {
            if j >= k || seen[j] {
                return Err(structural!("{permutation:?} is not a permutation"));
            }
            seen[j] = true;
            if algebra.block_size(i) != algebra.block_size(j) {
                return Err(structural!("permutation sends block {i} to block {j} of a different size"));
            }
        }
        let unitary = match unitary {
            None => AlgElement::one(algebra),
            Some(u) => {
                if !same_algebra(u.algebra(), algebra) {
                    return Err(structural!("unitary lives in {}, expected {}", u.algebra(), algebra));
                }
                let d = (&u.adjoint() * &u).max_abs_diff(&AlgElement::one(algebra));
                if d > 1e-9 {
                    return Err(structural!("u*u differs from 1 by {d:.3e}"));
                }
                u
            }
        };
        Ok(Automorphism {
            algebra: algebra.clone(),
            permutation,
            unitary,
        })
    }

    pub fn identity(algebra: &Arc<ScalarAlgebra>) -> Self {
        Automorphism {
            algebra: algebra.clone(),
            permutation: (0..algebra.num_blocks()).collect(),
            unitary: AlgElement::one(algebra),
        }
    }

    /// Translation on `ℂ^n`: `α(a)(j) = a(j - k mod n)`, so `α(χ_{0}) = χ_{k}`.
    pub fn cyclic_shift(algebra: &Arc<ScalarAlgebra>, k: isize) -> Result<Self> {
        let n = algebra.num_blocks();
        if !algebra.is_commutative() {
            return Err(structural!("cyclic shift needs a commutative algebra"));
        }
        let perm = (0..n).map(|i| (i as isize + k).rem_euclid(n as isize) as usize).collect();
        Self::new(algebra, perm, None)
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn unitary(&self) -> &AlgElement {
        &self.unitary
    }

    pub fn apply(&self, a: &AlgElement) -> Result<AlgElement> {
        if !same_algebra(a.algebra(), &self.algebra) {
            return Err(structural!("automorphism of {} applied to element of {}", self.algebra, a.algebra()));
        }
        let mut blocks = vec![DMatrix::zeros(0, 0); self.algebra.num_blocks()];
        for (i, &j) in self.permutation.iter().enumerate() {
            let u = self.unitary.block(j);
            blocks[j] = u * a.block(i) * u.adjoint();
        }
        Ok(AlgElement::from_blocks_unchecked(&self.algebra, blocks))
    }

    pub fn inverse(&self) -> Automorphism {
        let k = self.permutation.len();
        let mut inv = vec![0; k];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        // α⁻¹(b)_i = u_{σ(i)}* b_{σ(i)} u_{σ(i)}, i.e. unitary v_i = u_{σ(i)}*.
        let blocks = (0..k).map(|i| self.unitary.block(self.permutation[i]).adjoint()).collect();
        Automorphism {
            algebra: self.algebra.clone(),
            permutation: inv,
            unitary: AlgElement::from_blocks_unchecked(&self.algebra, blocks),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism> {
        if !same_algebra(&self.algebra, &other.algebra) {
            return Err(structural!("automorphisms act on different algebras"));
        }
        // u_{σj} v_j = α(v)_{σj} u_{σj}, so the composite unitary is α(v)·u.
        let perm: Vec<usize> = other.permutation.iter().map(|&j| self.permutation[j]).collect();
        let moved_v = self.apply(&other.unitary)?;
        let unitary = &moved_v * &self.unitary;
        Ok(Automorphism {
            algebra: self.algebra.clone(),
            permutation: perm,
            unitary,
        })
    }

    pub fn power(&self, k: i64) -> Automorphism {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Automorphism::identity(&self.algebra);
        for _ in 0..k.unsigned_abs() {
            out = base.compose(&out).expect("same algebra");
        }
        out
    }

    /// Unitary `V` on `ℂ^N` with `α(a) = V a V*` in the faithful representation.
    pub fn faithful_unitary(&self) -> DMatrix<C64> {
        let n = self.algebra.faithful_dim();
        let offs = self.algebra.faithful_offsets();
        let mut perm = DMatrix::zeros(n, n);
        for (i, &j) in self.permutation.iter().enumerate() {
            for r in 0..self.algebra.block_size(i) {
                perm[(offs[j] + r, offs[i] + r)] = c(1.0);
            }
        }
        self.unitary.to_faithful() * perm
    }
}

pub fn apply_automorphism(alpha: &Automorphism, a: &AlgElement) -> Result<AlgElement> {
    alpha.apply(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c6() -> Arc<ScalarAlgebra> {
        ScalarAlgebra::commutative(6).unwrap()
    }

    #[test]
    fn norm_examples() {
        let a = c6();
        assert_eq!(AlgElement::one(&a).op_norm(), 1.0);
        assert_eq!(AlgElement::zero(&a).op_norm(), 0.0);
        assert_eq!(AlgElement::indicator(&a, &[0, 3]).unwrap().op_norm(), 1.0);
    }

    #[test]
    fn malformed_blocks_are_rejected() {
        let a = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let err = AlgElement::from_blocks(&a, vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]);
        assert!(matches!(err, Err(Error::Structural(_))));
        assert!(ScalarAlgebra::new(vec![]).is_err());
        assert!(ScalarAlgebra::new(vec![0]).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let a = c6();
        let p = AlgElement::indicator(&a, &[1, 4]).unwrap();
        assert!(p.sqrt_positive().unwrap().approx_eq(&p, 1e-12));
        let four = AlgElement::scalar(&a, c(4.0));
        assert!(four.sqrt_positive().unwrap().approx_eq(&AlgElement::scalar(&a, c(2.0)), 1e-12));
        let c2 = ScalarAlgebra::commutative(2).unwrap();
        let d = AlgElement::from_block_scalars(&c2, &[1.0, 4.0]).unwrap();
        let r = AlgElement::from_block_scalars(&c2, &[1.0, 2.0]).unwrap();
        assert!(d.sqrt_positive().unwrap().approx_eq(&r, 1e-12));
    }

    #[test]
    fn sqrt_of_matrix_block_squares_back() {
        let a = ScalarAlgebra::new(vec![3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = AlgElement::random(&a, &mut rng);
        let p = &x.adjoint() * &x;
        let r = p.sqrt_positive().unwrap();
        assert!((&r * &r).approx_eq(&p, 1e-9));
        assert!(r.is_positive(1e-10));
    }

    #[test]
    fn sqrt_rejects_negative_and_non_self_adjoint() {
        let a = c6();
        let neg = AlgElement::scalar(&a, c(-1e-6));
        assert!(matches!(neg.sqrt_positive(), Err(Error::Positivity(_))));
        let tiny = AlgElement::scalar(&a, c(-1e-12));
        assert!(tiny.sqrt_positive().is_ok());
        let m2 = ScalarAlgebra::new(vec![2]).unwrap();
        let e = AlgElement::matrix_unit(&m2, 0, 0, 1);
        assert!(matches!(e.sqrt_positive(), Err(Error::Positivity(_))));
    }

    #[test]
    fn shift_examples() {
        let a = c6();
        let id = Automorphism::identity(&a);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = AlgElement::random(&a, &mut rng);
        assert!(id.apply(&x).unwrap().approx_eq(&x, 0.0));
        let s = Automorphism::cyclic_shift(&a, 1).unwrap();
        let chi0 = AlgElement::indicator(&a, &[0]).unwrap();
        let chi1 = AlgElement::indicator(&a, &[1]).unwrap();
        assert!(s.apply(&chi0).unwrap().approx_eq(&chi1, 0.0));
        let mut y = x.clone();
        for _ in 0..6 {
            y = s.apply(&y).unwrap();
        }
        assert!(y.approx_eq(&x, 0.0));
        assert!(s.power(6).apply(&x).unwrap().approx_eq(&x, 1e-15));
    }

    #[test]
    fn parent_mismatch_is_structural() {
        let s = Automorphism::cyclic_shift(&c6(), 1).unwrap();
        let other = ScalarAlgebra::commutative(5).unwrap();
        assert!(matches!(s.apply(&AlgElement::one(&other)), Err(Error::Structural(_))));
        assert!(AlgElement::one(&other).try_mul(&AlgElement::one(&c6())).is_err());
    }

    #[test]
    fn faithful_unitary_implements_automorphism() {
        let a = ScalarAlgebra::new(vec![2, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = Automorphism::new(&a, vec![2, 1, 0], Some(random_unitary(&a, &mut rng))).unwrap();
        let v = alpha.faithful_unitary();
        let x = AlgElement::random(&a, &mut rng);
        let lhs = alpha.apply(&x).unwrap().to_faithful();
        let rhs = &v * x.to_faithful() * v.adjoint();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    fn random_unitary(alg: &Arc<ScalarAlgebra>, rng: &mut ChaCha8Rng) -> AlgElement {
        let h = AlgElement::random_self_adjoint(alg, rng);
        let cos = h.functional_calculus(f64::cos).unwrap();
        let sin = h.functional_calculus(f64::sin).unwrap();
        &cos + &sin.scale(C64::new(0.0, 1.0))
    }

    #[test]
    fn composition_matches_sequential_application() {
        let (alg, mut rng) = random_algebra(17);
        let k = alg.num_blocks();
        let a1 = Automorphism::new(&alg, (0..k).collect(), Some(random_unitary(&alg, &mut rng))).unwrap();
        let a2 = Automorphism::new(&alg, (0..k).collect(), Some(random_unitary(&alg, &mut rng))).unwrap();
        let x = AlgElement::random(&alg, &mut rng);
        let seq = a1.apply(&a2.apply(&x).unwrap()).unwrap();
        assert!(a1.compose(&a2).unwrap().apply(&x).unwrap().approx_eq(&seq, 1e-12));
    }

    fn random_algebra(seed: u64) -> (Arc<ScalarAlgebra>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3);
        let blocks = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        (ScalarAlgebra::new(blocks).unwrap(), rng)
    }

    #[test]
    fn norm_is_submultiplicative_and_c_star() {
        for seed in 0..200 {
            let (alg, mut rng) = random_algebra(seed);
            let a = AlgElement::random(&alg, &mut rng);
            let b = AlgElement::random(&alg, &mut rng);
            assert!((&a * &b).op_norm() <= a.op_norm() * b.op_norm() + 1e-10);
            let n = a.op_norm();
            assert!(((&a.adjoint() * &a).op_norm() - n * n).abs() <= 1e-10 * (1.0 + n * n));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn adjoint_is_involution(seed in 0u64..10_000) {
            let (alg, mut rng) = random_algebra(seed);
            let a = AlgElement::random(&alg, &mut rng);
            prop_assert!(a.adjoint().adjoint().approx_eq(&a, 0.0));
        }

        #[test]
        fn sqrt_scales(seed in 0u64..10_000) {
            let (alg, mut rng) = random_algebra(seed);
            let a = AlgElement::random_positive_contraction(&alg, &mut rng);
            let r = a.sqrt_positive().unwrap();
            prop_assert!((r.op_norm().powi(2) - a.op_norm()).abs() <= 1e-10);
            prop_assert!((&r * &r).approx_eq(&a, 1e-9));
            for t in [0.0f64, 1.0, 4.0] {
                let rt = a.scale(c(t)).sqrt_positive().unwrap();
                prop_assert!(rt.approx_eq(&r.scale(c(t.sqrt())), 1e-9));
            }
        }

        #[test]
        fn automorphisms_are_isometric_homomorphisms(seed in 0u64..10_000) {
            let (alg, mut rng) = random_algebra(seed);
            let k = alg.num_blocks();
            // permutation preserving block sizes: sort indices within equal sizes
            let mut perm: Vec<usize> = (0..k).collect();
            for i in 0..k {
                for j in 0..k {
                    if alg.block_size(i) == alg.block_size(j) && rng.gen_bool(0.5) {
                        perm.swap(i, j);
                    }
                }
            }
            let alpha = Automorphism::new(&alg, perm, Some(random_unitary(&alg, &mut rng))).unwrap();
            let a = AlgElement::random(&alg, &mut rng);
            let b = AlgElement::random(&alg, &mut rng);
            let fa = alpha.apply(&a).unwrap();
            let fb = alpha.apply(&b).unwrap();
            prop_assert!(alpha.apply(&(&a * &b)).unwrap().approx_eq(&(&fa * &fb), 1e-12));
            prop_assert!(alpha.apply(&a.adjoint()).unwrap().approx_eq(&fa.adjoint(), 1e-12));
            prop_assert!(alpha.inverse().apply(&fa).unwrap().approx_eq(&a, 1e-12));
            prop_assert!((fa.op_norm() - a.op_norm()).abs() <= 1e-10);
        }
    }
}

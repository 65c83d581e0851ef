//! Finitely generated projective Hilbert modules `P·A^m` and adjointable
//! operators between them.

use std::sync::Arc;

use crate::algebra::{same_algebra, AlgElement, ScalarAlgebra, C64};
use crate::amatrix::AMatrix;
use crate::error::{structural, Result};

/// Tolerance for the projection identities `P = P* = P²`.
pub const PROJECTION_TOL: f64 = 1e-10;

/// The module `P·A^m` for a projection `P ∈ M_m(A)`.
#[derive(Clone, Debug)]
pub struct ModuleSpace {
    algebra: Arc<ScalarAlgebra>,
    rank: usize,
    projection: AMatrix,
    free: bool,
}

impl ModuleSpace {
    pub fn free(algebra: &Arc<ScalarAlgebra>, rank: usize) -> Arc<Self> {
        Arc::new(ModuleSpace {
            algebra: algebra.clone(),
            rank,
            projection: AMatrix::identity(algebra, rank),
            free: true,
        })
    }

    pub fn projective(projection: AMatrix) -> Result<Arc<Self>> {
        let m = projection.rows();
        if projection.cols() != m {
            return Err(structural!("projection must be square, got {}x{}", m, projection.cols()));
        }
        let sa = projection.max_abs_diff(&projection.adjoint());
        let idem = projection.max_abs_diff(&projection.try_mul(&projection)?);
        if sa > PROJECTION_TOL || idem > PROJECTION_TOL {
            return Err(structural!(
                "not a projection: ‖P − P*‖ = {sa:.3e}, ‖P − P²‖ = {idem:.3e}"
            ));
        }
        let algebra = projection.algebra().clone();
        let free = projection.max_abs_diff(&AMatrix::identity(&algebra, m)) == 0.0;
        Ok(Arc::new(ModuleSpace {
            algebra,
            rank: m,
            projection,
            free,
        }))
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    /// Rank `m` of the ambient free module.
    pub fn free_rank(&self) -> usize {
        self.rank
    }

    pub fn projection(&self) -> &AMatrix {
        &self.projection
    }

    pub fn is_free(&self) -> bool {
        self.free
    }

    pub(crate) fn compatible(&self, other: &ModuleSpace) -> bool {
        same_algebra(&self.algebra, &other.algebra)
            && self.rank == other.rank
            && self.projection.max_abs_diff(&other.projection) <= PROJECTION_TOL
    }

    /// `P·e_i`; for a free module this is the standard basis vector.
    pub fn basis_vector(self: &Arc<Self>, i: usize) -> Result<ModuleVector> {
        if i >= self.rank {
            return Err(structural!("basis index {i} out of range for rank {}", self.rank));
        }
        Ok(ModuleVector {
            space: self.clone(),
            coords: self.projection.submatrix(0, i, self.rank, 1),
        })
    }

    pub fn zero_vector(self: &Arc<Self>) -> ModuleVector {
        ModuleVector {
            space: self.clone(),
            coords: AMatrix::zeros(&self.algebra, self.rank, 1),
        }
    }

    /// Vector with the given coordinates; they must already lie in `P·A^m`.
    pub fn vector(self: &Arc<Self>, coords: AMatrix) -> Result<ModuleVector> {
        self.check_coords(&coords)?;
        let d = self.projection.try_mul(&coords)?.max_abs_diff(&coords);
        if d > PROJECTION_TOL {
            return Err(structural!("coordinates leave the range of P by {d:.3e}"));
        }
        Ok(ModuleVector {
            space: self.clone(),
            coords,
        })
    }

    /// The vector `P·coords`.
    pub fn project(self: &Arc<Self>, coords: AMatrix) -> Result<ModuleVector> {
        self.check_coords(&coords)?;
        let coords = if self.free { coords } else { self.projection.try_mul(&coords)? };
        Ok(ModuleVector {
            space: self.clone(),
            coords,
        })
    }

    fn check_coords(&self, coords: &AMatrix) -> Result<()> {
        if !same_algebra(coords.algebra(), &self.algebra) || coords.rows() != self.rank || coords.cols() != 1 {
            return Err(structural!(
                "coordinates of shape {}x{} do not fit a rank-{} module",
                coords.rows(),
                coords.cols(),
                self.rank
            ));
        }
        Ok(())
    }

    pub fn random_vector<R: rand::Rng + ?Sized>(self: &Arc<Self>, rng: &mut R) -> ModuleVector {
        let coords = AMatrix::from_entries(&self.algebra, self.rank, 1, |_, _| AlgElement::random(&self.algebra, rng))
            .expect("shapes agree");
        self.project(coords).expect("shapes agree")
    }

    /// Internal direct sum `self ⊕ other`.
    pub fn direct_sum(&self, other: &ModuleSpace) -> Result<Arc<ModuleSpace>> {
        if !same_algebra(&self.algebra, &other.algebra) {
            return Err(structural!("direct sum of modules over {} and {}", self.algebra, other.algebra));
        }
        let p = AMatrix::block_diagonal(&self.algebra, &[&self.projection, &other.projection])?;
        let free = self.free && other.free;
        Ok(Arc::new(ModuleSpace {
            algebra: self.algebra.clone(),
            rank: self.rank + other.rank,
            projection: p,
            free,
        }))
    }
}

/// A vector of a [`ModuleSpace`], stored as an `m × 1` matrix over `A`.
#[derive(Clone, Debug)]
pub struct ModuleVector {
    space: Arc<ModuleSpace>,
    coords: AMatrix,
}

impl ModuleVector {
    pub fn space(&self) -> &Arc<ModuleSpace> {
        &self.space
    }

    pub fn coords(&self) -> &AMatrix {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> AlgElement {
        self.coords.entry(i, 0)
    }

    fn check_space(&self, other: &ModuleVector) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space.compatible(&other.space) {
            Ok(())
        } else {
            Err(structural!("vectors belong to different modules"))
        }
    }

    /// Right module action `x·a`.
    pub fn right_mul(&self, a: &AlgElement) -> Result<ModuleVector> {
        if !same_algebra(a.algebra(), self.space.algebra()) {
            return Err(structural!("right action by an element of {}", a.algebra()));
        }
        Ok(ModuleVector {
            space: self.space.clone(),
            coords: self.coords.right_scalar(a),
        })
    }

    pub fn add(&self, other: &ModuleVector) -> Result<ModuleVector> {
        self.check_space(other)?;
        Ok(ModuleVector {
            space: self.space.clone(),
            coords: self.coords.try_add(&other.coords)?,
        })
    }

    pub fn scale(&self, z: C64) -> ModuleVector {
        ModuleVector {
            space: self.space.clone(),
            coords: self.coords.scale(z),
        }
    }

    /// `⟨x, y⟩ = Σ x_i* y_i`, linear in the second variable.
    pub fn inner(&self, other: &ModuleVector) -> Result<AlgElement> {
        self.check_space(other)?;
        self.coords.adjoint().try_mul(&other.coords)?.to_element()
    }

    /// `‖x‖ = ‖⟨x,x⟩‖^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn approx_eq(&self, other: &ModuleVector, tol: f64) -> bool {
        self.coords.approx_eq(&other.coords, tol)
    }
}

pub fn inner(x: &ModuleVector, y: &ModuleVector) -> Result<AlgElement> {
    x.inner(y)
}

/// An adjointable operator `P_K·M·P_H` between projective modules.
#[derive(Clone, Debug)]
pub struct ModOperator {
    domain: Arc<ModuleSpace>,
    codomain: Arc<ModuleSpace>,
    matrix: AMatrix,
}

impl ModOperator {
    /// Compresses `matrix` by the projections of the two spaces.
    pub fn new(domain: &Arc<ModuleSpace>, codomain: &Arc<ModuleSpace>, matrix: AMatrix) -> Result<Self> {
        if matrix.rows() != codomain.free_rank() || matrix.cols() != domain.free_rank() {
            return Err(structural!(
                "a {}x{} matrix cannot map rank {} to rank {}",
                matrix.rows(),
                matrix.cols(),
                domain.free_rank(),
                codomain.free_rank()
            ));
        }
        let mut m = matrix;
        if !codomain.is_free() {
            m = codomain.projection().try_mul(&m)?;
        }
        if !domain.is_free() {
            m = m.try_mul(domain.projection())?;
        }
        Ok(ModOperator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix: m,
        })
    }

    pub fn identity(space: &Arc<ModuleSpace>) -> Self {
        ModOperator {
            domain: space.clone(),
            codomain: space.clone(),
            matrix: space.projection().clone(),
        }
    }

    pub fn zero(domain: &Arc<ModuleSpace>, codomain: &Arc<ModuleSpace>) -> Self {
        ModOperator {
            domain: domain.clone(),
            codomain: codomain.clone(),
            matrix: AMatrix::zeros(domain.algebra(), codomain.free_rank(), domain.free_rank()),
        }
    }

    pub fn domain(&self) -> &Arc<ModuleSpace> {
        &self.domain
    }

    pub fn codomain(&self) -> &Arc<ModuleSpace> {
        &self.codomain
    }

    pub fn matrix(&self) -> &AMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        if !self.domain.compatible(x.space()) {
            return Err(structural!("vector is not in the domain of the operator"));
        }
        Ok(ModuleVector {
            space: self.codomain.clone(),
            coords: self.matrix.try_mul(x.coords())?,
        })
    }

    pub fn adjoint(&self) -> ModOperator {
        ModOperator {
            domain: self.codomain.clone(),
            codomain: self.domain.clone(),
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &ModOperator) -> Result<ModOperator> {
        if !self.domain.compatible(&other.codomain) {
            return Err(structural!("operators cannot be composed: intermediate spaces differ"));
        }
        Ok(ModOperator {
            domain: other.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.try_mul(&other.matrix)?,
        })
    }

    pub fn add(&self, other: &ModOperator) -> Result<ModOperator> {
        if !self.domain.compatible(&other.domain) || !self.codomain.compatible(&other.codomain) {
            return Err(structural!("operators act between different spaces"));
        }
        Ok(ModOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.try_add(&other.matrix)?,
        })
    }

    pub fn scale(&self, z: C64) -> ModOperator {
        ModOperator {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: self.matrix.scale(z),
        }
    }

    /// Largest singular value of the faithful image.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn approx_eq(&self, other: &ModOperator, tol: f64) -> bool {
        self.matrix.approx_eq(&other.matrix, tol)
    }
}

/// `e_{x,y}(z) = x·⟨y,z⟩`.
pub fn rank_one(x: &ModuleVector, y: &ModuleVector) -> Result<ModOperator> {
    if !same_algebra(x.space().algebra(), y.space().algebra()) {
        return Err(structural!("rank-one operator between modules over different algebras"));
    }
    Ok(ModOperator {
        domain: y.space().clone(),
        codomain: x.space().clone(),
        matrix: x.coords().mul_adjoint(y.coords())?,
    })
}

pub fn operator_norm(t: &ModOperator) -> f64 {
    t.norm()
}

/// Hilbert-module direct sum of two vectors.
pub fn direct_sum_vector(space: &Arc<ModuleSpace>, x: &ModuleVector, y: &ModuleVector) -> Result<ModuleVector> {
    let m = x.coords().rows();
    let mut coords = AMatrix::zeros(space.algebra(), space.free_rank(), 1);
    coords.set_submatrix(0, 0, x.coords())?;
    coords.set_submatrix(m, 0, y.coords())?;
    space.vector(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::c;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c6() -> Arc<ScalarAlgebra> {
        ScalarAlgebra::commutative(6).unwrap()
    }

    #[test]
    fn inner_examples() {
        let alg = c6();
        let h = ModuleSpace::free(&alg, 2);
        let e1 = h.basis_vector(0).unwrap();
        let e2 = h.basis_vector(1).unwrap();
        assert!(e1.inner(&e2).unwrap().approx_eq(&AlgElement::zero(&alg), 0.0));
        assert!(e1.inner(&e1).unwrap().approx_eq(&AlgElement::one(&alg), 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = AlgElement::random(&alg, &mut rng);
        let b = AlgElement::random(&alg, &mut rng);
        let ip = e1.right_mul(&a).unwrap().inner(&e1.right_mul(&b).unwrap()).unwrap();
        assert!(ip.approx_eq(&(&a.adjoint() * &b), 1e-14));
    }

    #[test]
    fn space_mismatch_is_structural() {
        let alg = c6();
        let h2 = ModuleSpace::free(&alg, 2);
        let h3 = ModuleSpace::free(&alg, 3);
        let x = h2.basis_vector(0).unwrap();
        let y = h3.basis_vector(0).unwrap();
        assert!(matches!(x.inner(&y), Err(crate::Error::Structural(_))));
    }

    #[test]
    fn rank_one_examples() {
        let alg = ScalarAlgebra::commutative(1).unwrap();
        let h = ModuleSpace::free(&alg, 1);
        let one = h.basis_vector(0).unwrap();
        let e = rank_one(&one, &one).unwrap();
        assert!(e.approx_eq(&ModOperator::identity(&h), 0.0));

        let alg = c6();
        let h = ModuleSpace::free(&alg, 2);
        let e1 = h.basis_vector(0).unwrap();
        let e2 = h.basis_vector(1).unwrap();
        let t = rank_one(&e1, &e1).unwrap();
        assert!(t.apply(&e2).unwrap().approx_eq(&h.zero_vector(), 0.0));
    }

    #[test]
    fn rank_one_composition() {
        let alg = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let h = ModuleSpace::free(&alg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (x, y, u, v) = (
            h.random_vector(&mut rng),
            h.random_vector(&mut rng),
            h.random_vector(&mut rng),
            h.random_vector(&mut rng),
        );
        let prod = rank_one(&x, &y).unwrap().compose(&rank_one(&u, &v).unwrap()).unwrap();
        for _ in 0..20 {
            let z = h.random_vector(&mut rng);
            let lhs = prod.apply(&z).unwrap();
            let coef = &y.inner(&u).unwrap() * &v.inner(&z).unwrap();
            let rhs = x.right_mul(&coef).unwrap();
            assert!(lhs.approx_eq(&rhs, 1e-10));
        }
        let t = rank_one(&x, &y).unwrap();
        assert!(t.adjoint().approx_eq(&rank_one(&y, &x).unwrap(), 0.0));
    }

    #[test]
    fn norm_examples() {
        let alg = c6();
        let h = ModuleSpace::free(&alg, 3);
        assert!((ModOperator::identity(&h).norm() - 1.0).abs() < 1e-14);
        assert_eq!(ModOperator::zero(&h, &h).norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = h.random_vector(&mut rng);
        let x = x.scale(c(1.0 / x.norm()));
        assert!((rank_one(&x, &x).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    fn random_projective(seed: u64) -> (Arc<ModuleSpace>, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3);
        let blocks = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let alg = ScalarAlgebra::new(blocks).unwrap();
        let m = rng.gen_range(1..=3);
        // spectral projection of a random self-adjoint matrix over A
        let x = AMatrix::from_entries(&alg, m, m, |_, _| AlgElement::random(&alg, &mut rng)).unwrap();
        let h = x.try_add(&x.adjoint()).unwrap();
        let blocks = h
            .blocks()
            .iter()
            .map(|b| {
                let (vals, vecs) = crate::algebra::hermitian_eigen(b);
                let d = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    vals.len(),
                    vals.iter().map(|&v| c(if v > 0.0 { 1.0 } else { 0.0 })),
                ));
                &vecs * d * vecs.adjoint()
            })
            .collect();
        let p = AMatrix::from_blocks(&alg, m, m, blocks).unwrap();
        (ModuleSpace::projective(p).unwrap(), rng)
    }

    #[test]
    fn rejects_non_projection() {
        let alg = c6();
        let p = AMatrix::identity(&alg, 2).scale(c(0.5));
        assert!(ModuleSpace::projective(p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inner_product_axioms(seed in 0u64..5000) {
            let (h, mut rng) = random_projective(seed);
            let x = h.random_vector(&mut rng);
            let y = h.random_vector(&mut rng);
            let xy = x.inner(&y).unwrap();
            prop_assert!(xy.adjoint().approx_eq(&y.inner(&x).unwrap(), 1e-10));
            prop_assert!(x.inner(&x).unwrap().min_eigenvalue() >= -1e-10);
            prop_assert!(xy.op_norm() <= x.norm() * y.norm() + 1e-9);
            prop_assert!((x.norm() - x.inner(&x).unwrap().op_norm().sqrt()).abs() <= 1e-10);
        }

        #[test]
        fn projection_is_symmetric_for_inner(seed in 0u64..5000) {
            let (h, mut rng) = random_projective(seed);
            let alg = h.algebra().clone();
            let m = h.free_rank();
            let raw = |rng: &mut ChaCha8Rng| AMatrix::from_entries(&alg, m, 1, |_, _| AlgElement::random(&alg, rng)).unwrap();
            let (x, y) = (raw(&mut rng), raw(&mut rng));
            let px = h.projection().try_mul(&x).unwrap();
            let py = h.projection().try_mul(&y).unwrap();
            let l = px.adjoint().try_mul(&y).unwrap();
            let r = x.adjoint().try_mul(&py).unwrap();
            prop_assert!(l.approx_eq(&r, 1e-10));
        }

        #[test]
        fn adjoint_and_c_star_identity(seed in 0u64..5000) {
            let (h, mut rng) = random_projective(seed);
            let alg = h.algebra().clone();
            let m = h.free_rank();
            let t = ModOperator::new(&h, &h, AMatrix::from_entries(&alg, m, m, |_, _| AlgElement::random(&alg, &mut rng)).unwrap()).unwrap();
            let x = h.random_vector(&mut rng);
            let y = h.random_vector(&mut rng);
            let l = t.adjoint().apply(&x).unwrap().inner(&y).unwrap();
            let r = x.inner(&t.apply(&y).unwrap()).unwrap();
            prop_assert!(l.approx_eq(&r, 1e-9));
            let n = t.norm();
            prop_assert!((t.adjoint().compose(&t).unwrap().norm() - n * n).abs() <= 1e-9 * (1.0 + n * n));
        }

        #[test]
        fn direct_sums_add_blockwise(seed in 0u64..5000) {
            let (h, mut rng) = random_projective(seed);
            let s = h.direct_sum(&h).unwrap();
            let x = h.random_vector(&mut rng);
            let y = h.random_vector(&mut rng);
            let u = h.random_vector(&mut rng);
            let v = h.random_vector(&mut rng);
            let xy = direct_sum_vector(&s, &x, &y).unwrap();
            let uv = direct_sum_vector(&s, &u, &v).unwrap();
            let lhs = xy.inner(&uv).unwrap();
            let rhs = &x.inner(&u).unwrap() + &y.inner(&v).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-12));
            prop_assert!(xy.norm().powi(2) <= x.norm().powi(2) + y.norm().powi(2) + 1e-10);
        }
    }
}

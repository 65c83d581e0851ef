//! C*-correspondences over a finite-dimensional algebra, interior tensor
//! products and tensor powers.
//!
//! A correspondence is a projective module `P·A^m` with a unital
//! *-homomorphism `ω: A → P·M_m(A)·P`, stored through its values on the
//! matrix units of `A`. The interior tensor product `H ⊗ K` is realised inside
//! `K^{m_H}` via `x ⊗ y ↦ (ω_K(x_j)·y)_j`.

use std::sync::Arc;

use rand::Rng;

use crate::algebra::{c, same_algebra, AlgElement, Automorphism, ScalarAlgebra, C64};
use crate::amatrix::AMatrix;
use crate::error::{argument, structural, Result};
use crate::module::{ModOperator, ModuleSpace, ModuleVector};

/// Tolerance for the homomorphism identities of a left action.
pub const ACTION_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub enum CorrespondenceKind {
    Identity,
    CrossedProduct(Automorphism),
    TwistedFree(Vec<Automorphism>),
    Explicit,
    DirectSum,
    Tensor,
}

#[derive(Clone, Debug)]
pub struct Correspondence {
    space: Arc<ModuleSpace>,
    action: Vec<AMatrix>,
    // for each basis unit, the algebra blocks where its image is nonzero
    support: Vec<Vec<usize>>,
    kind: CorrespondenceKind,
}

/// Worst violations of the left-action identities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActionDefects {
    pub unit: f64,
    pub multiplicative: f64,
    pub adjoint: f64,
    pub commutes_with_projection: f64,
}

impl ActionDefects {
    pub fn max(&self) -> f64 {
        self.unit
            .max(self.multiplicative)
            .max(self.adjoint)
            .max(self.commutes_with_projection)
    }
}

fn support_of(m: &AMatrix) -> Vec<usize> {
    m.blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.iter().any(|z| z.re != 0.0 || z.im != 0.0))
        .map(|(i, _)| i)
        .collect()
}

impl Correspondence {
    fn from_parts(space: Arc<ModuleSpace>, action: Vec<AMatrix>, kind: CorrespondenceKind) -> Self {
        let support = action.iter().map(support_of).collect();
        Correspondence {
            space,
            action,
            support,
            kind,
        }
    }

    /// Builds a correspondence from the images of the matrix units of `A`,
    /// checking the *-homomorphism identities.
    pub fn explicit(space: Arc<ModuleSpace>, images: Vec<AMatrix>) -> Result<Self> {
        let alg = space.algebra().clone();
        if images.len() != alg.total_dim() {
            return Err(structural!(
                "left action needs {} basis images, got {}",
                alg.total_dim(),
                images.len()
            ));
        }
        let m = space.free_rank();
        for img in &images {
            if !same_algebra(img.algebra(), &alg) || img.rows() != m || img.cols() != m {
                return Err(structural!("basis image does not act on a rank-{m} module over {alg}"));
            }
        }
        let h = Self::from_parts(space, images, CorrespondenceKind::Explicit);
        let d = h.action_defects();
        if d.max() > ACTION_TOL {
            return Err(structural!("left action is not a unital *-homomorphism: {d:?}"));
        }
        Ok(h)
    }

    /// Builds the left action from a map on matrix units.
    pub fn from_homomorphism(
        space: Arc<ModuleSpace>,
        kind: CorrespondenceKind,
        f: impl Fn(&AlgElement) -> Result<AMatrix>,
    ) -> Result<Self> {
        let alg = space.algebra().clone();
        let images = (0..alg.total_dim())
            .map(|b| f(&AlgElement::basis_element(&alg, b)))
            .collect::<Result<Vec<_>>>()?;
        let mut h = Self::explicit(space, images)?;
        h.kind = kind;
        Ok(h)
    }

    /// `A` as a correspondence over itself.
    pub fn identity(algebra: &Arc<ScalarAlgebra>) -> Self {
        let images = (0..algebra.total_dim())
            .map(|b| AMatrix::from_element(&AlgElement::basis_element(algebra, b)))
            .collect();
        Self::from_parts(ModuleSpace::free(algebra, 1), images, CorrespondenceKind::Identity)
    }

    /// `A^α`: the module `A` with `a·b = α(a)b`.
    pub fn crossed_product(alpha: &Automorphism) -> Result<Self> {
        let alg = alpha.algebra().clone();
        let images = (0..alg.total_dim())
            .map(|b| Ok(AMatrix::from_element(&alpha.apply(&AlgElement::basis_element(&alg, b))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(
            ModuleSpace::free(&alg, 1),
            images,
            CorrespondenceKind::CrossedProduct(alpha.clone()),
        ))
    }

    /// Free module with basis `ξ_1..ξ_m` and `a·ξ_i = ξ_i·α_i(a)`.
    pub fn twisted_free(alphas: &[Automorphism]) -> Result<Self> {
        let first = alphas
            .first()
            .ok_or_else(|| argument!("twisted free correspondence needs at least one automorphism"))?;
        let alg = first.algebra().clone();
        if alphas.iter().any(|a| !same_algebra(a.algebra(), &alg)) {
            return Err(structural!("automorphisms act on different algebras"));
        }
        let m = alphas.len();
        let images = (0..alg.total_dim())
            .map(|b| {
                let e = AlgElement::basis_element(&alg, b);
                let mut out = AMatrix::zeros(&alg, m, m);
                for (i, a) in alphas.iter().enumerate() {
                    out.set_entry(i, i, &a.apply(&e)?)?;
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(
            ModuleSpace::free(&alg, m),
            images,
            CorrespondenceKind::TwistedFree(alphas.to_vec()),
        ))
    }

    pub fn direct_sum(h: &Correspondence, k: &Correspondence) -> Result<Self> {
        if !same_algebra(h.algebra(), k.algebra()) {
            return Err(structural!("direct sum of correspondences over {} and {}", h.algebra(), k.algebra()));
        }
        let space = h.space.direct_sum(&k.space)?;
        let images = h
            .action
            .iter()
            .zip(&k.action)
            .map(|(a, b)| AMatrix::block_diagonal(h.algebra(), &[a, b]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(space, images, CorrespondenceKind::DirectSum))
    }

    /// Interior tensor product `H ⊗_A K`, realised inside `K^{rank H}`.
    pub fn tensor(h: &Correspondence, k: &Correspondence) -> Result<Self> {
        if !same_algebra(h.algebra(), k.algebra()) {
            return Err(structural!("tensor product of correspondences over {} and {}", h.algebra(), k.algebra()));
        }
        let p = k.amplify(h.space.projection())?;
        let space = if h.space.is_free() && k.space.is_free() {
            ModuleSpace::free(h.algebra(), p.rows())
        } else {
            ModuleSpace::projective(p)?
        };
        let images = h.action.iter().map(|m| k.amplify(m)).collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(space, images, CorrespondenceKind::Tensor))
    }

    /// A random correspondence: each target block receives a random number of
    /// copies of the source blocks, conjugated by a random unitary. With
    /// `full = false` the unit may act as a proper projection.
    pub fn random<R: Rng + ?Sized>(algebra: &Arc<ScalarAlgebra>, rank: usize, full: bool, rng: &mut R) -> Result<Self> {
        if rank == 0 {
            return Err(argument!("rank must be positive"));
        }
        let k = algebra.num_blocks();
        let sizes = algebra.blocks().to_vec();
        // mult[j][i]: copies of block i inside target block j
        let mut mult = vec![vec![0usize; k]; k];
        for j in 0..k {
            let cap = rank * sizes[j];
            let mut filled = false;
            for _ in 0..100 {
                let mut row = vec![0usize; k];
                let mut remaining = cap;
                let mut order: Vec<usize> = (0..k).collect();
                for i in (1..k).rev() {
                    order.swap(i, rng.gen_range(0..=i));
                }
                for &i in &order {
                    let room = remaining / sizes[i];
                    let take = rng.gen_range(0..=room);
                    row[i] += take;
                    remaining -= take * sizes[i];
                }
                if full {
                    if !remaining.is_multiple_of(sizes[j]) {
                        continue;
                    }
                    row[j] += remaining / sizes[j];
                }
                mult[j] = row;
                filled = true;
                break;
            }
            if !filled {
                mult[j][j] = rank;
            }
        }
        for i in 0..k {
            if (0..k).all(|j| mult[j][i] == 0) {
                let used: usize = (0..k).map(|t| mult[i][t] * sizes[t]).sum();
                if !full && rank * sizes[i] - used >= sizes[i] {
                    mult[i][i] += 1;
                } else {
                    mult[i] = vec![0; k];
                    mult[i][i] = rank;
                }
            }
        }
        let unitaries: Vec<nalgebra::DMatrix<C64>> = sizes
            .iter()
            .map(|&n| random_unitary(rank * n, rng))
            .collect();
        let image_blocks = |a: &AlgElement| -> Vec<nalgebra::DMatrix<C64>> {
            (0..k)
                .map(|j| {
                    let d = rank * sizes[j];
                    let mut m = nalgebra::DMatrix::<C64>::zeros(d, d);
                    let mut off = 0;
                    for i in 0..k {
                        for _ in 0..mult[j][i] {
                            m.view_mut((off, off), (sizes[i], sizes[i])).copy_from(a.block(i));
                            off += sizes[i];
                        }
                    }
                    &unitaries[j] * m * unitaries[j].adjoint()
                })
                .collect()
        };
        let p = AMatrix::from_blocks(algebra, rank, rank, image_blocks(&AlgElement::one(algebra)))?;
        let space = if full { ModuleSpace::free(algebra, rank) } else { ModuleSpace::projective(p)? };
        let images = (0..algebra.total_dim())
            .map(|b| AMatrix::from_blocks(algebra, rank, rank, image_blocks(&AlgElement::basis_element(algebra, b))))
            .collect::<Result<Vec<_>>>()?;
        Self::explicit(space, images)
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        self.space.algebra()
    }

    pub fn space(&self) -> &Arc<ModuleSpace> {
        &self.space
    }

    pub fn rank(&self) -> usize {
        self.space.free_rank()
    }

    pub fn kind(&self) -> &CorrespondenceKind {
        &self.kind
    }

    pub fn basis_images(&self) -> &[AMatrix] {
        &self.action
    }

    /// Free modules carry the standard basis as a designated basis.
    pub fn has_designated_basis(&self) -> bool {
        self.space.is_free()
    }

    /// The automorphism `α` when the correspondence is `A^α`.
    pub fn crossed_product_automorphism(&self) -> Option<Automorphism> {
        match &self.kind {
            CorrespondenceKind::CrossedProduct(a) => Some(a.clone()),
            CorrespondenceKind::TwistedFree(v) if v.len() == 1 => Some(v[0].clone()),
            CorrespondenceKind::Identity => Some(Automorphism::identity(self.algebra())),
            _ => None,
        }
    }

    /// `ω(a)` as an `m × m` matrix over `A`.
    pub fn left_action(&self, a: &AlgElement) -> Result<AMatrix> {
        if !same_algebra(a.algebra(), self.algebra()) {
            return Err(structural!("left action of {} by an element of {}", self.algebra(), a.algebra()));
        }
        let m = self.rank();
        let mut out = AMatrix::zeros(self.algebra(), m, m);
        for (b, z) in a.coefficients().into_iter().enumerate() {
            if z.re != 0.0 || z.im != 0.0 {
                add_on_support(&mut out, 0, 0, z, &self.action[b], &self.support[b]);
            }
        }
        Ok(out)
    }

    pub fn left_action_op(&self, a: &AlgElement) -> Result<ModOperator> {
        ModOperator::new(&self.space, &self.space, self.left_action(a)?)
    }

    pub fn left_mul(&self, a: &AlgElement, x: &ModuleVector) -> Result<ModuleVector> {
        self.left_action_op(a)?.apply(x)
    }

    /// Entrywise left action: the `(r·m) × (c·m)` matrix `[ω(M_{ij})]`.
    pub fn amplify(&self, mat: &AMatrix) -> Result<AMatrix> {
        if !same_algebra(mat.algebra(), self.algebra()) {
            return Err(structural!("cannot amplify a matrix over {} through {}", mat.algebra(), self.algebra()));
        }
        if matches!(self.kind, CorrespondenceKind::Identity) {
            return Ok(mat.clone());
        }
        let m = self.rank();
        let alg = self.algebra().clone();
        let mut out = AMatrix::zeros(&alg, mat.rows() * m, mat.cols() * m);
        let mut base = 0;
        for (i, &n) in alg.blocks().iter().enumerate() {
            let blk = mat.block(i);
            for r in 0..mat.rows() {
                for s in 0..mat.cols() {
                    for u in 0..n {
                        for v in 0..n {
                            let z = blk[(r * n + u, s * n + v)];
                            if z.re != 0.0 || z.im != 0.0 {
                                let b = base + u * n + v;
                                add_on_support(&mut out, r * m, s * m, z, &self.action[b], &self.support[b]);
                            }
                        }
                    }
                }
            }
            base += n * n;
        }
        Ok(out)
    }

    /// Worst deviation from the unital *-homomorphism identities on the
    /// matrix units of `A`.
    pub fn action_defects(&self) -> ActionDefects {
        let alg = self.algebra().clone();
        let units = alg.basis_units();
        let p = self.space.projection();
        let mut d = ActionDefects::default();
        let mut one = AMatrix::zeros(&alg, self.rank(), self.rank());
        for (b, &(i, r, s)) in units.iter().enumerate() {
            let e = &self.action[b];
            if r == s {
                one.axpy(c(1.0), e).expect("same shape");
            }
            let adj = alg.basis_index(i, s, r);
            d.adjoint = d.adjoint.max(e.adjoint().max_abs_diff(&self.action[adj]));
            let pe = p.try_mul(e).expect("same shape");
            let ep = e.try_mul(p).expect("same shape");
            d.commutes_with_projection = d.commutes_with_projection.max(pe.max_abs_diff(&ep));
            for (b2, &(i2, r2, s2)) in units.iter().enumerate() {
                if i2 != i {
                    let prod = e.try_mul(&self.action[b2]).expect("same shape");
                    d.multiplicative = d.multiplicative.max(prod.norm());
                    continue;
                }
                let prod = e.try_mul(&self.action[b2]).expect("same shape");
                let diff = if s == r2 {
                    prod.max_abs_diff(&self.action[alg.basis_index(i, r, s2)])
                } else {
                    prod.norm()
                };
                d.multiplicative = d.multiplicative.max(diff);
            }
        }
        d.unit = one.max_abs_diff(p);
        d
    }
}

/// `out[r0.., c0..] += z·m`, restricted to the algebra blocks in `support`.
fn add_on_support(out: &mut AMatrix, r0: usize, c0: usize, z: C64, m: &AMatrix, support: &[usize]) {
    let sizes: Vec<usize> = out.algebra().blocks().to_vec();
    let (mr, mc) = (m.rows(), m.cols());
    let blocks = out.blocks_mut();
    for &j in support {
        let n = sizes[j];
        let src = m.block(j);
        let mut v = blocks[j].view_mut((r0 * n, c0 * n), (mr * n, mc * n));
        v.zip_apply(src, |x, y| *x += z * y);
    }
}

fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> nalgebra::DMatrix<C64> {
    let g = nalgebra::DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    g.qr().q()
}

/// A vector of `H^{⊗k}`, stored as coordinates in `A^{rank(H)^k}` (cut by
/// the projection of the tensor power).
#[derive(Clone, Debug)]
pub struct TensorVector {
    pub degree: usize,
    pub coords: AMatrix,
}

impl TensorVector {
    pub fn right_mul(&self, a: &AlgElement) -> TensorVector {
        TensorVector {
            degree: self.degree,
            coords: self.coords.right_scalar(a),
        }
    }

    pub fn scale(&self, z: C64) -> TensorVector {
        TensorVector {
            degree: self.degree,
            coords: self.coords.scale(z),
        }
    }

    pub fn add(&self, other: &TensorVector) -> Result<TensorVector> {
        if self.degree != other.degree {
            return Err(structural!("adding tensors of degrees {} and {}", self.degree, other.degree));
        }
        Ok(TensorVector {
            degree: self.degree,
            coords: self.coords.try_add(&other.coords)?,
        })
    }

    pub fn inner(&self, other: &TensorVector) -> Result<AlgElement> {
        if self.degree != other.degree {
            // distinct Fock degrees are orthogonal
            return Ok(AlgElement::zero(self.coords.algebra()));
        }
        self.coords.adjoint().try_mul(&other.coords)?.to_element()
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }
}

/// `x_1 ⊗ … ⊗ x_k · a`, with each `x_i` given by coordinates in `A^{rank H}`.
/// The empty tensor is the vacuum element `a ∈ A = H^{⊗0}`.
#[derive(Clone, Debug)]
pub struct ElementaryTensor {
    pub factors: Vec<AMatrix>,
    pub scalar: AlgElement,
}

impl ElementaryTensor {
    pub fn vacuum(a: AlgElement) -> Self {
        ElementaryTensor {
            factors: Vec::new(),
            scalar: a,
        }
    }

    pub fn new(factors: Vec<AMatrix>, scalar: AlgElement) -> Self {
        ElementaryTensor { factors, scalar }
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// The tensor powers `H^{⊗0} = A, H^{⊗1}, …, H^{⊗k_max}` with
/// `H^{⊗k} = H ⊗ H^{⊗(k−1)}`, so a word `w_1…w_k` of basis indices sits at
/// coordinate `Σ w_i m^{k−i}`.
#[derive(Clone, Debug)]
pub struct TensorPowerCache {
    base: Arc<Correspondence>,
    powers: Vec<Arc<Correspondence>>,
}

impl TensorPowerCache {
    pub fn new(base: Arc<Correspondence>, k_max: usize) -> Result<Self> {
        let mut powers = vec![Arc::new(Correspondence::identity(base.algebra()))];
        for k in 1..=k_max {
            let next = if k == 1 {
                (*base).clone()
            } else {
                Correspondence::tensor(&base, &powers[k - 1])?
            };
            powers.push(Arc::new(next));
        }
        Ok(TensorPowerCache { base, powers })
    }

    pub fn base(&self) -> &Arc<Correspondence> {
        &self.base
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        self.base.algebra()
    }

    pub fn k_max(&self) -> usize {
        self.powers.len() - 1
    }

    pub fn power(&self, k: usize) -> Result<&Arc<Correspondence>> {
        self.powers
            .get(k)
            .ok_or_else(|| argument!("tensor power {k} exceeds the cached maximum {}", self.k_max()))
    }

    pub fn rank(&self, k: usize) -> Result<usize> {
        Ok(self.power(k)?.rank())
    }

    /// `ω_k(a)`, the action of `a` on `H^{⊗k}`.
    pub fn omega(&self, k: usize, a: &AlgElement) -> Result<AMatrix> {
        self.power(k)?.left_action(a)
    }

    /// `S ⊗ 1_{H^{⊗k}}` for `S` a matrix over `A` (entrywise `ω_k`).
    pub fn amplify(&self, k: usize, s: &AMatrix) -> Result<AMatrix> {
        self.power(k)?.amplify(s)
    }

    pub fn projection(&self, k: usize) -> Result<&AMatrix> {
        Ok(self.power(k)?.space().projection())
    }

    /// `x ⊗ y` for `x ∈ H^{⊗i}`, `y ∈ H^{⊗j}`.
    pub fn tensor(&self, x: &TensorVector, y: &TensorVector) -> Result<TensorVector> {
        let coords = self.amplify(y.degree, &x.coords)?.try_mul(&y.coords)?;
        Ok(TensorVector {
            degree: x.degree + y.degree,
            coords,
        })
    }

    pub fn vector(&self, degree: usize, coords: AMatrix) -> Result<TensorVector> {
        let r = self.rank(degree)?;
        if coords.rows() != r || coords.cols() != 1 || !same_algebra(coords.algebra(), self.algebra()) {
            return Err(structural!("coordinates do not fit H^⊗{degree} of rank {r}"));
        }
        Ok(TensorVector { degree, coords })
    }

    pub fn vacuum(&self, a: &AlgElement) -> TensorVector {
        TensorVector {
            degree: 0,
            coords: AMatrix::from_element(a),
        }
    }

    /// Basis tensor `ξ_{w_1} ⊗ … ⊗ ξ_{w_k}` of a free base module (projected
    /// onto `H^{⊗k}` otherwise).
    pub fn word(&self, word: &[usize]) -> Result<TensorVector> {
        let m = self.base.rank();
        let k = word.len();
        let r = self.rank(k)?;
        let mut idx = 0;
        for &w in word {
            if w >= m {
                return Err(argument!("letter {w} exceeds the rank {m}"));
            }
            idx = idx * m + w;
        }
        let p = self.projection(k)?;
        Ok(TensorVector {
            degree: k,
            coords: p.submatrix(0, idx, r, 1),
        })
    }

    pub fn realize(&self, t: &ElementaryTensor) -> Result<TensorVector> {
        let m = self.base.rank();
        let mut v = self.vacuum(&t.scalar);
        for x in t.factors.iter().rev() {
            if x.rows() != m || x.cols() != 1 {
                return Err(structural!("tensor factor has shape {}x{}, expected {m}x1", x.rows(), x.cols()));
            }
            let x = TensorVector {
                degree: 1,
                coords: self.base.space().projection().try_mul(x)?,
            };
            v = self.tensor(&x, &v)?;
        }
        Ok(v)
    }

    /// `a·x` for `x ∈ H^{⊗k}`.
    pub fn left_mul(&self, a: &AlgElement, x: &TensorVector) -> Result<TensorVector> {
        Ok(TensorVector {
            degree: x.degree,
            coords: self.omega(x.degree, a)?.try_mul(&x.coords)?,
        })
    }
}

pub fn tensor(h: &Correspondence, k: &Correspondence, x: &ModuleVector, y: &ModuleVector) -> Result<ModuleVector> {
    let hk = Correspondence::tensor(h, k)?;
    let coords = k.amplify(x.coords())?.try_mul(y.coords())?;
    hk.space().project(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c2() -> Arc<ScalarAlgebra> {
        ScalarAlgebra::commutative(2).unwrap()
    }

    fn fn_elem(alg: &Arc<ScalarAlgebra>, v: &[f64]) -> AlgElement {
        AlgElement::from_block_scalars(alg, v).unwrap()
    }

    #[test]
    fn swap_tensor_inner_product() {
        let alg = c2();
        let swap = Automorphism::cyclic_shift(&alg, 1).unwrap();
        let h = Correspondence::crossed_product(&swap).unwrap();
        let hh = Correspondence::tensor(&h, &h).unwrap();
        let vec1 = |v: &[f64]| h.space().vector(AMatrix::from_element(&fn_elem(&alg, v))).unwrap();
        let (x1, x2) = (vec1(&[1.0, 0.0]), vec1(&[1.0, 0.0]));
        let (y1, y2) = (vec1(&[1.0, 1.0]), vec1(&[0.0, 1.0]));
        let t1 = tensor(&h, &h, &x1, &y1).unwrap();
        let t2 = tensor(&h, &h, &x2, &y2).unwrap();
        let ip = t1.inner(&t2).unwrap();
        assert!(ip.approx_eq(&fn_elem(&alg, &[0.0, 1.0]), 1e-14));
        // oracle: ⟨y1, σ(⟨x1,x2⟩) y2⟩
        let inner_x = x1.inner(&x2).unwrap();
        let oracle = y1.inner(&h.left_mul(&inner_x, &y2).unwrap()).unwrap();
        assert!(ip.approx_eq(&oracle, 1e-14));
        assert_eq!(hh.rank(), 1);
    }

    #[test]
    fn balancing_and_functoriality() {
        let alg = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Correspondence::random(&alg, 2, true, &mut rng).unwrap();
        let k = Correspondence::random(&alg, 2, false, &mut rng).unwrap();
        let x = h.space().random_vector(&mut rng);
        let y = k.space().random_vector(&mut rng);
        let one = AlgElement::one(&alg);
        let a = AlgElement::random(&alg, &mut rng);
        let l = tensor(&h, &k, &x, &k.left_mul(&one, &y).unwrap()).unwrap();
        let r = tensor(&h, &k, &x.right_mul(&one).unwrap(), &y).unwrap();
        assert!(l.approx_eq(&r, 1e-12));
        let l = tensor(&h, &k, &x, &k.left_mul(&a, &y).unwrap()).unwrap();
        let r = tensor(&h, &k, &x.right_mul(&a).unwrap(), &y).unwrap();
        assert!(l.approx_eq(&r, 1e-12));
        let hk = Correspondence::tensor(&h, &k).unwrap();
        let l = tensor(&h, &k, &h.left_mul(&a, &x).unwrap(), &y).unwrap();
        let r = hk.left_mul(&a, &tensor(&h, &k, &x, &y).unwrap()).unwrap();
        assert!(l.approx_eq(&r, 1e-12));
    }

    #[test]
    fn crossed_product_examples() {
        let alg = ScalarAlgebra::commutative(6).unwrap();
        let id = Correspondence::crossed_product(&Automorphism::identity(&alg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = AlgElement::random(&alg, &mut rng);
        assert!(id.left_action(&a).unwrap().approx_eq(&AMatrix::from_element(&a), 0.0));
        let s = Automorphism::cyclic_shift(&alg, 1).unwrap();
        let h = Correspondence::crossed_product(&s).unwrap();
        let chi0 = AlgElement::indicator(&alg, &[0]).unwrap();
        let chi1 = AlgElement::indicator(&alg, &[1]).unwrap();
        assert!(h.left_action(&chi0).unwrap().approx_eq(&AMatrix::from_element(&chi1), 0.0));
    }

    #[test]
    fn crossed_product_powers_match_iterated_automorphism() {
        let alg = ScalarAlgebra::new(vec![1, 2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = AlgElement::random_self_adjoint(&alg, &mut rng);
        let u = &h.functional_calculus(f64::cos).unwrap() + &h.functional_calculus(f64::sin).unwrap().scale(C64::new(0.0, 1.0));
        let alpha = Automorphism::new(&alg, vec![2, 1, 0], Some(u)).unwrap();
        let base = Arc::new(Correspondence::crossed_product(&alpha).unwrap());
        let cache = TensorPowerCache::new(base, 3).unwrap();
        for k in 2..=3 {
            let direct = Correspondence::crossed_product(&alpha.power(k as i64)).unwrap();
            let a = AlgElement::random(&alg, &mut rng);
            // b_1 ⊗ … ⊗ b_k ↦ α^{k-1}(b_1)⋯α(b_{k-1}) b_k in A^{α^k}
            let bs: Vec<AlgElement> = (0..k).map(|_| AlgElement::random(&alg, &mut rng)).collect();
            let cs: Vec<AlgElement> = (0..k).map(|_| AlgElement::random(&alg, &mut rng)).collect();
            let collapse = |v: &[AlgElement]| {
                let mut acc = AlgElement::one(&alg);
                for (i, b) in v.iter().enumerate() {
                    acc = &acc * &alpha.power((k - 1 - i) as i64).apply(b).unwrap();
                }
                acc
            };
            let t = |v: &[AlgElement]| {
                let et = ElementaryTensor::new(v.iter().map(AMatrix::from_element).collect(), AlgElement::one(&alg));
                cache.realize(&et).unwrap()
            };
            let ip = t(&bs).inner(&cache.left_mul(&a, &t(&cs)).unwrap()).unwrap();
            let x = direct.space().vector(AMatrix::from_element(&collapse(&bs))).unwrap();
            let y = direct.space().vector(AMatrix::from_element(&collapse(&cs))).unwrap();
            let oracle = x.inner(&direct.left_mul(&a, &y).unwrap()).unwrap();
            assert!(ip.approx_eq(&oracle, 1e-10));
        }
    }

    #[test]
    fn twisted_free_examples() {
        let alg = c2();
        let id = Automorphism::identity(&alg);
        let swap = Automorphism::cyclic_shift(&alg, 1).unwrap();
        let single = Correspondence::twisted_free(std::slice::from_ref(&id)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = AlgElement::random(&alg, &mut rng);
        assert!(single.left_action(&a).unwrap().approx_eq(&AMatrix::from_element(&a), 0.0));
        let h = Correspondence::twisted_free(&[id.clone(), swap.clone()]).unwrap();
        let xi2 = h.space().basis_vector(1).unwrap();
        let lhs = h.left_mul(&a, &xi2).unwrap();
        let rhs = xi2.right_mul(&swap.apply(&a).unwrap()).unwrap();
        assert!(lhs.approx_eq(&rhs, 0.0));
        assert!(matches!(Correspondence::twisted_free(&[]), Err(crate::Error::Argument(_))));

        // a·μ = μ·α_μ(a) with α_μ = α₂∘α₁ for μ = ξ₁⊗ξ₂
        let alg = ScalarAlgebra::commutative(3).unwrap();
        let a1 = Automorphism::cyclic_shift(&alg, 1).unwrap();
        let a2 = Automorphism::new(&alg, vec![1, 0, 2], None).unwrap();
        let h = Arc::new(Correspondence::twisted_free(&[a1.clone(), a2.clone()]).unwrap());
        let cache = TensorPowerCache::new(h, 2).unwrap();
        let mu = cache.word(&[0, 1]).unwrap();
        let a = AlgElement::random(&alg, &mut rng);
        let lhs = cache.left_mul(&a, &mu).unwrap();
        let rhs = mu.right_mul(&a2.compose(&a1).unwrap().apply(&a).unwrap());
        assert!(lhs.coords.approx_eq(&rhs.coords, 1e-12));
    }

    #[test]
    fn direct_sum_examples() {
        let alg = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = Correspondence::random(&alg, 1, true, &mut rng).unwrap();
        let k = Correspondence::random(&alg, 2, false, &mut rng).unwrap();
        let s = Correspondence::direct_sum(&h, &k).unwrap();
        let x = h.space().random_vector(&mut rng);
        let y = k.space().random_vector(&mut rng);
        let x0 = crate::module::direct_sum_vector(s.space(), &x, &k.space().zero_vector()).unwrap();
        let y0 = crate::module::direct_sum_vector(s.space(), &h.space().zero_vector(), &y).unwrap();
        assert!(x0.inner(&y0).unwrap().approx_eq(&AlgElement::zero(&alg), 0.0));
        let a = AlgElement::random(&alg, &mut rng);
        let xy = crate::module::direct_sum_vector(s.space(), &x, &y).unwrap();
        let lhs = s.left_mul(&a, &xy).unwrap();
        let rhs = crate::module::direct_sum_vector(s.space(), &h.left_mul(&a, &x).unwrap(), &k.left_mul(&a, &y).unwrap())
            .unwrap();
        assert!(lhs.approx_eq(&rhs, 1e-12));
        assert!(x0.inner(&x0).unwrap().approx_eq(&x.inner(&x).unwrap(), 1e-12));
    }

    #[test]
    fn free_tensor_ranks_multiply() {
        let alg = ScalarAlgebra::commutative(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = Arc::new(Correspondence::random(&alg, 2, true, &mut rng).unwrap());
        let cache = TensorPowerCache::new(h, 4).unwrap();
        for k in 0..=4 {
            assert_eq!(cache.rank(k).unwrap(), 2usize.pow(k as u32));
        }
    }

    #[test]
    fn explicit_rejects_non_homomorphism() {
        let alg = c2();
        let space = ModuleSpace::free(&alg, 1);
        let images = vec![AMatrix::identity(&alg, 1); 2];
        assert!(Correspondence::explicit(space, images).is_err());
    }

    fn random_corr(seed: u64) -> (Correspondence, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3);
        let blocks = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let alg = ScalarAlgebra::new(blocks).unwrap();
        let rank = rng.gen_range(1..=2);
        let full = rng.gen_bool(0.5);
        (Correspondence::random(&alg, rank, full, &mut rng).unwrap(), rng)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn constructed_actions_are_homomorphisms(seed in 0u64..3000) {
            let (h, _) = random_corr(seed);
            prop_assert!(h.action_defects().max() <= ACTION_TOL);
            let hh = Correspondence::tensor(&h, &h).unwrap();
            prop_assert!(hh.action_defects().max() <= ACTION_TOL);
        }

        #[test]
        fn tensor_is_associative(seed in 0u64..3000) {
            let (h, mut rng) = random_corr(seed);
            let h = Arc::new(h);
            let cache = TensorPowerCache::new(h.clone(), 3).unwrap();
            let v = |rng: &mut ChaCha8Rng| TensorVector { degree: 1, coords: h.space().random_vector(rng).coords().clone() };
            let (x, y, z) = (v(&mut rng), v(&mut rng), v(&mut rng));
            let l = cache.tensor(&cache.tensor(&x, &y).unwrap(), &z).unwrap();
            let r = cache.tensor(&x, &cache.tensor(&y, &z).unwrap()).unwrap();
            for _ in 0..5 {
                let (u, w, t) = (v(&mut rng), v(&mut rng), v(&mut rng));
                let probe = cache.tensor(&u, &cache.tensor(&w, &t).unwrap()).unwrap();
                prop_assert!(l.inner(&probe).unwrap().approx_eq(&r.inner(&probe).unwrap(), 1e-9));
            }
        }

        #[test]
        fn tensor_inner_product_formula(seed in 0u64..3000) {
            let (h, mut rng) = random_corr(seed);
            let h = Arc::new(h);
            let cache = TensorPowerCache::new(h.clone(), 2).unwrap();
            let x1 = h.space().random_vector(&mut rng);
            let x2 = h.space().random_vector(&mut rng);
            let y1 = h.space().random_vector(&mut rng);
            let y2 = h.space().random_vector(&mut rng);
            let t = |x: &ModuleVector, y: &ModuleVector| cache.tensor(
                &TensorVector { degree: 1, coords: x.coords().clone() },
                &TensorVector { degree: 1, coords: y.coords().clone() }).unwrap();
            let lhs = t(&x1, &y1).inner(&t(&x2, &y2)).unwrap();
            let rhs = y1.inner(&h.left_mul(&x1.inner(&x2).unwrap(), &y2).unwrap()).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-10));
        }
    }
}

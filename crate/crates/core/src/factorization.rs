//! Incoming maps `ρ̄_G : D_p(H) → T(H)`, the row operators `R_G`, complete
//! positivity and order-zero certification, and the end-to-end check that
//! `Σ_l (ρ^l + ρ̂^l) ∘ φ` approximately factors the identity on a finite set.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{c, hermitian_eigen, same_algebra, spectral_norm, AlgElement, Automorphism, ScalarAlgebra, C64};
use crate::amatrix::AMatrix;
use crate::correspondence::{Correspondence, TensorPowerCache, TensorVector};
use crate::error::{argument, structural, Error, Result};
use crate::fock::{
    basis_spanning_family, compression_norm_sweep, phi_compression, BandSum, BandTerm, DpElement, DpTerm,
    FockTruncation, GradedOperator, SweepRow, DEFAULT_SWEEP_TOL,
};
use crate::rokhlin::{bump, lifted_relation_defect, RokhlinTower};

/// `(f_0^{1/2}, …, f_{p−1}^{1/2})` for colour `l`.
pub fn tower_roots(t: &RokhlinTower, l: usize) -> Result<Vec<AlgElement>> {
    (0..t.p()).map(|k| t.f(l, k).sqrt_positive()).collect()
}

/// `(f_{(p−1)/2}^{1/2}, f_{(p−1)/2+1}^{1/2}, …)`, indices mod `p`.
pub fn shifted_roots(t: &RokhlinTower, l: usize) -> Result<Vec<AlgElement>> {
    let h = (t.p().max(1) - 1) / 2;
    (0..t.p()).map(|k| t.f(l, h + k).sqrt_positive()).collect()
}

/// `ρ̄_G(e_{x,y} ⊗ 1_k) = g_{k+|x|} T_x T_y* g_{k+|y|}`, extended linearly.
pub fn rho_band_sum(cache: &TensorPowerCache, g: &[AlgElement], e: &DpElement) -> Result<BandSum> {
    if g.len() != e.p {
        return Err(argument!("{} roots for an element of D_{}", g.len(), e.p));
    }
    let mut terms = Vec::with_capacity(e.terms.len());
    for t in &e.terms {
        let (ix, iy) = (t.k + t.x.degree, t.k + t.y.degree);
        if ix >= g.len() || iy >= g.len() {
            return Err(argument!("root index {} out of range for p = {}", ix.max(iy), g.len()));
        }
        let mut b = BandTerm::with_multipliers(cache, &g[ix], &t.x, &t.y, &g[iy])?;
        b.coeff = t.coeff;
        terms.push(b);
    }
    Ok(BandSum { terms })
}

pub fn rho_map(trunc: &FockTruncation, g: &[AlgElement], e: &DpElement) -> Result<GradedOperator> {
    if trunc.cutoff() < e.p {
        return Err(Error::Cutoff(format!("cutoff {} below p = {}", trunc.cutoff(), e.p)));
    }
    rho_band_sum(trunc.cache(), g, e)?.to_operator(trunc)
}

/// `R_G = Σ_k g_k [T_η]_k` from `F_p(H) ⊗ F(H)` to `F(H)`, truncated to total
/// degree `< q`.
///
/// The summand `H^{⊗k} ⊗ H^{⊗j}` of the domain is identified with
/// `H^{⊗(k+j)}`; `R_G` acts on it as left multiplication by `g_k`. Every
/// operator assembled here preserves or shifts the total degree, and `R_G^*R_G`
/// preserves it, so the compressions below are exact on each total degree.
#[derive(Clone, Debug)]
pub struct RowOperator {
    cache: Arc<TensorPowerCache>,
    roots: Vec<AlgElement>,
    q: usize,
    summands: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    rank: usize,
}

impl RowOperator {
    pub fn new(cache: Arc<TensorPowerCache>, roots: Vec<AlgElement>, q: usize) -> Result<Self> {
        let p = roots.len();
        if p == 0 {
            return Err(argument!("R_G needs at least one root"));
        }
        if q == 0 || cache.k_max() + 1 < q {
            return Err(Error::Cutoff(format!("cutoff {q} not covered by the tensor powers")));
        }
        for g in &roots {
            if !same_algebra(g.algebra(), cache.algebra()) {
                return Err(structural!("roots over a different algebra"));
            }
        }
        let mut summands = Vec::new();
        let mut offsets = Vec::new();
        let mut rank = 0;
        for n in 0..q {
            for k in 0..=n.min(p - 1) {
                summands.push((k, n - k));
                offsets.push(rank);
                rank += cache.rank(n)?;
            }
        }
        Ok(RowOperator {
            cache,
            roots,
            q,
            summands,
            offsets,
            rank,
        })
    }

    pub fn p(&self) -> usize {
        self.roots.len()
    }

    pub fn cutoff(&self) -> usize {
        self.q
    }

    /// `(k, j)` pairs indexing the domain summands.
    pub fn summands(&self) -> &[(usize, usize)] {
        &self.summands
    }

    pub fn domain_rank(&self) -> usize {
        self.rank
    }

    /// `(offset, rank)` of the summands of total degree `n`, for `n < q`.
    /// Summands are ordered by total degree, so each range is contiguous.
    pub fn degree_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.q];
        for (i, &(k, j)) in self.summands.iter().enumerate() {
            let n = k + j;
            if out[n].1 == 0 {
                out[n].0 = self.offsets[i];
            }
            out[n].1 += self.cache.rank(n).expect("cached");
        }
        out
    }

    fn summand_index(&self, k: usize, j: usize) -> Option<usize> {
        self.summands.iter().position(|&s| s == (k, j))
    }

    fn fock_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        (0..self.q)
            .map(|n| {
                let o = acc;
                acc += self.cache.rank(n).expect("cached");
                o
            })
            .collect()
    }

    /// `R_G` as a matrix from the domain to `F_q(H)`.
    pub fn matrix(&self) -> Result<AMatrix> {
        let fo = self.fock_offsets();
        let rows = fo.last().copied().unwrap_or(0) + self.cache.rank(self.q - 1)?;
        let mut out = AMatrix::zeros(self.cache.algebra(), rows, self.rank);
        for (i, &(k, j)) in self.summands.iter().enumerate() {
            let n = k + j;
            out.set_submatrix(fo[n], self.offsets[i], &self.cache.omega(n, &self.roots[k])?)?;
        }
        Ok(out)
    }

    pub fn r_star_r(&self) -> Result<AMatrix> {
        let r = self.matrix()?;
        r.adjoint().try_mul(&r)
    }

    /// `Σ_k g_k² |_{H^{⊗k}}` acting on the domain.
    pub fn diagonal_squares(&self) -> Result<AMatrix> {
        let mut out = AMatrix::zeros(self.cache.algebra(), self.rank, self.rank);
        for (i, &(k, j)) in self.summands.iter().enumerate() {
            let g2 = &self.roots[k] * &self.roots[k];
            out.set_submatrix(self.offsets[i], self.offsets[i], &self.cache.omega(k + j, &g2)?)?;
        }
        Ok(out)
    }

    /// `e ⊗ 1_{F(H)}` on the domain, for `e ∈ D_p(H)`.
    pub fn lift(&self, e: &DpElement) -> Result<AMatrix> {
        if e.p != self.p() {
            return Err(structural!("element of D_{} lifted through R_G with p = {}", e.p, self.p()));
        }
        let mut out = AMatrix::zeros(self.cache.algebra(), self.rank, self.rank);
        for t in &e.terms {
            let src_k = t.y.degree + t.k;
            let dst_k = t.x.degree + t.k;
            for j in 0.. {
                if src_k + j >= self.q {
                    break;
                }
                let (Some(si), Some(di)) = (self.summand_index(src_k, j), self.summand_index(dst_k, j)) else {
                    continue;
                };
                let amp = self
                    .cache
                    .amplify(t.k + j, &t.x.coords)?
                    .mul_adjoint(&self.cache.amplify(t.k + j, &t.y.coords)?)?;
                out.add_submatrix(self.offsets[di], self.offsets[si], t.coeff, &amp);
            }
        }
        Ok(out)
    }

    /// `σ_G(e) = R_G (e ⊗ 1) R_G^*` on `F_q(H)`.
    pub fn sigma(&self, e: &DpElement) -> Result<AMatrix> {
        let r = self.matrix()?;
        r.try_mul(&self.lift(e)?)?.mul_adjoint(&r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoremapsReport {
    pub p: usize,
    pub q: usize,
    /// `max_{i≠j} ‖g_i g_j‖`.
    pub delta: f64,
    /// `‖R*R − Σ_k g_k²|_k‖`.
    pub dev1: f64,
    pub bound1: f64,
    pub holds1: bool,
    /// `max ‖[R*R, e_{w,z} ⊗ 1_k]‖` over the admitted test elements.
    pub dev2: f64,
    pub bound2: f64,
    pub holds2: bool,
    pub tested: usize,
    /// Test elements whose tensors violate `w·g_l ≈_δ g_{l+|w|}·w`.
    pub skipped: usize,
}

/// Both estimates for `R_G`. `family` defaults to the basis spanning family
/// of `D_p(H)` (free modules only); its single-term elements `e_{w,z} ⊗ 1_k`
/// are admitted when `w` and `z` satisfy the shift hypothesis within `δ`.
pub fn moremaps_check(
    cache: &Arc<TensorPowerCache>,
    g: &[AlgElement],
    q: usize,
    family: Option<&[DpElement]>,
) -> Result<MoremapsReport> {
    let p = g.len();
    let row = RowOperator::new(cache.clone(), g.to_vec(), q)?;
    let mut delta: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                delta = delta.max((&g[i] * &g[j]).op_norm());
            }
        }
    }
    let rr = row.r_star_r()?;
    let dev1 = rr.try_sub(&row.diagonal_squares()?)?.norm();
    let owned;
    let family = match family {
        Some(f) => f,
        None => {
            if !cache.base().has_designated_basis() {
                return Err(Error::Unsupported("default test family needs a free module".into()));
            }
            owned = basis_spanning_family(cache, p, 4096)?;
            &owned
        }
    };
    let shift_ok = |z: &TensorVector| -> Result<bool> {
        for l in 0..p {
            if l + z.degree >= p {
                continue;
            }
            let lhs = z.right_mul(&g[l]);
            let rhs = cache.left_mul(&g[l + z.degree], z)?;
            if lhs.coords.try_sub(&rhs.coords)?.norm() > delta + 1e-12 {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut admitted = Vec::new();
    let mut skipped = 0;
    for e in family {
        let ok = e.terms.len() == 1 && shift_ok(&e.terms[0].x)? && shift_ok(&e.terms[0].y)?;
        if ok {
            admitted.push(e);
        } else {
            skipped += 1;
        }
    }
    // R*R preserves total degree and a single-term lift shifts it by
    // |x| − |y|, so the commutator is a block shift and its norm is the
    // largest block norm.
    let ranges = row.degree_ranges();
    let dev2 = admitted
        .par_iter()
        .map(|e| {
            let lifted = row.lift(e)?;
            let t = &e.terms[0];
            let mut worst: f64 = 0.0;
            for (n, &(c0, cw)) in ranges.iter().enumerate() {
                let Some(m) = (n + t.x.degree).checked_sub(t.y.degree).filter(|&m| m < ranges.len()) else {
                    continue;
                };
                let (r0, rw) = ranges[m];
                let l = lifted.submatrix(r0, c0, rw, cw);
                let comm = rr.submatrix(r0, r0, rw, rw).try_mul(&l)?.try_sub(&l.try_mul(&rr.submatrix(c0, c0, cw, cw))?)?;
                worst = worst.max(comm.norm());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let p2 = (p * p) as f64;
    let bound1 = p2 * delta;
    let bound2 = 2.0 * (p2 + 2.0) * delta;
    Ok(MoremapsReport {
        p,
        q,
        delta,
        dev1,
        bound1,
        holds1: dev1 <= bound1 + 1e-8,
        dev2,
        bound2,
        holds2: dev2 <= bound2 + 1e-8,
        tested: admitted.len(),
        skipped,
    })
}

/// A linear map from a finite-dimensional C*-algebra into `M_D`, stored by its
/// values on the matrix units.
#[derive(Clone, Debug)]
pub struct CpMapSample {
    domain: Arc<ScalarAlgebra>,
    codomain_dim: usize,
    images: Vec<DMatrix<C64>>,
}

impl CpMapSample {
    pub fn from_fn(
        domain: &Arc<ScalarAlgebra>,
        codomain_dim: usize,
        f: impl Fn(&AlgElement) -> Result<DMatrix<C64>> + Sync,
    ) -> Result<Self> {
        let images = (0..domain.total_dim())
            .into_par_iter()
            .map(|i| {
                let m = f(&AlgElement::basis_element(domain, i))?;
                if m.nrows() != codomain_dim || m.ncols() != codomain_dim {
                    return Err(structural!("image has shape {}x{}, expected {codomain_dim}", m.nrows(), m.ncols()));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CpMapSample {
            domain: domain.clone(),
            codomain_dim,
            images,
        })
    }

    /// Recovers the map from its values on a spanning family, which must be
    /// closed under adjoints up to linear combinations.
    pub fn from_family(
        domain: &Arc<ScalarAlgebra>,
        codomain_dim: usize,
        family: &[(AlgElement, DMatrix<C64>)],
    ) -> Result<Self> {
        let dim = domain.total_dim();
        if family.is_empty() {
            return Err(structural!("empty spanning family"));
        }
        let coef = DMatrix::from_fn(family.len(), dim, |i, j| family[i].0.coefficients()[j]);
        let svd = coef.clone().svd(true, true);
        let tol = 1e-9 * svd.singular_values.max().max(1.0);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let pinv = svd.pseudo_inverse(tol).map_err(|e| structural!("{e}"))?;
        for (x, _) in family {
            let v = DMatrix::from_row_slice(1, dim, &x.adjoint().coefficients());
            let resid = &v - &v * &pinv * &coef;
            if resid.iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-9 {
                return Err(structural!("spanning family is not closed under adjoints"));
            }
        }
        if rank < dim {
            return Err(structural!("family spans a subspace of dimension {rank} < {dim}"));
        }
        for (_, y) in family {
            if y.nrows() != codomain_dim || y.ncols() != codomain_dim {
                return Err(structural!("image has the wrong shape"));
            }
        }
        let images = (0..dim)
            .map(|b| {
                let mut m = DMatrix::zeros(codomain_dim, codomain_dim);
                for (i, (_, y)) in family.iter().enumerate() {
                    let w = pinv[(b, i)];
                    if w != c(0.0) {
                        m += y * w;
                    }
                }
                m
            })
            .collect();
        Ok(CpMapSample {
            domain: domain.clone(),
            codomain_dim,
            images,
        })
    }

    pub fn domain(&self) -> &Arc<ScalarAlgebra> {
        &self.domain
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn apply(&self, x: &AlgElement) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.codomain_dim, self.codomain_dim);
        for (z, m) in x.coefficients().iter().zip(&self.images) {
            if *z != c(0.0) {
                out += m * *z;
            }
        }
        out
    }

    /// `Σ_{a,b} E_ab ⊗ ψ(E_ab)` for each block of the domain.
    pub fn choi_blocks(&self) -> Vec<DMatrix<C64>> {
        let d = self.codomain_dim;
        (0..self.domain.num_blocks())
            .map(|i| {
                let n = self.domain.block_size(i);
                let mut choi = DMatrix::zeros(n * d, n * d);
                for a in 0..n {
                    for b in 0..n {
                        let img = &self.images[self.domain.basis_index(i, a, b)];
                        choi.view_mut((a * d, b * d), (d, d)).copy_from(img);
                    }
                }
                choi
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpcTolerances {
    pub choi: f64,
    pub contraction: f64,
    pub order_zero: f64,
}

impl Default for CpcTolerances {
    fn default() -> Self {
        CpcTolerances {
            choi: 1e-8,
            contraction: 1e-8,
            order_zero: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpcReport {
    pub seed: u64,
    pub choi_min_eigenvalue: f64,
    pub completely_positive: bool,
    pub unit_norm: f64,
    pub sampled_norm: f64,
    pub contractive: bool,
    pub order_zero_max: f64,
    pub order_zero: bool,
    pub samples: usize,
    pub pairs: usize,
}

pub const DEFAULT_CERT_SEED: u64 = 0x5eed;
pub const NORM_SAMPLES: usize = 200;
pub const ORTHOGONAL_PAIRS: usize = 100;

/// Complete positivity from the Choi matrices, contractivity from `ψ(1)` and
/// 200 unit-ball samples, and orthogonality preservation on 100 pairs built
/// from spectral projections of random self-adjoint elements split at the
/// median eigenvalue.
pub fn certify_cpc_order_zero(m: &CpMapSample, seed: u64, tol: CpcTolerances) -> CpcReport {
    let choi_min_eigenvalue = m
        .choi_blocks()
        .par_iter()
        .map(|ch| hermitian_eigen(ch).0.into_iter().fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min);
    let alg = m.domain().clone();
    let unit_norm = spectral_norm(&m.apply(&AlgElement::one(&alg)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled_norm: f64 = 0.0;
    for _ in 0..NORM_SAMPLES {
        let x = AlgElement::random(&alg, &mut rng);
        let n = x.op_norm();
        if n == 0.0 {
            continue;
        }
        let x = x.scale(c(rng.gen_range(0.0..=1.0) / n));
        sampled_norm = sampled_norm.max(spectral_norm(&m.apply(&x)));
    }
    let mut order_zero_max: f64 = 0.0;
    for _ in 0..ORTHOGONAL_PAIRS {
        let (lo, hi) = median_split(&AlgElement::random_self_adjoint(&alg, &mut rng));
        let a = AlgElement::random_positive_contraction(&alg, &mut rng);
        let b = AlgElement::random_positive_contraction(&alg, &mut rng);
        let x = &(&lo * &a) * &lo;
        let y = &(&hi * &b) * &hi;
        order_zero_max = order_zero_max.max(spectral_norm(&(m.apply(&x) * m.apply(&y))));
    }
    CpcReport {
        seed,
        choi_min_eigenvalue,
        completely_positive: choi_min_eigenvalue >= -tol.choi,
        unit_norm,
        sampled_norm,
        contractive: unit_norm.max(sampled_norm) <= 1.0 + tol.contraction,
        order_zero_max,
        order_zero: order_zero_max <= tol.order_zero,
        samples: NORM_SAMPLES,
        pairs: ORTHOGONAL_PAIRS,
    }
}

/// Spectral projections of `h` onto its lower and upper halves of eigenvalues.
fn median_split(h: &AlgElement) -> (AlgElement, AlgElement) {
    let alg = h.algebra().clone();
    let eig: Vec<(Vec<f64>, DMatrix<C64>)> = h.blocks().iter().map(hermitian_eigen).collect();
    let mut all: Vec<(f64, usize, usize)> = eig
        .iter()
        .enumerate()
        .flat_map(|(b, (vals, _))| vals.iter().enumerate().map(move |(i, &v)| (v, b, i)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let half = all.len() / 2;
    let mut lo: Vec<DMatrix<C64>> = alg.blocks().iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut hi = lo.clone();
    for (rank, &(_, b, i)) in all.iter().enumerate() {
        let v = eig[b].1.column(i);
        let proj = v * v.adjoint();
        if rank < half {
            lo[b] += proj;
        } else {
            hi[b] += proj;
        }
    }
    (
        AlgElement::from_blocks(&alg, lo).expect("shapes"),
        AlgElement::from_blocks(&alg, hi).expect("shapes"),
    )
}

/// Covariant representation of `O(A^α)` on `ℂ^N`: `π(a)` is the faithful
/// representation and `π(S_ξ) = λ V*`, where `α(a) = V a V*`. Then
/// `π(a) π(S_ξ) = π(S_ξ) π(α(a))`, and `π(S_ξ)` is unitary, as the
/// Cuntz–Pimsner relation demands for a rank-one free module.
#[derive(Clone, Debug)]
pub struct CovariantRep {
    w: DMatrix<C64>,
    lambda: C64,
}

impl CovariantRep {
    pub fn new(alpha: &Automorphism, lambda: C64) -> Result<Self> {
        if (lambda.norm() - 1.0).abs() > 1e-12 {
            return Err(argument!("λ must have modulus one"));
        }
        Ok(CovariantRep {
            w: alpha.faithful_unitary().adjoint() * lambda,
            lambda,
        })
    }

    pub fn lambda(&self) -> C64 {
        self.lambda
    }

    pub fn s(&self) -> &DMatrix<C64> {
        &self.w
    }

    fn w_pow(&self, k: usize) -> DMatrix<C64> {
        let n = self.w.nrows();
        let mut out = DMatrix::identity(n, n);
        for _ in 0..k {
            out = &out * &self.w;
        }
        out
    }

    /// `π(T_x)` for `x ∈ H^{⊗k}` written as `ξ^{⊗k}·c`.
    pub fn creation(&self, x: &TensorVector) -> Result<DMatrix<C64>> {
        if x.coords.rows() != 1 || x.coords.cols() != 1 {
            return Err(Error::Unsupported("covariant representations need a rank-one module".into()));
        }
        Ok(self.w_pow(x.degree) * x.coords.to_element()?.to_faithful())
    }

    pub fn band(&self, x: &TensorVector, y: &TensorVector) -> Result<DMatrix<C64>> {
        Ok(self.creation(x)? * self.creation(y)?.adjoint())
    }

    pub fn band_sum(&self, b: &BandSum) -> Result<DMatrix<C64>> {
        let n = self.w.nrows();
        let mut out = DMatrix::zeros(n, n);
        for t in &b.terms {
            out += self.band(&t.x, &t.y)? * t.coeff;
        }
        Ok(out)
    }
}

/// `D_p(A^α) = M_p(A)`, as a finite-dimensional algebra with blocks `p·n_i`.
pub fn crossed_product_dp_algebra(alg: &Arc<ScalarAlgebra>, p: usize) -> Result<Arc<ScalarAlgebra>> {
    ScalarAlgebra::new(alg.blocks().iter().map(|n| n * p).collect())
}

/// The element of `D_p(A^α)` corresponding to a matrix unit of `M_p(A)`:
/// block `i`, row `s·n_i + u`, column `t·n_i + v` is `e_{ξ^s·e_uv, ξ^t} ⊗ 1_0`.
pub fn crossed_product_matrix_unit(cache: &TensorPowerCache, p: usize, unit: (usize, usize, usize)) -> Result<DpElement> {
    let alg = cache.algebra();
    let (i, a, b) = unit;
    let n = alg.block_size(i);
    let (s, u) = (a / n, a % n);
    let (t, v) = (b / n, b % n);
    let x = cache.word(&vec![0; s])?;
    let x = TensorVector {
        degree: s,
        coords: x.coords.right_scalar(&AlgElement::matrix_unit(alg, i, u, v)),
    };
    let y = cache.word(&vec![0; t])?;
    DpElement::single(p, x, y, 0)
}

/// `⊕_λ π_λ ∘ ρ̄_G` on `D_p(A^α) = M_p(A)`.
pub fn rho_covariant_sample(
    cache: &TensorPowerCache,
    alpha: &Automorphism,
    g: &[AlgElement],
    lambdas: &[C64],
) -> Result<CpMapSample> {
    let base = cache.base();
    if base.rank() != 1 || !base.has_designated_basis() {
        return Err(Error::Unsupported("covariant certification needs a rank-one free module".into()));
    }
    let p = g.len();
    let alg = cache.algebra().clone();
    let dom = crossed_product_dp_algebra(&alg, p)?;
    let reps = lambdas.iter().map(|&l| CovariantRep::new(alpha, l)).collect::<Result<Vec<_>>>()?;
    let n = alg.faithful_dim();
    let units = dom.basis_units();
    CpMapSample::from_fn(&dom, n * reps.len(), |e| {
        let idx = e
            .coefficients()
            .iter()
            .position(|z| *z != c(0.0))
            .ok_or_else(|| structural!("zero basis element"))?;
        let elem = crossed_product_matrix_unit(cache, p, units[idx])?;
        let band = rho_band_sum(cache, g, &elem)?;
        let mut out = DMatrix::zeros(n * reps.len(), n * reps.len());
        for (r, rep) in reps.iter().enumerate() {
            out.view_mut((r * n, r * n), (n, n)).copy_from(&rep.band_sum(&band)?);
        }
        Ok(out)
    })
}

/// `φ(X) = √Δ P X P √Δ` on `B(F_q(H)) ⊂ M_R(A)`, with values in the faithful
/// representation of `B(F_p(H))`.
pub fn phi_cp_sample(trunc: &FockTruncation, p: usize) -> Result<CpMapSample> {
    let weights = (0..p).map(|k| bump(p, k)).collect::<Result<Vec<f64>>>()?;
    if trunc.cutoff() < p {
        return Err(Error::Cutoff(format!("cutoff {} below p = {p}", trunc.cutoff())));
    }
    let alg = trunc.algebra().clone();
    let ranks = trunc.ranks();
    let total = trunc.total_rank();
    let rp: usize = ranks[..p].iter().sum();
    let dom = ScalarAlgebra::new(alg.blocks().iter().map(|n| n * total).collect())?;
    let mut scale = Vec::with_capacity(rp);
    for (k, &r) in ranks[..p].iter().enumerate() {
        scale.extend(std::iter::repeat_n(weights[k].sqrt(), r));
    }
    let codim = rp * alg.faithful_dim();
    CpMapSample::from_fn(&dom, codim, |e| {
        let blocks: Vec<DMatrix<C64>> = e
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let n = alg.block_size(i);
                DMatrix::from_fn(rp * n, rp * n, |r, s| b[(r, s)] * scale[r / n] * scale[s / n])
            })
            .collect();
        Ok(AMatrix::from_blocks(&alg, rp, rp, blocks)?.to_faithful())
    })
}

/// `(d+1)(2√(2N/(p−1)) + 4N²/(p−1))`.
pub fn analytic_bound(d: usize, n: usize, p: usize) -> f64 {
    let m = (p - 1) as f64;
    let n = n as f64;
    (d + 1) as f64 * (2.0 * (2.0 * n / m).sqrt() + 4.0 * n * n / m)
}

/// Least odd `p ≥ 3` with `analytic_bound(d, N, p) < ε`.
pub fn select_p(d: usize, n: usize, eps: f64) -> Result<usize> {
    if eps.is_nan() || eps <= 0.0 || n == 0 {
        return Err(argument!("need ε > 0 and N ≥ 1"));
    }
    let mut p = 3;
    while analytic_bound(d, n, p) >= eps {
        p += 2;
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementCertificate {
    pub index: usize,
    pub x_degree: usize,
    pub y_degree: usize,
    pub measured: f64,
    pub converged: bool,
    pub sweep: Vec<SweepRow>,
    /// Error for the adjoint element `T_y T_x*`.
    pub adjoint_measured: f64,
    /// `|measured − adjoint_measured|`.
    pub asymmetry: f64,
    pub within_bound: bool,
    pub below_eps: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationCertificate {
    pub p: usize,
    pub d: usize,
    pub n: usize,
    pub eps: f64,
    pub q_max: usize,
    pub analytic_bound: f64,
    pub bound_below_eps: bool,
    /// `max ‖z·f_k^l − f_{k+|z|}^l·z‖` over the tensors of `F`.
    pub tower_shift_defect: f64,
    pub elements: Vec<ElementCertificate>,
    pub pass: bool,
}

impl FactorizationCertificate {
    pub fn max_measured(&self) -> f64 {
        self.elements.iter().map(|e| e.measured).fold(0.0, f64::max)
    }

    /// One row per element and cutoff: `element,q,lower_bound,converged,analytic_bound`.
    pub fn csv(&self) -> String {
        let mut s = String::from("element,q,lower_bound,converged,analytic_bound\n");
        for e in &self.elements {
            for r in &e.sweep {
                s.push_str(&format!(
                    "{},{},{:.12e},{},{:.12e}\n",
                    e.index, r.q, r.lower_bound, r.converged, self.analytic_bound
                ));
            }
        }
        s
    }
}

/// The error operator `Σ_l (ρ^l + ρ̂^l)(φ(T)) − T` as a band sum.
pub fn factorization_error(cache: &TensorPowerCache, t: &RokhlinTower, elem: &BandSum) -> Result<BandSum> {
    let p = t.p();
    let phi = phi_compression(elem, p)?;
    let mut out = BandSum::default();
    for l in 0..=t.d() {
        for g in [tower_roots(t, l)?, shifted_roots(t, l)?] {
            out.terms.extend(rho_band_sum(cache, &g, &phi)?.terms);
        }
    }
    for term in &elem.terms {
        out.terms.push(BandTerm {
            coeff: -term.coeff,
            x: term.x.clone(),
            y: term.y.clone(),
        });
    }
    Ok(out)
}

/// Runs the whole factorization for each element of `F` and compares the
/// converged compression norm of the error against `ε` and the analytic bound.
pub fn verify_factorization(
    h: &Arc<Correspondence>,
    t: &RokhlinTower,
    f: &[BandSum],
    eps: f64,
    q_max: usize,
) -> Result<FactorizationCertificate> {
    let p = t.p();
    bump(p, 0)?;
    if !same_algebra(t.algebra(), h.algebra()) {
        return Err(structural!("tower and correspondence live over different algebras"));
    }
    if f.is_empty() {
        return Err(argument!("F is empty"));
    }
    let n = f.iter().map(BandSum::max_length).max().unwrap_or(0).max(1);
    if p + n > q_max {
        return Err(Error::Cutoff(format!("p = {p} exceeds q_max − N = {}", q_max as isize - n as isize)));
    }
    let cache = Arc::new(TensorPowerCache::new(h.clone(), q_max - 1)?);
    let trunc = FockTruncation::with_cache(cache.clone(), q_max)?;
    let bound = analytic_bound(t.d(), n, p);

    let mut shift_defect: f64 = 0.0;
    for b in f {
        for term in &b.terms {
            for z in [&term.x, &term.y] {
                if z.degree > 0 {
                    shift_defect = shift_defect.max(lifted_relation_defect(t, &cache, z, |a| Ok(a.clone()))?);
                }
            }
        }
    }

    let qs: Vec<usize> = (n + 1..=q_max).collect();
    let measure = |b: &BandSum| -> Result<(f64, bool, Vec<SweepRow>)> {
        let err = factorization_error(&cache, t, b)?.to_operator(&trunc)?;
        let sweep = compression_norm_sweep(|q| Ok(err.restrict(q)), &qs, DEFAULT_SWEEP_TOL)?;
        Ok((sweep.final_value, sweep.converged, sweep.rows))
    };
    let elements = f
        .par_iter()
        .enumerate()
        .map(|(index, b)| {
            let (measured, converged, sweep) = measure(b)?;
            let (adjoint_measured, _, _) = measure(&b.adjoint())?;
            let (xd, yd) = b
                .terms
                .iter()
                .fold((0, 0), |(a, c2), t| (a.max(t.x.degree), c2.max(t.y.degree)));
            Ok(ElementCertificate {
                index,
                x_degree: xd,
                y_degree: yd,
                measured,
                converged,
                sweep,
                adjoint_measured,
                asymmetry: (measured - adjoint_measured).abs(),
                within_bound: measured <= bound + 1e-6,
                below_eps: measured < eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = elements.iter().all(|e| e.within_bound && e.below_eps && e.converged);
    Ok(FactorizationCertificate {
        p,
        d: t.d(),
        n,
        eps,
        q_max,
        analytic_bound: bound,
        bound_below_eps: bound < eps,
        tower_shift_defect: shift_defect,
        elements,
        pass,
    })
}

/// For an exact tower, `g_{k+|x|} T_x T_y* g_{k+|y|} = f_{k+|x|} T_x T_y*`, so
/// the factorization of `T_x T_y*` collapses to `c·T_x T_y*` with
/// `c = Σ_l Σ_k √(d_p(k+|x|) d_p(k+|y|)) (f_{k+|x|}^l + f_{(p−1)/2+k+|x|}^l)`,
/// the sum running over `k + max(|x|,|y|) < p`.
pub fn collapse_coefficient(t: &RokhlinTower, lx: usize, ly: usize) -> Result<AlgElement> {
    let p = t.p();
    let h = (p - 1) / 2;
    let mut out = AlgElement::zero(t.algebra());
    for l in 0..=t.d() {
        for k in 0..p.saturating_sub(lx.max(ly)) {
            let w = (bump(p, k + lx)? * bump(p, k + ly)?).sqrt();
            if w != 0.0 {
                out = &out + &(t.f(l, k + lx) + t.f(l, h + k + lx)).scale(c(w));
            }
        }
    }
    Ok(out)
}

/// Convenience: `F = {T_z}` with `z` the module generator, as a band sum
/// `T_z T_1*`.
pub fn generator_element(cache: &TensorPowerCache) -> Result<BandSum> {
    let z = cache.word(&[0])?;
    let one = cache.vacuum(&AlgElement::one(cache.algebra()));
    Ok(BandSum::single(BandTerm::new(z, one)))
}

/// A unit-coefficient term `e_{x,y} ⊗ 1_k`.
pub fn dp_term(x: TensorVector, y: TensorVector, k: usize) -> DpTerm {
    DpTerm { coeff: c(1.0), x, y, k }
}

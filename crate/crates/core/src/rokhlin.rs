//! Rokhlin towers `{f_k^l}` for a correspondence, their defects, and the
//! bump weights `d_p` used to glue two towers together.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{c, same_algebra, AlgElement, Automorphism, ScalarAlgebra, POSITIVITY_TOL};
use crate::amatrix::AMatrix;
use crate::correspondence::{Correspondence, TensorPowerCache, TensorVector};
use crate::error::{argument, structural, Error, Result};
use crate::module::{ModOperator, ModuleVector};

/// `d + 1` colours of `p` positive contractions each, indexed by `k ∈ ℤ/p`.
#[derive(Clone, Debug)]
pub struct RokhlinTower {
    algebra: Arc<ScalarAlgebra>,
    d: usize,
    p: usize,
    elements: Vec<Vec<AlgElement>>,
}

impl RokhlinTower {
    pub fn new(algebra: &Arc<ScalarAlgebra>, elements: Vec<Vec<AlgElement>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(argument!("a tower needs at least one colour"));
        }
        let p = elements[0].len();
        if p == 0 {
            return Err(argument!("towers have height at least 1"));
        }
        for (l, row) in elements.iter().enumerate() {
            if row.len() != p {
                return Err(structural!("colour {l} has height {}, expected {p}", row.len()));
            }
            for (k, f) in row.iter().enumerate() {
                if !same_algebra(f.algebra(), algebra) {
                    return Err(structural!("f[{l}][{k}] lives over a different algebra"));
                }
                if !f.is_positive(POSITIVITY_TOL) || f.op_norm() > 1.0 + POSITIVITY_TOL {
                    return Err(Error::Positivity(format!("f[{l}][{k}] is not a positive contraction")));
                }
            }
        }
        Ok(RokhlinTower {
            algebra: algebra.clone(),
            d: elements.len() - 1,
            p,
            elements,
        })
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    /// Number of colours minus one.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn elements(&self) -> &[Vec<AlgElement>] {
        &self.elements
    }

    /// `f_k^l` with `k` read modulo `p`.
    pub fn f(&self, l: usize, k: usize) -> &AlgElement {
        &self.elements[l][k % self.p]
    }

    /// The tower with every element replaced by `g(f)`.
    pub fn map(&self, g: impl Fn(&AlgElement) -> Result<AlgElement>) -> Result<Vec<Vec<AlgElement>>> {
        self.elements.iter().map(|row| row.iter().map(&g).collect()).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerDefects {
    pub orth: f64,
    pub unit: f64,
    pub shift: f64,
    pub commute: f64,
}

impl TowerDefects {
    pub fn max(&self) -> f64 {
        self.orth.max(self.unit).max(self.shift).max(self.commute)
    }

    /// All four defects below `eps`.
    pub fn admissible(&self, eps: f64) -> bool {
        self.orth < eps && self.unit < eps && self.shift < eps && self.commute < eps
    }
}

/// Measures the four tower conditions against test vectors `vs ⊂ H` and test
/// elements `fs ⊂ A`.
pub fn check_tower(t: &RokhlinTower, h: &Correspondence, vs: &[ModuleVector], fs: &[AlgElement]) -> Result<TowerDefects> {
    if !same_algebra(t.algebra(), h.algebra()) {
        return Err(structural!("tower and correspondence live over different algebras"));
    }
    for v in vs {
        if !Arc::ptr_eq(v.space(), h.space()) && !v.space().compatible(h.space()) {
            return Err(structural!("test vector outside the correspondence"));
        }
    }
    for a in fs {
        if !same_algebra(a.algebra(), t.algebra()) {
            return Err(structural!("test element over a different algebra"));
        }
    }
    let p = t.p();
    let cells: Vec<(usize, usize)> = (0..=t.d()).flat_map(|l| (0..p).map(move |k| (l, k))).collect();

    let orth = cells
        .par_iter()
        .map(|&(l, k)| {
            (0..p)
                .filter(|&j| j != k)
                .map(|j| (t.f(l, k) * t.f(l, j)).op_norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let mut total = AlgElement::zero(t.algebra());
    for (l, k) in &cells {
        total = &total + t.f(*l, *k);
    }
    let unit = (&total - &AlgElement::one(t.algebra())).op_norm();

    let shift = cells
        .par_iter()
        .map(|&(l, k)| {
            let next = t.f(l, k + 1);
            vs.iter()
                .map(|z| {
                    let lhs = z.right_mul(t.f(l, k))?;
                    let rhs = h.left_mul(next, z)?;
                    Ok(lhs.coords().try_sub(rhs.coords())?.norm())
                })
                .try_fold(0.0, |m, r: Result<f64>| Ok(f64::max(m, r?)))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let commute = cells
        .par_iter()
        .map(|&(l, k)| fs.iter().map(|a| t.f(l, k).commutator(a).op_norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);

    Ok(TowerDefects { orth, unit, shift, commute })
}

/// Towers over `C(ℤ/n)` for the shift `α(χ_i) = χ_{i+1}`.
///
/// With `d_target = 0` the indicator tower of the labelling `i ↦ −i mod p`,
/// exact when `p | n`. With `d_target = 1` two indicator towers whose
/// labellings are cut at `0` and at `⌊n/2⌋`, glued by a triangular weight
/// vanishing at the first cut and equal to one at the second.
pub fn synthesize_cyclic_tower(n: usize, p: usize, d_target: usize) -> Result<RokhlinTower> {
    if p == 0 || p > n {
        return Err(argument!("need 1 ≤ p ≤ n, got p = {p}, n = {n}"));
    }
    let alg = ScalarAlgebra::commutative(n)?;
    let label = |i: usize, cut: usize| (p - ((n + i - cut) % n) % p) % p;
    match d_target {
        0 => {
            if !n.is_multiple_of(p) {
                return Err(Error::Infeasible(format!(
                    "an exact single-colour tower of height {p} on ℤ/{n} needs {p} | {n}"
                )));
            }
            let row = (0..p)
                .map(|k| {
                    let vals: Vec<f64> = (0..n).map(|i| if label(i, 0) == k { 1.0 } else { 0.0 }).collect();
                    AlgElement::from_block_scalars(&alg, &vals)
                })
                .collect::<Result<Vec<_>>>()?;
            RokhlinTower::new(&alg, vec![row])
        }
        1 => {
            let half = n as f64 / 2.0;
            let cut1 = n / 2;
            let w: Vec<f64> = (0..n).map(|i| 1.0 - ((i as f64 - half).abs() / half).min(1.0)).collect();
            let colour = |cut: usize, weight: &dyn Fn(usize) -> f64| {
                (0..p)
                    .map(|k| {
                        let vals: Vec<f64> =
                            (0..n).map(|i| if label(i, cut) == k { weight(i) } else { 0.0 }).collect();
                        AlgElement::from_block_scalars(&alg, &vals)
                    })
                    .collect::<Result<Vec<_>>>()
            };
            let c0 = colour(0, &|i| w[i])?;
            let c1 = colour(cut1, &|i| 1.0 - w[i])?;
            RokhlinTower::new(&alg, vec![c0, c1])
        }
        _ => Err(argument!("only d_target ∈ {{0, 1}} is synthesized")),
    }
}

/// The crossed-product correspondence `A^shift` over `C(ℤ/n)` matching
/// [`synthesize_cyclic_tower`].
pub fn cyclic_shift_correspondence(n: usize, step: isize) -> Result<Correspondence> {
    let alg = ScalarAlgebra::commutative(n)?;
    Correspondence::crossed_product(&Automorphism::cyclic_shift(&alg, step)?)
}

/// `d_p(k) = 1 − |p−1−2k|/(p−1)` for `k < p`, and `0` beyond.
pub fn bump(p: usize, k: usize) -> Result<f64> {
    if p < 3 || p.is_multiple_of(2) {
        return Err(argument!("bump weights need an odd height p ≥ 3, got {p}"));
    }
    if k >= p {
        return Ok(0.0);
    }
    let m = (p - 1) as f64;
    let dist = (p - 1).abs_diff(2 * k) as f64;
    Ok((m - dist) / m)
}

/// The whole weight vector `(d_p(0), …, d_p(p−1))`.
pub fn bump_vector(p: usize) -> Result<Vec<f64>> {
    (0..p).map(|k| bump(p, k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpLemmaReport {
    pub gap: f64,
    /// `4N²/(p−1)`.
    pub bound: f64,
    /// `gap ≤ bound + 1e-9`.
    pub holds: bool,
    /// `‖(2/(p−1)) Σ_{j<(p−1)/2} f_j‖`: the weights `d_p(j) + d_p(j+(p−1)/2 mod p)`
    /// equal `1 − 2/(p−1)` rather than `1` for `j < (p−1)/2`.
    pub correction: f64,
    /// `bound + correction`, which the gap never exceeds.
    pub corrected_bound: f64,
    pub holds_corrected: bool,
}

/// `‖Σ_{k=N}^{p−1} d_p(k)(f_k + f_{(p−1)/2+k}) − Σ_k f_k‖` against `4N²/(p−1)`.
pub fn bump_lemma_check(p: usize, n: usize, f: &[AlgElement]) -> Result<BumpLemmaReport> {
    bump(p, 0)?;
    if f.len() != p {
        return Err(argument!("expected {p} elements, got {}", f.len()));
    }
    if n > p - 1 {
        return Err(argument!("N = {n} exceeds p − 1 = {}", p - 1));
    }
    let alg = f[0].algebra().clone();
    let h = (p - 1) / 2;
    let mut diff = AlgElement::zero(&alg);
    for (k, fk) in f.iter().enumerate() {
        diff = diff.try_add(&fk.scale(c(-1.0)))?;
        if k >= n {
            let pair = fk.try_add(&f[(h + k) % p])?;
            diff = diff.try_add(&pair.scale(c(bump(p, k)?)))?;
        }
    }
    let gap = diff.op_norm();
    let bound = 4.0 * (n * n) as f64 / (p - 1) as f64;
    let mut low = AlgElement::zero(&alg);
    for fj in &f[..h] {
        low = low.try_add(fj)?;
    }
    let correction = low.scale(c(2.0 / (p - 1) as f64)).op_norm();
    let corrected_bound = bound + correction;
    Ok(BumpLemmaReport {
        gap,
        bound,
        holds: gap <= bound + 1e-9,
        correction,
        corrected_bound,
        holds_corrected: gap <= corrected_bound + 1e-9,
    })
}

/// `max_k |d_p(k) + d_p((p−1)/2 + k mod p) − 1|` over `k = 0, …, p−1`.
///
/// The identity holds for `k ≤ (p−1)/2`; past that the pair sums to
/// `1 − 2/(p−1)` or less, so the returned value is positive for every odd `p`.
pub fn bump_partition_defect(p: usize) -> Result<f64> {
    let h = (p.max(1) - 1) / 2;
    (0..p)
        .map(|k| Ok((bump(p, k)? + bump(p, (h + k) % p)? - 1.0).abs()))
        .try_fold(0.0, |m, r: Result<f64>| Ok(f64::max(m, r?)))
}

/// `max_{l,k} ‖z·g(f_k^l) − g(f_{k+|z|}^l)·z‖` for a homogeneous tensor `z`.
pub fn lifted_relation_defect(
    t: &RokhlinTower,
    cache: &TensorPowerCache,
    z: &TensorVector,
    g: impl Fn(&AlgElement) -> Result<AlgElement> + Sync,
) -> Result<f64> {
    let gf = t.map(&g)?;
    let p = t.p();
    let cells: Vec<(usize, usize)> = (0..=t.d()).flat_map(|l| (0..p).map(move |k| (l, k))).collect();
    cells
        .par_iter()
        .map(|&(l, k)| {
            let lhs = z.right_mul(&gf[l][k]);
            let rhs = cache.left_mul(&gf[l][(k + z.degree) % p], z)?;
            Ok(lhs.coords.try_sub(&rhs.coords)?.norm())
        })
        .collect::<Result<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonperiodicityReport {
    pub eps: f64,
    pub d: usize,
    /// `max_l ‖f_1^l f_2^l‖`.
    pub orth: f64,
    /// `‖Σ_l (f_1^l + f_2^l) − 1‖`.
    pub unit: f64,
    /// `max_l ‖v·f_1^l − f_2^l·v‖` with `v = U^{-1}(1)`.
    pub shift: f64,
    /// `max_l ‖f_1^l − f_2^l‖`, the shift estimate transported through `U`.
    pub transported: f64,
    /// The candidate satisfies the three estimates below `eps`.
    pub candidate_admissible: bool,
    /// `√(2ε)`, forced on every `‖f_i^l‖` by admissibility.
    pub element_bound: f64,
    /// `2(d+1)√(2ε)`, forced on `‖Σ_l f_1^l + f_2^l‖`.
    pub derived_bound: f64,
    /// `derived_bound < 1 − ε`: no admissible family exists at this `ε`.
    pub contradiction: bool,
}

/// Runs the periodicity argument for a unitary bimodule map
/// `U : H^{⊗k} → A` and a candidate height-2 tower for `H^{⊗k}`.
pub fn nonperiodicity_obstruction(
    t: &RokhlinTower,
    hk: &Correspondence,
    u: &ModOperator,
    eps: f64,
) -> Result<NonperiodicityReport> {
    if t.p() != 2 {
        return Err(argument!("the obstruction uses towers of height 2, got {}", t.p()));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(argument!("eps must be positive"));
    }
    if !same_algebra(t.algebra(), hk.algebra()) {
        return Err(structural!("tower and correspondence live over different algebras"));
    }
    let alg = hk.algebra().clone();
    let target = u.codomain();
    if target.free_rank() != 1 || !target.is_free() || !u.domain().compatible(hk.space()) {
        return Err(Error::Witness("U must map the correspondence onto A".into()));
    }
    let uu = u.compose(&u.adjoint())?;
    let utu = u.adjoint().compose(u)?;
    let one = AMatrix::identity(&alg, 1);
    let d1 = uu.matrix().max_abs_diff(&one);
    let d2 = utu.matrix().max_abs_diff(hk.space().projection());
    if d1 > 1e-9 || d2 > 1e-9 {
        return Err(Error::Witness(format!(
            "U is not unitary: ‖UU* − 1‖ ≈ {d1:.3e}, ‖U*U − 1‖ ≈ {d2:.3e}"
        )));
    }
    for (i, _) in alg.basis_units().iter().enumerate() {
        let a = AlgElement::basis_element(&alg, i);
        let lhs = u.matrix().try_mul(&hk.left_action(&a)?)?;
        let rhs = AMatrix::from_element(&a).try_mul(u.matrix())?;
        if lhs.max_abs_diff(&rhs) > 1e-9 {
            return Err(Error::Witness("U does not intertwine the left actions".into()));
        }
    }
    let v = hk.space().vector(u.matrix().adjoint())?;
    let mut orth: f64 = 0.0;
    let mut shift: f64 = 0.0;
    let mut transported: f64 = 0.0;
    let mut total = AlgElement::zero(&alg);
    for l in 0..=t.d() {
        let (f1, f2) = (t.f(l, 0), t.f(l, 1));
        orth = orth.max((f1 * f2).op_norm());
        let lhs = v.right_mul(f1)?;
        let rhs = hk.left_mul(f2, &v)?;
        shift = shift.max(lhs.coords().try_sub(rhs.coords())?.norm());
        transported = transported.max((f1 - f2).op_norm());
        total = &(&total + f1) + f2;
    }
    let unit = (&total - &AlgElement::one(&alg)).op_norm();
    let element_bound = (2.0 * eps).sqrt();
    let derived_bound = 2.0 * (t.d() + 1) as f64 * element_bound;
    Ok(NonperiodicityReport {
        eps,
        d: t.d(),
        orth,
        unit,
        shift,
        transported,
        candidate_admissible: orth < eps && unit < eps && shift < eps,
        element_bound,
        derived_bound,
        contradiction: derived_bound < 1.0 - eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::module::ModuleSpace;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shift_tests(h: &Correspondence, rng: &mut ChaCha8Rng) -> Vec<ModuleVector> {
        let mut v: Vec<ModuleVector> = (0..5).map(|_| h.space().random_vector(rng)).collect();
        v.push(h.space().basis_vector(0).unwrap());
        v
    }

    #[test]
    fn trivial_tower() {
        let alg = ScalarAlgebra::new(vec![2]).unwrap();
        let t = RokhlinTower::new(&alg, vec![vec![AlgElement::one(&alg)]]).unwrap();
        let h = Correspondence::identity(&alg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let vs = shift_tests(&h, &mut rng);
        let fs = vec![AlgElement::random(&alg, &mut rng)];
        let d = check_tower(&t, &h, &vs, &fs).unwrap();
        assert_eq!(d, TowerDefects { orth: 0.0, unit: 0.0, shift: 0.0, commute: 0.0 });
    }

    #[test]
    fn shift_fixture() {
        let t = synthesize_cyclic_tower(6, 3, 0).unwrap();
        let alg = t.algebra().clone();
        let expect = [[0, 3], [2, 5], [1, 4]];
        for (k, e) in expect.iter().enumerate() {
            assert!(t.f(0, k).approx_eq(&AlgElement::indicator(&alg, e).unwrap(), 0.0));
        }
        let h = cyclic_shift_correspondence(6, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vs = shift_tests(&h, &mut rng);
        let fs: Vec<_> = (0..4).map(|_| AlgElement::random(&alg, &mut rng)).collect();
        let d = check_tower(&t, &h, &vs, &fs).unwrap();
        assert!(d.max() <= 1e-12);
        let h2 = cyclic_shift_correspondence(6, 2).unwrap();
        let one = vec![h2.space().basis_vector(0).unwrap()];
        let d2 = check_tower(&t, &h2, &one, &fs).unwrap();
        assert!((d2.shift - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn synthesis_cases() {
        for n in [5, 9, 17, 33] {
            let t = synthesize_cyclic_tower(n, n, 0).unwrap();
            let h = cyclic_shift_correspondence(n, 1).unwrap();
            let vs = vec![h.space().basis_vector(0).unwrap()];
            assert_eq!(check_tower(&t, &h, &vs, &[]).unwrap().max(), 0.0);
        }
        assert!(matches!(synthesize_cyclic_tower(10, 3, 0), Err(Error::Infeasible(_))));
        for (n, p) in [(10, 3), (40, 3), (101, 7)] {
            let t = synthesize_cyclic_tower(n, p, 1).unwrap();
            let h = cyclic_shift_correspondence(n, 1).unwrap();
            let vs = vec![h.space().basis_vector(0).unwrap()];
            let d = check_tower(&t, &h, &vs, &[]).unwrap();
            assert!(d.orth == 0.0 && d.unit <= 1e-12);
            assert!(d.shift <= 2.0 * std::f64::consts::PI * p as f64 / n as f64);
        }
    }

    #[test]
    fn bump_values() {
        assert_eq!(bump_vector(5).unwrap(), vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        assert_eq!(bump(7, 9).unwrap(), 0.0);
        assert!(matches!(bump(4, 1), Err(Error::Argument(_))));
        for p in (3..=199).step_by(2) {
            let h = (p - 1) / 2;
            assert_eq!(bump(p, 0).unwrap(), 0.0);
            assert_eq!(bump(p, h).unwrap(), 1.0);
            for k in 0..p {
                assert_eq!(bump(p, k).unwrap(), bump(p, p - 1 - k).unwrap());
            }
            for k in 0..=h {
                assert_eq!(bump(p, k).unwrap() + bump(p, h + k).unwrap(), 1.0);
            }
            let sum: f64 = bump_vector(p).unwrap().iter().sum();
            assert!((sum - h as f64).abs() < 1e-9);
        }
        assert_eq!(bump_partition_defect(3).unwrap(), 1.0);
        assert_eq!(bump_partition_defect(5).unwrap(), 0.5);
    }

    #[test]
    fn bump_lemma_examples() {
        let alg = ScalarAlgebra::commutative(1).unwrap();
        let ones = vec![AlgElement::one(&alg); 5];
        let r = bump_lemma_check(5, 1, &ones).unwrap();
        assert!((r.gap - 1.0).abs() <= 1e-12 && (r.bound - 1.0).abs() <= 1e-12 && r.holds);
        // Σ_k 2 d_5(k) = 4 ≠ 5: the N = 0 case misses by one copy of f
        let r0 = bump_lemma_check(5, 0, &ones).unwrap();
        assert!((r0.gap - 1.0).abs() <= 1e-12 && !r0.holds && r0.holds_corrected);
        // an orthogonal family only loses 2/(p−1)
        let alg5 = ScalarAlgebra::commutative(5).unwrap();
        let chi: Vec<_> = (0..5).map(|k| AlgElement::indicator(&alg5, &[k]).unwrap()).collect();
        let r = bump_lemma_check(5, 0, &chi).unwrap();
        assert!((r.gap - 0.5).abs() <= 1e-12 && (r.correction - 0.5).abs() <= 1e-12);

        let alg6 = ScalarAlgebra::commutative(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let f: Vec<_> = (0..33).map(|_| AlgElement::random_positive_contraction(&alg6, &mut rng)).collect();
            let r = bump_lemma_check(33, 2, &f).unwrap();
            assert!(r.holds_corrected);
        }
    }

    #[test]
    fn obstruction_examples() {
        let alg = ScalarAlgebra::new(vec![2]).unwrap();
        let h = Correspondence::identity(&alg);
        let u = ModOperator::identity(h.space());
        let half = AlgElement::one(&alg).scale(c(0.5));
        let t = RokhlinTower::new(&alg, vec![vec![half.clone(), half]]).unwrap();
        let r = nonperiodicity_obstruction(&t, &h, &u, 0.001).unwrap();
        assert!((r.derived_bound - 2.0 * 0.002f64.sqrt()).abs() < 1e-15);
        assert!(r.contradiction && !r.candidate_admissible);

        let t3 = RokhlinTower::new(&alg, vec![vec![AlgElement::zero(&alg); 2]; 3]).unwrap();
        let r = nonperiodicity_obstruction(&t3, &h, &u, 0.5).unwrap();
        assert!((r.derived_bound - 6.0).abs() < 1e-12 && !r.contradiction);

        let space = ModuleSpace::free(&alg, 1);
        let bad = ModOperator::new(h.space(), &space, AMatrix::identity(&alg, 1).scale(c(0.5f64.sqrt()))).unwrap();
        assert!(matches!(nonperiodicity_obstruction(&t, &h, &bad, 0.1), Err(Error::Witness(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lifted_sqrt_relation(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = [6usize, 9, 12][rng.gen_range(0..3)];
            let t = synthesize_cyclic_tower(n, 3, 0).unwrap();
            let h = Arc::new(cyclic_shift_correspondence(n, 1).unwrap());
            let cache = TensorPowerCache::new(h.clone(), 3).unwrap();
            let alg = t.algebra().clone();
            let len = rng.gen_range(1..=3);
            let mut z = cache.vacuum(&AlgElement::random(&alg, &mut rng));
            for _ in 0..len {
                let f = TensorVector { degree: 1, coords: h.space().random_vector(&mut rng).coords().clone() };
                z = cache.tensor(&f, &z).unwrap();
            }
            let d = lifted_relation_defect(&t, &cache, &z, |f| f.sqrt_positive()).unwrap();
            prop_assert!(d <= 1e-9);
        }

        #[test]
        fn defects_invariant_under_relabelling(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(6..20);
            let p = rng.gen_range(2..5);
            let t = synthesize_cyclic_tower(n, p, 1).unwrap();
            let h = cyclic_shift_correspondence(n, 1).unwrap();
            let vs = shift_tests(&h, &mut rng);
            let alg = t.algebra().clone();
            let fs = vec![AlgElement::random(&alg, &mut rng)];
            let base = check_tower(&t, &h, &vs, &fs).unwrap();
            let off = rng.gen_range(0..p);
            let mut rows: Vec<Vec<AlgElement>> = t.elements().iter()
                .map(|r| (0..p).map(|k| r[(k + off) % p].clone()).collect())
                .collect();
            rows.reverse();
            let moved = RokhlinTower::new(&alg, rows).unwrap();
            let other = check_tower(&moved, &h, &vs, &fs).unwrap();
            prop_assert!((base.max() - other.max()).abs() <= 1e-12);
            prop_assert!((base.shift - other.shift).abs() <= 1e-12);
        }

        #[test]
        fn bump_lemma_within_corrected_bound(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = [5usize, 9, 17, 33][rng.gen_range(0..4)];
            let n = rng.gen_range(0..3);
            let alg = ScalarAlgebra::new(vec![1, 2]).unwrap();
            let f: Vec<_> = (0..p).map(|_| AlgElement::random_positive_contraction(&alg, &mut rng)).collect();
            prop_assert!(bump_lemma_check(p, n, &f).unwrap().holds_corrected);
        }
    }
}

//! Truncated Fock modules `F_q(H) = ⊕_{k<q} H^{⊗k}` and operators on them.
//!
//! A [`GradedOperator`] stores the blocks `H^{⊗s} → H^{⊗t}` of the compression
//! `P_q X P_q` of an operator `X` on the full Fock module, together with the
//! degree shifts `t − s` that `X` can have and an exact window `w ≤ q`: the
//! compression to degrees `< w` coincides with the true compression `P_w X P_w`.
//! Operators built from closed formulas are exact on the whole cutoff; a
//! product loses the degrees that may have passed through the discarded part.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::algebra::{c, same_algebra, spectral_norm, AlgElement, ScalarAlgebra, C64};
use crate::amatrix::AMatrix;
use crate::correspondence::{Correspondence, TensorPowerCache, TensorVector};
use crate::error::{argument, structural, Error, Result};
use crate::rokhlin::bump;

/// `F_q(H)` together with the tensor powers it is built from.
#[derive(Clone, Debug)]
pub struct FockTruncation {
    cache: Arc<TensorPowerCache>,
    cutoff: usize,
}

impl FockTruncation {
    pub fn new(h: Arc<Correspondence>, cutoff: usize) -> Result<Self> {
        let cache = TensorPowerCache::new(h, cutoff.saturating_sub(1))?;
        Self::with_cache(Arc::new(cache), cutoff)
    }

    pub fn with_cache(cache: Arc<TensorPowerCache>, cutoff: usize) -> Result<Self> {
        if cutoff == 0 {
            return Err(argument!("cutoff must be at least 1"));
        }
        if cache.k_max() + 1 < cutoff {
            return Err(argument!(
                "cutoff {cutoff} needs tensor powers up to {}, cache holds {}",
                cutoff - 1,
                cache.k_max()
            ));
        }
        Ok(FockTruncation { cache, cutoff })
    }

    pub fn cache(&self) -> &Arc<TensorPowerCache> {
        &self.cache
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        self.cache.algebra()
    }

    pub fn ranks(&self) -> Vec<usize> {
        (0..self.cutoff).map(|k| self.cache.rank(k).expect("cached")).collect()
    }

    pub fn total_rank(&self) -> usize {
        self.ranks().iter().sum()
    }

    /// Module offset of each degree inside `A^{total_rank}`.
    pub fn degree_offsets(&self) -> Vec<usize> {
        offsets(&self.ranks())
    }

    /// A smaller truncation sharing the same cache.
    pub fn truncate(&self, cutoff: usize) -> Result<Self> {
        if cutoff > self.cutoff {
            return Err(argument!("cannot enlarge a truncation from {} to {cutoff}", self.cutoff));
        }
        Self::with_cache(self.cache.clone(), cutoff)
    }
}

fn offsets(ranks: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    ranks
        .iter()
        .map(|r| {
            let o = acc;
            acc += r;
            o
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct GradedOperator {
    algebra: Arc<ScalarAlgebra>,
    ranks: Vec<usize>,
    blocks: BTreeMap<(usize, usize), AMatrix>,
    shifts: BTreeSet<isize>,
    window: usize,
}

impl GradedOperator {
    pub fn zero(trunc: &FockTruncation) -> Self {
        GradedOperator {
            algebra: trunc.algebra().clone(),
            ranks: trunc.ranks(),
            blocks: BTreeMap::new(),
            shifts: BTreeSet::new(),
            window: trunc.cutoff(),
        }
    }

    fn homogeneous(trunc: &FockTruncation, shift: isize, blocks: BTreeMap<(usize, usize), AMatrix>) -> Self {
        GradedOperator {
            algebra: trunc.algebra().clone(),
            ranks: trunc.ranks(),
            blocks,
            shifts: [shift].into_iter().collect(),
            window: trunc.cutoff(),
        }
    }

    pub fn identity(trunc: &FockTruncation) -> Result<Self> {
        Self::algebra_action(trunc, &AlgElement::one(trunc.algebra()))
    }

    /// Left multiplication by `a`, acting as `ω_k(a)` on degree `k`.
    pub fn algebra_action(trunc: &FockTruncation, a: &AlgElement) -> Result<Self> {
        let blocks = (0..trunc.cutoff())
            .into_par_iter()
            .map(|k| Ok(((k, k), trunc.cache().omega(k, a)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self::homogeneous(trunc, 0, blocks))
    }

    /// Creation operator `T_x(ζ) = x ⊗ ζ`.
    pub fn creation(trunc: &FockTruncation, x: &TensorVector) -> Result<Self> {
        let j = x.degree;
        let q = trunc.cutoff();
        if j >= q {
            return Err(Error::Degenerate(format!("creation by a degree-{j} tensor has no block below cutoff {q}")));
        }
        let blocks = (0..q - j)
            .into_par_iter()
            .map(|s| Ok(((s + j, s), trunc.cache().amplify(s, &x.coords)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self::homogeneous(trunc, j as isize, blocks))
    }

    /// `T_x T_y*`, whose block at source degree `|y| + k` is `e_{x,y} ⊗ 1_k`.
    pub fn band(trunc: &FockTruncation, x: &TensorVector, y: &TensorVector) -> Result<Self> {
        let q = trunc.cutoff();
        let (dx, dy) = (x.degree, y.degree);
        if dx >= q || dy >= q {
            return Err(Error::Degenerate(format!(
                "band with degrees ({dx},{dy}) has no block below cutoff {q}"
            )));
        }
        let kmax = q - dx.max(dy);
        let blocks = (0..kmax)
            .into_par_iter()
            .map(|k| {
                let ax = trunc.cache().amplify(k, &x.coords)?;
                let ay = trunc.cache().amplify(k, &y.coords)?;
                Ok(((dx + k, dy + k), ax.mul_adjoint(&ay)?))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(Self::homogeneous(trunc, dx as isize - dy as isize, blocks))
    }

    /// The finite-rank operator `e_{x,y} ⊗ 1_k`.
    pub fn dp_term(trunc: &FockTruncation, x: &TensorVector, y: &TensorVector, k: usize) -> Result<Self> {
        let q = trunc.cutoff();
        let shift = x.degree as isize - y.degree as isize;
        let mut blocks = BTreeMap::new();
        if x.degree + k < q && y.degree + k < q {
            let ax = trunc.cache().amplify(k, &x.coords)?;
            let ay = trunc.cache().amplify(k, &y.coords)?;
            blocks.insert((x.degree + k, y.degree + k), ax.mul_adjoint(&ay)?);
        }
        Ok(Self::homogeneous(trunc, shift, blocks))
    }

    /// Degree-preserving operator from per-degree blocks.
    pub fn diagonal(trunc: &FockTruncation, blocks: Vec<AMatrix>) -> Result<Self> {
        let ranks = trunc.ranks();
        if blocks.len() != ranks.len() {
            return Err(structural!("expected {} diagonal blocks, got {}", ranks.len(), blocks.len()));
        }
        let mut map = BTreeMap::new();
        for (k, b) in blocks.into_iter().enumerate() {
            if b.rows() != ranks[k] || b.cols() != ranks[k] {
                return Err(structural!("diagonal block {k} has the wrong shape"));
            }
            map.insert((k, k), b);
        }
        Ok(Self::homogeneous(trunc, 0, map))
    }

    pub fn algebra(&self) -> &Arc<ScalarAlgebra> {
        &self.algebra
    }

    pub fn cutoff(&self) -> usize {
        self.ranks.len()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn shifts(&self) -> &BTreeSet<isize> {
        &self.shifts
    }

    pub fn block(&self, target: usize, source: usize) -> Option<&AMatrix> {
        self.blocks.get(&(target, source))
    }

    /// Blocks as `((target, source), matrix)`.
    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &AMatrix)> {
        self.blocks.iter()
    }

    /// `(source, shift)` pairs whose block is not represented exactly:
    /// either its target lies beyond the cutoff or it leaves the exact window.
    pub fn overflow_blocks(&self) -> Vec<(usize, isize)> {
        let q = self.cutoff() as isize;
        let w = self.window as isize;
        let mut out = Vec::new();
        for s in 0..self.cutoff() {
            for &sh in &self.shifts {
                let t = s as isize + sh;
                if t < 0 {
                    continue;
                }
                if t >= q || (s as isize) >= w || t >= w {
                    out.push((s, sh));
                }
            }
        }
        out
    }

    fn check_compatible(&self, other: &GradedOperator) -> Result<()> {
        if !same_algebra(&self.algebra, &other.algebra) || self.ranks != other.ranks {
            return Err(structural!("graded operators live on different truncations"));
        }
        Ok(())
    }

    pub fn scale(&self, z: C64) -> GradedOperator {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b = b.scale(z);
        }
        out
    }

    pub fn add(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.axpy(c(1.0), other)
    }

    pub fn sub(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.axpy(c(-1.0), other)
    }

    /// `self + z·other`.
    pub fn axpy(&self, z: C64, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.add_assign(z, other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, z: C64, other: &GradedOperator) -> Result<()> {
        self.check_compatible(other)?;
        for (key, b) in &other.blocks {
            match self.blocks.get_mut(key) {
                Some(a) => a.axpy(z, b)?,
                None => {
                    self.blocks.insert(*key, b.scale(z));
                }
            }
        }
        self.shifts.extend(other.shifts.iter().copied());
        self.window = self.window.min(other.window);
        Ok(())
    }

    pub fn adjoint(&self) -> GradedOperator {
        GradedOperator {
            algebra: self.algebra.clone(),
            ranks: self.ranks.clone(),
            blocks: self.blocks.iter().map(|(&(t, s), b)| ((s, t), b.adjoint())).collect(),
            shifts: self.shifts.iter().map(|s| -s).collect(),
            window: self.window,
        }
    }

    /// `self ∘ other`; exact on degrees below `min(w_self, w_other) − s⁺`,
    /// where `s⁺` is the largest upward shift of `other`.
    pub fn compose(&self, other: &GradedOperator) -> Result<GradedOperator> {
        self.check_compatible(other)?;
        let mut by_source: BTreeMap<usize, Vec<(usize, &AMatrix)>> = BTreeMap::new();
        for (&(t, s), b) in &self.blocks {
            by_source.entry(s).or_default().push((t, b));
        }
        let products: Vec<((usize, usize), AMatrix)> = other
            .blocks
            .par_iter()
            .map(|(&(mid, s), b)| {
                let mut v = Vec::new();
                if let Some(list) = by_source.get(&mid) {
                    for &(t, a) in list {
                        v.push(((t, s), a.try_mul(b)?));
                    }
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        let mut blocks: BTreeMap<(usize, usize), AMatrix> = BTreeMap::new();
        for (key, m) in products {
            match blocks.get_mut(&key) {
                Some(acc) => acc.axpy(c(1.0), &m)?,
                None => {
                    blocks.insert(key, m);
                }
            }
        }
        let mut shifts = BTreeSet::new();
        for a in &self.shifts {
            for b in &other.shifts {
                shifts.insert(a + b);
            }
        }
        let up = other.shifts.iter().copied().filter(|&s| s > 0).max().unwrap_or(0) as usize;
        let window = self.window.min(other.window).saturating_sub(up);
        Ok(GradedOperator {
            algebra: self.algebra.clone(),
            ranks: self.ranks.clone(),
            blocks,
            shifts,
            window,
        })
    }

    /// `ω(a)·self`, computed blockwise.
    pub fn left_mul(&self, cache: &TensorPowerCache, a: &AlgElement) -> Result<GradedOperator> {
        let mut out = self.clone();
        for (&(t, _), b) in out.blocks.iter_mut() {
            *b = cache.omega(t, a)?.try_mul(b)?;
        }
        Ok(out)
    }

    /// `self·ω(a)`, computed blockwise.
    pub fn right_mul(&self, cache: &TensorPowerCache, a: &AlgElement) -> Result<GradedOperator> {
        let mut out = self.clone();
        for (&(_, s), b) in out.blocks.iter_mut() {
            *b = b.try_mul(&cache.omega(s, a)?)?;
        }
        Ok(out)
    }

    /// The compression to degrees below `q`.
    pub fn restrict(&self, q: usize) -> GradedOperator {
        let q = q.min(self.cutoff());
        GradedOperator {
            algebra: self.algebra.clone(),
            ranks: self.ranks[..q].to_vec(),
            blocks: self
                .blocks
                .iter()
                .filter(|(&(t, s), _)| t < q && s < q)
                .map(|(k, b)| (*k, b.clone()))
                .collect(),
            shifts: self.shifts.clone(),
            window: self.window.min(q),
        }
    }

    /// Sandwich by the scalars `λ_t` on the target and `λ_s` on the source.
    pub fn weight(&self, f: impl Fn(usize) -> f64) -> GradedOperator {
        let mut out = self.clone();
        for (&(t, s), b) in out.blocks.iter_mut() {
            *b = b.scale(c(f(t) * f(s)));
        }
        out.blocks.retain(|_, b| !b.is_zero());
        out
    }

    /// Applies the operator to a homogeneous vector, returning one component
    /// per target degree.
    pub fn apply(&self, x: &TensorVector) -> Result<Vec<TensorVector>> {
        let mut out = Vec::new();
        for (&(t, s), b) in &self.blocks {
            if s == x.degree {
                out.push(TensorVector {
                    degree: t,
                    coords: b.try_mul(&x.coords)?,
                });
            }
        }
        Ok(out)
    }

    /// Dense `r × r` matrix over `A` on the degrees below `q`.
    pub fn to_amatrix(&self, q: usize) -> AMatrix {
        let q = q.min(self.cutoff());
        let ranks = &self.ranks[..q];
        let off = offsets(ranks);
        let r: usize = ranks.iter().sum();
        let mut out = AMatrix::zeros(&self.algebra, r, r);
        for (&(t, s), b) in &self.blocks {
            if t < q && s < q {
                out.add_submatrix(off[t], off[s], c(1.0), b);
            }
        }
        out
    }

    /// Norm of the compression to the exact window: a lower bound for the
    /// norm of the operator on the full Fock module.
    pub fn compressed_norm(&self) -> f64 {
        self.norm_below(self.window)
    }

    /// Norm of the compression to degrees below `q` (no exactness check).
    pub fn norm_below(&self, q: usize) -> f64 {
        let inside: Vec<(&(usize, usize), &AMatrix)> =
            self.blocks.iter().filter(|(&(t, s), _)| t < q && s < q).collect();
        let mut sources = BTreeSet::new();
        let mut targets = BTreeSet::new();
        let separated = inside
            .iter()
            .all(|(&(t, s), _)| sources.insert(s) && targets.insert(t));
        if separated {
            return inside.par_iter().map(|(_, b)| b.norm()).reduce(|| 0.0, f64::max);
        }
        let dense = self.to_amatrix(q);
        dense.blocks().par_iter().map(spectral_norm).reduce(|| 0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &GradedOperator) -> f64 {
        let keys: BTreeSet<_> = self.blocks.keys().chain(other.blocks.keys()).collect();
        keys.into_iter()
            .map(|k| match (self.blocks.get(k), other.blocks.get(k)) {
                (Some(a), Some(b)) => a.max_abs_diff(b),
                (Some(a), None) | (None, Some(a)) => a.norm(),
                (None, None) => 0.0,
            })
            .fold(0.0, f64::max)
    }

    /// Largest difference over blocks with both degrees below `w`.
    pub fn max_abs_diff_below(&self, other: &GradedOperator, w: usize) -> f64 {
        self.restrict(w).max_abs_diff(&other.restrict(w))
    }
}

/// One term `coeff · T_x T_y*`.
#[derive(Clone, Debug)]
pub struct BandTerm {
    pub coeff: C64,
    pub x: TensorVector,
    pub y: TensorVector,
}

impl BandTerm {
    pub fn new(x: TensorVector, y: TensorVector) -> Self {
        BandTerm { coeff: c(1.0), x, y }
    }

    /// `a · T_x T_y* · b = T_{a·x} T_{b*·y}*`.
    pub fn with_multipliers(
        cache: &TensorPowerCache,
        left: &AlgElement,
        x: &TensorVector,
        y: &TensorVector,
        right: &AlgElement,
    ) -> Result<Self> {
        Ok(BandTerm {
            coeff: c(1.0),
            x: cache.left_mul(left, x)?,
            y: cache.left_mul(&right.adjoint(), y)?,
        })
    }

    pub fn length(&self) -> usize {
        self.x.degree.max(self.y.degree)
    }
}

/// A finite linear combination of band operators.
#[derive(Clone, Debug, Default)]
pub struct BandSum {
    pub terms: Vec<BandTerm>,
}

impl BandSum {
    pub fn single(t: BandTerm) -> Self {
        BandSum { terms: vec![t] }
    }

    pub fn to_operator(&self, trunc: &FockTruncation) -> Result<GradedOperator> {
        let mut out = GradedOperator::zero(trunc);
        for t in &self.terms {
            out.add_assign(t.coeff, &GradedOperator::band(trunc, &t.x, &t.y)?)?;
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> BandSum {
        BandSum {
            terms: self
                .terms
                .iter()
                .map(|t| BandTerm {
                    coeff: t.coeff.conj(),
                    x: t.y.clone(),
                    y: t.x.clone(),
                })
                .collect(),
        }
    }

    /// Largest tensor length appearing.
    pub fn max_length(&self) -> usize {
        self.terms.iter().map(BandTerm::length).max().unwrap_or(0)
    }
}

/// `coeff · e_{x,y} ⊗ 1_{H^{⊗k}}`.
#[derive(Clone, Debug)]
pub struct DpTerm {
    pub coeff: C64,
    pub x: TensorVector,
    pub y: TensorVector,
    pub k: usize,
}

impl DpTerm {
    pub fn reach(&self) -> usize {
        self.x.degree.max(self.y.degree) + self.k
    }
}

/// An element of `D_p(H) = span{e_{x,y} ⊗ 1_k : max(|x|,|y|) + k < p}`.
#[derive(Clone, Debug)]
pub struct DpElement {
    pub p: usize,
    pub terms: Vec<DpTerm>,
}

impl DpElement {
    pub fn new(p: usize, terms: Vec<DpTerm>) -> Result<Self> {
        for t in &terms {
            if t.reach() >= p {
                return Err(argument!(
                    "term with degrees ({},{}) and k = {} does not fit below p = {p}",
                    t.x.degree,
                    t.y.degree,
                    t.k
                ));
            }
        }
        Ok(DpElement { p, terms })
    }

    pub fn single(p: usize, x: TensorVector, y: TensorVector, k: usize) -> Result<Self> {
        Self::new(p, vec![DpTerm { coeff: c(1.0), x, y, k }])
    }

    pub fn adjoint(&self) -> DpElement {
        DpElement {
            p: self.p,
            terms: self
                .terms
                .iter()
                .map(|t| DpTerm {
                    coeff: t.coeff.conj(),
                    x: t.y.clone(),
                    y: t.x.clone(),
                    k: t.k,
                })
                .collect(),
        }
    }

    pub fn scale(&self, z: C64) -> DpElement {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coeff *= z;
        }
        out
    }

    pub fn add(&self, other: &DpElement) -> Result<DpElement> {
        if self.p != other.p {
            return Err(structural!("elements of D_{} and D_{}", self.p, other.p));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(DpElement { p: self.p, terms })
    }

    /// Operator on `F_q(H)`, `q ≥ p`.
    pub fn to_operator(&self, trunc: &FockTruncation) -> Result<GradedOperator> {
        if trunc.cutoff() < self.p {
            return Err(Error::Cutoff(format!("cutoff {} below p = {}", trunc.cutoff(), self.p)));
        }
        let mut out = GradedOperator::zero(trunc);
        for t in &self.terms {
            out.add_assign(t.coeff, &GradedOperator::dp_term(trunc, &t.x, &t.y, t.k)?)?;
        }
        Ok(out)
    }

    /// Product re-expanded in the spanning family, using
    /// `(e_{x,y}⊗1_k)(e_{u,v}⊗1_j) = e_{(e_{x,y}⊗1_t)u, v}⊗1_j` when
    /// `|u| = |y| + t`, and `e_{x,(e_{v,u}⊗1_t)y}⊗1_k` when `|y| = |u| + t`.
    pub fn mul(&self, other: &DpElement, cache: &TensorPowerCache) -> Result<DpElement> {
        if self.p != other.p {
            return Err(structural!("elements of D_{} and D_{}", self.p, other.p));
        }
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                if a.y.degree + a.k != b.x.degree + b.k {
                    continue;
                }
                let coeff = a.coeff * b.coeff;
                if b.x.degree >= a.y.degree {
                    let t = b.x.degree - a.y.degree;
                    let e = cache.amplify(t, &a.x.coords)?.mul_adjoint(&cache.amplify(t, &a.y.coords)?)?;
                    let x = TensorVector {
                        degree: a.x.degree + t,
                        coords: e.try_mul(&b.x.coords)?,
                    };
                    terms.push(DpTerm {
                        coeff,
                        x,
                        y: b.y.clone(),
                        k: b.k,
                    });
                } else {
                    let t = a.y.degree - b.x.degree;
                    let e = cache.amplify(t, &b.y.coords)?.mul_adjoint(&cache.amplify(t, &b.x.coords)?)?;
                    let y = TensorVector {
                        degree: b.y.degree + t,
                        coords: e.try_mul(&a.y.coords)?,
                    };
                    terms.push(DpTerm {
                        coeff,
                        x: a.x.clone(),
                        y,
                        k: a.k,
                    });
                }
            }
        }
        DpElement::new(self.p, terms)
    }
}

/// `φ(T_xT_y*) = Σ_k √(d_p(k+|x|) d_p(k+|y|)) e_{x,y} ⊗ 1_k`, the compression
/// `√Δ P (·) P √Δ` to `F_p(H)` with `Δ = diag(d_p(0), …, d_p(p−1))`.
pub fn phi_compression(t: &BandSum, p: usize) -> Result<DpElement> {
    bump(p, 0)?;
    let mut terms = Vec::new();
    for term in &t.terms {
        let (dx, dy) = (term.x.degree, term.y.degree);
        let top = dx.max(dy);
        for k in 0..p.saturating_sub(top) {
            let w = (bump(p, k + dx)? * bump(p, k + dy)?).sqrt();
            if w == 0.0 {
                continue;
            }
            terms.push(DpTerm {
                coeff: term.coeff * w,
                x: term.x.clone(),
                y: term.y.clone(),
                k,
            });
        }
    }
    DpElement::new(p, terms)
}

/// `√Δ P X P √Δ` for an arbitrary graded operator, as an operator on `F_p(H)`.
pub fn phi_operator(x: &GradedOperator, p: usize) -> Result<GradedOperator> {
    bump(p, 0)?;
    if x.window() < p {
        return Err(Error::Cutoff(format!("operator is exact only below degree {}, need {p}", x.window())));
    }
    let r = x.restrict(p);
    Ok(r.weight(|k| bump(p, k).expect("odd p").sqrt()))
}

/// Spanning elements `e_{ζ,η} ⊗ 1_k` over basis words with `max(|ζ|,|η|) + k < p`,
/// at most `limit` of them, in a fixed order.
pub fn basis_spanning_family(cache: &TensorPowerCache, p: usize, limit: usize) -> Result<Vec<DpElement>> {
    let m = cache.base().rank();
    let words = words_below(m, p);
    let mut out = Vec::new();
    'outer: for k in 0..p {
        for w in &words {
            for z in &words {
                if w.len().max(z.len()) + k >= p {
                    continue;
                }
                if out.len() >= limit {
                    break 'outer;
                }
                out.push(DpElement::single(p, cache.word(w)?, cache.word(z)?, k)?);
            }
        }
    }
    Ok(out)
}

/// All words over `0..m` of length `< p`, shortest first, lexicographic within a length.
pub fn words_below(m: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 1..p {
        let mut next = Vec::with_capacity(layer.len() * m);
        for w in &layer {
            for i in 0..m {
                let mut v = w.clone();
                v.push(i);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Which approximate unit the quasicentral check uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuasicentralUnit {
    /// `q_n = Σ e_{ζ,ζ}` over basis words whose letters are among the first `n`.
    BasisTruncation,
    /// The unit of `B(F_p(H))`, available for every f.g. projective module.
    Identity,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuasicentralReport {
    pub unit: QuasicentralUnit,
    pub p: usize,
    pub n: Option<usize>,
    pub elements: usize,
    pub max_defect: f64,
    pub defects: Vec<f64>,
}

/// `max_e ‖[q_n, e]‖` over the given spanning elements of `D_p(H)`.
///
/// With `n = None` the unit of `B(F_p(H))` is used. Otherwise the module must
/// be free so that the standard basis serves as designated basis.
pub fn quasicentral_check(
    cache: &Arc<TensorPowerCache>,
    p: usize,
    n: Option<usize>,
    family: &[DpElement],
) -> Result<QuasicentralReport> {
    let trunc = FockTruncation::with_cache(cache.clone(), p)?;
    let (unit_kind, unit) = match n {
        None => (QuasicentralUnit::Identity, GradedOperator::identity(&trunc)?),
        Some(n) => {
            let base = cache.base();
            if !base.has_designated_basis() {
                return Err(Error::Unsupported(
                    "basis truncations need a free module; use the unit for projective modules".into(),
                ));
            }
            let m = base.rank();
            let alg = cache.algebra();
            let blocks = (0..p)
                .map(|k| {
                    let r = m.pow(k as u32);
                    let mut d = AMatrix::zeros(alg, r, r);
                    let one = AlgElement::one(alg);
                    for idx in 0..r {
                        let mut rest = idx;
                        let mut keep = true;
                        for _ in 0..k {
                            if rest % m >= n {
                                keep = false;
                            }
                            rest /= m;
                        }
                        if keep {
                            d.set_entry(idx, idx, &one).expect("in range");
                        }
                    }
                    d
                })
                .collect();
            (QuasicentralUnit::BasisTruncation, GradedOperator::diagonal(&trunc, blocks)?)
        }
    };
    let defects = family
        .par_iter()
        .map(|e| {
            if e.p != p {
                return Err(structural!("element of D_{} tested against p = {p}", e.p));
            }
            let op = e.to_operator(&trunc)?;
            let comm = unit.compose(&op)?.sub(&op.compose(&unit)?)?;
            Ok(comm.norm_below(p))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(QuasicentralReport {
        unit: unit_kind,
        p,
        n,
        elements: family.len(),
        max_defect: defects.iter().copied().fold(0.0, f64::max),
        defects,
    })
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub q: usize,
    pub lower_bound: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub final_value: f64,
    pub converged: bool,
    pub tol: f64,
}

pub const DEFAULT_SWEEP_TOL: f64 = 1e-6;

/// Norms of the compressions `P_q T P_q` for increasing `q`.
///
/// Values must be nondecreasing; a drop beyond `1e-8` signals a bookkeeping
/// bug and is reported as a consistency error. Convergence is declared once
/// three consecutive values agree within `tol`.
pub fn compression_norm_sweep(
    build: impl Fn(usize) -> Result<GradedOperator> + Sync,
    qs: &[usize],
    tol: f64,
) -> Result<SweepResult> {
    let values = qs
        .par_iter()
        .map(|&q| build(q).map(|op| op.compressed_norm()))
        .collect::<Result<Vec<f64>>>()?;
    let mut rows = Vec::with_capacity(qs.len());
    let mut converged = false;
    for (i, (&q, &v)) in qs.iter().zip(&values).enumerate() {
        if i > 0 && v < values[i - 1] - 1e-8 {
            return Err(Error::Consistency(format!(
                "compression norm dropped from {} at q = {} to {v} at q = {q}",
                values[i - 1],
                qs[i - 1]
            )));
        }
        if i >= 2 {
            let lo = values[i - 2..=i].iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values[i - 2..=i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo < tol {
                converged = true;
            }
        }
        rows.push(SweepRow {
            q,
            lower_bound: v,
            converged,
        });
    }
    Ok(SweepResult {
        final_value: values.last().copied().unwrap_or(0.0),
        rows,
        converged,
        tol,
    })
}

/// Dense complex matrix of a graded operator on `⊕_{k<q}` in the faithful
/// representation; rows and columns follow `(algebra block, degree, coordinate)`.
pub fn faithful_matrix(op: &GradedOperator, q: usize) -> DMatrix<C64> {
    op.to_amatrix(q).to_faithful()
}


/// Worst violations of the Toeplitz identities on one random instance.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RelationDefects {
    pub seed: u64,
    pub blocks: Vec<usize>,
    pub rank: usize,
    pub cutoff: usize,
    /// `‖T_{zx+y} − zT_x − T_y‖`.
    pub linearity: f64,
    /// `‖T_{a·x·b} − aT_xb‖`.
    pub bimodularity: f64,
    /// `‖T_x*T_y − ⟨x,y⟩‖` on the exact window.
    pub inner: f64,
}

impl RelationDefects {
    pub fn max(&self) -> f64 {
        self.linearity.max(self.bimodularity).max(self.inner)
    }
}

/// A random correspondence (at most 3 blocks of size at most 3, rank at most
/// 2, cutoff at most 6) and random tensors, checked against the Toeplitz
/// identities.
pub fn toeplitz_relations_instance(seed: u64) -> Result<RelationDefects> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=3);
    let blocks: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=3)).collect();
    let alg = ScalarAlgebra::new(blocks.clone())?;
    let rank = rng.gen_range(1..=2);
    let full = rng.gen_bool(0.5);
    let h = Arc::new(Correspondence::random(&alg, rank, full, &mut rng)?);
    let q = rng.gen_range(3..=6);
    let t = FockTruncation::new(h, q)?;
    let cache = t.cache().clone();
    let tensor = |deg: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Result<TensorVector> {
        let mut v = cache.vacuum(&AlgElement::random(&alg, rng));
        for _ in 0..deg {
            let f = TensorVector {
                degree: 1,
                coords: cache.base().space().random_vector(rng).coords().clone(),
            };
            v = cache.tensor(&f, &v)?;
        }
        Ok(v)
    };
    let deg = rng.gen_range(1..q.min(4));
    let x = tensor(deg, &mut rng)?;
    let y = tensor(deg, &mut rng)?;
    let a = AlgElement::random(&alg, &mut rng);
    let b = AlgElement::random(&alg, &mut rng);
    let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let tx = GradedOperator::creation(&t, &x)?;
    let ty = GradedOperator::creation(&t, &y)?;
    let lin = GradedOperator::creation(&t, &x.scale(z).add(&y)?)?;
    let linearity = lin.max_abs_diff(&tx.scale(z).add(&ty)?);
    let lhs = GradedOperator::creation(&t, &cache.left_mul(&a, &x.right_mul(&b))?)?;
    let rhs = tx.left_mul(&cache, &a)?.right_mul(&cache, &b)?;
    let bimodularity = lhs.max_abs_diff(&rhs);
    let prod = tx.adjoint().compose(&ty)?;
    let expect = GradedOperator::algebra_action(&t, &x.inner(&y)?)?;
    let inner = prod.max_abs_diff_below(&expect, prod.window());
    Ok(RelationDefects {
        seed,
        blocks,
        rank,
        cutoff: q,
        linearity,
        bimodularity,
        inner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Automorphism;
    use crate::module::rank_one;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shift_corr(n: usize, k: isize) -> Arc<Correspondence> {
        let alg = ScalarAlgebra::commutative(n).unwrap();
        Arc::new(Correspondence::crossed_product(&Automorphism::cyclic_shift(&alg, k).unwrap()).unwrap())
    }

    fn vec1(cache: &TensorPowerCache, a: &AlgElement) -> TensorVector {
        cache.vector(1, AMatrix::from_element(a)).unwrap()
    }

    #[test]
    fn truncation_ranks_and_orthogonality() {
        let alg = ScalarAlgebra::commutative(2).unwrap();
        let id = Automorphism::identity(&alg);
        let h = Arc::new(Correspondence::twisted_free(&[id.clone(), id]).unwrap());
        let t = FockTruncation::new(h, 4).unwrap();
        assert_eq!(t.ranks(), vec![1, 2, 4, 8]);
        assert_eq!(t.total_rank(), 15);
        let a = t.cache().word(&[0]).unwrap();
        let b = t.cache().word(&[0, 1]).unwrap();
        assert!(a.inner(&b).unwrap().approx_eq(&AlgElement::zero(t.algebra()), 0.0));
    }

    #[test]
    fn creation_examples() {
        let h = shift_corr(6, 1);
        let t = FockTruncation::new(h, 4).unwrap();
        let alg = t.algebra().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec1(t.cache(), &AlgElement::random(&alg, &mut rng));
        let tx = GradedOperator::creation(&t, &x).unwrap();
        let out = tx.apply(&t.cache().vacuum(&AlgElement::one(&alg))).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].coords.approx_eq(&x.coords, 0.0));

        let y = vec1(t.cache(), &AlgElement::indicator(&alg, &[0, 1]).unwrap());
        let z = vec1(t.cache(), &AlgElement::indicator(&alg, &[2, 3]).unwrap());
        let ty = GradedOperator::creation(&t, &y).unwrap();
        let tz = GradedOperator::creation(&t, &z).unwrap();
        let p = ty.adjoint().compose(&tz).unwrap();
        assert!(p.norm_below(p.window()) <= 1e-12);

        let short = FockTruncation::new(shift_corr(6, 1), 1).unwrap();
        assert!(matches!(GradedOperator::creation(&short, &x), Err(Error::Degenerate(_))));
    }

    #[test]
    fn band_examples() {
        let h = shift_corr(6, 1);
        let t = FockTruncation::new(h.clone(), 5).unwrap();
        let alg = t.algebra().clone();
        let one = t.cache().vacuum(&AlgElement::one(&alg));
        let b = GradedOperator::band(&t, &one, &one).unwrap();
        assert!(b.max_abs_diff(&GradedOperator::identity(&t).unwrap()) <= 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec1(t.cache(), &AlgElement::random(&alg, &mut rng));
        let y = vec1(t.cache(), &AlgElement::random(&alg, &mut rng));
        let b = GradedOperator::band(&t, &x, &y).unwrap();
        let xv = h.space().vector(x.coords.clone()).unwrap();
        let yv = h.space().vector(y.coords.clone()).unwrap();
        let e = rank_one(&xv, &yv).unwrap();
        assert!(b.block(1, 1).unwrap().approx_eq(e.matrix(), 0.0));
        let via = GradedOperator::creation(&t, &x)
            .unwrap()
            .compose(&GradedOperator::creation(&t, &y).unwrap().adjoint())
            .unwrap();
        assert!(b.max_abs_diff_below(&via, via.window()) <= 1e-10);
    }

    #[test]
    fn band_acts_on_tensors() {
        let alg = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = Arc::new(Correspondence::random(&alg, 2, true, &mut rng).unwrap());
        let t = FockTruncation::new(h.clone(), 4).unwrap();
        let cache = t.cache();
        let v = |rng: &mut ChaCha8Rng| TensorVector { degree: 1, coords: h.space().random_vector(rng).coords().clone() };
        let x = v(&mut rng);
        let y = v(&mut rng);
        let b = GradedOperator::band(&t, &x, &y).unwrap();
        for _ in 0..20 {
            let z = v(&mut rng);
            let yz = cache.tensor(&y, &z).unwrap();
            let out = b.apply(&yz).unwrap();
            let yy = y.inner(&y).unwrap();
            let expected = cache.tensor(&x, &cache.left_mul(&yy, &z).unwrap()).unwrap();
            assert!(out[0].coords.approx_eq(&expected.coords, 1e-9));
        }
    }

    #[test]
    fn phi_examples() {
        let h = shift_corr(5, 1);
        let cache = TensorPowerCache::new(h, 9).unwrap();
        let alg = cache.algebra().clone();
        let one = cache.vacuum(&AlgElement::one(&alg));
        let phi = phi_compression(&BandSum::single(BandTerm::new(one.clone(), one.clone())), 5).unwrap();
        let coef: Vec<f64> = (0..5)
            .map(|k| phi.terms.iter().filter(|t| t.k == k).map(|t| t.coeff.re).sum())
            .collect();
        assert_eq!(coef, vec![0.0, 0.5, 1.0, 0.5, 0.0]);
        assert!(matches!(
            phi_compression(&BandSum::single(BandTerm::new(one.clone(), one.clone())), 6),
            Err(Error::Argument(_))
        ));

        let x = vec1(&cache, &AlgElement::one(&alg));
        let phi = phi_compression(&BandSum::single(BandTerm::new(x.clone(), one)), 9).unwrap();
        for t in &phi.terms {
            let d1 = bump(9, t.k + 1).unwrap();
            assert!((t.coeff.re - d1).abs() <= (2.0f64 / 8.0).sqrt() + 1e-12);
        }
        let phi = phi_compression(&BandSum::single(BandTerm::new(x.clone(), x)), 9).unwrap();
        for t in &phi.terms {
            assert_eq!(t.coeff.re, bump(9, t.k + 1).unwrap());
        }
    }

    #[test]
    fn phi_matches_operator_compression() {
        let alg = ScalarAlgebra::new(vec![1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = Arc::new(Correspondence::random(&alg, 2, false, &mut rng).unwrap());
        let t = FockTruncation::new(h.clone(), 6).unwrap();
        let x = TensorVector { degree: 1, coords: h.space().random_vector(&mut rng).coords().clone() };
        let y = t.cache().tensor(&x, &x).unwrap();
        let band = BandSum::single(BandTerm::new(x, y));
        let direct = phi_operator(&band.to_operator(&t).unwrap(), 5).unwrap();
        let t5 = t.truncate(5).unwrap();
        let via = phi_compression(&band, 5).unwrap().to_operator(&t5).unwrap();
        assert!(direct.max_abs_diff(&via) <= 1e-12);
    }

    #[test]
    fn dp_products_reexpand() {
        let alg = ScalarAlgebra::new(vec![2, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = Arc::new(Correspondence::random(&alg, 2, false, &mut rng).unwrap());
        let p = 5;
        let t = FockTruncation::new(h.clone(), p).unwrap();
        let cache = t.cache();
        let rv = |deg: usize, rng: &mut ChaCha8Rng| {
            let mut v = cache.vacuum(&AlgElement::random(&alg, rng));
            for _ in 0..deg {
                let f = TensorVector { degree: 1, coords: h.space().random_vector(rng).coords().clone() };
                v = cache.tensor(&f, &v).unwrap();
            }
            v
        };
        for _ in 0..30 {
            let (dx, dy, du, dv) = (rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..3), rng.gen_range(0..3));
            let k = rng.gen_range(0..p - usize::max(dx, dy));
            let j_lo = (dy + k).saturating_sub(du);
            if du > dy + k || dv + j_lo >= p || du + j_lo >= p {
                continue;
            }
            let a = DpElement::single(p, rv(dx, &mut rng), rv(dy, &mut rng), k).unwrap();
            let b = DpElement::single(p, rv(du, &mut rng), rv(dv, &mut rng), j_lo).unwrap();
            let prod = a.mul(&b, cache).unwrap().to_operator(&t).unwrap();
            let direct = a.to_operator(&t).unwrap().compose(&b.to_operator(&t).unwrap()).unwrap();
            assert!(prod.max_abs_diff(&direct) <= 1e-9);
        }
    }

    #[test]
    fn sweep_examples() {
        let h = shift_corr(6, 1);
        let cache = Arc::new(TensorPowerCache::new(h, 12).unwrap());
        let alg = cache.algebra().clone();
        let qs: Vec<usize> = (2..=9).collect();
        let id = compression_norm_sweep(
            |q| GradedOperator::identity(&FockTruncation::with_cache(cache.clone(), q)?),
            &qs,
            DEFAULT_SWEEP_TOL,
        )
        .unwrap();
        assert!(id.rows.iter().all(|r| r.lower_bound == 1.0));
        let x = vec1(&cache, &AlgElement::one(&alg));
        let tx = compression_norm_sweep(
            |q| GradedOperator::creation(&FockTruncation::with_cache(cache.clone(), q)?, &x),
            &qs,
            DEFAULT_SWEEP_TOL,
        )
        .unwrap();
        assert!(tx.rows.iter().all(|r| (r.lower_bound - 1.0).abs() < 1e-12));
        let a = AlgElement::indicator(&alg, &[0, 3]).unwrap();
        let y = vec1(&cache, &AlgElement::from_block_scalars(&alg, &[0.5, 1.0, 0.2, 0.7, 0.1, 0.9]).unwrap());
        let qs: Vec<usize> = (3..=9).collect();
        let s = compression_norm_sweep(
            |q| {
                let t = FockTruncation::with_cache(cache.clone(), q)?;
                GradedOperator::band(&t, &x, &y)?.left_mul(&cache, &a)
            },
            &qs,
            DEFAULT_SWEEP_TOL,
        )
        .unwrap();
        assert!(s.converged);
        // dense singular values of the largest compression as oracle
        let t = FockTruncation::with_cache(cache.clone(), 9).unwrap();
        let op = GradedOperator::band(&t, &x, &y).unwrap().left_mul(&cache, &a).unwrap();
        let dense = faithful_matrix(&op, 9);
        assert!((dense.singular_values().max() - s.final_value).abs() < 1e-12);
    }

    #[test]
    fn quasicentral_examples() {
        let alg = ScalarAlgebra::commutative(2).unwrap();
        let id = Automorphism::identity(&alg);
        let swap = Automorphism::cyclic_shift(&alg, 1).unwrap();
        let h = Arc::new(Correspondence::twisted_free(&[id, swap]).unwrap());
        let cache = Arc::new(TensorPowerCache::new(h, 3).unwrap());
        let fam = basis_spanning_family(&cache, 3, usize::MAX).unwrap();
        let r = quasicentral_check(&cache, 3, Some(2), &fam).unwrap();
        assert!(r.max_defect <= 1e-10);
        let r1 = quasicentral_check(&cache, 3, Some(1), &fam).unwrap();
        assert!(r1.max_defect > 0.5);
        let unit = quasicentral_check(&cache, 3, None, &fam).unwrap();
        assert_eq!(unit.max_defect, 0.0);
    }

    fn random_setup(seed: u64) -> (FockTruncation, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=3);
        let blocks = (0..k).map(|_| rng.gen_range(1..=3)).collect();
        let alg = ScalarAlgebra::new(blocks).unwrap();
        let rank = rng.gen_range(1..=2);
        let full = rng.gen_bool(0.5);
        let h = Arc::new(Correspondence::random(&alg, rank, full, &mut rng).unwrap());
        let q = rng.gen_range(3..=5);
        (FockTruncation::new(h, q).unwrap(), rng)
    }

    fn random_tensor(t: &FockTruncation, deg: usize, rng: &mut ChaCha8Rng) -> TensorVector {
        let cache = t.cache();
        let alg = t.algebra();
        let mut v = cache.vacuum(&AlgElement::random(alg, rng));
        for _ in 0..deg {
            let f = TensorVector { degree: 1, coords: cache.base().space().random_vector(rng).coords().clone() };
            v = cache.tensor(&f, &v).unwrap();
        }
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn toeplitz_relations(seed in 0u64..5000) {
            let (t, mut rng) = random_setup(seed);
            let alg = t.algebra().clone();
            let cache = t.cache().clone();
            let dx = rng.gen_range(1..t.cutoff().min(3));
            let x = random_tensor(&t, dx, &mut rng);
            let y = random_tensor(&t, dx, &mut rng);
            let a = AlgElement::random(&alg, &mut rng);
            let b = AlgElement::random(&alg, &mut rng);
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let tx = GradedOperator::creation(&t, &x).unwrap();
            let ty = GradedOperator::creation(&t, &y).unwrap();
            let lin = GradedOperator::creation(&t, &x.scale(z).add(&y).unwrap()).unwrap();
            prop_assert!(lin.max_abs_diff(&tx.scale(z).add(&ty).unwrap()) <= 1e-10);
            let axb = cache.left_mul(&a, &x.right_mul(&b)).unwrap();
            let lhs = GradedOperator::creation(&t, &axb).unwrap();
            let rhs = tx.left_mul(&cache, &a).unwrap().right_mul(&cache, &b).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-10);
            let prod = tx.adjoint().compose(&ty).unwrap();
            let ip = x.inner(&y).unwrap();
            let expect = GradedOperator::algebra_action(&t, &ip).unwrap();
            prop_assert!(prod.max_abs_diff_below(&expect, prod.window()) <= 1e-10);
        }

        #[test]
        fn compression_is_monotone(seed in 0u64..5000) {
            let (t, mut rng) = random_setup(seed);
            let x = random_tensor(&t, 1, &mut rng);
            let y = random_tensor(&t, 0, &mut rng);
            let op = GradedOperator::band(&t, &x, &y).unwrap();
            let mut prev = 0.0;
            for q in 1..=t.cutoff() {
                let v = op.restrict(q).compressed_norm();
                prop_assert!(v >= prev - 1e-10);
                prev = v;
            }
        }

        #[test]
        fn dp_family_closed_under_adjoint(seed in 0u64..5000) {
            let (t, mut rng) = random_setup(seed);
            let p = t.cutoff();
            let x = random_tensor(&t, 1, &mut rng);
            let y = random_tensor(&t, 0, &mut rng);
            let e = DpElement::single(p, x, y, 0).unwrap();
            let a = e.to_operator(&t).unwrap().adjoint();
            let b = e.adjoint().to_operator(&t).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
        }
    }
}

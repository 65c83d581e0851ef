//! JSON descriptors for algebras, elements, modules, correspondences, tensors,
//! band operators and towers.
//!
//! Elements are nested arrays: one entry per block, each a row-major list of
//! rows of `[re, im]` pairs.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgElement, Automorphism, ScalarAlgebra, C64};
use crate::amatrix::AMatrix;
use crate::correspondence::{Correspondence, TensorPowerCache, TensorVector};
use crate::error::{Error, Result};
use crate::fock::{BandSum, BandTerm};
use crate::module::ModuleSpace;
use crate::rokhlin::RokhlinTower;

pub type ElementDesc = Vec<Vec<Vec<[f64; 2]>>>;

/// Parses JSON, reporting line and column on failure.
pub fn parse_json<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Input(format!("line {}, column {}: {e}", e.line(), e.column())))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraDesc {
    pub blocks: Vec<usize>,
}

impl AlgebraDesc {
    pub fn build(&self) -> Result<Arc<ScalarAlgebra>> {
        ScalarAlgebra::new(self.blocks.clone()).map_err(input)
    }

    pub fn of(alg: &ScalarAlgebra) -> Self {
        AlgebraDesc {
            blocks: alg.blocks().to_vec(),
        }
    }
}

fn input(e: Error) -> Error {
    match e {
        Error::Input(_) => e,
        other => Error::Input(other.to_string()),
    }
}

pub fn element_from_desc(alg: &Arc<ScalarAlgebra>, d: &ElementDesc) -> Result<AlgElement> {
    if d.len() != alg.num_blocks() {
        return Err(Error::Input(format!("element has {} blocks, algebra has {}", d.len(), alg.num_blocks())));
    }
    let blocks = d
        .iter()
        .zip(alg.blocks())
        .map(|(rows, &n)| {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Input(format!("block is not {n}x{n}")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
        })
        .collect::<Result<Vec<_>>>()?;
    AlgElement::from_blocks(alg, blocks).map_err(input)
}

pub fn element_to_desc(a: &AlgElement) -> ElementDesc {
    a.blocks()
        .iter()
        .map(|b| {
            (0..b.nrows())
                .map(|i| (0..b.ncols()).map(|j| [b[(i, j)].re, b[(i, j)].im]).collect())
                .collect()
        })
        .collect()
}

/// A matrix over the algebra: rows of elements.
pub type MatrixDesc = Vec<Vec<ElementDesc>>;

pub fn matrix_from_desc(alg: &Arc<ScalarAlgebra>, d: &MatrixDesc) -> Result<AMatrix> {
    let rows = d.len();
    let cols = d.first().map_or(0, Vec::len);
    if d.iter().any(|r| r.len() != cols) {
        return Err(Error::Input("ragged matrix".into()));
    }
    let mut out = AMatrix::zeros(alg, rows, cols);
    for (i, r) in d.iter().enumerate() {
        for (j, e) in r.iter().enumerate() {
            out.set_entry(i, j, &element_from_desc(alg, e)?).map_err(input)?;
        }
    }
    Ok(out)
}

pub fn matrix_to_desc(m: &AMatrix) -> MatrixDesc {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| element_to_desc(&m.entry(i, j))).collect())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProjectionDesc {
    /// The string "identity".
    Identity(String),
    Matrix(MatrixDesc),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleDesc {
    pub free_rank: usize,
    #[serde(default = "identity_projection")]
    pub projection: ProjectionDesc,
}

fn identity_projection() -> ProjectionDesc {
    ProjectionDesc::Identity("identity".into())
}

impl ModuleDesc {
    pub fn build(&self, alg: &Arc<ScalarAlgebra>) -> Result<Arc<ModuleSpace>> {
        match &self.projection {
            ProjectionDesc::Identity(s) if s == "identity" => Ok(ModuleSpace::free(alg, self.free_rank)),
            ProjectionDesc::Identity(s) => Err(Error::Input(format!("unknown projection {s:?}"))),
            ProjectionDesc::Matrix(m) => {
                let p = matrix_from_desc(alg, m)?;
                if p.rows() != self.free_rank || p.cols() != self.free_rank {
                    return Err(Error::Input("projection does not match free_rank".into()));
                }
                ModuleSpace::projective(p).map_err(input)
            }
        }
    }
}

/// `{"permutation": [...], "unitary": <elem>}` or `{"cyclic_shift": k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutomorphismDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unitary: Option<ElementDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_shift: Option<isize>,
}

impl AutomorphismDesc {
    pub fn build(&self, alg: &Arc<ScalarAlgebra>) -> Result<Automorphism> {
        match (&self.permutation, &self.unitary, self.cyclic_shift) {
            (None, None, Some(k)) => Automorphism::cyclic_shift(alg, k).map_err(input),
            (perm, u, None) => {
                let perm = perm.clone().unwrap_or_else(|| (0..alg.num_blocks()).collect());
                let u = u.as_ref().map(|u| element_from_desc(alg, u)).transpose()?;
                Automorphism::new(alg, perm, u).map_err(input)
            }
            _ => Err(Error::Input("cyclic_shift cannot be combined with permutation/unitary".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftActionDesc {
    Identity,
    CrossedProduct(AutomorphismDesc),
    TwistedFree(Vec<AutomorphismDesc>),
    /// Images of the matrix units, in basis order.
    Explicit(Vec<MatrixDesc>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceDesc {
    pub algebra: AlgebraDesc,
    /// Module for the explicit action (default: free of rank one). The other
    /// actions fix their own module.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub module: Option<ModuleDesc>,
    pub left_action: LeftActionDesc,
}

impl CorrespondenceDesc {
    pub fn build(&self) -> Result<Arc<Correspondence>> {
        let alg = self.algebra.build()?;
        let space = || match &self.module {
            Some(m) => m.build(&alg),
            None => Ok(ModuleSpace::free(&alg, 1)),
        };
        let h = match &self.left_action {
            LeftActionDesc::Identity => {
                if self.module.as_ref().is_some_and(|m| m.free_rank != 1) {
                    return Err(Error::Input("identity action needs the rank-one module".into()));
                }
                Correspondence::identity(&alg)
            }
            LeftActionDesc::CrossedProduct(a) => Correspondence::crossed_product(&a.build(&alg)?).map_err(input)?,
            LeftActionDesc::TwistedFree(list) => {
                let alphas = list.iter().map(|a| a.build(&alg)).collect::<Result<Vec<_>>>()?;
                Correspondence::twisted_free(&alphas).map_err(input)?
            }
            LeftActionDesc::Explicit(images) => {
                let images = images.iter().map(|m| matrix_from_desc(&alg, m)).collect::<Result<Vec<_>>>()?;
                Correspondence::explicit(space()?, images).map_err(input)?
            }
        };
        Ok(Arc::new(h))
    }

    /// `A^shift` over `ℂ^n`.
    pub fn cyclic_shift(n: usize, step: isize) -> Self {
        CorrespondenceDesc {
            algebra: AlgebraDesc { blocks: vec![1; n] },
            module: None,
            left_action: LeftActionDesc::CrossedProduct(AutomorphismDesc {
                permutation: None,
                unitary: None,
                cyclic_shift: Some(step),
            }),
        }
    }
}

/// `{"word": [i_1, …, i_k]}` (letters of the designated basis, `[]` for the
/// vacuum `1_A`), or `{"degree": k, "coords": [<elem>, …]}` giving the
/// coordinate column in `H^{⊗k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<ElementDesc>>,
}

impl TensorDesc {
    pub fn word(w: &[usize]) -> Self {
        TensorDesc {
            word: Some(w.to_vec()),
            degree: None,
            coords: None,
        }
    }

    pub fn degree_hint(&self) -> Result<usize> {
        match (&self.word, self.degree) {
            (Some(w), None) => Ok(w.len()),
            (None, Some(k)) => Ok(k),
            _ => Err(Error::Input("tensor needs exactly one of `word` or `degree`".into())),
        }
    }

    pub fn build(&self, cache: &TensorPowerCache) -> Result<TensorVector> {
        match (&self.word, self.degree, &self.coords) {
            (Some(w), None, None) => {
                if w.is_empty() {
                    Ok(cache.vacuum(&AlgElement::one(cache.algebra())))
                } else {
                    cache.word(w).map_err(input)
                }
            }
            (None, Some(k), Some(c)) => {
                let alg = cache.algebra();
                let entries = c.iter().map(|e| element_from_desc(alg, e)).collect::<Result<Vec<_>>>()?;
                let col = AMatrix::column(alg, &entries).map_err(input)?;
                cache.vector(k, col).map_err(input)
            }
            _ => Err(Error::Input("tensor needs `word`, or `degree` with `coords`".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandDesc {
    pub x: TensorDesc,
    pub y: TensorDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<ElementDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<ElementDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<[f64; 2]>,
}

impl BandDesc {
    pub fn build(&self, cache: &TensorPowerCache) -> Result<BandTerm> {
        let alg = cache.algebra();
        let one = AlgElement::one(alg);
        let left = self.left.as_ref().map(|e| element_from_desc(alg, e)).transpose()?.unwrap_or_else(|| one.clone());
        let right = self.right.as_ref().map(|e| element_from_desc(alg, e)).transpose()?.unwrap_or(one);
        let x = self.x.build(cache)?;
        let y = self.y.build(cache)?;
        let mut t = BandTerm::with_multipliers(cache, &left, &x, &y, &right).map_err(input)?;
        if let Some([re, im]) = self.coeff {
            t.coeff = C64::new(re, im);
        }
        Ok(t)
    }

    pub fn max_degree(&self) -> Result<usize> {
        Ok(self.x.degree_hint()?.max(self.y.degree_hint()?))
    }
}

/// `{"band": {...}}` or `{"sum": [{...}, …]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorDesc {
    Band(BandDesc),
    Sum(Vec<BandDesc>),
}

impl OperatorDesc {
    fn bands(&self) -> &[BandDesc] {
        match self {
            OperatorDesc::Band(b) => std::slice::from_ref(b),
            OperatorDesc::Sum(v) => v,
        }
    }

    pub fn max_degree(&self) -> Result<usize> {
        self.bands().iter().try_fold(0, |m, b| Ok(m.max(b.max_degree()?)))
    }

    pub fn build(&self, cache: &TensorPowerCache) -> Result<BandSum> {
        if self.bands().is_empty() {
            return Err(Error::Input("empty operator sum".into()));
        }
        Ok(BandSum {
            terms: self.bands().iter().map(|b| b.build(cache)).collect::<Result<_>>()?,
        })
    }

    /// `T_z = T_z T_{1}^*` for the first basis letter.
    pub fn generator() -> Self {
        OperatorDesc::Band(BandDesc {
            x: TensorDesc::word(&[0]),
            y: TensorDesc::word(&[]),
            left: None,
            right: None,
            coeff: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerDesc {
    pub d: usize,
    pub p: usize,
    pub elements: Vec<Vec<ElementDesc>>,
}

impl TowerDesc {
    pub fn build(&self, alg: &Arc<ScalarAlgebra>) -> Result<RokhlinTower> {
        if self.elements.len() != self.d + 1 || self.elements.iter().any(|c| c.len() != self.p) {
            return Err(Error::Input(format!("tower must have d+1 = {} colours of height p = {}", self.d + 1, self.p)));
        }
        let elems = self
            .elements
            .iter()
            .map(|c| c.iter().map(|e| element_from_desc(alg, e)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        RokhlinTower::new(alg, elems).map_err(input)
    }

    pub fn of(t: &RokhlinTower) -> Self {
        TowerDesc {
            d: t.d(),
            p: t.p(),
            elements: t.elements().iter().map(|c| c.iter().map(element_to_desc).collect()).collect(),
        }
    }
}

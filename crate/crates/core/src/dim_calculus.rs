//! Symbolic propagation of nuclear-dimension and Rokhlin-dimension bounds and
//! classifiability flags over a declared construction graph.
//!
//! Facts are upper bounds (`≤ value`, with `∞` the default when no fact
//! exists) or true/false flags. Propagation runs the rules to a least fixed
//! point; a fact is replaced only by a strictly tighter one, so declared facts
//! are never weakened and every stored fact keeps the premises it was derived
//! from.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Algebra,
    Correspondence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Unital,
    Simple,
    Uct,
    Fgp,
    Minimal,
    Nonperiodic,
    QuasicentralProjectionUnit,
    FiniteRokhlin,
    Classifiable,
}

impl Flag {
    fn name(self) -> &'static str {
        match self {
            Flag::Unital => "unital",
            Flag::Simple => "simple",
            Flag::Uct => "UCT",
            Flag::Fgp => "fgp",
            Flag::Minimal => "minimal",
            Flag::Nonperiodic => "nonperiodic",
            Flag::QuasicentralProjectionUnit => "quasicentral_projection_unit",
            Flag::FiniteRokhlin => "finite_rokhlin",
            Flag::Classifiable => "classifiable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    DimNuc,
    DimRok,
    /// A factorization of the identity through algebras of nuclear dimension
    /// at most `n` with incoming maps that are sums of `m` order-zero maps.
    FactorizationScheme,
    Flag(Flag),
}

/// An upper bound. `Finite` is "finite, value unknown", which is weaker than
/// any explicit value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Value(u64),
    Finite,
}

impl Bound {
    /// Strictly tighter than `other`.
    pub fn tighter(self, other: Bound) -> bool {
        match (self, other) {
            (Bound::Value(a), Bound::Value(b)) => a < b,
            (Bound::Value(_), Bound::Finite) => true,
            _ => false,
        }
    }

    fn map2(self, other: Bound, f: impl Fn(u64, u64) -> u64) -> Bound {
        match (self, other) {
            (Bound::Value(a), Bound::Value(b)) => Bound::Value(f(a, b)),
            _ => Bound::Finite,
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Value(v) => write!(f, "{v}"),
            Bound::Finite => write!(f, "finite"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Bound(Bound),
    Flag(bool),
    Scheme { m: u64, n: u64 },
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bound(b) => write!(f, "≤ {b}"),
            Value::Flag(b) => write!(f, "= {b}"),
            Value::Scheme { m, n } => write!(f, "= (m = {m}, n = {n})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    /// Scalar algebra of a correspondence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub over: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Toeplitz,
    CuntzPimsner,
    DirectSum,
    FreeProduct,
    Compacts,
    #[serde(rename = "d_p")]
    DP,
    /// `out` is an extension with ideal `in[0]` and quotient `in[1]`.
    Extension,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Construction {
    pub op: Op,
    #[serde(rename = "in")]
    pub inputs: Vec<String>,
    pub out: String,
}

/// A declared fact as it appears in the input graph. Bounds take `value`,
/// flags an optional boolean `value` (default true), and the factorization
/// scheme takes `m` and `n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Declaration {
    pub entity: String,
    pub attribute: DeclaredAttribute,
    /// Integer bound, or the string "finite".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

/// Attribute names accepted in declarations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclaredAttribute {
    DimNuc,
    DimRok,
    FactorizationScheme,
    Unital,
    Simple,
    Uct,
    Fgp,
    Minimal,
    Nonperiodic,
    QuasicentralProjectionUnit,
    FiniteRokhlin,
    Classifiable,
}

impl DeclaredAttribute {
    fn attribute(self) -> Attribute {
        use DeclaredAttribute as D;
        match self {
            D::DimNuc => Attribute::DimNuc,
            D::DimRok => Attribute::DimRok,
            D::FactorizationScheme => Attribute::FactorizationScheme,
            D::Unital => Attribute::Flag(Flag::Unital),
            D::Simple => Attribute::Flag(Flag::Simple),
            D::Uct => Attribute::Flag(Flag::Uct),
            D::Fgp => Attribute::Flag(Flag::Fgp),
            D::Minimal => Attribute::Flag(Flag::Minimal),
            D::Nonperiodic => Attribute::Flag(Flag::Nonperiodic),
            D::QuasicentralProjectionUnit => Attribute::Flag(Flag::QuasicentralProjectionUnit),
            D::FiniteRokhlin => Attribute::Flag(Flag::FiniteRokhlin),
            D::Classifiable => Attribute::Flag(Flag::Classifiable),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimGraph {
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub constructions: Vec<Construction>,
    #[serde(default)]
    pub declared: Vec<Declaration>,
}

/// Which arithmetic the factorization-scheme rule uses. The stated lemma gives
/// `m(n+1) − 1`; the composition carried out in its proof counts
/// `(m+1)n − 1`. The statement is the default; the alternative exists for
/// sensitivity checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArithmetic {
    #[default]
    Statement,
    ProofText,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub scheme_arithmetic: SchemeArithmetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    Declared,
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    R11,
    R12,
    R13,
    R14,
    /// fgp ⇒ quasicentral approximate unit of projections in every `K(F_p)`.
    Fgp,
    /// classifiable ⇒ unital, simple, UCT, finite nuclear dimension.
    Unpack,
    /// finite Rokhlin flag ⇔ finite Rokhlin bound.
    FiniteRokhlin,
    /// unital scalar algebra ⇒ unital Toeplitz and Cuntz–Pimsner algebras.
    Unital,
    /// finite direct sums of fgp correspondences are fgp.
    SumFgp,
}

impl Rule {
    pub const DERIVING: [Rule; 19] = [
        Rule::R1,
        Rule::R2,
        Rule::R3,
        Rule::R4,
        Rule::R5,
        Rule::R6,
        Rule::R7,
        Rule::R8,
        Rule::R9,
        Rule::R10,
        Rule::R11,
        Rule::R12,
        Rule::R13,
        Rule::R14,
        Rule::Fgp,
        Rule::Unpack,
        Rule::FiniteRokhlin,
        Rule::Unital,
        Rule::SumFgp,
    ];

    /// Result the rule encodes.
    pub fn anchor(self) -> &'static str {
        match self {
            Rule::Declared => "declared",
            Rule::R1 => "main_thm: dim_nuc(T(H))+1 ≤ 2(dim_nuc(A)+1)(dim_Rok(H)+1)",
            Rule::R2 => "Main-Theorem_Cor: dim_nuc(O(H))+1 ≤ 2(dim_nuc(A)+1)(dim_Rok(H)+1)",
            Rule::R3 => "Compact-Dimension: dim_nuc(K(H)) ≤ dim_nuc(A)",
            Rule::R4 => "extension: dim_nuc(A) ≤ dim_nuc(J) + dim_nuc(A/J) + 1",
            Rule::R5 => "propextension: dim_nuc(A) = max{dim_nuc(J), dim_nuc(A/J)}",
            Rule::R6 => "quasi_hypothesis: dim_nuc(D_p(H)) ≤ dim_nuc(A)",
            Rule::R7 => "2-Main-Theorem: dim_Rok(⊕H) ≤ dim_Rok(H) (same towers)",
            Rule::R8 => "Speicher + Second-Main-Theorem: free product of T(H_i) is T(⊕H_i)",
            Rule::R9 => "nucdimtool: dim_nuc(A) ≤ m(n+1)−1",
            Rule::R10 => "classif_lem_1: UCT(A) ∧ simple(A) ⇒ UCT(O(H))",
            Rule::R11 => "thm:schweizer: simple(O(H)) ⇔ minimal ∧ nonperiodic",
            Rule::R12 => "classif_lem_2: finite Rokhlin dimension ⇒ nonperiodic",
            Rule::R13 => "simple(A) ⇒ minimal(H)",
            Rule::R14 => "application2: classifiable(A) ∧ fgp(H) ∧ finite_rokhlin(H) ⇒ classifiable(O(H))",
            Rule::Fgp => "QD-examples: fgp ⇒ quasicentral projection unit",
            Rule::Unpack => "classifiable = unital ∧ simple ∧ UCT ∧ finite dim_nuc",
            Rule::FiniteRokhlin => "finite_rokhlin ⇔ dim_Rok < ∞",
            Rule::Unital => "unital A ⇒ unital T(H), O(H)",
            Rule::SumFgp => "finite direct sum of fgp is fgp",
        }
    }
}

pub type FactKey = (String, Attribute);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimFact {
    pub id: usize,
    pub entity: String,
    pub attribute: Attribute,
    pub value: Value,
    pub rule: Rule,
    pub anchor: String,
    pub premises: Vec<usize>,
    /// Set when the bound is an equality (only the extension rule with a
    /// quasicentral projection unit produces these).
    #[serde(default)]
    pub equality: bool,
    /// False once a tighter fact for the same key exists.
    pub current: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactBase {
    pub facts: Vec<DimFact>,
    #[serde(skip)]
    best: BTreeMap<FactKey, usize>,
}

impl FactBase {
    pub fn get(&self, entity: &str, attr: Attribute) -> Option<&DimFact> {
        self.best.get(&(entity.to_string(), attr)).map(|&i| &self.facts[i])
    }

    pub fn bound(&self, entity: &str, attr: Attribute) -> Option<Bound> {
        match self.get(entity, attr)?.value {
            Value::Bound(b) => Some(b),
            _ => None,
        }
    }

    pub fn flag(&self, entity: &str, flag: Flag) -> Option<bool> {
        match self.get(entity, Attribute::Flag(flag))?.value {
            Value::Flag(b) => Some(b),
            _ => None,
        }
    }

    pub fn fact(&self, id: usize) -> Result<&DimFact> {
        self.facts.get(id).ok_or_else(|| Error::Lookup(format!("no fact with id {id}")))
    }

    /// Current facts, sorted by entity and attribute.
    pub fn current(&self) -> impl Iterator<Item = &DimFact> {
        self.best.values().map(|&i| &self.facts[i])
    }

    /// `(entity, attribute) → value` for the current facts.
    pub fn values(&self) -> BTreeMap<FactKey, Value> {
        self.best.iter().map(|(k, &i)| (k.clone(), self.facts[i].value)).collect()
    }

    /// `(entity, attribute) → (value, rule)` for the current facts.
    pub fn signature(&self) -> BTreeMap<FactKey, (Value, Rule)> {
        self.best
            .iter()
            .map(|(k, &i)| (k.clone(), (self.facts[i].value, self.facts[i].rule)))
            .collect()
    }

    /// All rules appearing in the derivation tree of `id`.
    pub fn trace_rules(&self, id: usize) -> Result<BTreeSet<Rule>> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(i) = stack.pop() {
            if seen.insert(i) {
                let f = self.fact(i)?;
                out.insert(f.rule);
                stack.extend(&f.premises);
            }
        }
        out.remove(&Rule::Declared);
        Ok(out)
    }

    /// Whether every premise chain under `id` ends in declared facts.
    pub fn is_grounded(&self, id: usize) -> bool {
        let Ok(f) = self.fact(id) else { return false };
        if f.rule == Rule::Declared {
            return f.premises.is_empty();
        }
        !f.premises.is_empty() && f.premises.iter().all(|&p| p < id && self.is_grounded(p))
    }

    /// Derivation tree as indented text.
    pub fn explain(&self, id: usize) -> Result<String> {
        let mut s = String::new();
        self.explain_into(id, 0, &mut s)?;
        Ok(s)
    }

    fn explain_into(&self, id: usize, depth: usize, s: &mut String) -> Result<()> {
        let f = self.fact(id)?;
        let attr = match f.attribute {
            Attribute::DimNuc => "dim_nuc".to_string(),
            Attribute::DimRok => "dim_Rok".to_string(),
            Attribute::FactorizationScheme => "factorization_scheme".to_string(),
            Attribute::Flag(fl) => fl.name().to_string(),
        };
        let rel = if f.equality {
            f.value.to_string().replacen('≤', "=", 1)
        } else {
            f.value.to_string()
        };
        let tag = match f.rule {
            Rule::Declared => "[declared]".to_string(),
            r => format!("[{r:?} {}]", r.anchor()),
        };
        let _ = writeln!(s, "{}{attr}({}) {rel} {tag}", "  ".repeat(depth), f.entity);
        for &p in &f.premises {
            self.explain_into(p, depth + 1, s)?;
        }
        Ok(())
    }
}

struct Candidate {
    entity: String,
    attribute: Attribute,
    value: Value,
    rule: Rule,
    premises: Vec<usize>,
    equality: bool,
}

struct Ctx<'a> {
    kinds: HashMap<&'a str, EntityKind>,
    over: HashMap<&'a str, &'a str>,
    cons: &'a [Construction],
    config: PropagationConfig,
}

impl DimGraph {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Input(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    fn validate(&self) -> Result<Ctx<'_>> {
        let mut kinds = HashMap::new();
        for e in &self.entities {
            if kinds.insert(e.id.as_str(), e.kind).is_some() {
                return Err(Error::Input(format!("duplicate entity {}", e.id)));
            }
        }
        let kind_of = |id: &str| kinds.get(id).copied().ok_or_else(|| Error::Input(format!("unknown entity {id}")));
        let mut over = HashMap::new();
        for e in &self.entities {
            match (e.kind, &e.over) {
                (EntityKind::Correspondence, Some(a)) => {
                    if kind_of(a)? != EntityKind::Algebra {
                        return Err(Error::Input(format!("{} is over {a}, which is not an algebra", e.id)));
                    }
                    over.insert(e.id.as_str(), a.as_str());
                }
                (EntityKind::Correspondence, None) => {
                    return Err(Error::Input(format!("correspondence {} has no scalar algebra", e.id)))
                }
                (EntityKind::Algebra, Some(_)) => return Err(Error::Input(format!("algebra {} has `over`", e.id))),
                (EntityKind::Algebra, None) => {}
            }
        }
        for c in &self.constructions {
            let out_kind = kind_of(&c.out)?;
            let in_kinds = c.inputs.iter().map(|i| kind_of(i)).collect::<Result<Vec<_>>>()?;
            use EntityKind::*;
            let ok = match c.op {
                Op::Toeplitz | Op::CuntzPimsner | Op::Compacts | Op::DP => {
                    in_kinds == [Correspondence] && out_kind == Algebra
                }
                Op::DirectSum => {
                    !in_kinds.is_empty()
                        && in_kinds.iter().all(|&k| k == Correspondence)
                        && out_kind == Correspondence
                        && c.inputs.iter().all(|i| over.get(i.as_str()) == over.get(c.out.as_str()))
                }
                Op::FreeProduct => !in_kinds.is_empty() && in_kinds.iter().all(|&k| k == Algebra) && out_kind == Algebra,
                Op::Extension => in_kinds == [Algebra, Algebra] && out_kind == Algebra,
            };
            if !ok {
                return Err(Error::Input(format!("ill-typed {:?} construction producing {}", c.op, c.out)));
            }
        }
        let mut g = DiGraph::<&str, ()>::new();
        let idx: HashMap<&str, _> = self.entities.iter().map(|e| (e.id.as_str(), g.add_node(e.id.as_str()))).collect();
        for (h, a) in &over {
            g.add_edge(idx[a], idx[h], ());
        }
        for c in &self.constructions {
            for i in &c.inputs {
                g.add_edge(idx[i.as_str()], idx[c.out.as_str()], ());
            }
        }
        if is_cyclic_directed(&g) {
            return Err(Error::Structural("construction graph has a cycle".into()));
        }
        Ok(Ctx {
            kinds,
            over,
            cons: &self.constructions,
            config: PropagationConfig::default(),
        })
    }

    fn declared_facts(&self, ctx: &Ctx<'_>) -> Result<FactBase> {
        let mut base = FactBase {
            facts: Vec::new(),
            best: BTreeMap::new(),
        };
        for d in &self.declared {
            let kind = *ctx
                .kinds
                .get(d.entity.as_str())
                .ok_or_else(|| Error::Input(format!("declaration for unknown entity {}", d.entity)))?;
            let attribute = d.attribute.attribute();
            let value = match attribute {
                Attribute::DimNuc | Attribute::DimRok => {
                    if d.m.is_some() || d.n.is_some() {
                        return Err(Error::Input(format!("{:?} takes `value`, not m/n", d.attribute)));
                    }
                    Value::Bound(parse_bound(d.value.as_ref())?)
                }
                Attribute::FactorizationScheme => match (d.m, d.n, &d.value) {
                    (Some(m), Some(n), None) if m >= 1 => Value::Scheme { m, n },
                    _ => return Err(Error::Input("factorization_scheme needs m ≥ 1 and n".into())),
                },
                Attribute::Flag(_) => match &d.value {
                    None => Value::Flag(true),
                    Some(serde_json::Value::Bool(b)) => Value::Flag(*b),
                    Some(v) => return Err(Error::Input(format!("flag {:?} with value {v}", d.attribute))),
                },
            };
            let corr_only = matches!(
                attribute,
                Attribute::DimRok
                    | Attribute::Flag(Flag::Fgp | Flag::Minimal | Flag::Nonperiodic | Flag::FiniteRokhlin)
            );
            let alg_only = matches!(
                attribute,
                Attribute::DimNuc
                    | Attribute::FactorizationScheme
                    | Attribute::Flag(Flag::Unital | Flag::Simple | Flag::Uct | Flag::Classifiable)
            );
            if (corr_only && kind != EntityKind::Correspondence) || (alg_only && kind != EntityKind::Algebra) {
                return Err(Error::Input(format!("{:?} does not apply to {}", d.attribute, d.entity)));
            }
            let key = (d.entity.clone(), attribute);
            if let Some(&old) = base.best.get(&key) {
                let prev = base.facts[old].value;
                match (prev, value) {
                    (Value::Flag(a), Value::Flag(b)) if a != b => {
                        return Err(Error::Input(format!("{} declared both true and false for {}", attribute_name(attribute), d.entity)))
                    }
                    (Value::Bound(a), Value::Bound(b)) if !b.tighter(a) => continue,
                    (Value::Scheme { .. }, Value::Scheme { .. }) | (Value::Flag(_), Value::Flag(_)) => continue,
                    _ => {}
                }
            }
            base.push(Candidate {
                entity: d.entity.clone(),
                attribute,
                value,
                rule: Rule::Declared,
                premises: Vec::new(),
                equality: false,
            });
        }
        Ok(base)
    }
}

fn attribute_name(a: Attribute) -> String {
    match a {
        Attribute::Flag(f) => f.name().to_string(),
        other => format!("{other:?}"),
    }
}

fn parse_bound(v: Option<&serde_json::Value>) -> Result<Bound> {
    match v {
        Some(serde_json::Value::Number(n)) => {
            if let Some(u) = n.as_u64() {
                Ok(Bound::Value(u))
            } else {
                Err(Error::Input(format!("dimension bound {n} is negative or not an integer")))
            }
        }
        Some(serde_json::Value::String(s)) if s == "finite" => Ok(Bound::Finite),
        Some(other) => Err(Error::Input(format!("invalid dimension bound {other}"))),
        None => Err(Error::Input("dimension bound missing `value`".into())),
    }
}

impl FactBase {
    /// Inserts `c` if it improves on the current fact for its key. A flag
    /// contradicting a stored flag is an input error.
    fn offer(&mut self, c: Candidate) -> Result<bool> {
        let key = (c.entity.clone(), c.attribute);
        if let Some(&old) = self.best.get(&key) {
            let better = match (self.facts[old].value, c.value) {
                (Value::Bound(a), Value::Bound(b)) => b.tighter(a),
                (Value::Flag(a), Value::Flag(b)) => {
                    if a != b {
                        return Err(Error::Input(format!(
                            "{} of {} is declared {a} but {:?} derives {b}",
                            attribute_name(c.attribute),
                            c.entity,
                            c.rule
                        )));
                    }
                    false
                }
                _ => false,
            };
            if !better {
                return Ok(false);
            }
        }
        self.push(c);
        Ok(true)
    }

    fn push(&mut self, c: Candidate) {
        let id = self.facts.len();
        let key = (c.entity.clone(), c.attribute);
        if let Some(old) = self.best.insert(key, id) {
            self.facts[old].current = false;
        }
        self.facts.push(DimFact {
            id,
            entity: c.entity,
            attribute: c.attribute,
            value: c.value,
            rule: c.rule,
            anchor: c.rule.anchor().to_string(),
            premises: c.premises,
            equality: c.equality,
            current: true,
        });
    }

    fn id(&self, e: &str, a: Attribute) -> Option<usize> {
        self.best.get(&(e.to_string(), a)).copied()
    }

    fn bound_fact(&self, e: &str, a: Attribute) -> Option<(Bound, usize)> {
        let id = self.id(e, a)?;
        match self.facts[id].value {
            Value::Bound(b) => Some((b, id)),
            _ => None,
        }
    }

    fn true_flag(&self, e: &str, f: Flag) -> Option<usize> {
        let id = self.id(e, Attribute::Flag(f))?;
        (self.facts[id].value == Value::Flag(true)).then_some(id)
    }
}

fn cand(entity: &str, attribute: Attribute, value: Value, rule: Rule, premises: Vec<usize>) -> Candidate {
    Candidate {
        entity: entity.to_string(),
        attribute,
        value,
        rule,
        premises,
        equality: false,
    }
}

fn flag_cand(entity: &str, f: Flag, rule: Rule, premises: Vec<usize>) -> Candidate {
    cand(entity, Attribute::Flag(f), Value::Flag(true), rule, premises)
}

/// `2(n+1)(d+1) − 1`.
fn main_bound(n: Bound, d: Bound) -> Bound {
    n.map2(d, |n, d| 2 * (n + 1) * (d + 1) - 1)
}

fn apply_rule(rule: Rule, ctx: &Ctx<'_>, base: &FactBase) -> Vec<Candidate> {
    use Attribute::{DimNuc, DimRok};
    let mut out = Vec::new();
    let single = |op: Op| ctx.cons.iter().filter(move |c| c.op == op && c.inputs.len() == 1);
    match rule {
        Rule::Declared => {}
        Rule::R1 | Rule::R2 => {
            let op = if rule == Rule::R1 { Op::Toeplitz } else { Op::CuntzPimsner };
            for c in single(op) {
                let h = c.inputs[0].as_str();
                let a = ctx.over[h];
                if let (Some((n, i1)), Some((d, i2)), Some(i3)) = (
                    base.bound_fact(a, DimNuc),
                    base.bound_fact(h, DimRok),
                    base.true_flag(h, Flag::QuasicentralProjectionUnit),
                ) {
                    out.push(cand(&c.out, DimNuc, Value::Bound(main_bound(n, d)), rule, vec![i1, i2, i3]));
                }
            }
        }
        Rule::R3 | Rule::R6 => {
            let op = if rule == Rule::R3 { Op::Compacts } else { Op::DP };
            for c in single(op) {
                let h = c.inputs[0].as_str();
                let Some((n, i1)) = base.bound_fact(ctx.over[h], DimNuc) else { continue };
                let mut prem = vec![i1];
                if rule == Rule::R6 {
                    let Some(i2) = base.true_flag(h, Flag::QuasicentralProjectionUnit) else { continue };
                    prem.push(i2);
                }
                out.push(cand(&c.out, DimNuc, Value::Bound(n), rule, prem));
            }
        }
        Rule::R4 | Rule::R5 => {
            for c in ctx.cons.iter().filter(|c| c.op == Op::Extension) {
                let (j, q) = (c.inputs[0].as_str(), c.inputs[1].as_str());
                let (Some((bj, i1)), Some((bq, i2))) = (base.bound_fact(j, DimNuc), base.bound_fact(q, DimNuc)) else {
                    continue;
                };
                if rule == Rule::R4 {
                    out.push(cand(&c.out, DimNuc, Value::Bound(bj.map2(bq, |a, b| a + b + 1)), rule, vec![i1, i2]));
                } else if let Some(i3) = base.true_flag(j, Flag::QuasicentralProjectionUnit) {
                    let mut x = cand(&c.out, DimNuc, Value::Bound(bj.map2(bq, u64::max)), rule, vec![i1, i2, i3]);
                    x.equality = true;
                    out.push(x);
                }
            }
        }
        Rule::R7 => {
            for c in ctx.cons.iter().filter(|c| c.op == Op::DirectSum) {
                let h = c.inputs[0].as_str();
                if c.inputs.iter().any(|i| i != h) {
                    continue;
                }
                if let Some((d, i)) = base.bound_fact(h, DimRok) {
                    out.push(cand(&c.out, DimRok, Value::Bound(d), rule, vec![i]));
                }
            }
        }
        Rule::R8 => {
            for c in ctx.cons.iter().filter(|c| c.op == Op::FreeProduct) {
                let hs: Option<Vec<&str>> = c
                    .inputs
                    .iter()
                    .map(|t| single(Op::Toeplitz).find(|k| &k.out == t).map(|k| k.inputs[0].as_str()))
                    .collect();
                let Some(hs) = hs else { continue };
                let a = ctx.over[hs[0]];
                if hs.iter().any(|h| ctx.over[h] != a) {
                    continue;
                }
                let Some((n, i1)) = base.bound_fact(a, DimNuc) else { continue };
                if hs.iter().all(|h| *h == hs[0]) {
                    // ⊕ of copies of one fgp H: same towers, still fgp
                    if let (Some((d, i2)), Some(i3)) = (base.bound_fact(hs[0], DimRok), base.true_flag(hs[0], Flag::Fgp)) {
                        out.push(cand(&c.out, DimNuc, Value::Bound(main_bound(n, d)), rule, vec![i1, i2, i3]));
                    }
                    continue;
                }
                let mut want: Vec<&str> = hs.clone();
                want.sort_unstable();
                for s in ctx.cons.iter().filter(|s| s.op == Op::DirectSum) {
                    let mut got: Vec<&str> = s.inputs.iter().map(String::as_str).collect();
                    got.sort_unstable();
                    if got != want {
                        continue;
                    }
                    if let (Some((d, i2)), Some(i3)) = (
                        base.bound_fact(&s.out, DimRok),
                        base.true_flag(&s.out, Flag::QuasicentralProjectionUnit),
                    ) {
                        out.push(cand(&c.out, DimNuc, Value::Bound(main_bound(n, d)), rule, vec![i1, i2, i3]));
                    }
                }
            }
        }
        Rule::R9 => {
            for (e, &k) in &ctx.kinds {
                if k != EntityKind::Algebra {
                    continue;
                }
                let Some(i) = base.id(e, Attribute::FactorizationScheme) else { continue };
                let Value::Scheme { m, n } = base.facts[i].value else { continue };
                let v = match ctx.config.scheme_arithmetic {
                    SchemeArithmetic::Statement => m * (n + 1) - 1,
                    SchemeArithmetic::ProofText => ((m + 1) * n).saturating_sub(1),
                };
                out.push(cand(e, DimNuc, Value::Bound(Bound::Value(v)), rule, vec![i]));
            }
        }
        Rule::R10 => {
            for c in single(Op::CuntzPimsner) {
                let a = ctx.over[c.inputs[0].as_str()];
                if let (Some(i1), Some(i2)) = (base.true_flag(a, Flag::Uct), base.true_flag(a, Flag::Simple)) {
                    out.push(flag_cand(&c.out, Flag::Uct, rule, vec![i1, i2]));
                }
            }
        }
        Rule::R11 => {
            for c in single(Op::CuntzPimsner) {
                let h = c.inputs[0].as_str();
                if let (Some(i1), Some(i2)) = (base.true_flag(h, Flag::Minimal), base.true_flag(h, Flag::Nonperiodic)) {
                    out.push(flag_cand(&c.out, Flag::Simple, rule, vec![i1, i2]));
                }
                if let Some(i) = base.true_flag(&c.out, Flag::Simple) {
                    out.push(flag_cand(h, Flag::Minimal, rule, vec![i]));
                    out.push(flag_cand(h, Flag::Nonperiodic, rule, vec![i]));
                }
            }
        }
        Rule::R12 => {
            for (h, &k) in &ctx.kinds {
                if k == EntityKind::Correspondence {
                    if let Some(i) = base.true_flag(h, Flag::FiniteRokhlin) {
                        out.push(flag_cand(h, Flag::Nonperiodic, rule, vec![i]));
                    }
                }
            }
        }
        Rule::R13 => {
            for (h, a) in &ctx.over {
                if let Some(i) = base.true_flag(a, Flag::Simple) {
                    out.push(flag_cand(h, Flag::Minimal, rule, vec![i]));
                }
            }
        }
        Rule::R14 => {
            for c in single(Op::CuntzPimsner) {
                let o = c.out.as_str();
                let prem = [
                    base.true_flag(o, Flag::Unital),
                    base.true_flag(o, Flag::Simple),
                    base.true_flag(o, Flag::Uct),
                    base.bound_fact(o, DimNuc).map(|(_, i)| i),
                ];
                if prem.iter().all(Option::is_some) {
                    out.push(flag_cand(o, Flag::Classifiable, rule, prem.iter().flatten().copied().collect()));
                }
            }
        }
        Rule::Fgp => {
            for (h, &k) in &ctx.kinds {
                if k == EntityKind::Correspondence {
                    if let Some(i) = base.true_flag(h, Flag::Fgp) {
                        out.push(flag_cand(h, Flag::QuasicentralProjectionUnit, rule, vec![i]));
                    }
                }
            }
        }
        Rule::Unpack => {
            for (a, &k) in &ctx.kinds {
                if k != EntityKind::Algebra {
                    continue;
                }
                if let Some(i) = base.true_flag(a, Flag::Classifiable) {
                    for f in [Flag::Unital, Flag::Simple, Flag::Uct] {
                        out.push(flag_cand(a, f, rule, vec![i]));
                    }
                    out.push(cand(a, DimNuc, Value::Bound(Bound::Finite), rule, vec![i]));
                }
            }
        }
        Rule::FiniteRokhlin => {
            for (h, &k) in &ctx.kinds {
                if k != EntityKind::Correspondence {
                    continue;
                }
                if let Some(i) = base.true_flag(h, Flag::FiniteRokhlin) {
                    out.push(cand(h, DimRok, Value::Bound(Bound::Finite), rule, vec![i]));
                }
                if let Some((_, i)) = base.bound_fact(h, DimRok) {
                    out.push(flag_cand(h, Flag::FiniteRokhlin, rule, vec![i]));
                }
            }
        }
        Rule::Unital => {
            for c in ctx.cons.iter().filter(|c| matches!(c.op, Op::Toeplitz | Op::CuntzPimsner)) {
                let a = ctx.over[c.inputs[0].as_str()];
                if let Some(i) = base.true_flag(a, Flag::Unital) {
                    out.push(flag_cand(&c.out, Flag::Unital, rule, vec![i]));
                }
            }
        }
        Rule::SumFgp => {
            for c in ctx.cons.iter().filter(|c| c.op == Op::DirectSum) {
                let ids: Option<Vec<usize>> = c.inputs.iter().map(|h| base.true_flag(h, Flag::Fgp)).collect();
                if let Some(mut ids) = ids {
                    ids.sort_unstable();
                    ids.dedup();
                    out.push(flag_cand(&c.out, Flag::Fgp, rule, ids));
                }
            }
        }
    }
    // deterministic order regardless of hash iteration
    out.sort_by(|x, y| (&x.entity, x.attribute, &x.premises).cmp(&(&y.entity, y.attribute, &y.premises)));
    out
}

/// Runs every rule to the least fixed point, visiting rules in `order`.
pub fn propagate_with_order(graph: &DimGraph, config: PropagationConfig, order: &[Rule]) -> Result<FactBase> {
    let mut ctx = graph.validate()?;
    ctx.config = config;
    let mut base = graph.declared_facts(&ctx)?;
    loop {
        let mut changed = false;
        for &r in order {
            for c in apply_rule(r, &ctx, &base) {
                changed |= base.offer(c)?;
            }
        }
        if !changed {
            return Ok(base);
        }
    }
}

pub fn propagate(graph: &DimGraph) -> Result<FactBase> {
    propagate_with_order(graph, PropagationConfig::default(), &Rule::DERIVING)
}

pub fn propagate_with(graph: &DimGraph, config: PropagationConfig) -> Result<FactBase> {
    propagate_with_order(graph, config, &Rule::DERIVING)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfluenceReport {
    pub seeds: Vec<u64>,
    pub confluent: bool,
    /// Seeds whose fixed point differs from the default order.
    pub mismatches: Vec<u64>,
}

/// Reruns propagation with the rule order shuffled under each seed and
/// compares the current values with the default-order fixed point.
pub fn confluence_check(graph: &DimGraph, seeds: &[u64]) -> Result<ConfluenceReport> {
    let reference = propagate(graph)?.values();
    let mut mismatches = Vec::new();
    for &s in seeds {
        let mut order = Rule::DERIVING.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
        if propagate_with_order(graph, PropagationConfig::default(), &order)?.values() != reference {
            mismatches.push(s);
        }
    }
    Ok(ConfluenceReport {
        seeds: seeds.to_vec(),
        confluent: mismatches.is_empty(),
        mismatches,
    })
}

/// Builder used by tests and fixtures.
impl DimGraph {
    pub fn algebra(mut self, id: &str) -> Self {
        self.entities.push(Entity {
            id: id.into(),
            kind: EntityKind::Algebra,
            over: None,
        });
        self
    }

    pub fn correspondence(mut self, id: &str, over: &str) -> Self {
        self.entities.push(Entity {
            id: id.into(),
            kind: EntityKind::Correspondence,
            over: Some(over.into()),
        });
        self
    }

    pub fn construct(mut self, op: Op, inputs: &[&str], out: &str) -> Self {
        self.constructions.push(Construction {
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            out: out.into(),
        });
        self
    }

    pub fn declare_bound(mut self, entity: &str, attribute: DeclaredAttribute, value: u64) -> Self {
        self.declared.push(Declaration {
            entity: entity.into(),
            attribute,
            value: Some(value.into()),
            m: None,
            n: None,
        });
        self
    }

    pub fn declare_flag(mut self, entity: &str, attribute: DeclaredAttribute) -> Self {
        self.declared.push(Declaration {
            entity: entity.into(),
            attribute,
            value: None,
            m: None,
            n: None,
        });
        self
    }

    pub fn declare_scheme(mut self, entity: &str, m: u64, n: u64) -> Self {
        self.declared.push(Declaration {
            entity: entity.into(),
            attribute: DeclaredAttribute::FactorizationScheme,
            value: None,
            m: Some(m),
            n: Some(n),
        });
        self
    }

    /// `A`, `H` over `A`, `T = T(H)`, `O = O(H)`.
    pub fn toeplitz_instance() -> Self {
        DimGraph::default()
            .algebra("A")
            .correspondence("H", "A")
            .algebra("T")
            .algebra("O")
            .construct(Op::Toeplitz, &["H"], "T")
            .construct(Op::CuntzPimsner, &["H"], "O")
    }
}

//! Task files and their runners. Every runner returns a JSON report free of
//! timing data, so reruns with the same inputs and seed are byte-identical.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::AlgElement;
use crate::amatrix::AMatrix;
use crate::correspondence::TensorPowerCache;
use crate::dim_calculus::{confluence_check, propagate_with, ConfluenceReport, DimFact, DimGraph, PropagationConfig};
use crate::error::{Error, Result};
use crate::factorization::{analytic_bound, verify_factorization, FactorizationCertificate};
use crate::fock::{basis_spanning_family, quasicentral_check, toeplitz_relations_instance, QuasicentralReport, RelationDefects};
use crate::io::{element_from_desc, parse_json, CorrespondenceDesc, ElementDesc, OperatorDesc, TowerDesc};
use crate::module::ModuleVector;
use crate::rokhlin::{check_tower, cyclic_shift_correspondence, synthesize_cyclic_tower, TowerDefects};

pub const TASK_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub version: u32,
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CheckTower(CheckTowerTask),
    SynthesizeTower(SynthesizeTowerTask),
    VerifyFactorization(VerifyFactorizationTask),
    Sweep(SweepTask),
    QuasicentralCheck(QuasicentralTask),
    Bounds(BoundsTask),
    Relations(RelationsTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::CheckTower(_) => "check_tower",
            Task::SynthesizeTower(_) => "synthesize_tower",
            Task::VerifyFactorization(_) => "verify_factorization",
            Task::Sweep(_) => "sweep",
            Task::QuasicentralCheck(_) => "quasicentral_check",
            Task::Bounds(_) => "bounds",
            Task::Relations(_) => "relations",
        }
    }
}

impl TaskFile {
    pub fn parse(s: &str) -> Result<Self> {
        let f: TaskFile = parse_json(s)?;
        if f.version != TASK_VERSION {
            return Err(Error::Input(format!("unsupported task version {}", f.version)));
        }
        Ok(f)
    }
}

/// Defaults to the module basis and the matrix units of `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckTowerTask {
    pub correspondence: CorrespondenceDesc,
    pub tower: TowerDesc,
    /// Test vectors as coordinate arrays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<ElementDesc>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<ElementDesc>>,
    /// Pass threshold on the largest defect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeTowerTask {
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFactorizationTask {
    pub correspondence: CorrespondenceDesc,
    pub tower: TowerDesc,
    #[serde(rename = "F")]
    pub f: Vec<OperatorDesc>,
    pub epsilon: f64,
    pub q_max: usize,
}

/// Cyclic fixtures `n = p` with their exact (or `d = 1`) towers and
/// `F = {T_z}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTask {
    pub p: Vec<usize>,
    #[serde(default)]
    pub d: usize,
    #[serde(default = "default_sweep_eps")]
    pub epsilon: f64,
    /// Cutoff is `2p + extra`.
    #[serde(default = "default_sweep_extra")]
    pub extra_cutoff: usize,
}

fn default_sweep_eps() -> f64 {
    0.7
}

fn default_sweep_extra() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasicentralTask {
    pub correspondence: CorrespondenceDesc,
    pub p: usize,
    /// Letters kept by `q_n`; when absent every `n` from 1 to the rank is
    /// reported and the pass criterion applies to the full basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsTask {
    pub graph: DimGraph,
    #[serde(default)]
    pub config: PropagationConfig,
    #[serde(default = "default_confluence_seeds")]
    pub confluence_seeds: u64,
}

fn default_confluence_seeds() -> u64 {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationsTask {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

fn default_instances() -> usize {
    100
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    /// Overrides the task's pass threshold.
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutcome {
    pub pass: bool,
    pub report: serde_json::Value,
    /// `(file name, contents)`.
    pub csv: Option<(String, String)>,
}

pub const TOWER_TOL: f64 = 1e-10;
pub const QC_TOL: f64 = 1e-10;
pub const RELATION_TOL: f64 = 1e-10;
pub const SWEEP_SLACK: f64 = 1e-6;

pub fn run_task(task: &Task, opts: RunOptions) -> Result<TaskOutcome> {
    match task {
        Task::CheckTower(t) => run_check_tower(t, opts),
        Task::SynthesizeTower(t) => run_synthesize(t),
        Task::VerifyFactorization(t) => run_verify(t),
        Task::Sweep(t) => run_sweep(t),
        Task::QuasicentralCheck(t) => run_quasicentral(t, opts),
        Task::Bounds(t) => run_bounds(t),
        Task::Relations(t) => run_relations(t, opts),
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("reports serialize")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerReport {
    pub anchor: String,
    pub d: usize,
    pub p: usize,
    pub defects: TowerDefects,
    pub max: f64,
    pub tol: f64,
    pub pass: bool,
}

const TOWER_ANCHOR: &str = "Rokhlin tower: ‖f_k f_j‖, ‖Σ f_k − 1‖, ‖z·f_k − f_{k+1}·z‖, ‖[f_k, a]‖";

pub fn run_check_tower(t: &CheckTowerTask, opts: RunOptions) -> Result<TaskOutcome> {
    let h = t.correspondence.build()?;
    let alg = h.algebra().clone();
    let tower = t.tower.build(&alg)?;
    let space = h.space();
    let vs: Vec<ModuleVector> = match &t.vectors {
        Some(list) => list
            .iter()
            .map(|v| {
                let entries = v.iter().map(|e| element_from_desc(&alg, e)).collect::<Result<Vec<_>>>()?;
                let col = AMatrix::column(&alg, &entries)?;
                space.vector(col).map_err(|e| Error::Input(e.to_string()))
            })
            .collect::<Result<_>>()?,
        None => (0..space.free_rank())
            .map(|i| {
                let mut col = AMatrix::zeros(&alg, space.free_rank(), 1);
                col.set_entry(i, 0, &AlgElement::one(&alg))?;
                space.project(col)
            })
            .collect::<Result<_>>()?,
    };
    let fs: Vec<AlgElement> = match &t.elements {
        Some(list) => list.iter().map(|e| element_from_desc(&alg, e)).collect::<Result<_>>()?,
        None => (0..alg.total_dim()).map(|i| AlgElement::basis_element(&alg, i)).collect(),
    };
    let defects = check_tower(&tower, &h, &vs, &fs)?;
    let tol = opts.tol.or(t.tol).unwrap_or(TOWER_TOL);
    let max = defects.max();
    let r = TowerReport {
        anchor: TOWER_ANCHOR.into(),
        d: tower.d(),
        p: tower.p(),
        defects,
        max,
        tol,
        pass: max <= tol,
    };
    Ok(TaskOutcome {
        pass: r.pass,
        report: json(&r),
        csv: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub anchor: String,
    pub n: usize,
    pub tower: TowerDesc,
    pub defects: TowerDefects,
}

/// Synthesizes a tower on `ℂ^n` for the shift and re-measures its defects.
pub fn run_synthesize(t: &SynthesizeTowerTask) -> Result<TaskOutcome> {
    let tower = synthesize_cyclic_tower(t.n, t.p, t.d)?;
    let h = cyclic_shift_correspondence(t.n, 1)?;
    let alg = h.algebra().clone();
    let vs = vec![h.space().basis_vector(0)?];
    let fs: Vec<AlgElement> = (0..alg.total_dim()).map(|i| AlgElement::basis_element(&alg, i)).collect();
    let defects = check_tower(&tower, &h, &vs, &fs)?;
    let r = SynthesisReport {
        anchor: TOWER_ANCHOR.into(),
        n: t.n,
        tower: TowerDesc::of(&tower),
        defects,
    };
    Ok(TaskOutcome {
        pass: true,
        report: json(&r),
        csv: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub anchor: String,
    pub certificate: FactorizationCertificate,
}

const MAIN_ANCHOR: &str =
    "main_thm: ‖Σ_l (ρ^l + ρ̂^l)(φ(T)) − T‖ ≤ (d+1)(2√(2N/(p−1)) + 4N²/(p−1)) for T_xT_y* with |x|,|y| ≤ N";

pub fn run_verify(t: &VerifyFactorizationTask) -> Result<TaskOutcome> {
    let h = t.correspondence.build()?;
    let tower = t.tower.build(h.algebra())?;
    if t.f.is_empty() {
        return Err(Error::Input("F is empty".into()));
    }
    let deg = t.f.iter().try_fold(0, |m, o| Ok::<_, Error>(m.max(o.max_degree()?)))?;
    let cache = TensorPowerCache::new(h.clone(), deg)?;
    let f = t.f.iter().map(|o| o.build(&cache)).collect::<Result<Vec<_>>>()?;
    let cert = verify_factorization(&h, &tower, &f, t.epsilon, t.q_max)?;
    let csv = cert.csv();
    let r = VerifyReport {
        anchor: MAIN_ANCHOR.into(),
        certificate: cert,
    };
    Ok(TaskOutcome {
        pass: r.certificate.pass,
        report: json(&r),
        csv: Some(("factorization.csv".into(), csv)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p: usize,
    pub analytic_bound: f64,
    pub measured_error: f64,
    /// First cutoff at which the compression norms were declared converged.
    pub q_converged: Option<usize>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub anchor: String,
    pub d: usize,
    pub epsilon: f64,
    pub rows: Vec<SweepPoint>,
    pub nonincreasing: bool,
    pub pass: bool,
}

pub fn sweep_point(p: usize, d: usize, eps: f64, extra: usize) -> Result<SweepPoint> {
    let n = p;
    let h = Arc::new(cyclic_shift_correspondence(n, 1)?);
    let tower = synthesize_cyclic_tower(n, p, d)?;
    let cache = TensorPowerCache::new(h.clone(), 1)?;
    let f = vec![OperatorDesc::generator().build(&cache)?];
    let cert = verify_factorization(&h, &tower, &f, eps, 2 * p + extra)?;
    let e = &cert.elements[0];
    Ok(SweepPoint {
        p,
        analytic_bound: analytic_bound(d, cert.n, p),
        measured_error: e.measured,
        q_converged: e.sweep.iter().find(|r| r.converged).map(|r| r.q),
        pass: cert.pass,
    })
}

pub fn run_sweep(t: &SweepTask) -> Result<TaskOutcome> {
    if t.p.is_empty() {
        return Err(Error::Input("empty p list".into()));
    }
    if let Some(p) = t.p.iter().find(|&&p| p < 3 || p % 2 == 0) {
        return Err(Error::Input(format!("p = {p} is not an odd integer ≥ 3")));
    }
    let rows = t
        .p
        .par_iter()
        .map(|&p| sweep_point(p, t.d, t.epsilon, t.extra_cutoff))
        .collect::<Result<Vec<_>>>()?;
    let mut sorted: Vec<&SweepPoint> = rows.iter().collect();
    sorted.sort_by_key(|r| r.p);
    let nonincreasing = sorted.windows(2).all(|w| w[1].measured_error <= w[0].measured_error + SWEEP_SLACK);
    let mut csv = String::from("p,analytic_bound,measured_error,q_converged\n");
    for r in &rows {
        let q = r.q_converged.map_or(String::new(), |q| q.to_string());
        csv.push_str(&format!("{},{:.12e},{:.12e},{}\n", r.p, r.analytic_bound, r.measured_error, q));
    }
    let all_converged = rows.iter().all(|r| r.q_converged.is_some());
    let r = SweepReport {
        anchor: "pestimate: (d+1)(2√(2N/(p−1)) + 4N²/(p−1))".into(),
        d: t.d,
        epsilon: t.epsilon,
        nonincreasing,
        pass: nonincreasing && all_converged,
        rows,
    };
    Ok(TaskOutcome {
        pass: r.pass,
        report: json(&r),
        csv: Some(("sweep.csv".into(), csv)),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasicentralTaskReport {
    pub anchor: String,
    pub tol: f64,
    pub reports: Vec<QuasicentralReport>,
    pub pass: bool,
}

pub fn run_quasicentral(t: &QuasicentralTask, opts: RunOptions) -> Result<TaskOutcome> {
    let h = t.correspondence.build()?;
    let cache = Arc::new(TensorPowerCache::new(h.clone(), t.p)?);
    let family = basis_spanning_family(&cache, t.p, 4096)?;
    let ns: Vec<usize> = match t.n {
        Some(n) => vec![n],
        None => (1..=h.rank()).collect(),
    };
    let reports = ns
        .iter()
        .map(|&n| quasicentral_check(&cache, t.p, Some(n), &family))
        .collect::<Result<Vec<_>>>()?;
    let tol = opts.tol.or(t.tol).unwrap_or(QC_TOL);
    let pass = reports.last().is_some_and(|r| r.max_defect <= tol);
    let r = QuasicentralTaskReport {
        anchor: "QD-examples: q_n = Σ e_{ζ,ζ} over words in the first n letters is quasicentral in D_p(H)".into(),
        tol,
        reports,
        pass,
    };
    Ok(TaskOutcome {
        pass,
        report: json(&r),
        csv: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainedFact {
    pub fact: DimFact,
    pub explanation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub anchor: String,
    pub current: Vec<ExplainedFact>,
    pub all_facts: Vec<DimFact>,
    pub confluence: ConfluenceReport,
}

pub fn run_bounds(t: &BoundsTask) -> Result<TaskOutcome> {
    let base = propagate_with(&t.graph, t.config)?;
    let current = base
        .current()
        .map(|f| {
            Ok(ExplainedFact {
                fact: f.clone(),
                explanation: base.explain(f.id)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let seeds: Vec<u64> = (0..t.confluence_seeds).collect();
    let confluence = confluence_check(&t.graph, &seeds)?;
    let r = BoundsReport {
        anchor: "dimension calculus: least fixed point of the rule set R1–R14".into(),
        current,
        all_facts: base.facts.clone(),
        confluence,
    };
    Ok(TaskOutcome {
        pass: true,
        report: json(&r),
        csv: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationsReport {
    pub anchor: String,
    pub seed: u64,
    pub tol: f64,
    pub max_linearity: f64,
    pub max_bimodularity: f64,
    pub max_inner: f64,
    pub instances: Vec<RelationDefects>,
    pub pass: bool,
}

/// `instances` random correspondences seeded `seed, seed+1, …`.
pub fn relation_suite(seed: u64, instances: usize, tol: f64) -> Result<RelationsReport> {
    let list = (0..instances as u64)
        .into_par_iter()
        .map(|i| toeplitz_relations_instance(seed.wrapping_add(i)))
        .collect::<Result<Vec<_>>>()?;
    let mx = |f: fn(&RelationDefects) -> f64| list.iter().map(f).fold(0.0, f64::max);
    let (l, b, i) = (mx(|r| r.linearity), mx(|r| r.bimodularity), mx(|r| r.inner));
    Ok(RelationsReport {
        anchor: "Toeplitz relations: T_{zx+y} = zT_x + T_y, T_{a·x·b} = aT_xb, T_x*T_y = ⟨x,y⟩".into(),
        seed,
        tol,
        max_linearity: l,
        max_bimodularity: b,
        max_inner: i,
        pass: l.max(b).max(i) <= tol,
        instances: list,
    })
}

pub fn run_relations(t: &RelationsTask, opts: RunOptions) -> Result<TaskOutcome> {
    let r = relation_suite(opts.seed, t.instances, opts.tol.or(t.tol).unwrap_or(RELATION_TOL))?;
    Ok(TaskOutcome {
        pass: r.pass,
        report: json(&r),
        csv: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c6_check() -> CheckTowerTask {
        CheckTowerTask {
            correspondence: CorrespondenceDesc::cyclic_shift(6, 1),
            tower: TowerDesc::of(&synthesize_cyclic_tower(6, 3, 0).unwrap()),
            vectors: None,
            elements: None,
            tol: Some(1e-12),
        }
    }

    #[test]
    fn check_tower_fixture() {
        let out = run_check_tower(&c6_check(), RunOptions::default()).unwrap();
        assert!(out.pass);
        let d = &out.report["defects"];
        for k in ["orth", "unit", "shift", "commute"] {
            assert!(d[k].as_f64().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn task_file_round_trip() {
        let f = TaskFile {
            version: 1,
            task: Task::CheckTower(c6_check()),
        };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(TaskFile::parse(&s).unwrap(), f);
        let bad = s.replacen("\"version\":1", "\"version\":1,\"extra\":0", 1);
        assert!(matches!(TaskFile::parse(&bad), Err(Error::Input(_))));
        let v2 = s.replacen("\"version\":1", "\"version\":2", 1);
        assert!(matches!(TaskFile::parse(&v2), Err(Error::Input(_))));
    }

    #[test]
    fn sweep_rejects_bad_lists() {
        let mut t = SweepTask {
            p: vec![],
            d: 0,
            epsilon: 0.7,
            extra_cutoff: 6,
        };
        assert!(matches!(run_sweep(&t), Err(Error::Input(_))));
        t.p = vec![5, 6];
        assert!(matches!(run_sweep(&t), Err(Error::Input(_))));
    }

    #[test]
    fn small_sweep() {
        let t = SweepTask {
            p: vec![3, 5],
            d: 0,
            epsilon: 4.5,
            extra_cutoff: 6,
        };
        let out = run_sweep(&t).unwrap();
        let rows = out.report["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0]["measured_error"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!((rows[1]["measured_error"].as_f64().unwrap() - 1.0).abs() < 1e-9);
        assert!(out.pass);
        let csv = out.csv.unwrap().1;
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn bounds_and_relations_deterministic() {
        let g = DimGraph::toeplitz_instance()
            .declare_bound("A", crate::dim_calculus::DeclaredAttribute::DimNuc, 0)
            .declare_bound("H", crate::dim_calculus::DeclaredAttribute::DimRok, 0)
            .declare_flag("H", crate::dim_calculus::DeclaredAttribute::Fgp);
        let t = BoundsTask {
            graph: g,
            config: PropagationConfig::default(),
            confluence_seeds: 5,
        };
        let a = serde_json::to_string(&run_bounds(&t).unwrap().report).unwrap();
        let b = serde_json::to_string(&run_bounds(&t).unwrap().report).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("main_thm"));
        let opts = RunOptions { seed: 7, tol: None };
        let r1 = run_relations(&RelationsTask { instances: 5, tol: None }, opts).unwrap();
        let r2 = run_relations(&RelationsTask { instances: 5, tol: None }, opts).unwrap();
        assert!(r1.pass);
        assert_eq!(serde_json::to_string(&r1.report).unwrap(), serde_json::to_string(&r2.report).unwrap());
    }
}

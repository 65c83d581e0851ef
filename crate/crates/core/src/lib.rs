//! Fock modules, Rokhlin towers and completely positive factorizations over
//! finite-dimensional C*-algebras.

pub mod algebra;
pub mod amatrix;
pub mod correspondence;
pub mod dim_calculus;
pub mod error;
pub mod factorization;
pub mod fock;
pub mod io;
pub mod module;
pub mod rokhlin;
pub mod tasks;

pub use algebra::{AlgElement, Automorphism, ScalarAlgebra, C64};
pub use amatrix::AMatrix;
pub use correspondence::{Correspondence, ElementaryTensor, TensorPowerCache, TensorVector};
pub use error::{Error, Result};
pub use module::{ModOperator, ModuleSpace, ModuleVector};
pub use fock::{BandSum, BandTerm, DpElement, DpTerm, FockTruncation, GradedOperator};
pub use rokhlin::{bump, RokhlinTower, TowerDefects};
pub use factorization::{verify_factorization, FactorizationCertificate};
pub use dim_calculus::{propagate, DimGraph, FactBase};
pub use tasks::{run_task, Task, TaskFile};

//! Fixtures shared by the benchmarks in `benches/`.

use std::sync::Arc;

use pimsner_lab::algebra::{Automorphism, ScalarAlgebra};
use pimsner_lab::correspondence::{Correspondence, TensorPowerCache};
use pimsner_lab::dim_calculus::{DeclaredAttribute as D, DimGraph};
use pimsner_lab::fock::BandSum;
use pimsner_lab::rokhlin::{cyclic_shift_correspondence, synthesize_cyclic_tower};
use pimsner_lab::RokhlinTower;

/// The shift on `ℂ^n` with its exact height-`p` tower.
pub fn cyclic_fixture(n: usize, p: usize) -> (Arc<Correspondence>, RokhlinTower) {
    let h = Arc::new(cyclic_shift_correspondence(n, 1).expect("n ≥ 1"));
    (h, synthesize_cyclic_tower(n, p, 0).expect("p divides n"))
}

/// `{T_z}` for the first basis vector.
pub fn generator(h: &Arc<Correspondence>) -> Vec<BandSum> {
    let cache = TensorPowerCache::new(h.clone(), 1).expect("degree one");
    vec![pimsner_lab::factorization::generator_element(&cache).expect("rank ≥ 1")]
}

/// Rank-two twisted free correspondence over `ℂ^2` (identity and flip).
pub fn twisted_free() -> Arc<Correspondence> {
    let alg = ScalarAlgebra::commutative(2).expect("two points");
    let id = Automorphism::identity(&alg);
    let swap = Automorphism::cyclic_shift(&alg, 1).expect("flip");
    Arc::new(Correspondence::twisted_free(&[id, swap]).expect("automorphisms"))
}

pub fn classifiable_graph() -> DimGraph {
    DimGraph::toeplitz_instance()
        .declare_flag("A", D::Classifiable)
        .declare_flag("H", D::Fgp)
        .declare_flag("H", D::FiniteRokhlin)
}

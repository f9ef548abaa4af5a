#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlpl_core::{AttractTable, BaseCurve, DocLenGrid, ExposureTable, RankingConfig, ScoreTable};

pub struct Instance {
    pub config: RankingConfig,
    pub scores: ScoreTable,
    pub attract: AttractTable,
    pub exposure: ExposureTable,
}

/// Random instance with |D| <= max_docs, L <= max_l, L <= K <= max_k.
pub fn random_instance(seed: u64, max_docs: usize, max_l: usize, max_k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let docs = rng.random_range(1..=max_docs);
    let l = rng.random_range(1..=max_l);
    let k = rng.random_range(l..=max_k.max(l));
    let config = RankingConfig::new(docs, k, l).unwrap();
    let scores = ScoreTable::new(DocLenGrid::from_fn(docs, l, |_, _| rng.random_range(-1.0..1.0))).unwrap();
    let attract = AttractTable::new(DocLenGrid::from_fn(docs, l, |_, _| rng.random_range(0.0..1.0))).unwrap();
    let mut base: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
    base.sort_by(|a, b| b.total_cmp(a));
    let exposure = ExposureTable::composite(&BaseCurve::Custom(base), k, l).unwrap();
    Instance {
        config,
        scores,
        attract,
        exposure,
    }
}

pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;

pub fn table1_attract(rho_b: f64) -> AttractTable {
    AttractTable::length_independent(&[1.0, rho_b, 0.0], 3).unwrap()
}

pub fn theta1() -> ExposureTable {
    ExposureTable::composite(&BaseCurve::Custom(vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0]), 3, 3).unwrap()
}

pub fn theta2() -> ExposureTable {
    ExposureTable::from_entries(
        3,
        3,
        &[(1, 1, 0.631), (1, 2, 0.815), (1, 3, 0.895), (2, 1, 0.500), (2, 2, 0.715), (3, 1, 0.431)],
    )
    .unwrap()
}

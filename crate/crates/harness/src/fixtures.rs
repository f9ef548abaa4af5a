//! Verification fixtures: the three-document example (A always more
//! attractive than B, C never attracts, K = L = 3) and random small instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlpl_core::{AttractTable, BaseCurve, DocLenGrid, ExposureTable, RankingConfig, ScoreTable, VarRanking};

pub const A: usize = 0;
pub const B: usize = 1;
pub const C: usize = 2;

pub fn config() -> RankingConfig {
    RankingConfig::new(3, 3, 3).unwrap()
}

pub fn attract(rho_b: f64) -> AttractTable {
    AttractTable::length_independent(&[1.0, rho_b, 0.0], 3).unwrap()
}

/// Composite of 1/(i+1).
pub fn theta1() -> ExposureTable {
    ExposureTable::composite(&BaseCurve::Custom(vec![1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0]), 3, 3).unwrap()
}

pub const THETA2: [(usize, usize, f64); 6] =
    [(1, 1, 0.631), (1, 2, 0.815), (1, 3, 0.895), (2, 1, 0.500), (2, 2, 0.715), (3, 1, 0.431)];

pub fn theta2() -> ExposureTable {
    ExposureTable::from_entries(3, 3, &THETA2).unwrap()
}

/// Column labels and rankings, in printed order.
pub fn columns() -> Vec<(&'static str, VarRanking)> {
    vec![
        ("AAA", VarRanking::from_pairs(&[(A, 3)])),
        ("AAB", VarRanking::from_pairs(&[(A, 2), (B, 1)])),
        ("ABB", VarRanking::from_pairs(&[(A, 1), (B, 2)])),
        ("BAA", VarRanking::from_pairs(&[(B, 1), (A, 2)])),
        ("BBA", VarRanking::from_pairs(&[(B, 2), (A, 1)])),
        ("BBB", VarRanking::from_pairs(&[(B, 3)])),
        ("AA", VarRanking::from_pairs(&[(A, 2)])),
        ("AB(C)", VarRanking::from_pairs(&[(A, 1), (B, 1), (C, 1)])),
        ("BA", VarRanking::from_pairs(&[(B, 1), (A, 1), (C, 1)])),
    ]
}

pub const PRINTED_THETA1: [f64; 9] = [0.750, 0.817, 0.800, 0.800, 0.650, 0.450, 0.667, 0.700, 0.633];
pub const PRINTED_THETA2: [f64; 9] = [0.895, 1.074, 1.060, 1.094, 0.920, 0.537, 0.815, 0.931, 0.879];
pub const PRINT_TOL: f64 = 5e-4;

/// Short label for a ranking over A, B, C, e.g. "BAA".
pub fn label(r: &VarRanking) -> String {
    r.items
        .iter()
        .flat_map(|p| std::iter::repeat_n((b'A' + p.doc as u8) as char, p.len))
        .collect()
}

pub struct Instance {
    pub config: RankingConfig,
    pub scores: ScoreTable,
    pub attract: AttractTable,
    pub exposure: ExposureTable,
}

/// Random instance with |D| <= max_docs, L <= max_l, L <= K <= max_k, and a
/// composite exposure over a random decreasing base curve.
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

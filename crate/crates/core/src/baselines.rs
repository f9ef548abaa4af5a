//! Deterministic layout heuristics: fixed-length sorting, greedy
//! exposure-weighted selection and its per-slot variant.

use crate::exposure::ExposureTable;
use crate::types::{AttractTable, Placement, RankingConfig, VarRanking};

/// Sorts documents by attractiveness at `fixed_len` and places them at that
/// length until the next one would overflow the budget.
pub fn sort_fixed_length(attract: &AttractTable, fixed_len: usize, config: &RankingConfig) -> VarRanking {
    assert!(fixed_len >= 1 && fixed_len <= config.max_len(), "length {fixed_len} outside 1..={}", config.max_len());
    let mut docs: Vec<usize> = (0..config.num_docs()).collect();
    docs.sort_by(|&a, &b| attract.get(b, fixed_len).total_cmp(&attract.get(a, fixed_len)).then(a.cmp(&b)));
    let count = (config.slots() / fixed_len).min(config.num_docs());
    VarRanking::new(docs[..count].iter().map(|&d| Placement::new(d, fixed_len)).collect())
}

fn sequential_layout(
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    value: impl Fn(f64, usize) -> f64,
) -> VarRanking {
    let mut placed = vec![false; config.num_docs()];
    let mut items = Vec::new();
    let mut slot = 1;
    loop {
        let free = config.slots() + 1 - slot;
        let mut best: Option<(f64, Placement)> = None;
        // Length-major scan so that strict improvement keeps the shorter
        // length, then the lower document index, on ties.
        for l in 1..=config.max_len().min(free) {
            let theta = exposure.at(slot, l);
            for d in (0..config.num_docs()).filter(|&d| !placed[d]) {
                let v = value(theta * attract.get(d, l), l);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, Placement::new(d, l)));
                }
            }
        }
        let Some((_, p)) = best else { break };
        placed[p.doc] = true;
        slot += p.len;
        items.push(p);
    }
    VarRanking::new(items)
}

/// Repeatedly places the eligible pair maximizing theta(s, l) * rho(d, l).
pub fn greedy_layout(attract: &AttractTable, exposure: &ExposureTable, config: &RankingConfig) -> VarRanking {
    sequential_layout(attract, exposure, config, |v, _| v)
}

/// As [`greedy_layout`] with the criterion divided by the length.
pub fn slot_avg_layout(attract: &AttractTable, exposure: &ExposureTable, config: &RankingConfig) -> VarRanking {
    sequential_layout(attract, exposure, config, |v, l| v / l as f64)
}

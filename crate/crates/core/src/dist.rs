//! The variable-length Plackett-Luce distribution over rankings.
//!
//! Each step samples a (document, length) pair from a softmax over the
//! pairs that are still eligible: the document is unplaced and the length
//! fits in the remaining budget. Exact probabilities are available for
//! small instances; sampling goes through a super-ranking (a permutation of
//! every pair) that is greedily truncated into a valid ranking.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};
use crate::types::{validate_ranking, DocLenGrid, Placement, RankingConfig, ScoreTable, VarRanking};

/// Scores are centered on their maximum and clamped to this distance below
/// it before exponentiation.
pub const SCORE_CLAMP: f64 = 50.0;

/// Default ceiling on the enumeration count bound.
pub const DEFAULT_ENUM_CEILING: f64 = 1e7;

/// Exponentiated scores, shift-normalized so the largest weight is 1.
#[derive(Debug, Clone)]
pub struct PolicyWeights {
    log_w: DocLenGrid,
    w: DocLenGrid,
}

impl PolicyWeights {
    pub fn new(scores: &ScoreTable) -> Self {
        let grid = scores.grid();
        let max = grid.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_w = DocLenGrid::from_fn(grid.num_docs(), grid.max_len(), |d, l| {
            (grid.get(d, l) - max).max(-SCORE_CLAMP)
        });
        let w = DocLenGrid::from_fn(grid.num_docs(), grid.max_len(), |d, l| log_w.get(d, l).exp());
        Self { log_w, w }
    }

    #[inline]
    pub fn weight(&self, doc: usize, len: usize) -> f64 {
        self.w.get(doc, len)
    }

    #[inline]
    pub fn log_weight(&self, doc: usize, len: usize) -> f64 {
        self.log_w.get(doc, len)
    }

    pub fn num_docs(&self) -> usize {
        self.w.num_docs()
    }

    pub fn max_len(&self) -> usize {
        self.w.max_len()
    }
}

fn placed_and_used(partial: &VarRanking, num_docs: usize) -> (Vec<bool>, usize) {
    let mut placed = vec![false; num_docs];
    for p in &partial.items {
        placed[p.doc] = true;
    }
    (placed, partial.used_slots())
}

fn eligible_mass(weights: &PolicyWeights, placed: &[bool], used: usize, config: &RankingConfig) -> f64 {
    let mut mass = 0.0;
    for (d, &is_placed) in placed.iter().enumerate() {
        if is_placed {
            continue;
        }
        for l in 1..=config.max_len() {
            if used + l <= config.slots() {
                mass += weights.weight(d, l);
            }
        }
    }
    mass
}

/// pi(cand | partial): zero for ineligible candidates.
pub fn placement_prob(
    scores: &ScoreTable,
    partial: &VarRanking,
    cand: Placement,
    config: &RankingConfig,
) -> Result<f64> {
    scores.check_config(config)?;
    if !validate_ranking(partial, config).is_valid() {
        return Err(Error::InvalidRanking("partial ranking is invalid".into()));
    }
    let weights = PolicyWeights::new(scores);
    placement_prob_with(&weights, partial, cand, config)
}

pub(crate) fn placement_prob_with(
    weights: &PolicyWeights,
    partial: &VarRanking,
    cand: Placement,
    config: &RankingConfig,
) -> Result<f64> {
    let (placed, used) = placed_and_used(partial, config.num_docs());
    let mass = eligible_mass(weights, &placed, used, config);
    if mass == 0.0 {
        return Err(Error::NoEligiblePlacement);
    }
    if cand.doc >= config.num_docs()
        || cand.len == 0
        || cand.len > config.max_len()
        || placed[cand.doc]
        || used + cand.len > config.slots()
    {
        return Ok(0.0);
    }
    Ok(weights.weight(cand.doc, cand.len) / mass)
}

/// pi(y) for a complete ranking.
pub fn ranking_prob(scores: &ScoreTable, ranking: &VarRanking, config: &RankingConfig) -> Result<f64> {
    scores.check_config(config)?;
    let weights = PolicyWeights::new(scores);
    ranking_prob_with(&weights, ranking, config)
}

pub(crate) fn ranking_prob_with(weights: &PolicyWeights, ranking: &VarRanking, config: &RankingConfig) -> Result<f64> {
    if !validate_ranking(ranking, config).is_complete() {
        return Err(Error::InvalidRanking("ranking is not valid-complete".into()));
    }
    let mut placed = vec![false; config.num_docs()];
    let mut used = 0;
    let mut prob = 1.0;
    for p in &ranking.items {
        let mass = eligible_mass(weights, &placed, used, config);
        prob *= weights.weight(p.doc, p.len) / mass;
        placed[p.doc] = true;
        used += p.len;
    }
    Ok(prob)
}

/// Upper bound on the number of rankings: sequences of distinct documents
/// with any lengths, up to min(|D|, K) items.
pub fn enumeration_bound(config: &RankingConfig) -> f64 {
    let mut total = 1.0;
    let mut term = 1.0;
    for k in 0..config.num_docs().min(config.slots()) {
        term *= (config.num_docs() - k) as f64 * config.max_len() as f64;
        total += term;
    }
    total
}

/// Every valid-complete ranking, in lexicographic (doc, len) order.
pub fn enumerate_complete_rankings(config: &RankingConfig, ceiling: Option<f64>) -> Result<Vec<VarRanking>> {
    let ceiling = ceiling.unwrap_or(DEFAULT_ENUM_CEILING);
    let bound = enumeration_bound(config);
    if bound > ceiling {
        return Err(Error::TooLarge { bound, ceiling });
    }
    let mut out = Vec::new();
    let mut placed = vec![false; config.num_docs()];
    let mut prefix = Vec::new();
    extend(config, &mut placed, &mut prefix, 0, &mut out);
    Ok(out)
}

fn extend(
    config: &RankingConfig,
    placed: &mut [bool],
    prefix: &mut Vec<Placement>,
    used: usize,
    out: &mut Vec<VarRanking>,
) {
    let mut any = false;
    for d in 0..config.num_docs() {
        if placed[d] {
            continue;
        }
        for l in 1..=config.max_len() {
            if used + l > config.slots() {
                break;
            }
            any = true;
            placed[d] = true;
            prefix.push(Placement::new(d, l));
            extend(config, placed, prefix, used + l, out);
            prefix.pop();
            placed[d] = false;
        }
    }
    if !any {
        out.push(VarRanking::new(prefix.clone()));
    }
}

/// A permutation of all |D| * L (document, length) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperRanking {
    pub items: Vec<Placement>,
}

impl SuperRanking {
    pub fn new(items: Vec<Placement>) -> Self {
        Self { items }
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self::new(pairs.iter().map(|&(d, l)| Placement::new(d, l)).collect())
    }

    /// Checks that every pair of the configured menu appears exactly once.
    pub fn is_complete_permutation(&self, config: &RankingConfig) -> bool {
        if self.items.len() != config.num_pairs() {
            return false;
        }
        let mut seen = vec![false; config.num_pairs()];
        for p in &self.items {
            if p.doc >= config.num_docs() || p.len == 0 || p.len > config.max_len() {
                return false;
            }
            let idx = p.doc * config.max_len() + p.len - 1;
            if seen[idx] {
                return false;
            }
            seen[idx] = true;
        }
        true
    }
}

/// Independent RNG stream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws a super-ranking by perturbing each log-weight with standard Gumbel
/// noise and sorting descending, which is equivalent to sequential softmax
/// sampling without replacement.
pub fn sample_super_ranking<R: Rng + ?Sized>(weights: &PolicyWeights, rng: &mut R) -> SuperRanking {
    let gumbel = Gumbel::new(0.0, 1.0).expect("standard Gumbel");
    let mut keyed: Vec<(f64, Placement)> = Vec::with_capacity(weights.num_docs() * weights.max_len());
    for d in 0..weights.num_docs() {
        for l in 1..=weights.max_len() {
            keyed.push((weights.log_weight(d, l) + gumbel.sample(rng), Placement::new(d, l)));
        }
    }
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0));
    SuperRanking::new(keyed.into_iter().map(|(_, p)| p).collect())
}

/// Reference sampler: repeated softmax draws without replacement.
pub fn sample_super_ranking_sequential<R: Rng + ?Sized>(weights: &PolicyWeights, rng: &mut R) -> SuperRanking {
    let mut remaining: Vec<Placement> = (0..weights.num_docs())
        .flat_map(|d| (1..=weights.max_len()).map(move |l| Placement::new(d, l)))
        .collect();
    let mut items = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let mass: f64 = remaining.iter().map(|p| weights.weight(p.doc, p.len)).sum();
        let mut u = rng.random::<f64>() * mass;
        let mut pick = remaining.len() - 1;
        for (i, p) in remaining.iter().enumerate() {
            u -= weights.weight(p.doc, p.len);
            if u < 0.0 {
                pick = i;
                break;
            }
        }
        items.push(remaining.remove(pick));
    }
    SuperRanking::new(items)
}

/// Output of the super-ranking transforms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformResult {
    pub ranking: VarRanking,
    /// Index in the super-ranking of the pair that produced each item.
    pub source_positions: Vec<usize>,
    /// Length at which each document was placed, if it was.
    pub observed_lengths: Vec<Option<usize>>,
}

impl TransformResult {
    /// Slots used before the item at 0-based `index`.
    fn prefix_len(&self, index: usize) -> usize {
        self.ranking.items[..index].iter().map(|p| p.len).sum()
    }
}

/// Greedy truncation f^{budget}: scan the super-ranking and keep each pair
/// whose document is unplaced and whose length fits.
pub fn transform_f(sup: &SuperRanking, budget: usize, config: &RankingConfig) -> TransformResult {
    scan(sup, budget, config.num_docs(), None)
}

/// f with a substitution: the first time `doc` is selected it is placed at
/// `forced_len` instead, or skipped for good when that length does not fit.
pub fn transform_f_substituted(
    sup: &SuperRanking,
    doc: usize,
    forced_len: usize,
    config: &RankingConfig,
) -> TransformResult {
    scan(sup, config.slots(), config.num_docs(), Some((doc, forced_len)))
}

fn scan(sup: &SuperRanking, budget: usize, num_docs: usize, force: Option<(usize, usize)>) -> TransformResult {
    let mut placed = vec![false; num_docs];
    let mut observed = vec![None; num_docs];
    let mut items = Vec::new();
    let mut sources = Vec::new();
    let mut used = 0;
    let mut remaining_docs = num_docs;
    for (j, p) in sup.items.iter().enumerate() {
        if used == budget || remaining_docs == 0 {
            break;
        }
        if placed[p.doc] || used + p.len > budget {
            continue;
        }
        let len = match force {
            Some((d, forced)) if d == p.doc => forced,
            _ => p.len,
        };
        placed[p.doc] = true;
        remaining_docs -= 1;
        if used + len > budget {
            continue;
        }
        used += len;
        observed[p.doc] = Some(len);
        items.push(Placement::new(p.doc, len));
        sources.push(j);
    }
    TransformResult {
        ranking: VarRanking::new(items),
        source_positions: sources,
        observed_lengths: observed,
    }
}

/// 1-based rank of `doc`, or |y| when absent.
pub fn rank_of_doc(result: &TransformResult, doc: usize) -> usize {
    result.ranking.position_of(doc).map_or(result.ranking.len(), |i| i + 1)
}

/// 1-based rank of `doc` when placed at exactly `len`, else |y|.
pub fn rank_of_pair(result: &TransformResult, doc: usize, len: usize) -> usize {
    match result.ranking.position_of(doc) {
        Some(i) if result.ranking.items[i].len == len => i + 1,
        _ => result.ranking.len(),
    }
}

/// Last 1-based position i of the ranking at which a length-`len` item
/// could still start within the budget; 0 when there is none.
pub fn last_feasible_rank(result: &TransformResult, len: usize, config: &RankingConfig) -> usize {
    let mut last = 0;
    let mut used = 0;
    for (i, p) in result.ranking.items.iter().enumerate() {
        if used + len <= config.slots() {
            last = i + 1;
        }
        used += p.len;
    }
    last
}

/// Probability of `doc` taking length `len` given where it was observed:
/// a softmax over the lengths that fit at its position.
pub fn importance_weight(
    scores: &ScoreTable,
    result: &TransformResult,
    doc: usize,
    len: usize,
    config: &RankingConfig,
) -> Result<f64> {
    let weights = PolicyWeights::new(scores);
    let index = result.ranking.position_of(doc).ok_or(Error::DocNotPlaced(doc))?;
    let free = config.slots() - result.prefix_len(index);
    if len == 0 || len > config.max_len() || len > free {
        return Ok(0.0);
    }
    let mass: f64 = (1..=config.max_len().min(free)).map(|l| weights.weight(doc, l)).sum();
    Ok(weights.weight(doc, len) / mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: usize = 0;
    const B: usize = 1;

    fn cfg(d: usize, k: usize, l: usize) -> RankingConfig {
        RankingConfig::new(d, k, l).unwrap()
    }

    #[test]
    fn placement_examples() {
        let c = cfg(2, 2, 2);
        let m = ScoreTable::zeros(&c);
        let empty = VarRanking::default();
        assert!((placement_prob(&m, &empty, Placement::new(A, 1), &c).unwrap() - 0.25).abs() < 1e-15);
        let after_a = VarRanking::from_pairs(&[(A, 1)]);
        assert_eq!(placement_prob(&m, &after_a, Placement::new(B, 2), &c).unwrap(), 0.0);
        assert_eq!(placement_prob(&m, &after_a, Placement::new(B, 1), &c).unwrap(), 1.0);
        let full = VarRanking::from_pairs(&[(A, 2)]);
        assert_eq!(
            placement_prob(&m, &full, Placement::new(B, 1), &c),
            Err(Error::NoEligiblePlacement)
        );
    }

    #[test]
    fn ranking_prob_examples() {
        let c = cfg(2, 2, 2);
        let m = ScoreTable::zeros(&c);
        for r in [[(A, 1), (B, 1)].as_slice(), &[(B, 1), (A, 1)], &[(A, 2)], &[(B, 2)]] {
            let p = ranking_prob(&m, &VarRanking::from_pairs(r), &c).unwrap();
            assert!((p - 0.25).abs() < 1e-15, "{r:?}");
        }
        let c1 = cfg(1, 1, 1);
        let p = ranking_prob(&ScoreTable::zeros(&c1), &VarRanking::from_pairs(&[(A, 1)]), &c1).unwrap();
        assert_eq!(p, 1.0);
        assert!(ranking_prob(&m, &VarRanking::from_pairs(&[(A, 1)]), &c).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_complete_rankings(&cfg(2, 2, 2), None).unwrap().len(), 4);
        assert_eq!(enumerate_complete_rankings(&cfg(1, 1, 1), None).unwrap().len(), 1);
        let big = cfg(12, 12, 3);
        assert!(matches!(enumerate_complete_rankings(&big, None), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn transform_examples() {
        let c = cfg(2, 3, 2);
        let sup = SuperRanking::from_pairs(&[(A, 2), (A, 1), (B, 2), (B, 1)]);
        assert_eq!(transform_f(&sup, 2, &c).ranking, VarRanking::from_pairs(&[(A, 2)]));
        let sup = SuperRanking::from_pairs(&[(A, 2), (B, 2), (B, 1), (A, 1)]);
        let r = transform_f(&sup, 3, &c);
        assert_eq!(r.ranking, VarRanking::from_pairs(&[(A, 2), (B, 1)]));
        assert_eq!(r.source_positions, vec![0, 2]);
        assert_eq!(r.observed_lengths, vec![Some(2), Some(1)]);

        let forced = transform_f_substituted(&sup, A, 1, &c);
        assert_eq!(forced.ranking, VarRanking::from_pairs(&[(A, 1), (B, 2)]));
        assert_eq!(transform_f_substituted(&sup, A, 2, &c), r);

        let roomy = transform_f(&sup, 4, &c);
        assert_eq!(roomy.ranking, VarRanking::from_pairs(&[(A, 2), (B, 2)]));
    }

    #[test]
    fn forced_length_that_does_not_fit_skips_doc() {
        let c = cfg(2, 3, 3);
        // A selected at length 1 with 2 slots left; forcing length 3 skips A.
        let sup = SuperRanking::from_pairs(&[(B, 1), (A, 1), (A, 2), (A, 3), (B, 2), (B, 3)]);
        let r = transform_f_substituted(&sup, A, 3, &c);
        assert_eq!(r.ranking, VarRanking::from_pairs(&[(B, 1)]));
        assert_eq!(r.observed_lengths[A], None);
    }

    #[test]
    fn rank_helpers() {
        let c = cfg(3, 3, 3);
        let res = |pairs: &[(usize, usize)]| TransformResult {
            ranking: VarRanking::from_pairs(pairs),
            source_positions: vec![],
            observed_lengths: vec![],
        };
        let r = res(&[(A, 2), (B, 1)]);
        assert_eq!(rank_of_doc(&r, B), 2);
        assert_eq!(rank_of_doc(&r, 2), 2);
        assert_eq!(rank_of_pair(&r, B, 2), 2);
        assert_eq!(rank_of_pair(&r, A, 2), 1);
        assert_eq!(last_feasible_rank(&res(&[(A, 1), (B, 1), (2, 1)]), 2, &c), 2);
        assert_eq!(last_feasible_rank(&res(&[(A, 3)]), 3, &c), 1);
    }

    #[test]
    fn importance_weight_examples() {
        let c = cfg(2, 3, 2);
        let m = ScoreTable::from_rows(&[vec![0.0, 3f64.ln()], vec![0.0, 0.0]]).unwrap();
        let sup = SuperRanking::from_pairs(&[(B, 2), (A, 1), (A, 2), (B, 1)]);
        let r = transform_f(&sup, 3, &c);
        // A sits at slot 3: only length 1 fits.
        assert_eq!(importance_weight(&m, &r, A, 1, &c).unwrap(), 1.0);
        assert_eq!(importance_weight(&m, &r, A, 2, &c).unwrap(), 0.0);
        // B at slot 1: both lengths, uniform scores.
        assert!((importance_weight(&m, &r, B, 1, &c).unwrap() - 0.5).abs() < 1e-15);

        let sup = SuperRanking::from_pairs(&[(A, 1), (B, 1), (A, 2), (B, 2)]);
        let r = transform_f(&sup, 3, &c);
        assert!((importance_weight(&m, &r, A, 2, &c).unwrap() - 0.75).abs() < 1e-12);

        let lone = transform_f(&SuperRanking::from_pairs(&[(A, 2), (B, 2), (A, 1), (B, 1)]), 2, &c);
        assert_eq!(importance_weight(&m, &lone, B, 1, &c), Err(Error::DocNotPlaced(B)));
    }

    #[test]
    fn sampler_first_choice_frequency() {
        let m = ScoreTable::from_rows(&[vec![3f64.ln()], vec![0.0]]).unwrap();
        let w = PolicyWeights::new(&m);
        let n = 40_000;
        let hits = (0..n)
            .filter(|&i| sample_super_ranking(&w, &mut sample_rng(7, i)).items[0].doc == A)
            .count();
        let freq = hits as f64 / n as f64;
        // 0.75 +- 5 standard errors
        assert!((freq - 0.75).abs() < 5.0 * (0.75f64 * 0.25 / n as f64).sqrt(), "{freq}");
        let c1 = cfg(1, 1, 1);
        let s = sample_super_ranking(&PolicyWeights::new(&ScoreTable::zeros(&c1)), &mut sample_rng(1, 0));
        assert_eq!(s.items, vec![Placement::new(A, 1)]);
    }

    #[test]
    fn weights_are_clamped() {
        let m = ScoreTable::from_rows(&[vec![1000.0, -1000.0]]).unwrap();
        let w = PolicyWeights::new(&m);
        assert_eq!(w.weight(A, 1), 1.0);
        assert_eq!(w.log_weight(A, 2), -SCORE_CLAMP);
        assert!(w.weight(A, 2) > 0.0);
    }
}

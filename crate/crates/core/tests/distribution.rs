mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use vlpl_core::dist::{
    enumerate_complete_rankings, importance_weight, ranking_prob, sample_rng, sample_super_ranking,
    sample_super_ranking_sequential, transform_f, transform_f_substituted, PolicyWeights, SuperRanking,
};
use vlpl_core::{validate_ranking, Placement, RankingConfig, ScoreTable, VarRanking};

use common::random_instance;

/// Every sequence of distinct documents with arbitrary lengths, kept when
/// the validator calls it complete.
fn brute_force_complete(config: &RankingConfig) -> Vec<VarRanking> {
    let mut frontier = vec![VarRanking::default()];
    let mut out = Vec::new();
    while let Some(r) = frontier.pop() {
        if validate_ranking(&r, config).is_complete() {
            out.push(r.clone());
        }
        if r.len() == config.num_docs() {
            continue;
        }
        for d in 0..config.num_docs() {
            for l in 1..=config.max_len() {
                let mut next = r.clone();
                next.items.push(Placement::new(d, l));
                if validate_ranking(&next, config).is_valid() {
                    frontier.push(next);
                }
            }
        }
    }
    out
}

#[test]
fn enumeration_matches_brute_force() {
    for (d, k, l) in [(1, 1, 1), (2, 2, 2), (3, 3, 3), (3, 4, 2), (4, 4, 3), (2, 5, 3)] {
        let c = RankingConfig::new(d, k, l).unwrap();
        let mut fast = enumerate_complete_rankings(&c, None).unwrap();
        let mut slow = brute_force_complete(&c);
        fast.sort_by(|a, b| a.items.cmp(&b.items));
        slow.sort_by(|a, b| a.items.cmp(&b.items));
        assert_eq!(fast, slow, "{d} {k} {l}");
    }
    // 3 single full-length, 12 (2,1)/(1,2) pairs, 6 permutations at length 1.
    let c = RankingConfig::new(3, 3, 3).unwrap();
    assert_eq!(enumerate_complete_rankings(&c, None).unwrap().len(), 21);
}

#[test]
fn probabilities_sum_to_one() {
    for seed in 0..30 {
        let inst = random_instance(seed, 4, 3, 5);
        let total: f64 = enumerate_complete_rankings(&inst.config, None)
            .unwrap()
            .iter()
            .map(|y| ranking_prob(&inst.scores, y, &inst.config).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "seed {seed}: {total}");
    }
}

fn plackett_luce(scores: &[f64], perm: &[usize]) -> f64 {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut p = 1.0;
    for &d in perm {
        let denom: f64 = remaining.iter().map(|&j| scores[j].exp()).sum();
        p *= scores[d].exp() / denom;
        remaining.retain(|&j| j != d);
    }
    p
}

#[test]
fn unit_length_reduces_to_plackett_luce() {
    for seed in 0..20 {
        let inst = random_instance(seed, 5, 1, 5);
        let c = RankingConfig::new(inst.config.num_docs(), inst.config.num_docs(), 1).unwrap();
        let scores = ScoreTable::from_rows(&(0..c.num_docs()).map(|d| vec![inst.scores.get(d, 1)]).collect::<Vec<_>>()).unwrap();
        let flat: Vec<f64> = (0..c.num_docs()).map(|d| scores.get(d, 1)).collect();
        for y in enumerate_complete_rankings(&c, None).unwrap() {
            let perm: Vec<usize> = y.items.iter().map(|p| p.doc).collect();
            let a = ranking_prob(&scores, &y, &c).unwrap();
            let b = plackett_luce(&flat, &perm);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

fn tv_distance(counts: &HashMap<VarRanking, u64>, n: u64, scores: &ScoreTable, config: &RankingConfig) -> f64 {
    let mut tv = 0.0;
    for y in enumerate_complete_rankings(config, None).unwrap() {
        let p = ranking_prob(scores, &y, config).unwrap();
        let q = counts.get(&y).copied().unwrap_or(0) as f64 / n as f64;
        tv += (p - q).abs();
    }
    tv / 2.0
}

#[test]
fn sequential_sampler_matches_exact_distribution() {
    let n = 50_000;
    for seed in 0..5 {
        let inst = random_instance(100 + seed, 3, 2, 3);
        let w = PolicyWeights::new(&inst.scores);
        let mut counts = HashMap::new();
        for i in 0..n {
            let sup = sample_super_ranking_sequential(&w, &mut sample_rng(seed, i));
            *counts.entry(transform_f(&sup, inst.config.slots(), &inst.config).ranking).or_insert(0) += 1;
        }
        let tv = tv_distance(&counts, n, &inst.scores, &inst.config);
        assert!(tv < 0.02, "seed {seed}: tv {tv}");
    }
}

#[test]
fn gumbel_sampler_matches_exact_distribution() {
    let n = 50_000;
    for seed in 0..5 {
        let inst = random_instance(200 + seed, 3, 2, 3);
        let w = PolicyWeights::new(&inst.scores);
        let mut counts = HashMap::new();
        for i in 0..n {
            let sup = sample_super_ranking(&w, &mut sample_rng(seed, i));
            assert!(sup.is_complete_permutation(&inst.config));
            let r = transform_f(&sup, inst.config.slots(), &inst.config).ranking;
            assert!(validate_ranking(&r, &inst.config).is_complete());
            *counts.entry(r).or_insert(0) += 1;
        }
        let tv = tv_distance(&counts, n, &inst.scores, &inst.config);
        assert!(tv < 0.02, "seed {seed}: tv {tv}");
    }
}

/// Items after `doc` in a ranking.
fn tail_after(r: &VarRanking, doc: usize) -> Vec<Placement> {
    let i = r.position_of(doc).unwrap();
    r.items[i + 1..].to_vec()
}

#[test]
fn tail_sharing_for_budget_shrinking_shifts() {
    for seed in 0..300 {
        let inst = random_instance(300 + seed, 4, 3, 6);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let sup = sample_super_ranking(&w, &mut sample_rng(seed, 0));
        let base = transform_f(&sup, c.slots(), &c);
        let mut prefix = 0;
        for p in &base.ranking.items {
            for target in 1..=c.max_len() {
                let delta = target as isize - p.len as isize;
                let fits = prefix + target <= c.slots();
                // Exact whenever the budget shrinks, or with at most two lengths.
                if !fits || (delta < 0 && c.max_len() > 2) {
                    continue;
                }
                let forced = transform_f_substituted(&sup, p.doc, target, &c);
                let truncated = transform_f(&sup, (c.slots() as isize - delta) as usize, &c);
                assert_eq!(
                    tail_after(&forced.ranking, p.doc),
                    tail_after(&truncated.ranking, p.doc),
                    "seed {seed}, doc {}, delta {delta}",
                    p.doc
                );
            }
            prefix += p.len;
        }
    }
}

#[test]
fn tail_sharing_can_break_for_long_menus() {
    // K = 3, L = 3: shortening C frees a slot, but the larger budget also
    // lets (B, 3) in ahead of C.
    let c = RankingConfig::new(3, 3, 3).unwrap();
    let sup = SuperRanking::from_pairs(&[(0, 1), (1, 3), (2, 2), (1, 1), (0, 2), (0, 3), (1, 2), (2, 1), (2, 3)]);
    let base = transform_f(&sup, 3, &c);
    assert_eq!(base.ranking, VarRanking::from_pairs(&[(0, 1), (2, 2)]));
    let forced = transform_f_substituted(&sup, 2, 1, &c);
    assert_eq!(forced.ranking, VarRanking::from_pairs(&[(0, 1), (2, 1), (1, 1)]));
    let widened = transform_f(&sup, 4, &c);
    assert_eq!(widened.ranking, VarRanking::from_pairs(&[(0, 1), (1, 3)]));
}

proptest! {
    #[test]
    fn substitution_with_observed_length_is_identity(seed in 0u64..10_000) {
        let inst = random_instance(seed, 5, 3, 8);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let sup = sample_super_ranking(&w, &mut sample_rng(seed, 1));
        let base = transform_f(&sup, c.slots(), &c);
        for p in &base.ranking.items {
            prop_assert_eq!(&transform_f_substituted(&sup, p.doc, p.len, &c), &base);
        }
    }

    #[test]
    fn importance_weights_normalize(seed in 0u64..10_000) {
        let inst = random_instance(seed, 5, 3, 8);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let sup = sample_super_ranking(&w, &mut sample_rng(seed, 2));
        let base = transform_f(&sup, c.slots(), &c);
        for p in &base.ranking.items {
            let total: f64 = (1..=c.max_len())
                .map(|l| importance_weight(&inst.scores, &base, p.doc, l, &c).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn valid_rankings_end_inside_budget(seed in 0u64..10_000) {
        let inst = random_instance(seed, 6, 3, 9);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let r = transform_f(&sample_super_ranking(&w, &mut sample_rng(seed, 3)), c.slots(), &c).ranking;
        prop_assert!(validate_ranking(&r, &c).is_complete());
        if let Some(last) = r.items.last() {
            prop_assert!(r.start_slot(r.len() - 1).unwrap() + last.len - 1 <= c.slots());
        }
    }

    #[test]
    fn verdict_invariant_under_doc_renaming(seed in 0u64..10_000, shift in 1usize..5) {
        let inst = random_instance(seed, 5, 3, 7);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let mut r = transform_f(&sample_super_ranking(&w, &mut sample_rng(seed, 4)), c.slots(), &c).ranking;
        r.items.truncate(r.len().saturating_sub(seed as usize % 2));
        let before = validate_ranking(&r, &c);
        prop_assert_eq!(validate_ranking(&r, &c), before.clone());
        let renamed = VarRanking::new(
            r.items.iter().map(|p| Placement::new((p.doc + shift) % c.num_docs(), p.len)).collect(),
        );
        prop_assert_eq!(validate_ranking(&renamed, &c).is_complete(), before.is_complete());
        prop_assert_eq!(validate_ranking(&renamed, &c).is_valid(), before.is_valid());
    }
}

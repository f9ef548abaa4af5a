//! Cross-module property suites with measured statistics.

use std::collections::HashMap;

use serde::Serialize;
use serde_json::json;
use vlpl_core::dist::{
    enumerate_complete_rankings, ranking_prob, sample_rng, sample_super_ranking, transform_f, transform_f_substituted,
    PolicyWeights,
};
use vlpl_core::grad::{estimate_gradient, finite_difference_gradient, Estimator, GradientEstimate};
use vlpl_core::objective::{brute_force_optimal, ranking_reward};
use vlpl_core::{
    AttractTable, BaseCurve, ExposureTable, Placement, RankingConfig, ScoreTable, VarRanking,
};

use crate::error::{HarnessError, Result};
use crate::fixtures::{self, random_instance, Instance, A, B};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    All,
    Sampler,
    Gradient,
    Reduction,
    Tail,
    Witnesses,
    Variance,
}

/// Deliberate estimator corruption, for checking that the suite notices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Fault {
    #[default]
    None,
    ScaleGradient(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sizes {
    pub sampler_instances: u64,
    pub sampler_draws: u64,
    pub gradient_instances: u64,
    pub gradient_samples: u64,
    pub reduction_instances: u64,
    pub reduction_samples: u64,
    pub tail_instances: u64,
    pub variance_trials: u64,
    pub variance_samples: u64,
}

impl Default for Sizes {
    fn default() -> Self {
        Self {
            sampler_instances: 20,
            sampler_draws: 100_000,
            gradient_instances: 10,
            gradient_samples: 200_000,
            reduction_instances: 5,
            reduction_samples: 200_000,
            tail_instances: 300,
            variance_trials: 200,
            variance_samples: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub stats: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

fn estimate(
    fault: Fault,
    est: Estimator,
    inst: &Instance,
    samples: u64,
    seed: u64,
) -> Result<GradientEstimate> {
    let mut g = estimate_gradient(est, &inst.scores, &inst.attract, &inst.exposure, &inst.config, samples, seed)?;
    if let Fault::ScaleGradient(c) = fault {
        g.grads.as_mut_slice().iter_mut().for_each(|x| *x *= c);
    }
    Ok(g)
}

pub fn check_sampler(instances: u64, draws: u64) -> Result<CheckResult> {
    let mut tvs = Vec::new();
    for seed in 0..instances {
        let inst = random_instance(1000 + seed, 3, 2, 3);
        let c = inst.config;
        let w = PolicyWeights::new(&inst.scores);
        let mut counts: HashMap<VarRanking, u64> = HashMap::new();
        for i in 0..draws {
            let sup = sample_super_ranking(&w, &mut sample_rng(seed, i));
            *counts.entry(transform_f(&sup, c.slots(), &c).ranking).or_insert(0) += 1;
        }
        let mut tv = 0.0;
        for y in enumerate_complete_rankings(&c, None)? {
            let p = ranking_prob(&inst.scores, &y, &c)?;
            tv += (p - counts.get(&y).copied().unwrap_or(0) as f64 / draws as f64).abs();
        }
        tvs.push(tv / 2.0);
    }
    let max = tvs.iter().cloned().fold(0.0, f64::max);
    Ok(CheckResult {
        name: "sampler_tv".into(),
        passed: max < 0.02,
        stats: json!({ "instances": instances, "draws": draws, "max_tv": max, "tv": tvs }),
    })
}

/// Unbiasedness of each estimator against finite differences, and agreement
/// between the two estimators.
pub fn check_gradients(instances: u64, samples: u64, fault: Fault) -> Result<Vec<CheckResult>> {
    let mut worst = [0.0f64; 2];
    let mut fails = [0usize; 2];
    let mut agree_worst = 0.0f64;
    let mut agree_fails = 0usize;
    let mut entries = 0usize;
    for seed in 0..instances {
        let inst = random_instance(2000 + seed, 3, 2, 3);
        let fd = finite_difference_gradient(&inst.scores, &inst.attract, &inst.exposure, &inst.config, 1e-5)?;
        let g = [
            estimate(fault, Estimator::Vlpl1, &inst, samples, seed)?,
            estimate(fault, Estimator::Vlpl2, &inst, samples, seed)?,
        ];
        for i in 0..inst.config.num_pairs() {
            entries += 1;
            let truth = fd.grads.as_slice()[i];
            for k in 0..2 {
                let (m, se) = (g[k].grads.as_slice()[i], g[k].std_err.as_slice()[i]);
                let ratio = (m - truth).abs() / (4.0 * se).max(1e-3);
                worst[k] = worst[k].max(ratio);
                if ratio > 1.0 {
                    fails[k] += 1;
                }
            }
            let (m1, m2) = (g[0].grads.as_slice()[i], g[1].grads.as_slice()[i]);
            let se = (g[0].std_err.as_slice()[i].powi(2) + g[1].std_err.as_slice()[i].powi(2)).sqrt();
            let ratio = (m1 - m2).abs() / (4.0 * se).max(1e-3);
            agree_worst = agree_worst.max(ratio);
            if ratio > 1.0 {
                agree_fails += 1;
            }
        }
    }
    let mut out = Vec::new();
    for (k, name) in ["unbiased_vlpl1", "unbiased_vlpl2"].iter().enumerate() {
        out.push(CheckResult {
            name: (*name).into(),
            passed: fails[k] == 0,
            stats: json!({
                "instances": instances, "samples": samples, "entries": entries,
                "failures": fails[k], "worst_ratio_to_bound": worst[k],
            }),
        });
    }
    out.push(CheckResult {
        name: "estimator_agreement".into(),
        passed: agree_fails == 0,
        stats: json!({ "entries": entries, "failures": agree_fails, "worst_ratio_to_bound": agree_worst }),
    });
    Ok(out)
}

/// Top-K Plackett-Luce gradient by enumerating permutations and applying the
/// score-function identity.
pub fn plackett_luce_gradient(scores: &[f64], rho: &[f64], theta: &[f64], k: usize) -> Vec<f64> {
    fn perms(n: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k.min(n) {
            out.push(prefix.clone());
            return;
        }
        for d in 0..n {
            if !prefix.contains(&d) {
                prefix.push(d);
                perms(n, k, prefix, out);
                prefix.pop();
            }
        }
    }
    let n = scores.len();
    let mut all = Vec::new();
    perms(n, k, &mut Vec::new(), &mut all);
    let mut grad = vec![0.0; n];
    for perm in all {
        let mut prob = 1.0;
        let mut dlog = vec![0.0; n];
        let mut remaining: Vec<usize> = (0..n).collect();
        for &d in &perm {
            let z: f64 = remaining.iter().map(|&j| scores[j].exp()).sum();
            prob *= scores[d].exp() / z;
            for &j in &remaining {
                dlog[j] -= scores[j].exp() / z;
            }
            dlog[d] += 1.0;
            remaining.retain(|&j| j != d);
        }
        let reward: f64 = perm.iter().enumerate().map(|(i, &d)| theta[i] * rho[d]).sum();
        for j in 0..n {
            grad[j] += prob * reward * dlog[j];
        }
    }
    grad
}

fn plackett_luce_prob(scores: &[f64], perm: &[usize]) -> f64 {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut p = 1.0;
    for &d in perm {
        let z: f64 = remaining.iter().map(|&j| scores[j].exp()).sum();
        p *= scores[d].exp() / z;
        remaining.retain(|&j| j != d);
    }
    p
}

pub fn check_reduction(instances: u64, samples: u64, fault: Fault) -> Result<CheckResult> {
    let mut max_prob_err = 0.0f64;
    let mut worst_z = 0.0f64;
    let mut identical = true;
    for seed in 0..instances {
        let inst = random_instance(3000 + seed, 4, 1, 4);
        let c = inst.config;
        let flat: Vec<f64> = (0..c.num_docs()).map(|d| inst.scores.get(d, 1)).collect();
        for y in enumerate_complete_rankings(&c, None)? {
            let perm: Vec<usize> = y.items.iter().map(|p| p.doc).collect();
            max_prob_err = max_prob_err.max((ranking_prob(&inst.scores, &y, &c)? - plackett_luce_prob(&flat, &perm)).abs());
        }
        let rho: Vec<f64> = (0..c.num_docs()).map(|d| inst.attract.get(d, 1)).collect();
        let theta: Vec<f64> = (1..=c.slots()).map(|s| inst.exposure.get(s, 1)).collect::<vlpl_core::Result<_>>()?;
        let oracle = plackett_luce_gradient(&flat, &rho, &theta, c.slots());
        let mut means = Vec::new();
        for est in [Estimator::Vlpl1, Estimator::Vlpl2] {
            let g = estimate(fault, est, &inst, samples, seed)?;
            for d in 0..c.num_docs() {
                let z = (g.grads.get(d, 1) - oracle[d]).abs() / g.std_err.get(d, 1).max(1e-12);
                worst_z = worst_z.max(z);
            }
            means.push(g.grads);
        }
        identical &= means[0] == means[1];
    }
    Ok(CheckResult {
        name: "unit_length_reduction".into(),
        passed: max_prob_err < 1e-12 && worst_z <= 3.0 && identical,
        stats: json!({
            "instances": instances, "samples": samples, "max_prob_error": max_prob_err,
            "worst_z": worst_z, "estimators_identical": identical,
        }),
    })
}

/// Forcing a document to another length leaves the items after it equal to
/// those of a re-truncation at the shifted budget. Exact when the budget
/// shrinks or at most two lengths exist; the remaining shifts are counted.
pub fn check_tail_sharing(instances: u64) -> Result<CheckResult> {
    let mut checked = 0u64;
    let mut violations = 0u64;
    let mut loose_checked = 0u64;
    let mut loose_mismatch = 0u64;
    for seed in 0..instances {
        let inst = random_instance(4000 + seed, 4, 3, 6);
        let c = inst.config;
        let sup = sample_super_ranking(&PolicyWeights::new(&inst.scores), &mut sample_rng(seed, 0));
        let base = transform_f(&sup, c.slots(), &c);
        let mut prefix = 0;
        for p in &base.ranking.items {
            for target in 1..=c.max_len() {
                if prefix + target > c.slots() {
                    continue;
                }
                let delta = target as isize - p.len as isize;
                let forced = transform_f_substituted(&sup, p.doc, target, &c);
                let truncated = transform_f(&sup, (c.slots() as isize - delta) as usize, &c);
                let forced_tail = tail(&forced.ranking, p.doc);
                let same = forced_tail.is_some() && forced_tail == tail(&truncated.ranking, p.doc);
                if delta >= 0 || c.max_len() <= 2 {
                    checked += 1;
                    violations += u64::from(!same);
                } else {
                    loose_checked += 1;
                    loose_mismatch += u64::from(!same);
                }
            }
            prefix += p.len;
        }
    }
    Ok(CheckResult {
        name: "tail_sharing".into(),
        passed: violations == 0,
        stats: json!({
            "checked": checked, "violations": violations,
            "growing_budget_long_menu_checked": loose_checked,
            "growing_budget_long_menu_mismatches": loose_mismatch,
        }),
    })
}

fn tail(r: &VarRanking, doc: usize) -> Option<Vec<Placement>> {
    r.position_of(doc).map(|i| r.items[i + 1..].to_vec())
}

pub fn check_witnesses() -> Result<CheckResult> {
    let c = fixtures::config();
    let attract = fixtures::attract(0.6);
    let (y2, v2) = brute_force_optimal(&attract, &fixtures::theta2(), &c)?;
    let prp = y2.items[0].doc == B && (1..=3).all(|l| attract.get(A, l) > attract.get(B, l));

    let mut lengths = Vec::new();
    for exposure in [fixtures::theta1(), fixtures::theta2()] {
        let (with_b, _) = brute_force_optimal(&attract, &exposure, &c)?;
        let (without_b, _) = brute_force_optimal(&fixtures::attract(0.0), &exposure, &c)?;
        let len_of_a = |y: &VarRanking| y.items.iter().find(|p| p.doc == A).map(|p| p.len);
        lengths.push((len_of_a(&with_b), len_of_a(&without_b)));
    }
    let separability = lengths.iter().all(|&l| l == (Some(2), Some(3)));

    let sub = ExposureTable::from_entries(2, 2, &[(1, 1, 0.631), (1, 2, 0.815), (2, 1, 0.500)])?;
    let attract2 = AttractTable::length_independent(&[1.0, 0.6, 0.0], 2)?;
    let ab = ranking_reward(&VarRanking::from_pairs(&[(A, 1), (B, 1)]), &attract2, &sub)?.value;
    let ba = ranking_reward(&VarRanking::from_pairs(&[(B, 1), (A, 1)]), &attract2, &sub)?.value;
    let (y_k2, _) = brute_force_optimal(&attract2, &sub, &RankingConfig::new(3, 2, 2)?)?;
    let reversal = (ab - 0.931).abs() < 1e-12
        && (ba - 0.8786).abs() < 1e-12
        && (ba - 0.879).abs() <= fixtures::PRINT_TOL
        && y_k2.items[0].doc == A
        && y2.items[0].doc == B;
    Ok(CheckResult {
        name: "witnesses".into(),
        passed: prp && separability && reversal,
        stats: json!({
            "prp_failure": prp, "optimum_theta2": fixtures::label(&y2), "optimum_theta2_reward": v2,
            "length_of_a_with_and_without_b": lengths, "non_separable": separability,
            "k2_ab": ab, "k2_ba": ba, "k2_optimum": fixtures::label(&y_k2), "order_reversal": reversal,
        }),
    })
}

/// Fixed |D| = 3, L = 2, K = 3 instance for the variance comparison.
pub fn variance_instance() -> Instance {
    let config = RankingConfig::new(3, 3, 2).unwrap();
    Instance {
        config,
        scores: ScoreTable::from_rows(&[vec![0.3, -0.2], vec![0.1, 0.4], vec![-0.5, 0.2]]).unwrap(),
        attract: AttractTable::from_rows(&[vec![0.4, 0.7], vec![0.6, 0.8], vec![0.2, 0.9]]).unwrap(),
        exposure: ExposureTable::composite(&BaseCurve::Dcg, 3, 2).unwrap(),
    }
}

pub fn check_variance(trials: u64, samples: u64) -> Result<CheckResult> {
    let inst = variance_instance();
    let n = inst.config.num_pairs();
    let mut var = [vec![0.0; n], vec![0.0; n]];
    for (k, est) in [Estimator::Vlpl1, Estimator::Vlpl2].into_iter().enumerate() {
        let mut runs = Vec::new();
        for t in 0..trials {
            runs.push(estimate(Fault::None, est, &inst, samples, 50_000 + t)?.grads);
        }
        for i in 0..n {
            let xs: Vec<f64> = runs.iter().map(|g| g.as_slice()[i]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            var[k][i] = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        }
    }
    let wins = (0..n).filter(|&i| var[1][i] <= var[0][i]).count();
    Ok(CheckResult {
        name: "variance_vlpl2_le_vlpl1".into(),
        passed: 2 * wins > n,
        stats: json!({ "trials": trials, "samples": samples, "entries": n, "vlpl2_wins": wins, "var_vlpl1": var[0], "var_vlpl2": var[1] }),
    })
}

pub fn cmd_verify(scope: Scope, sizes: &Sizes, fault: Fault) -> Result<VerifyReport> {
    let want = |s: Scope| scope == Scope::All || scope == s;
    let mut checks = Vec::new();
    if want(Scope::Sampler) {
        checks.push(check_sampler(sizes.sampler_instances, sizes.sampler_draws)?);
    }
    if want(Scope::Gradient) {
        checks.extend(check_gradients(sizes.gradient_instances, sizes.gradient_samples, fault)?);
    }
    if want(Scope::Reduction) {
        checks.push(check_reduction(sizes.reduction_instances, sizes.reduction_samples, fault)?);
    }
    if want(Scope::Tail) {
        checks.push(check_tail_sharing(sizes.tail_instances)?);
    }
    if want(Scope::Witnesses) {
        checks.push(check_witnesses()?);
    }
    if want(Scope::Variance) {
        checks.push(check_variance(sizes.variance_trials, sizes.variance_samples)?);
    }
    if checks.is_empty() {
        return Err(HarnessError::Usage("empty verification scope".into()));
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, passed })
}

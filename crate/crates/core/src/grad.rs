//! Sample-based gradients of expected attractiveness with respect to the
//! score table, and exact oracles for checking them.
//!
//! Both estimators decompose the gradient of every (d, l) score into
//!
//! * the future reward collected after d is placed,
//! * plus the expected direct reward of placing (d, l) at each rank where
//!   it was still eligible,
//! * minus the risk: the reward still to come at each such rank, weighted by
//!   the probability of (d, l) taking that rank instead.
//!
//! The direct-reward and risk terms are shared through per-sample prefix
//! sums (see [`HelperVars`]). `Vlpl1` counts future reward only when (d, l)
//! itself was sampled. `Vlpl2` shares the future reward across all lengths
//! of a document: the ranking is re-truncated at budgets K - delta for every
//! length shift delta in [1 - L, L - 1], and the shifted future reward is
//! reweighted by the probability of the target length at d's position.

use serde::{Deserialize, Serialize};

use crate::dist::{
    enumerate_complete_rankings, last_feasible_rank, ranking_prob_with, sample_rng, sample_super_ranking, transform_f,
    PolicyWeights, SuperRanking, TransformResult,
};
use crate::error::{Error, Result};
use crate::exposure::ExposureTable;
use crate::objective::{expected_attractiveness_exact, ranking_reward};
use crate::par::{reduce_samples, Moments};
use crate::types::{AttractTable, DocLenGrid, RankingConfig, ScoreTable, VarRanking};

/// Which Monte-Carlo estimator to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    Vlpl1,
    Vlpl2,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vlpl1" => Ok(Estimator::Vlpl1),
            "vlpl2" => Ok(Estimator::Vlpl2),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

/// dEA/dm(d, l) with per-entry standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub grads: DocLenGrid,
    pub std_err: DocLenGrid,
    pub samples_used: u64,
}

/// Per-sample accumulators. Index conventions are 1-based ranks as in the
/// rest of the crate; index 0 holds the empty-prefix value.
#[derive(Debug, Clone)]
pub struct HelperVars {
    pub max_len: usize,
    /// `future[delta + L - 1][i]`: reward from rank i onward in the ranking
    /// truncated at budget K - delta, with slots shifted by delta. Length
    /// K + L + 1, zero past each ranking's end.
    pub future: Vec<Vec<f64>>,
    /// Cumulative risk RI_i for i in 0..=|y|.
    pub risk: Vec<f64>,
    /// `direct[l - 1][i]`: cumulative direct-reward weight DR^l_i.
    pub direct: Vec<Vec<f64>>,
    /// Softmax denominator at each rank (index 0 unused).
    pub denom: Vec<f64>,
    /// `feasible[i][l - 1]`: a length-l item can start at rank i.
    pub feasible: Vec<Vec<bool>>,
    /// Unnormalized importance weights p_i^l of the item at rank i.
    pub length_weights: Vec<Vec<f64>>,
    /// The untruncated (budget K) ranking.
    pub base: TransformResult,
}

impl HelperVars {
    #[inline]
    pub fn future_at(&self, delta: isize, rank: usize) -> f64 {
        self.future[(delta + self.max_len as isize - 1) as usize][rank]
    }
}

struct Ctx<'a> {
    weights: &'a PolicyWeights,
    attract: &'a AttractTable,
    exposure: &'a ExposureTable,
    config: &'a RankingConfig,
}

fn shifted_future(ctx: &Ctx, ranking: &VarRanking, delta: isize, out: &mut [f64]) {
    let mut slot = 1isize;
    let mut terms = Vec::with_capacity(ranking.len());
    for p in &ranking.items {
        let shifted = slot + delta;
        terms.push(if shifted >= 1 {
            ctx.exposure.at(shifted as usize, p.len) * ctx.attract.get(p.doc, p.len)
        } else {
            0.0
        });
        slot += p.len as isize;
    }
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in (1..=terms.len()).rev() {
        out[i] = out[i + 1] + terms[i - 1];
    }
}

fn helper_vars_inner(ctx: &Ctx, sup: &SuperRanking, shifts: bool) -> HelperVars {
    let k = ctx.config.slots();
    let max_len = ctx.config.max_len();
    let len_pr = k + max_len + 1;
    let base = transform_f(sup, k, ctx.config);

    let span = 2 * max_len - 1;
    let mut future = vec![vec![0.0; len_pr]; span];
    for (slot, row) in future.iter_mut().enumerate() {
        let delta = slot as isize - (max_len as isize - 1);
        if delta == 0 {
            shifted_future(ctx, &base.ranking, 0, row);
        } else if shifts {
            let budget = (k as isize - delta) as usize;
            let truncated = transform_f(sup, budget, ctx.config);
            shifted_future(ctx, &truncated.ranking, delta, row);
        }
    }

    let n = base.ranking.len();
    let mut per_len: Vec<f64> = (1..=max_len)
        .map(|l| (0..ctx.config.num_docs()).map(|d| ctx.weights.weight(d, l)).sum())
        .collect();
    let mut risk = vec![0.0; n + 1];
    let mut direct = vec![vec![0.0; n + 1]; max_len];
    let mut denom = vec![0.0; n + 1];
    let mut feasible = vec![vec![false; max_len]; n + 1];
    let mut length_weights = vec![vec![0.0; max_len]; n + 1];
    let pr0 = &future[max_len - 1];
    let mut slot = 1;
    for (idx, p) in base.ranking.items.iter().enumerate() {
        let i = idx + 1;
        let total: f64 = per_len.iter().sum();
        denom[i] = total;
        risk[i] = risk[i - 1] + pr0[i] / total;
        let free_before = k + 1 - slot;
        let free_after = free_before - p.len;
        for l in 1..=max_len {
            let fits = l <= free_before;
            feasible[i][l - 1] = fits;
            let theta = if fits { ctx.exposure.at(slot, l) } else { 0.0 };
            direct[l - 1][i] = direct[l - 1][i - 1] + theta / total;
            per_len[l - 1] = if l <= free_after {
                per_len[l - 1] - ctx.weights.weight(p.doc, l)
            } else {
                0.0
            };
            length_weights[i][l - 1] = if fits { ctx.weights.weight(p.doc, l) } else { 0.0 };
        }
        slot += p.len;
    }

    HelperVars {
        max_len,
        future,
        risk,
        direct,
        denom,
        feasible,
        length_weights,
        base,
    }
}

/// Helper variables for one super-ranking.
pub fn helper_vars(
    scores: &ScoreTable,
    sup: &SuperRanking,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
) -> Result<HelperVars> {
    check_inputs(scores, attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let ctx = Ctx {
        weights: &weights,
        attract,
        exposure,
        config,
    };
    Ok(helper_vars_inner(&ctx, sup, true))
}

fn sample_gradient(ctx: &Ctx, sup: &SuperRanking, estimator: Estimator, out: &mut [f64]) {
    let hv = helper_vars_inner(ctx, sup, estimator == Estimator::Vlpl2);
    let y = &hv.base;
    let n = y.ranking.len();
    let max_len = ctx.config.max_len();
    let last_feasible: Vec<usize> = (1..=max_len).map(|l| last_feasible_rank(y, l, ctx.config)).collect();
    for d in 0..ctx.config.num_docs() {
        let placed = y.ranking.position_of(d).map(|i| (i + 1, y.ranking.items[i].len));
        let r1 = placed.map_or(n, |(r, _)| r);
        let norm: f64 = placed.map_or(0.0, |(r, _)| hv.length_weights[r].iter().sum());
        for l in 1..=max_len {
            let future = match (estimator, placed) {
                (Estimator::Vlpl1, Some((r, l0))) if l0 == l => hv.future_at(0, r + 1),
                (Estimator::Vlpl2, Some((r, l0))) => {
                    let p = hv.length_weights[r][l - 1] / norm;
                    if p > 0.0 {
                        p * hv.future_at(l as isize - l0 as isize, r + 1)
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            };
            let r2 = r1.min(last_feasible[l - 1]);
            let w = ctx.weights.weight(d, l);
            let risk = w * (ctx.attract.get(d, l) * hv.direct[l - 1][r2] - hv.risk[r2]);
            out[d * max_len + l - 1] = future + risk;
        }
    }
}

fn check_inputs(scores: &ScoreTable, attract: &AttractTable, exposure: &ExposureTable, config: &RankingConfig) -> Result<()> {
    scores.check_config(config)?;
    attract.check_config(config)?;
    if exposure.slots() != config.slots() || exposure.max_len() != config.max_len() {
        return Err(Error::Config("exposure table does not match the configuration".into()));
    }
    Ok(())
}

/// Monte-Carlo gradient from `samples` super-rankings drawn with
/// `sample_rng(seed, i)`.
pub fn estimate_gradient(
    estimator: Estimator,
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    samples: u64,
    seed: u64,
) -> Result<GradientEstimate> {
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    check_inputs(scores, attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let ctx = Ctx {
        weights: &weights,
        attract,
        exposure,
        config,
    };
    let size = config.num_pairs();
    let moments = reduce_samples(
        samples,
        || (Moments::new(size), vec![0.0; size]),
        |(acc, buf), i| {
            let sup = sample_super_ranking(&weights, &mut sample_rng(seed, i));
            sample_gradient(&ctx, &sup, estimator, buf);
            acc.push(buf);
        },
        |(a, _), (b, _)| a.merge(b),
    )
    .0;
    let to_grid = |v: Vec<f64>| DocLenGrid::from_fn(config.num_docs(), config.max_len(), |d, l| v[d * config.max_len() + l - 1]);
    Ok(GradientEstimate {
        grads: to_grid(moments.mean(samples)),
        std_err: to_grid(moments.std_err(samples)),
        samples_used: samples,
    })
}

pub fn vlpl1_gradient(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    samples: u64,
    seed: u64,
) -> Result<GradientEstimate> {
    estimate_gradient(Estimator::Vlpl1, scores, attract, exposure, config, samples, seed)
}

pub fn vlpl2_gradient(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    samples: u64,
    seed: u64,
) -> Result<GradientEstimate> {
    estimate_gradient(Estimator::Vlpl2, scores, attract, exposure, config, samples, seed)
}

/// Gradient contribution of one super-ranking, row-major |D| x L.
pub fn single_sample_gradient(
    estimator: Estimator,
    scores: &ScoreTable,
    sup: &SuperRanking,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
) -> Result<Vec<f64>> {
    check_inputs(scores, attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let ctx = Ctx {
        weights: &weights,
        attract,
        exposure,
        config,
    };
    let mut out = vec![0.0; config.num_pairs()];
    sample_gradient(&ctx, sup, estimator, &mut out);
    Ok(out)
}

/// Central differences of the exact expectation.
pub fn finite_difference_gradient(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    epsilon: f64,
) -> Result<GradientEstimate> {
    if !(epsilon > 0.0) {
        return Err(Error::Config("epsilon must be positive".into()));
    }
    check_inputs(scores, attract, exposure, config)?;
    let mut grads = DocLenGrid::zeros(config.num_docs(), config.max_len());
    let mut probe = scores.clone();
    for d in 0..config.num_docs() {
        for l in 1..=config.max_len() {
            let idx = d * config.max_len() + l - 1;
            let base = probe.as_slice()[idx];
            probe.as_mut_slice()[idx] = base + epsilon;
            let up = expected_attractiveness_exact(&probe, attract, exposure, config)?;
            probe.as_mut_slice()[idx] = base - epsilon;
            let down = expected_attractiveness_exact(&probe, attract, exposure, config)?;
            probe.as_mut_slice()[idx] = base;
            grads.set(d, l, (up - down) / (2.0 * epsilon));
        }
    }
    Ok(GradientEstimate {
        grads,
        std_err: DocLenGrid::zeros(config.num_docs(), config.max_len()),
        samples_used: 0,
    })
}

/// Exact gradient by enumeration: sum over rankings of
/// pi(y) * R(y) * d log pi(y) / dm(d, l), where the log-derivative is
/// sum_i (1[y_i = (d, l)] - pi((d, l) | y_{1:i-1})).
pub fn exact_gradient(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
) -> Result<DocLenGrid> {
    check_inputs(scores, attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let mut grads = DocLenGrid::zeros(config.num_docs(), config.max_len());
    let mut score_fn = vec![0.0; config.num_pairs()];
    for y in enumerate_complete_rankings(config, None)? {
        let prob = ranking_prob_with(&weights, &y, config)?;
        let reward = ranking_reward(&y, attract, exposure)?.value;
        score_fn.iter_mut().for_each(|v| *v = 0.0);
        let mut placed = vec![false; config.num_docs()];
        let mut used = 0;
        for p in &y.items {
            let mut mass = 0.0;
            for d in (0..config.num_docs()).filter(|&d| !placed[d]) {
                for l in (1..=config.max_len()).filter(|&l| used + l <= config.slots()) {
                    mass += weights.weight(d, l);
                }
            }
            for d in (0..config.num_docs()).filter(|&d| !placed[d]) {
                for l in (1..=config.max_len()).filter(|&l| used + l <= config.slots()) {
                    score_fn[d * config.max_len() + l - 1] -= weights.weight(d, l) / mass;
                }
            }
            score_fn[p.doc * config.max_len() + p.len - 1] += 1.0;
            placed[p.doc] = true;
            used += p.len;
        }
        for (g, s) in grads.as_mut_slice().iter_mut().zip(&score_fn) {
            *g += prob * reward * s;
        }
    }
    Ok(grads)
}

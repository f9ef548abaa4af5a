//! Expected attractiveness: exposure-weighted click propensity of a
//! ranking, its expectation under the policy, and the exhaustive optimum.

use serde::{Deserialize, Serialize};

use crate::dist::{enumerate_complete_rankings, ranking_prob_with, sample_rng, sample_super_ranking, transform_f, PolicyWeights};
use crate::error::{Error, Result};
use crate::exposure::ExposureTable;
use crate::par::{reduce_samples, Moments};
use crate::types::{validate_ranking, AttractTable, RankingConfig, ScoreTable, VarRanking};

/// Reward of one ranking with its per-item terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardReport {
    pub value: f64,
    pub per_item: Vec<f64>,
}

/// Sum of theta(s_i, l_i) * rho(d_i, l_i) over the ranking.
pub fn ranking_reward(ranking: &VarRanking, attract: &AttractTable, exposure: &ExposureTable) -> Result<RewardReport> {
    let mut per_item = Vec::with_capacity(ranking.len());
    let mut slot = 1;
    for p in &ranking.items {
        if p.doc >= attract.num_docs() || p.len == 0 || p.len > attract.max_len() {
            return Err(Error::InvalidRanking(format!("placement ({}, {}) outside the attractiveness table", p.doc, p.len)));
        }
        per_item.push(exposure.get(slot, p.len)? * attract.get(p.doc, p.len));
        slot += p.len;
    }
    Ok(RewardReport {
        value: per_item.iter().sum(),
        per_item,
    })
}

fn check_inputs(scores: Option<&ScoreTable>, attract: &AttractTable, exposure: &ExposureTable, config: &RankingConfig) -> Result<()> {
    if let Some(s) = scores {
        s.check_config(config)?;
    }
    attract.check_config(config)?;
    if exposure.slots() != config.slots() || exposure.max_len() != config.max_len() {
        return Err(Error::Config(format!(
            "exposure table is for K={}, L={} but config has K={}, L={}",
            exposure.slots(),
            exposure.max_len(),
            config.slots(),
            config.max_len()
        )));
    }
    Ok(())
}

/// Exact expectation by enumerating every complete ranking.
pub fn expected_attractiveness_exact(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
) -> Result<f64> {
    check_inputs(Some(scores), attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let mut total = 0.0;
    for y in enumerate_complete_rankings(config, None)? {
        total += ranking_prob_with(&weights, &y, config)? * ranking_reward(&y, attract, exposure)?.value;
    }
    Ok(total)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Draws one ranking from the policy.
pub fn sample_ranking(weights: &PolicyWeights, config: &RankingConfig, seed: u64, index: u64) -> VarRanking {
    let sup = sample_super_ranking(weights, &mut sample_rng(seed, index));
    transform_f(&sup, config.slots(), config).ranking
}

pub fn expected_attractiveness_mc(
    scores: &ScoreTable,
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    check_inputs(Some(scores), attract, exposure, config)?;
    let weights = PolicyWeights::new(scores);
    let moments = reduce_samples(
        samples,
        || Moments::new(1),
        |acc, i| {
            let y = sample_ranking(&weights, config, seed, i);
            let r = ranking_reward(&y, attract, exposure).expect("sampled rankings fit the exposure domain");
            acc.push(&[r.value]);
        },
        Moments::merge,
    );
    Ok(McEstimate {
        mean: moments.mean(samples)[0],
        std_err: moments.std_err(samples)[0],
        samples,
    })
}

/// Highest-reward complete ranking. Near-ties (within 1e-12) resolve to the
/// lexicographically smallest (doc, len) sequence.
pub fn brute_force_optimal(
    attract: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
) -> Result<(VarRanking, f64)> {
    check_inputs(None, attract, exposure, config)?;
    let mut best: Option<(VarRanking, f64)> = None;
    for y in enumerate_complete_rankings(config, None)? {
        debug_assert!(validate_ranking(&y, config).is_complete());
        let value = ranking_reward(&y, attract, exposure)?.value;
        match &best {
            Some((_, b)) if value <= b + 1e-12 => {}
            _ => best = Some((y, value)),
        }
    }
    best.ok_or_else(|| Error::InvalidRanking("no complete ranking exists".into()))
}

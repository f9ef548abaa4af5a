//! Gradient-based drivers: post-processing of per-query score tables and
//! in-processing training of a feature-based scorer.

mod adam;
mod scorer;

pub use adam::{AdamConfig, OptimizerState};
pub use scorer::{Architecture, ForwardCache, Scorer, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exposure::ExposureTable;
use crate::grad::{estimate_gradient, Estimator};
use crate::par::derive_seed;
use crate::types::{AttractTable, DocLenGrid, Placement, RankingConfig, ScoreTable, VarRanking};

/// Sequentially places the eligible pair with the highest score. Ties go to
/// the shorter length, then the lower document index.
pub fn greedy_decode(scores: &ScoreTable, config: &RankingConfig) -> VarRanking {
    let mut placed = vec![false; config.num_docs()];
    let mut items = Vec::new();
    let mut used = 0;
    loop {
        let free = config.slots() - used;
        let mut best: Option<(f64, Placement)> = None;
        for l in 1..=config.max_len().min(free) {
            for d in (0..config.num_docs()).filter(|&d| !placed[d]) {
                let v = scores.get(d, l);
                if best.is_none_or(|(b, _)| v > b) {
                    best = Some((v, Placement::new(d, l)));
                }
            }
        }
        let Some((_, p)) = best else { break };
        placed[p.doc] = true;
        used += p.len;
        items.push(p);
    }
    VarRanking::new(items)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostOptions {
    pub adam: AdamConfig,
    pub estimator: Estimator,
    pub steps: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for PostOptions {
    fn default() -> Self {
        Self {
            adam: AdamConfig::with_learning_rate(0.01),
            estimator: Estimator::Vlpl2,
            steps: 500,
            samples: 1000,
            seed: 0,
        }
    }
}

/// Optimizes a score table from zero with `attract_hat` standing in for the
/// true attractiveness. Returns the final table and its greedy decode.
pub fn postprocess_optimize(
    attract_hat: &AttractTable,
    exposure: &ExposureTable,
    config: &RankingConfig,
    opts: &PostOptions,
) -> Result<(ScoreTable, VarRanking)> {
    if opts.steps == 0 {
        return Err(Error::Config("post-processing needs at least one step".into()));
    }
    let mut scores = ScoreTable::zeros(config);
    let mut state = OptimizerState::new(opts.adam, config.num_pairs());
    for step in 0..opts.steps {
        let seed = derive_seed(&[opts.seed, step as u64]);
        let g = estimate_gradient(opts.estimator, &scores, attract_hat, exposure, config, opts.samples, seed)?;
        state.ascend(scores.as_mut_slice(), g.grads.as_slice());
    }
    let ranking = greedy_decode(&scores, config);
    Ok((scores, ranking))
}

/// One query of a training set: per-document features and attractiveness.
#[derive(Debug, Clone, Copy)]
pub struct TrainQuery<'a> {
    pub features: &'a [Vec<f64>],
    pub attract: &'a AttractTable,
}

impl TrainQuery<'_> {
    fn check(&self, scorer: &Scorer) -> Result<()> {
        if self.features.len() != self.attract.num_docs() {
            return Err(Error::Dimension {
                expected: self.attract.num_docs(),
                got: self.features.len(),
            });
        }
        if self.attract.max_len() != scorer.arch.output_dim {
            return Err(Error::Dimension {
                expected: scorer.arch.output_dim,
                got: self.attract.max_len(),
            });
        }
        for f in self.features {
            if f.len() != scorer.arch.input_dim {
                return Err(Error::Dimension {
                    expected: scorer.arch.input_dim,
                    got: f.len(),
                });
            }
        }
        Ok(())
    }
}

/// Scorer outputs for every document, as a score table.
pub fn score_table(scorer: &Scorer, features: &[Vec<f64>]) -> Result<ScoreTable> {
    let rows = features.iter().map(|f| scorer.forward(f)).collect::<Result<Vec<_>>>()?;
    ScoreTable::from_rows(&rows)
}

/// Sigmoid of the scorer outputs, for a relevance head.
pub fn predict_attract(scorer: &Scorer, features: &[Vec<f64>]) -> Result<AttractTable> {
    let rows = features
        .iter()
        .map(|f| Ok(scorer.forward(f)?.into_iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    AttractTable::from_rows(&rows)
}

/// Parameter gradient of sum_{d,l} upstream(d,l) * m(d,l) with dropout off.
pub fn param_gradient(scorer: &Scorer, features: &[Vec<f64>], upstream: &DocLenGrid) -> Result<Vec<f64>> {
    let mut grads = vec![0.0; scorer.num_params()];
    for (d, f) in features.iter().enumerate() {
        let cache = scorer.forward_cached(f, None)?;
        scorer.backward(&cache, upstream.row(d), &mut grads);
    }
    Ok(grads)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    pub estimator: Estimator,
    pub epochs: usize,
    pub samples: u64,
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            estimator: Estimator::Vlpl2,
            epochs: 10,
            samples: 1000,
            seed: 0,
        }
    }
}

/// Trains `init` on the expected attractiveness of each query, one optimizer
/// step per query.
pub fn train_inprocess(init: Scorer, queries: &[TrainQuery], exposure: &ExposureTable, opts: &TrainOptions) -> Result<Scorer> {
    for q in queries {
        q.check(&init)?;
    }
    if init.arch.output_dim != exposure.max_len() {
        return Err(Error::Dimension {
            expected: exposure.max_len(),
            got: init.arch.output_dim,
        });
    }
    let mut scorer = init;
    let mut state = OptimizerState::new(opts.adam, scorer.num_params());
    for epoch in 0..opts.epochs {
        for (qi, q) in queries.iter().enumerate() {
            let config = RankingConfig::new(q.features.len(), exposure.slots(), exposure.max_len())?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[opts.seed, epoch as u64, qi as u64, 0]));
            let caches = q
                .features
                .iter()
                .map(|f| scorer.forward_cached(f, Some(&mut rng)))
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<f64>> = caches.iter().map(|c| c.output.clone()).collect();
            let scores = ScoreTable::from_rows(&rows)?;
            let seed = derive_seed(&[opts.seed, epoch as u64, qi as u64, 1]);
            let g = estimate_gradient(opts.estimator, &scores, q.attract, exposure, &config, opts.samples, seed)?;
            let mut grads = vec![0.0; scorer.num_params()];
            for (d, cache) in caches.iter().enumerate() {
                scorer.backward(cache, g.grads.row(d), &mut grads);
            }
            state.ascend(&mut scorer.params, &grads);
        }
    }
    Ok(scorer)
}

/// Fits sigmoid(outputs) to the attractiveness labels by mean binary
/// cross-entropy, one optimizer step per query.
pub fn train_relevance_head(init: Scorer, queries: &[TrainQuery], adam: &AdamConfig, epochs: usize, seed: u64) -> Result<Scorer> {
    for q in queries {
        q.check(&init)?;
    }
    let mut scorer = init;
    let mut state = OptimizerState::new(*adam, scorer.num_params());
    for epoch in 0..epochs {
        for (qi, q) in queries.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, epoch as u64, qi as u64]));
            let count = (q.features.len() * scorer.arch.output_dim) as f64;
            let mut grads = vec![0.0; scorer.num_params()];
            for (d, f) in q.features.iter().enumerate() {
                let cache = scorer.forward_cached(f, Some(&mut rng))?;
                let up: Vec<f64> = cache
                    .output
                    .iter()
                    .enumerate()
                    .map(|(i, z)| (1.0 / (1.0 + (-z).exp()) - q.attract.get(d, i + 1)) / count)
                    .collect();
                scorer.backward(&cache, &up, &mut grads);
            }
            state.descend(&mut scorer.params, &grads);
        }
    }
    Ok(scorer)
}

/// Mean binary cross-entropy of the predictions over all (d, l).
pub fn relevance_loss(scorer: &Scorer, queries: &[TrainQuery]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for q in queries {
        let pred = predict_attract(scorer, q.features)?;
        for d in 0..pred.num_docs() {
            for l in 1..=pred.max_len() {
                let (p, y) = (pred.get(d, l).clamp(1e-12, 1.0 - 1e-12), q.attract.get(d, l));
                total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

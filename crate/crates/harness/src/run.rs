//! Per-query layout experiments over a labeled corpus.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vlpl_core::baselines::{greedy_layout, slot_avg_layout, sort_fixed_length};
use vlpl_core::objective::{expected_attractiveness_mc, ranking_reward};
use vlpl_core::optimize::{
    greedy_decode, postprocess_optimize, predict_attract, score_table, train_inprocess, train_relevance_head,
    AdamConfig, Architecture, PostOptions, Scorer, TrainOptions, TrainQuery,
};
use vlpl_core::par::derive_seed;
use vlpl_core::synthdata::Dataset;
use vlpl_core::{AttractTable, BaseCurve, Estimator, ExposureTable, Placement, RankingConfig, ScoreTable, VarRanking};

use crate::data::load_dataset;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Post(Estimator),
    In(Estimator),
    Sort(usize),
    Greedy,
    SlotAvg,
    Plr3(usize),
}

fn est_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Vlpl1 => "vlpl1",
        Estimator::Vlpl2 => "vlpl2",
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Post(e) => write!(f, "{}-post", est_name(*e)),
            Method::In(e) => write!(f, "{}-in", est_name(*e)),
            Method::Sort(l) => write!(f, "sort-{l}"),
            Method::Greedy => write!(f, "greedy"),
            Method::SlotAvg => write!(f, "slot-avg"),
            Method::Plr3(l) => write!(f, "plr3-{l}"),
        }
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || HarnessError::Usage(format!("unknown method {s:?}"));
        let len = |t: &str| t.parse::<usize>().ok().filter(|&l| l >= 1).ok_or_else(bad);
        Ok(match s {
            "vlpl1-post" => Method::Post(Estimator::Vlpl1),
            "vlpl2-post" => Method::Post(Estimator::Vlpl2),
            "vlpl1-in" => Method::In(Estimator::Vlpl1),
            "vlpl2-in" => Method::In(Estimator::Vlpl2),
            "greedy" => Method::Greedy,
            "slot-avg" => Method::SlotAvg,
            _ => {
                if let Some(l) = s.strip_prefix("sort-") {
                    Method::Sort(len(l)?)
                } else if let Some(l) = s.strip_prefix("plr3-") {
                    Method::Plr3(len(l)?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list.split(',').map(|m| m.trim().parse()).collect::<Result<Vec<Method>>>()?;
    if methods.is_empty() {
        return Err(HarnessError::Usage("no methods given".into()));
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExposureKind {
    Dcg,
    InvRank,
    File(PathBuf),
}

impl FromStr for ExposureKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dcg" => Ok(ExposureKind::Dcg),
            "inv-rank" => Ok(ExposureKind::InvRank),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(ExposureKind::File(PathBuf::from(p))),
                _ => Err(HarnessError::Usage(format!("unknown exposure {s:?} (dcg, inv-rank or file:PATH)"))),
            },
        }
    }
}

impl fmt::Display for ExposureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureKind::Dcg => write!(f, "dcg"),
            ExposureKind::InvRank => write!(f, "inv-rank"),
            ExposureKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl ExposureKind {
    pub fn build(&self, slots: usize, max_len: usize) -> Result<ExposureTable> {
        Ok(match self {
            ExposureKind::Dcg => ExposureTable::composite(&BaseCurve::Dcg, slots, max_len)?,
            ExposureKind::InvRank => ExposureTable::composite(&BaseCurve::InvRank, slots, max_len)?,
            ExposureKind::File(p) => ExposureTable::load(p, slots, max_len)?,
        })
    }
}

/// Everything that determines a run's output, echoed into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub methods: Vec<String>,
    pub exposure: String,
    pub slots: usize,
    pub max_len: usize,
    pub samples: u64,
    pub steps: usize,
    pub epochs: usize,
    pub post_lr: f64,
    pub scorer_lr: f64,
    pub hidden: Vec<usize>,
    pub head_epochs: usize,
    pub oracle: bool,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(data: PathBuf, methods: &[Method], exposure: &ExposureKind, slots: usize, max_len: usize) -> Self {
        Self {
            data,
            methods: methods.iter().map(|m| m.to_string()).collect(),
            exposure: exposure.to_string(),
            slots,
            max_len,
            samples: 10_000,
            steps: 200,
            epochs: 20,
            post_lr: 0.01,
            scorer_lr: 1e-3,
            hidden: vec![32],
            head_epochs: 100,
            oracle: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub qid: String,
    pub method: String,
    #[serde(rename = "EA")]
    pub ea: f64,
    pub decode_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRow {
    pub qid: String,
    pub method: String,
    pub position: usize,
    pub doc: usize,
    pub len: usize,
    pub start_slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub queries: usize,
    pub mean_ea: f64,
    pub mean_decode_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub methods: Vec<MethodSummary>,
}

impl RunSummary {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub layouts: Vec<LayoutRow>,
    pub summary: RunSummary,
    pub wall_time_secs: f64,
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn layouts_path(out: &Path) -> PathBuf {
    out.with_extension("layouts.csv")
}

pub fn timing_path(out: &Path) -> PathBuf {
    out.with_extension("timing.json")
}

struct Query<'a> {
    qid: &'a str,
    features: &'a [Vec<f64>],
    truth: &'a AttractTable,
    hat: AttractTable,
    config: RankingConfig,
}

struct Outcome {
    ranking: VarRanking,
    ea: f64,
    decode: f64,
}

fn qid_key(qid: &str) -> (u8, u64, String) {
    match qid.parse::<u64>() {
        Ok(n) => (0, n, String::new()),
        Err(_) => (1, 0, qid.to_string()),
    }
}

fn deterministic(ranking: VarRanking, truth: &AttractTable, exposure: &ExposureTable) -> Result<Outcome> {
    let r = ranking_reward(&ranking, truth, exposure)?.value;
    Ok(Outcome {
        ranking,
        ea: r,
        decode: r,
    })
}

/// Scores and reports a learned policy: MC expectation under the true
/// attractiveness plus the reward of its greedy decode.
fn policy(scores: &ScoreTable, q: &Query, exposure: &ExposureTable, samples: u64, seed: u64) -> Result<Outcome> {
    let ranking = greedy_decode(scores, &q.config);
    let ea = expected_attractiveness_mc(scores, q.truth, exposure, &q.config, samples, seed)?.mean;
    let decode = ranking_reward(&ranking, q.truth, exposure)?.value;
    Ok(Outcome { ranking, ea, decode })
}

/// Single-length problem for a fixed document length: one position per
/// `len` slots, weighted by the exposure of that block.
fn fixed_length_reduction(exposure: &ExposureTable, len: usize) -> Result<ExposureTable> {
    let positions = exposure.slots() / len;
    let entries = (1..=positions)
        .map(|i| Ok((i, 1, exposure.get(1 + (i - 1) * len, len)?)))
        .collect::<vlpl_core::Result<Vec<_>>>()?;
    Ok(ExposureTable::from_entries(positions, 1, &entries)?)
}

fn column(table: &AttractTable, len: usize) -> Result<AttractTable> {
    Ok(AttractTable::from_rows(&(0..table.num_docs()).map(|d| vec![table.get(d, len)]).collect::<Vec<_>>())?)
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let methods = cfg.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let exposure_kind: ExposureKind = cfg.exposure.parse()?;
    if cfg.max_len == 0 || cfg.max_len > cfg.slots {
        return Err(HarnessError::Usage(format!("need 1 <= L <= K, got L = {}, K = {}", cfg.max_len, cfg.slots)));
    }
    if cfg.samples == 0 || cfg.steps == 0 {
        return Err(HarnessError::Usage("--samples and --steps must be positive".into()));
    }
    for m in &methods {
        if let Method::Sort(l) | Method::Plr3(l) = m {
            if *l > cfg.max_len {
                return Err(HarnessError::Usage(format!("method {m} needs length <= L = {}", cfg.max_len)));
            }
        }
    }
    let exposure = exposure_kind.build(cfg.slots, cfg.max_len)?;
    let (manifest, dataset) = load_dataset(&cfg.data)?;
    if manifest.max_len != cfg.max_len {
        return Err(HarnessError::Usage(format!(
            "dataset was generated for L = {}, run asks for L = {}",
            manifest.max_len, cfg.max_len
        )));
    }
    let hats = attract_estimates(cfg, &dataset)?;
    let mut queries = Vec::new();
    for (q, hat) in dataset.queries.iter().zip(hats) {
        queries.push(Query {
            qid: &q.qid,
            features: &q.features,
            truth: q.attract.as_ref().expect("labels attached"),
            hat,
            config: RankingConfig::new(q.num_docs(), cfg.slots, cfg.max_len)?,
        });
    }
    queries.sort_by_key(|q| qid_key(q.qid));

    let mut rows = Vec::new();
    let mut layouts = Vec::new();
    let mut summaries = Vec::new();
    for method in &methods {
        let outcomes = run_method(*method, cfg, &queries, &exposure, dataset.feature_dim)?;
        for (q, o) in queries.iter().zip(&outcomes) {
            rows.push(ResultRow {
                qid: q.qid.to_string(),
                method: method.to_string(),
                ea: o.ea,
                decode_reward: o.decode,
            });
            for (i, (p, s)) in o.ranking.items.iter().zip(o.ranking.start_slots()).enumerate() {
                layouts.push(LayoutRow {
                    qid: q.qid.to_string(),
                    method: method.to_string(),
                    position: i + 1,
                    doc: p.doc,
                    len: p.len,
                    start_slot: s,
                });
            }
        }
        let n = outcomes.len();
        summaries.push(MethodSummary {
            method: method.to_string(),
            queries: n,
            mean_ea: outcomes.iter().map(|o| o.ea).sum::<f64>() / n.max(1) as f64,
            mean_decode_reward: outcomes.iter().map(|o| o.decode).sum::<f64>() / n.max(1) as f64,
        });
    }
    // Rows grouped by query, methods in the requested order.
    let order = |m: &str| cfg.methods.iter().position(|x| x == m).unwrap();
    rows.sort_by(|a, b| qid_key(&a.qid).cmp(&qid_key(&b.qid)).then(order(&a.method).cmp(&order(&b.method))));
    layouts.sort_by(|a, b| {
        qid_key(&a.qid)
            .cmp(&qid_key(&b.qid))
            .then(order(&a.method).cmp(&order(&b.method)))
            .then(a.position.cmp(&b.position))
    });
    Ok(RunOutput {
        rows,
        layouts,
        summary: RunSummary {
            config: cfg.clone(),
            methods: summaries,
        },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// True attractiveness with `oracle`, otherwise a relevance head fitted on
/// the corpus.
fn attract_estimates(cfg: &RunConfig, dataset: &Dataset) -> Result<Vec<AttractTable>> {
    if cfg.oracle {
        return Ok(dataset.queries.iter().map(|q| q.attract.clone().expect("labels attached")).collect());
    }
    let train: Vec<TrainQuery> = dataset
        .queries
        .iter()
        .map(|q| TrainQuery {
            features: &q.features,
            attract: q.attract.as_ref().expect("labels attached"),
        })
        .collect();
    let arch = Architecture::new(dataset.feature_dim.max(1), cfg.hidden.clone(), cfg.max_len)?;
    let init = Scorer::new(arch, 0.0, derive_seed(&[cfg.seed, 11]))?;
    let head = train_relevance_head(init, &train, &AdamConfig::with_learning_rate(0.01), cfg.head_epochs, derive_seed(&[cfg.seed, 12]))?;
    Ok(dataset.queries.iter().map(|q| predict_attract(&head, &q.features)).collect::<vlpl_core::Result<_>>()?)
}

fn run_method(method: Method, cfg: &RunConfig, queries: &[Query], exposure: &ExposureTable, dim: usize) -> Result<Vec<Outcome>> {
    let qseed = |i: usize, tag: u64| derive_seed(&[cfg.seed, tag, i as u64]);
    match method {
        Method::Sort(l) => queries.iter().map(|q| deterministic(sort_fixed_length(&q.hat, l, &q.config), q.truth, exposure)).collect(),
        Method::Greedy => queries.iter().map(|q| deterministic(greedy_layout(&q.hat, exposure, &q.config), q.truth, exposure)).collect(),
        Method::SlotAvg => queries.iter().map(|q| deterministic(slot_avg_layout(&q.hat, exposure, &q.config), q.truth, exposure)).collect(),
        Method::Post(est) => queries
            .par_iter()
            .enumerate()
            .map(|(i, q)| {
                let opts = PostOptions {
                    adam: AdamConfig::with_learning_rate(cfg.post_lr),
                    estimator: est,
                    steps: cfg.steps,
                    samples: cfg.samples,
                    seed: qseed(i, 1),
                };
                let (scores, _) = postprocess_optimize(&q.hat, exposure, &q.config, &opts)?;
                policy(&scores, q, exposure, cfg.samples, qseed(i, 2))
            })
            .collect(),
        Method::In(est) => {
            let scorer = train_scorer(cfg, queries.iter().map(|q| (q.features, &q.hat)), exposure, est, dim, cfg.max_len)?;
            queries
                .iter()
                .enumerate()
                .map(|(i, q)| policy(&score_table(&scorer, q.features)?, q, exposure, cfg.samples, qseed(i, 2)))
                .collect()
        }
        Method::Plr3(len) => {
            let reduced = fixed_length_reduction(exposure, len)?;
            let hats = queries.iter().map(|q| column(&q.hat, len)).collect::<Result<Vec<_>>>()?;
            let scorer = train_scorer(cfg, queries.iter().zip(&hats).map(|(q, h)| (q.features, h)), &reduced, Estimator::Vlpl2, dim, 1)?;
            queries
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let config = RankingConfig::new(q.config.num_docs(), reduced.slots(), 1)?;
                    let scores = score_table(&scorer, q.features)?;
                    let truth = column(q.truth, len)?;
                    let picked = greedy_decode(&scores, &config);
                    let ranking = VarRanking::new(picked.items.iter().map(|p| Placement::new(p.doc, len)).collect());
                    let ea = expected_attractiveness_mc(&scores, &truth, &reduced, &config, cfg.samples, qseed(i, 2))?.mean;
                    let decode = ranking_reward(&ranking, q.truth, exposure)?.value;
                    Ok(Outcome { ranking, ea, decode })
                })
                .collect()
        }
    }
}

fn train_scorer<'a>(
    cfg: &RunConfig,
    data: impl Iterator<Item = (&'a [Vec<f64>], &'a AttractTable)>,
    exposure: &ExposureTable,
    est: Estimator,
    dim: usize,
    width: usize,
) -> Result<Scorer> {
    let train: Vec<TrainQuery> = data.map(|(features, attract)| TrainQuery { features, attract }).collect();
    let arch = Architecture::new(dim.max(1), cfg.hidden.clone(), width)?;
    let init = Scorer::new(arch, 0.0, derive_seed(&[cfg.seed, 21]))?;
    let opts = TrainOptions {
        adam: AdamConfig::with_learning_rate(cfg.scorer_lr),
        estimator: est,
        epochs: cfg.epochs,
        samples: cfg.samples,
        seed: derive_seed(&[cfg.seed, 22]),
    };
    Ok(train_inprocess(init, &train, exposure, &opts)?)
}

/// Writes the result CSV, layouts, summary and timing sidecars.
pub fn write_outputs(out: &Path, output: &RunOutput) -> Result<()> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(out)?;
    for r in &output.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(layouts_path(out))?;
    for r in &output.layouts {
        w.serialize(r)?;
    }
    w.flush()?;
    std::fs::write(summary_path(out), serde_json::to_string_pretty(&output.summary)? + "\n")?;
    std::fs::write(
        timing_path(out),
        serde_json::to_string_pretty(&serde_json::json!({ "wall_time_secs": output.wall_time_secs }))? + "\n",
    )?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

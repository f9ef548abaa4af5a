//! LETOR ingestion and semi-synthetic attractiveness labels.
//!
//! Each document gets L+1 pseudo-scores from fixed random projections of its
//! features. The first L become within-bin quantiles, mapped into the bin of
//! its relevance label and length. The last one picks the half of the corpus
//! whose values get shuffled across lengths.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::derive_seed;
use crate::types::AttractTable;

pub const MAX_LABEL: u8 = 4;
pub const DEFAULT_MAX_DOCS: usize = 250;

#[derive(Debug, Clone, PartialEq)]
pub struct QueryInstance {
    pub qid: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub attract: Option<AttractTable>,
    pub reordered: Vec<bool>,
}

impl QueryInstance {
    pub fn num_docs(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub feature_dim: usize,
    pub queries: Vec<QueryInstance>,
}

impl Dataset {
    pub fn num_docs(&self) -> usize {
        self.queries.iter().map(|q| q.num_docs()).sum()
    }
}

/// Queries dropped by the size filter, with their document counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SkipReport {
    pub skipped: Vec<(String, usize)>,
}

pub fn parse_letor(path: &Path, max_docs: usize) -> Result<(Dataset, SkipReport)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_letor_str(&text, max_docs)
}

/// Parses `label qid:<id> <idx>:<val> ...` lines. Missing feature indices
/// are zero; the dimension is the largest index in the corpus.
pub fn parse_letor_str(text: &str, max_docs: usize) -> Result<(Dataset, SkipReport)> {
    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut docs: Vec<Vec<(u8, Vec<(usize, f64)>)>> = Vec::new();
    let mut dim = 0;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: u8 = label_tok
            .parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0 && (0.0..=MAX_LABEL as f64).contains(v))
            .map(|v| v as u8)
            .ok_or_else(|| err(format!("label {label_tok:?} is not an integer in 0..={MAX_LABEL}")))?;
        let qid = tokens
            .next()
            .and_then(|t| t.strip_prefix("qid:"))
            .filter(|q| !q.is_empty())
            .ok_or_else(|| err("missing qid:<id>".into()))?;
        let mut feats = Vec::new();
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("bad feature {tok:?}")))?;
            let i: usize = i.parse().ok().filter(|&i| i >= 1).ok_or_else(|| err(format!("bad feature index in {tok:?}")))?;
            let v: f64 = v.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| err(format!("bad feature value in {tok:?}")))?;
            dim = dim.max(i);
            feats.push((i, v));
        }
        let q = *index.entry(qid.to_string()).or_insert_with(|| {
            order.push(qid.to_string());
            docs.push(Vec::new());
            order.len() - 1
        });
        docs[q].push((label, feats));
    }
    let mut report = SkipReport::default();
    let mut queries = Vec::new();
    for (qid, rows) in order.into_iter().zip(docs) {
        if rows.len() > max_docs {
            report.skipped.push((qid, rows.len()));
            continue;
        }
        let n = rows.len();
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for (label, sparse) in rows {
            let mut dense = vec![0.0; dim];
            for (i, v) in sparse {
                dense[i - 1] = v;
            }
            features.push(dense);
            labels.push(label);
        }
        queries.push(QueryInstance {
            qid,
            features,
            labels,
            attract: None,
            reordered: vec![false; n],
        });
    }
    Ok((
        Dataset {
            feature_dim: dim,
            queries,
        },
        report,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinKind {
    Equal,
    Doubling,
}

impl std::str::FromStr for BinKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(BinKind::Equal),
            "doubling" => Ok(BinKind::Doubling),
            _ => Err(Error::Config(format!("unknown bin scheme {s:?} (expected equal or doubling)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinScheme {
    pub kind: BinKind,
    pub max_len: usize,
    /// 5L + 1 increasing boundaries from 0 to 1.
    pub boundaries: Vec<f64>,
}

impl BinScheme {
    /// Bin of label `r` at length `len`, as (low, high).
    pub fn bin(&self, r: u8, len: usize) -> (f64, f64) {
        let i = r as usize * self.max_len + len - 1;
        (self.boundaries[i], self.boundaries[i + 1])
    }

    pub fn widths(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn make_bins(kind: BinKind, max_len: usize) -> Result<BinScheme> {
    if max_len == 0 {
        return Err(Error::Config("bins need L >= 1".into()));
    }
    let n = (MAX_LABEL as usize + 1) * max_len;
    let boundaries: Vec<f64> = match kind {
        BinKind::Equal => (0..=n).map(|i| i as f64 / n as f64).collect(),
        BinKind::Doubling => {
            let total = 2f64.powi(n as i32) - 1.0;
            (0..=n).map(|i| (2f64.powi(i as i32) - 1.0) / total).collect()
        }
    };
    Ok(BinScheme { kind, max_len, boundaries })
}

/// 1-based midranks of `values`, ties sharing their average rank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Fills in attractiveness tables for every query.
pub fn generate_attractiveness(dataset: &Dataset, max_len: usize, scheme: &BinScheme, seed: u64) -> Result<Dataset> {
    if scheme.max_len != max_len {
        return Err(Error::Config(format!("bin scheme built for L = {}, asked for L = {max_len}", scheme.max_len)));
    }
    let dim = dataset.feature_dim;
    let mut proj_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0]));
    let proj: Vec<Vec<f64>> = (0..=max_len)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut proj_rng)).collect())
        .collect();

    // Flat corpus view: (query, doc).
    let docs: Vec<(usize, usize)> = dataset
        .queries
        .iter()
        .enumerate()
        .flat_map(|(q, inst)| (0..inst.num_docs()).map(move |d| (q, d)))
        .collect();
    let scores: Vec<Vec<f64>> = docs
        .par_iter()
        .map(|&(q, d)| {
            let x = &dataset.queries[q].features[d];
            proj.iter().map(|w| w.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
        })
        .collect();
    let label = |i: usize| dataset.queries[docs[i].0].labels[docs[i].1];

    let mut rho = vec![vec![0.0; max_len]; docs.len()];
    for r in 0..=MAX_LABEL {
        let members: Vec<usize> = (0..docs.len()).filter(|&i| label(i) == r).collect();
        for l in 1..=max_len {
            let vals: Vec<f64> = members.iter().map(|&i| scores[i][l - 1]).collect();
            let ranks = midranks(&vals);
            let (lo, hi) = scheme.bin(r, l);
            for (&i, rank) in members.iter().zip(ranks) {
                let q = rank / (members.len() + 1) as f64;
                rho[i][l - 1] = (lo + q * (hi - lo)).clamp(0.0, 1.0);
            }
        }
    }

    let mut by_last: Vec<usize> = (0..docs.len()).collect();
    by_last.sort_by(|&a, &b| scores[a][max_len].total_cmp(&scores[b][max_len]).then(docs[a].cmp(&docs[b])));
    let mut reordered = vec![false; docs.len()];
    for &i in &by_last[..docs.len() / 2] {
        reordered[i] = true;
    }
    rho.par_iter_mut().enumerate().filter(|(i, _)| reordered[*i]).for_each(|(i, row)| {
        let (q, d) = docs[i];
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 1, q as u64, d as u64]));
        row.shuffle(&mut rng);
    });

    let mut out = dataset.clone();
    let mut cursor = 0;
    for inst in &mut out.queries {
        let n = inst.num_docs();
        inst.attract = Some(AttractTable::from_rows(&rho[cursor..cursor + n])?);
        inst.reordered = reordered[cursor..cursor + n].to_vec();
        cursor += n;
    }
    Ok(out)
}

/// Generation settings, stored next to the label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub scheme: BinKind,
    pub max_len: usize,
    pub max_docs: usize,
    pub source: PathBuf,
    pub attract_file: PathBuf,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Resolves a manifest path relative to the manifest's own directory.
    pub fn resolve(manifest_path: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

/// Writes `qid doc R rho_1 .. rho_L reordered` rows with a header line.
pub fn write_columnar<W: Write>(dataset: &Dataset, max_len: usize, mut out: W) -> Result<()> {
    let mut header = vec!["qid".to_string(), "doc".into(), "R".into()];
    header.extend((1..=max_len).map(|l| format!("rho_{l}")));
    header.push("reordered".into());
    writeln!(out, "{}", header.join("\t"))?;
    for q in &dataset.queries {
        let attract = q.attract.as_ref().ok_or_else(|| Error::Config(format!("query {} has no attractiveness", q.qid)))?;
        for d in 0..q.num_docs() {
            let mut row = vec![q.qid.clone(), d.to_string(), q.labels[d].to_string()];
            row.extend((1..=max_len).map(|l| attract.get(d, l).to_string()));
            row.push(u8::from(q.reordered[d]).to_string());
            writeln!(out, "{}", row.join("\t"))?;
        }
    }
    Ok(())
}

/// Reads labels written by [`write_columnar`] back into `dataset`, matching
/// rows by query id and document index.
pub fn attach_columnar(dataset: &mut Dataset, text: &str) -> Result<usize> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty label file".into(),
    })?;
    let cols = header.split('\t').count();
    if cols < 5 {
        return Err(Error::Parse {
            line: 1,
            msg: "header needs qid, doc, R, at least one rho and reordered".into(),
        });
    }
    let max_len = cols - 4;
    let mut rows: HashMap<(String, usize), (Vec<f64>, bool)> = HashMap::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: n + 1, msg };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols {
            return Err(err(format!("expected {cols} columns, found {}", f.len())));
        }
        let doc: usize = f[1].parse().map_err(|_| err(format!("bad doc index {:?}", f[1])))?;
        let rho = f[3..3 + max_len]
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.insert((f[0].to_string(), doc), (rho, f[cols - 1] == "1"));
    }
    for q in &mut dataset.queries {
        let mut table = Vec::with_capacity(q.num_docs());
        for d in 0..q.num_docs() {
            let (rho, re) = rows
                .remove(&(q.qid.clone(), d))
                .ok_or_else(|| Error::Config(format!("no labels for query {} doc {d}", q.qid)))?;
            table.push(rho);
            q.reordered[d] = re;
        }
        q.attract = Some(AttractTable::from_rows(&table)?);
    }
    Ok(max_len)
}

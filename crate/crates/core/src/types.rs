//! Domain types shared by every module: problem sizes, placements,
//! variable-length rankings and the per-(document, length) tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem size: `num_docs` candidates, a budget of `slots` (K) and a
/// maximum presentation length `max_len` (L).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingConfig {
    num_docs: usize,
    slots: usize,
    max_len: usize,
}

impl RankingConfig {
    pub fn new(num_docs: usize, slots: usize, max_len: usize) -> Result<Self> {
        if num_docs == 0 {
            return Err(Error::Config("num_docs must be >= 1".into()));
        }
        if max_len == 0 || max_len > slots {
            return Err(Error::Config(format!(
                "max_len must satisfy 1 <= L <= K (L={max_len}, K={slots})"
            )));
        }
        Ok(Self {
            num_docs,
            slots,
            max_len,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Number of (document, length) pairs.
    pub fn num_pairs(&self) -> usize {
        self.num_docs * self.max_len
    }
}

/// A document shown at a presentation length (in slots).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub doc: usize,
    pub len: usize,
}

impl Placement {
    pub fn new(doc: usize, len: usize) -> Self {
        Self { doc, len }
    }
}

/// Ordered sequence of placements. Construction does not validate; use
/// [`validate_ranking`] against a [`RankingConfig`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarRanking {
    pub items: Vec<Placement>,
}

impl VarRanking {
    pub fn new(items: Vec<Placement>) -> Self {
        Self { items }
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self::new(pairs.iter().map(|&(d, l)| Placement::new(d, l)).collect())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total number of slots covered.
    pub fn used_slots(&self) -> usize {
        self.items.iter().map(|p| p.len).sum()
    }

    /// 1-based first slot of the item at `index`.
    pub fn start_slot(&self, index: usize) -> Result<usize> {
        if index >= self.items.len() {
            return Err(Error::Index {
                index,
                len: self.items.len(),
            });
        }
        Ok(1 + self.items[..index].iter().map(|p| p.len).sum::<usize>())
    }

    /// Start slots of every item.
    pub fn start_slots(&self) -> Vec<usize> {
        let mut s = 1;
        self.items
            .iter()
            .map(|p| {
                let here = s;
                s += p.len;
                here
            })
            .collect()
    }

    pub fn position_of(&self, doc: usize) -> Option<usize> {
        self.items.iter().position(|p| p.doc == doc)
    }
}

/// Outcome of [`validate_ranking`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Complete,
    Partial,
    Invalid(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        !matches!(self, Verdict::Invalid(_))
    }

    pub fn is_complete(&self) -> bool {
        matches!(self, Verdict::Complete)
    }
}

/// Structural check of a ranking. A valid ranking is complete when all
/// documents are placed or no unplaced document fits even at length 1.
pub fn validate_ranking(ranking: &VarRanking, config: &RankingConfig) -> Verdict {
    let mut seen = vec![false; config.num_docs()];
    let mut used = 0usize;
    for (i, p) in ranking.items.iter().enumerate() {
        if p.doc >= config.num_docs() {
            return Verdict::Invalid(format!("item {i}: document {} out of range", p.doc));
        }
        if p.len == 0 || p.len > config.max_len() {
            return Verdict::Invalid(format!("item {i}: length {} outside 1..={}", p.len, config.max_len()));
        }
        if seen[p.doc] {
            return Verdict::Invalid(format!("item {i}: duplicate document {}", p.doc));
        }
        seen[p.doc] = true;
        used += p.len;
    }
    if used > config.slots() {
        return Verdict::Invalid(format!("uses {used} slots, budget is {}", config.slots()));
    }
    let all_placed = ranking.len() == config.num_docs();
    if all_placed || used + 1 > config.slots() {
        Verdict::Complete
    } else {
        Verdict::Partial
    }
}

/// Dense |D| x L matrix indexed by document (0-based) and length (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocLenGrid {
    num_docs: usize,
    max_len: usize,
    values: Vec<f64>,
}

impl DocLenGrid {
    pub fn zeros(num_docs: usize, max_len: usize) -> Self {
        Self::filled(num_docs, max_len, 0.0)
    }

    pub fn filled(num_docs: usize, max_len: usize, value: f64) -> Self {
        Self {
            num_docs,
            max_len,
            values: vec![value; num_docs * max_len],
        }
    }

    /// Builds from rows, one per document, each holding L values.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_docs = rows.len();
        let max_len = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != max_len) {
            return Err(Error::Shape {
                expected_docs: num_docs,
                expected_len: max_len,
                docs: num_docs,
                len: bad.len(),
            });
        }
        Ok(Self {
            num_docs,
            max_len,
            values: rows.concat(),
        })
    }

    pub fn from_fn(num_docs: usize, max_len: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_docs * max_len);
        for d in 0..num_docs {
            for l in 1..=max_len {
                values.push(f(d, l));
            }
        }
        Self {
            num_docs,
            max_len,
            values,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    #[inline]
    pub fn get(&self, doc: usize, len: usize) -> f64 {
        debug_assert!(len >= 1 && len <= self.max_len);
        self.values[doc * self.max_len + len - 1]
    }

    #[inline]
    pub fn set(&mut self, doc: usize, len: usize, value: f64) {
        self.values[doc * self.max_len + len - 1] = value;
    }

    /// Row-major storage (document-major, length-minor).
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, doc: usize) -> &[f64] {
        &self.values[doc * self.max_len..(doc + 1) * self.max_len]
    }

    fn check_shape(&self, config: &RankingConfig) -> Result<()> {
        if self.num_docs != config.num_docs() || self.max_len != config.max_len() {
            return Err(Error::Shape {
                expected_docs: config.num_docs(),
                expected_len: config.max_len(),
                docs: self.num_docs,
                len: self.max_len,
            });
        }
        Ok(())
    }
}

/// Learnable scores m(d, l).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable(DocLenGrid);

impl ScoreTable {
    pub fn new(grid: DocLenGrid) -> Result<Self> {
        if grid.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutOfRange("scores must be finite".into()));
        }
        Ok(Self(grid))
    }

    pub fn zeros(config: &RankingConfig) -> Self {
        Self(DocLenGrid::zeros(config.num_docs(), config.max_len()))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DocLenGrid::from_rows(rows)?)
    }

    pub fn grid(&self) -> &DocLenGrid {
        &self.0
    }

    pub fn get(&self, doc: usize, len: usize) -> f64 {
        self.0.get(doc, len)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// Mutable access for optimizers. Callers keep entries finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.0.as_mut_slice()
    }

    pub fn check_config(&self, config: &RankingConfig) -> Result<()> {
        self.0.check_shape(config)
    }
}

/// Click propensities rho(d, l) in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractTable(DocLenGrid);

impl AttractTable {
    pub fn new(grid: DocLenGrid) -> Result<Self> {
        if let Some(v) = grid.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!("attractiveness {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(DocLenGrid::from_rows(rows)?)
    }

    /// Every length of document d gets `per_doc[d]`.
    pub fn length_independent(per_doc: &[f64], max_len: usize) -> Result<Self> {
        Self::new(DocLenGrid::from_fn(per_doc.len(), max_len, |d, _| per_doc[d]))
    }

    pub fn grid(&self) -> &DocLenGrid {
        &self.0
    }

    #[inline]
    pub fn get(&self, doc: usize, len: usize) -> f64 {
        self.0.get(doc, len)
    }

    pub fn num_docs(&self) -> usize {
        self.0.num_docs()
    }

    pub fn max_len(&self) -> usize {
        self.0.max_len()
    }

    pub fn check_config(&self, config: &RankingConfig) -> Result<()> {
        self.0.check_shape(config)
    }
}

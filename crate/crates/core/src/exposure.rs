//! Position weights theta(s, l): the probability that a presentation
//! starting at slot `s` and spanning `l` slots is observed.
//!
//! Multi-slot weights are built from a single-slot curve by treating a
//! presentation as observed when any of its slots is observed:
//!
//! ```text
//! theta(s, l) = 1 - prod_{i=s}^{s+l-1} (1 - theta(i, 1))
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`ExposureTable::from_entries`] when deciding whether a
/// literal table is composite-consistent. Tables printed to three decimals
/// accumulate up to ~1e-3 of rounding error through the product.
pub const DEFAULT_CONSISTENCY_TOL: f64 = 1e-3;

/// Single-slot observation curve theta(i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaseCurve {
    /// 1 / log2(i + 1)
    Dcg,
    /// 1 / i
    InvRank,
    /// Explicit values for slots 1, 2, ...
    Custom(Vec<f64>),
}

/// theta(s) for a single slot.
pub fn theta_single(curve: &BaseCurve, slot: usize) -> Result<f64> {
    if slot == 0 {
        return Err(Error::SlotZero { slot });
    }
    match curve {
        BaseCurve::Dcg => Ok(1.0 / ((slot + 1) as f64).log2()),
        BaseCurve::InvRank => Ok(1.0 / slot as f64),
        BaseCurve::Custom(values) => values
            .get(slot - 1)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("custom curve has no value for slot {slot}"))),
    }
}

/// Composite weight of a presentation covering slots `slot..slot+len`.
pub fn composite_exposure(curve: &BaseCurve, slot: usize, len: usize, slots: usize) -> Result<f64> {
    if slot == 0 {
        return Err(Error::SlotZero { slot });
    }
    if len == 0 || slot + len - 1 > slots {
        return Err(Error::ExposureDomain { slot, len, slots });
    }
    let mut miss = 1.0;
    for i in slot..slot + len {
        miss *= 1.0 - theta_single(curve, i)?;
    }
    Ok(1.0 - miss)
}

/// Dense table of theta(s, l) over the feasible domain
/// `1 <= s`, `1 <= l <= L`, `s + l - 1 <= K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureTable {
    slots: usize,
    max_len: usize,
    // (s-1) * max_len + (l-1); NaN outside the domain.
    weights: Vec<f64>,
    composite_consistent: bool,
}

impl ExposureTable {
    pub fn composite(curve: &BaseCurve, slots: usize, max_len: usize) -> Result<Self> {
        let mut table = Self::empty(slots, max_len)?;
        for s in 1..=slots {
            for l in 1..=max_len.min(slots + 1 - s) {
                let w = composite_exposure(curve, s, l, slots)?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::ExposureTable(format!("weight {w} at ({s},{l}) outside [0,1]")));
                }
                table.weights[(s - 1) * max_len + l - 1] = w;
            }
        }
        table.composite_consistent = true;
        Ok(table)
    }

    /// Builds a table from explicit `(s, l, weight)` entries that must cover
    /// the feasible domain exactly. Inconsistent tables are accepted; see
    /// [`Self::is_composite_consistent`].
    pub fn from_entries(slots: usize, max_len: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut table = Self::empty(slots, max_len)?;
        let mut seen = vec![false; table.weights.len()];
        for &(s, l, w) in entries {
            if s == 0 || l == 0 || l > max_len || s + l - 1 > slots {
                return Err(Error::ExposureTable(format!("entry ({s},{l}) outside the feasible domain")));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::ExposureTable(format!("weight {w} at ({s},{l}) outside [0,1]")));
            }
            let idx = (s - 1) * max_len + l - 1;
            if seen[idx] {
                return Err(Error::ExposureTable(format!("duplicate entry ({s},{l})")));
            }
            seen[idx] = true;
            table.weights[idx] = w;
        }
        for s in 1..=slots {
            for l in 1..=max_len.min(slots + 1 - s) {
                if !seen[(s - 1) * max_len + l - 1] {
                    return Err(Error::ExposureTable(format!("missing entry ({s},{l})")));
                }
            }
        }
        table.composite_consistent = table.check_composite(DEFAULT_CONSISTENCY_TOL);
        Ok(table)
    }

    /// Parses `s l weight` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, slots: usize, max_len: usize) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected `s l weight`, got {} fields", fields.len()),
                });
            }
            let bad = |what: &str| Error::Parse {
                line: i + 1,
                msg: format!("cannot parse {what}"),
            };
            let s = fields[0].parse().map_err(|_| bad("slot"))?;
            let l = fields[1].parse().map_err(|_| bad("length"))?;
            let w = fields[2].parse().map_err(|_| bad("weight"))?;
            entries.push((s, l, w));
        }
        Self::from_entries(slots, max_len, &entries)
    }

    pub fn load(path: &Path, slots: usize, max_len: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, slots, max_len)
    }

    /// Writes the table in the `s l weight` text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, l, w) in self.entries() {
            out.push_str(&format!("{s} {l} {w}\n"));
        }
        out
    }

    fn empty(slots: usize, max_len: usize) -> Result<Self> {
        if slots == 0 || max_len == 0 || max_len > slots {
            return Err(Error::Config(format!(
                "exposure table needs 1 <= L <= K (L={max_len}, K={slots})"
            )));
        }
        Ok(Self {
            slots,
            max_len,
            weights: vec![f64::NAN; slots * max_len],
            composite_consistent: false,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    #[inline]
    pub fn is_defined(&self, slot: usize, len: usize) -> bool {
        slot >= 1 && len >= 1 && len <= self.max_len && slot + len - 1 <= self.slots
    }

    pub fn get(&self, slot: usize, len: usize) -> Result<f64> {
        if !self.is_defined(slot, len) {
            return Err(Error::ExposureDomain {
                slot,
                len,
                slots: self.slots,
            });
        }
        Ok(self.weights[(slot - 1) * self.max_len + len - 1])
    }

    /// Unchecked lookup for hot loops; panics outside the domain.
    #[inline]
    pub(crate) fn at(&self, slot: usize, len: usize) -> f64 {
        assert!(
            self.is_defined(slot, len),
            "exposure lookup outside domain: (s={slot}, l={len}), K={}",
            self.slots
        );
        self.weights[(slot - 1) * self.max_len + len - 1]
    }

    /// Feasible entries in (s, l) order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..=self.slots).flat_map(move |s| {
            (1..=self.max_len.min(self.slots + 1 - s)).map(move |l| (s, l, self.weights[(s - 1) * self.max_len + l - 1]))
        })
    }

    /// Whether a single-slot curve reproduces the table through the
    /// composite formula (checked at [`DEFAULT_CONSISTENCY_TOL`] on load).
    pub fn is_composite_consistent(&self) -> bool {
        self.composite_consistent
    }

    /// Slot-by-slot check: the base curve is the l = 1 column, every longer
    /// entry must match the composite product within `tol`.
    pub fn check_composite(&self, tol: f64) -> bool {
        let base: Vec<f64> = (1..=self.slots).map(|s| self.at(s, 1)).collect();
        self.entries().all(|(s, l, w)| {
            let miss: f64 = base[s - 1..s - 1 + l].iter().map(|b| 1.0 - b).product();
            ((1.0 - miss) - w).abs() <= tol
        })
    }

    pub fn as_map(&self) -> BTreeMap<(usize, usize), f64> {
        self.entries().map(|(s, l, w)| ((s, l), w)).collect()
    }
}

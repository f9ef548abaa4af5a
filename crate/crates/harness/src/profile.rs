//! Which presentation length covers each slot, across decoded rankings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::run::{layouts_path, read_summary, summary_path, LayoutRow};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotProfile {
    pub method: String,
    pub slot: usize,
    /// Fraction of rankings with this slot covered by a length-l document;
    /// index 0 is an empty slot.
    pub fractions: Vec<f64>,
}

/// Builds the profile from layout rows. `rankings` lists every
/// (method, qid) pair, including empty rankings with no rows.
pub fn length_profile(layouts: &[LayoutRow], rankings: &[(String, String)], slots: usize, max_len: usize) -> Vec<SlotProfile> {
    let mut per_method: BTreeMap<&str, Vec<Vec<u64>>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (m, _) in rankings {
        if !per_method.contains_key(m.as_str()) {
            order.push(m);
            per_method.insert(m, vec![vec![0; max_len + 1]; slots]);
        }
        *counts.entry(m).or_insert(0) += 1;
    }
    let mut covered: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for r in layouts {
        let cover = covered.entry((&r.method, &r.qid)).or_insert_with(|| vec![0; slots]);
        for s in r.start_slot..r.start_slot + r.len {
            if s >= 1 && s <= slots {
                cover[s - 1] = r.len;
            }
        }
    }
    for (m, q) in rankings {
        let cover = covered.get(&(m.as_str(), q.as_str())).cloned().unwrap_or_else(|| vec![0; slots]);
        let table = per_method.get_mut(m.as_str()).unwrap();
        for (s, &l) in cover.iter().enumerate() {
            table[s][l.min(max_len)] += 1;
        }
    }
    let mut out = Vec::new();
    for m in order {
        let n = counts[m] as f64;
        for (s, row) in per_method[m].iter().enumerate() {
            out.push(SlotProfile {
                method: m.to_string(),
                slot: s + 1,
                fractions: row.iter().map(|&c| c as f64 / n).collect(),
            });
        }
    }
    out
}

/// Reads a run's layout and summary sidecars and writes the profile CSV
/// `method,slot,len_0,...,len_L`.
pub fn cmd_length_profile(run_output: &Path, out: &Path) -> Result<Vec<SlotProfile>> {
    let summary = read_summary(&summary_path(run_output))?;
    let rows = crate::run::read_rows(run_output)?;
    let rankings: Vec<(String, String)> = rows.iter().map(|r| (r.method.clone(), r.qid.clone())).collect();
    let lpath = layouts_path(run_output);
    let mut reader = csv::Reader::from_path(&lpath).map_err(|e| HarnessError::Io(format!("{}: {e}", lpath.display())))?;
    let layouts = reader.deserialize().collect::<std::result::Result<Vec<LayoutRow>, _>>()?;
    let (k, l) = (summary.config.slots, summary.config.max_len);
    let profile = length_profile(&layouts, &rankings, k, l);
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["method".to_string(), "slot".into()];
    header.extend((0..=l).map(|i| format!("len_{i}")));
    w.write_record(&header)?;
    for p in &profile {
        let mut rec = vec![p.method.clone(), p.slot.to_string()];
        rec.extend(p.fractions.iter().map(|f| f.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(q: &str, pos: usize, doc: usize, len: usize, start: usize) -> LayoutRow {
        LayoutRow {
            qid: q.into(),
            method: "m".into(),
            position: pos,
            doc,
            len,
            start_slot: start,
        }
    }

    #[test]
    fn slot_coverage() {
        let layouts = vec![row("1", 1, 0, 2, 1), row("1", 2, 1, 1, 3)];
        let p = length_profile(&layouts, &[("m".into(), "1".into())], 3, 2);
        assert_eq!(p[0].fractions, vec![0.0, 0.0, 1.0]);
        assert_eq!(p[1].fractions, vec![0.0, 0.0, 1.0]);
        assert_eq!(p[2].fractions, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn unit_lengths_and_padding() {
        let layouts = vec![row("1", 1, 0, 1, 1), row("1", 2, 1, 1, 2), row("2", 1, 0, 1, 1)];
        let rankings = vec![("m".into(), "1".into()), ("m".into(), "2".into())];
        let p = length_profile(&layouts, &rankings, 3, 3);
        assert_eq!(p[0].fractions, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(p[1].fractions, vec![0.5, 0.5, 0.0, 0.0]);
        assert_eq!(p[2].fractions, vec![1.0, 0.0, 0.0, 0.0]);
        for s in &p {
            assert!((s.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

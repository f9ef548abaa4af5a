use std::path::{Path, PathBuf};

use serde::Serialize;
use vlpl_core::synthdata::{
    attach_columnar, generate_attractiveness, make_bins, parse_letor, write_columnar, BinKind, Dataset, Manifest,
    SkipReport,
};

use crate::error::{HarnessError, Result};

pub const ATTRACT_FILE: &str = "attract.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct GenReport {
    pub queries: usize,
    pub documents: usize,
    pub reordered: usize,
    pub skipped: SkipReport,
    pub manifest: PathBuf,
}

/// Parses a LETOR file, generates attractiveness labels and writes them with
/// a manifest into `out_dir`.
pub fn cmd_gen_data(input: &Path, max_len: usize, scheme: BinKind, max_docs: usize, seed: u64, out_dir: &Path) -> Result<GenReport> {
    if max_len == 0 {
        return Err(HarnessError::Usage("--max-len must be at least 1".into()));
    }
    let (dataset, skipped) = parse_letor(input, max_docs)?;
    let bins = make_bins(scheme, max_len)?;
    let labeled = generate_attractiveness(&dataset, max_len, &bins, seed)?;
    std::fs::create_dir_all(out_dir)?;
    let mut buf = Vec::new();
    write_columnar(&labeled, max_len, &mut buf)?;
    std::fs::write(out_dir.join(ATTRACT_FILE), buf)?;
    let manifest = Manifest {
        seed,
        scheme,
        max_len,
        max_docs,
        source: std::fs::canonicalize(input)?,
        attract_file: PathBuf::from(ATTRACT_FILE),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    Ok(GenReport {
        queries: labeled.queries.len(),
        documents: labeled.num_docs(),
        reordered: labeled.queries.iter().map(|q| q.reordered.iter().filter(|&&r| r).count()).sum(),
        skipped,
        manifest: manifest_path,
    })
}

/// Loads features from the manifest's source and attaches generated labels.
pub fn load_dataset(manifest_path: &Path) -> Result<(Manifest, Dataset)> {
    let manifest = Manifest::load(manifest_path)?;
    let (mut dataset, _) = parse_letor(&Manifest::resolve(manifest_path, &manifest.source), manifest.max_docs)?;
    let labels = Manifest::resolve(manifest_path, &manifest.attract_file);
    let text = std::fs::read_to_string(&labels).map_err(|e| HarnessError::Io(format!("{}: {e}", labels.display())))?;
    let l = attach_columnar(&mut dataset, &text)?;
    if l != manifest.max_len {
        return Err(HarnessError::Usage(format!("label file has L = {l}, manifest says {}", manifest.max_len)));
    }
    Ok((manifest, dataset))
}

//! Helpers shared by the `ingest`, `xmodal` and `assist` binaries.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mkg_core::ingest::RawImage;

pub fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
}

/// Every `.pgm`/`.ppm` under `dir`, sorted by file name, keyed by file stem.
pub fn read_image_dir(dir: &Path) -> Result<Vec<(String, RawImage)>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let id = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let img = RawImage::read_pnm(&p).with_context(|| format!("decoding {}", p.display()))?;
            Ok((id, img))
        })
        .collect()
}

pub fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

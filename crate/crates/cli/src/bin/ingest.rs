use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use mkg_core::ingest::{run_pipeline, IngestParams};

/// Cut long detail-page images, drop noisy pieces and write image/text pairs.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Directory of PGM/PPM images with optional `<image>.ocr.json` sidecars.
    #[arg(long)]
    images: PathBuf,
    /// JSON parameter file; defaults apply when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output pairs.jsonl; pieces are written next to it.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    mkg_cli::init_logging();
    let args = Args::parse();
    let params: IngestParams = match &args.params {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => IngestParams::default(),
    };
    let report = run_pipeline(&args.images, &params, &args.out)?;
    mkg_cli::print_json(&report)
}

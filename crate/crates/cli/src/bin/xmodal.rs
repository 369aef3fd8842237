use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mkg_core::crossmodal::synthetic::class_pairs;
use mkg_core::crossmodal::{
    build_index, load_checkpoint, pretrain, save_checkpoint, speedup_benchmark, EmbeddingIndex, Encoders,
    JointScorer, ModelConfig, TrainConfig,
};
use mkg_core::ingest::{read_pairs, RawImage};
use serde::Deserialize;

/// Two-stream text/image encoder: pretraining, indexing, matching and the
/// single-stream cost comparison.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain on a pairs.jsonl corpus and write a checkpoint.
    Pretrain {
        #[arg(long)]
        pairs: PathBuf,
        /// JSON `{"model": {...}, "train": {...}}`; either part may be omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed every image of a directory into an index file.
    Index {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k images for a text.
    Match {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Time index matching against single-stream scoring of every candidate.
    Bench {
        #[arg(long)]
        ckpt: PathBuf,
        /// Prebuilt index whose rows embed `--images`; built in memory when
        /// omitted.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Candidate images; synthetic ones are generated when omitted.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        candidates: usize,
        #[arg(long, default_value_t = 3)]
        queries: usize,
    },
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct PretrainFile {
    model: ModelConfig,
    train: TrainConfig,
}

fn main() -> Result<()> {
    mkg_cli::init_logging();
    match Args::parse().command {
        Command::Pretrain { pairs, config, out } => {
            let cfg: PretrainFile = match config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => PretrainFile::default(),
            };
            let records = read_pairs(&pairs)?;
            let base = pairs.parent().unwrap_or(std::path::Path::new("."));
            let corpus = records
                .iter()
                .map(|r| {
                    let path = base.join(&r.image);
                    Ok((RawImage::read_pnm(&path).with_context(|| path.display().to_string())?, r.text.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let (enc, logs) = pretrain::<f32>(&corpus, cfg.model, &cfg.train)?;
            save_checkpoint(&enc, &out)?;
            mkg_cli::print_json(&logs)
        }
        Command::Index { ckpt, images, out } => {
            let enc: Encoders<f32> = load_checkpoint(&ckpt)?;
            let images = mkg_cli::read_image_dir(&images)?;
            let index = build_index(&enc, &images)?;
            index.save(&out)?;
            println!("{} images, dim {}", index.len(), index.dim());
            Ok(())
        }
        Command::Match { ckpt, index, text, k } => {
            let enc: Encoders<f32> = load_checkpoint(&ckpt)?;
            let index = EmbeddingIndex::<f32>::load(&index)?;
            mkg_cli::print_json(&index.match_text(&enc, &text, k)?)
        }
        Command::Bench { ckpt, index, images, candidates, queries } => {
            let enc: Encoders<f32> = load_checkpoint(&ckpt)?;
            let (ids, raw): (Vec<String>, Vec<RawImage>) = match images {
                Some(dir) => mkg_cli::read_image_dir(&dir)?.into_iter().take(candidates).unzip(),
                None => class_pairs(candidates, 10, 99)
                    .into_iter()
                    .enumerate()
                    .map(|(i, p)| (format!("cand{i:05}"), p.image))
                    .unzip(),
            };
            if ids.len() < candidates {
                bail!("only {} candidate images", ids.len());
            }
            let prepared: Vec<_> = raw.iter().map(|img| enc.prepare_image(img)).collect();
            let index = match index {
                Some(p) => {
                    let idx = EmbeddingIndex::<f32>::load(&p)?;
                    if idx.len() != candidates {
                        bail!("index has {} rows, expected {candidates}", idx.len());
                    }
                    idx
                }
                None => build_index(&enc, &ids.iter().cloned().zip(raw).collect::<Vec<_>>())?,
            };
            let joint = JointScorer::<f32>::new(&enc.config)?;
            let texts: Vec<String> = (0..queries).map(|i| format!("soft t{} daily sale", i % 10)).collect();
            let report = speedup_benchmark(&enc, &joint, &index, &prepared, &texts, 5)?;
            mkg_cli::print_json(&report)
        }
    }
}

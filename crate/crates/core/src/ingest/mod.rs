//! Detail-page image ingest: cut overlong images, filter noisy pieces with
//! OCR heuristics, and pair the survivors with their OCR text.

mod cut;
mod filter;
mod ocr;
mod pairs;
mod raster;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cut::{
    cut_long_image, low_energy_runs, plan_cuts, row_energy, row_gradient_sums, CutParams,
    DropReason, ImagePiece, Verdict,
};
pub use filter::{filter_noise, judge, FilterParams};
pub use ocr::{load_sidecar, sidecar_path, OcrBlock, OcrSidecar};
pub use pairs::{build_pairs, reading_order_text};
pub use raster::RawImage;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("image height {0} is too small for row energy")]
    DegenerateImage(usize),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid OCR block: {0}")]
    InvalidOcr(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("cannot decode {0}: {1}")]
    Decode(String, String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for IngestError {
    fn from(e: std::io::Error) -> Self {
        IngestError::Io(e.to_string())
    }
}

/// Parameter file for the ingest pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestParams {
    pub cut: CutParams,
    pub filter: FilterParams,
}

/// Cuts, then filters every piece.
pub fn process_image(
    img: &RawImage,
    ocr: &[OcrBlock],
    params: &IngestParams,
) -> Result<Vec<ImagePiece>, IngestError> {
    params.filter.validate()?;
    for b in ocr {
        b.check(img.width(), img.height())?;
    }
    Ok(cut_long_image(img, ocr, &params.cut)?
        .into_iter()
        .map(|p| filter_noise(p, &params.filter))
        .collect())
}

/// One line of `pairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    /// Piece file name, relative to the directory holding `pairs.jsonl`.
    pub image: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub images: usize,
    pub pieces: usize,
    pub kept: usize,
    pub dropped_text_area: usize,
    pub dropped_block_count: usize,
    pub dropped_banned_phrase: usize,
    pub pairs: usize,
}

/// Processes every `.pgm`/`.ppm` in `images` (sorted by file name), writes
/// paired pieces next to `out` and one [`PairRecord`] per line into `out`.
pub fn run_pipeline(images: &Path, params: &IngestParams, out: &Path) -> Result<IngestReport, IngestError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(images)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm")))
        .collect();
    files.sort();

    let out_dir = out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(out_dir)?;
    let mut writer = BufWriter::new(File::create(out)?);
    let mut report = IngestReport::default();
    for file in files {
        let img = RawImage::read_pnm(&file)?;
        let ocr = load_sidecar(&file)?;
        let pieces = process_image(&img, &ocr, params)?;
        report.images += 1;
        report.pieces += pieces.len();
        for p in &pieces {
            match p.verdict {
                Verdict::Kept => report.kept += 1,
                Verdict::Dropped(DropReason::TextArea) => report.dropped_text_area += 1,
                Verdict::Dropped(DropReason::BlockCount) => report.dropped_block_count += 1,
                Verdict::Dropped(DropReason::BannedPhrase) => report.dropped_banned_phrase += 1,
                Verdict::Pending => unreachable!("filter sets a verdict"),
            }
        }
        let stem = file.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        for (k, (piece, text)) in build_pairs(&pieces).into_iter().enumerate() {
            let name = format!("{stem}_{k:03}.{}", piece.pnm_extension());
            let path = out_dir.join(&name);
            piece.write_pnm(&path)?;
            let line = serde_json::to_string(&PairRecord {
                image: name,
                text,
            })
            .expect("pair serializes");
            writeln!(writer, "{line}")?;
            report.pairs += 1;
        }
    }
    writer.flush()?;
    Ok(report)
}

/// Reads a `pairs.jsonl` file.
pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>, IngestError> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| IngestError::InvalidParams(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

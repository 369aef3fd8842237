use serde::{Deserialize, Serialize};

use super::ocr::OcrBlock;
use super::raster::RawImage;
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutParams {
    /// Cut only when height / width exceeds this.
    pub aspect_trigger: f64,
    /// Rows with energy strictly below this count as gap rows.
    pub gap_energy_threshold: f64,
    pub min_gap_rows: usize,
    pub min_segment_height: usize,
}

impl Default for CutParams {
    fn default() -> Self {
        CutParams {
            aspect_trigger: 3.0,
            gap_energy_threshold: 2.0,
            min_gap_rows: 8,
            min_segment_height: 32,
        }
    }
}

impl CutParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        let ok = self.aspect_trigger > 0.0
            && self.gap_energy_threshold > 0.0
            && self.min_gap_rows >= 1
            && self.min_segment_height >= 1;
        if ok {
            Ok(())
        } else {
            Err(IngestError::InvalidParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Pending,
    Kept,
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TextArea,
    BlockCount,
    BannedPhrase,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::TextArea => "text_area",
            DropReason::BlockCount => "block_count",
            DropReason::BannedPhrase => "banned_phrase",
        }
    }
}

/// A horizontal slice of a source image with its OCR blocks in piece
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePiece {
    pub image: RawImage,
    /// Half-open row range in the source image.
    pub source_rows: (usize, usize),
    pub ocr: Vec<OcrBlock>,
    pub verdict: Verdict,
}

/// Integer numerators of the row energies:
/// `sum[r] = Σ_x,c |p(r+1) - p(r)|`, with the last row repeating the one
/// before it. Divide by `width * channels` for the mean.
pub fn row_gradient_sums(img: &RawImage) -> Result<Vec<u64>, IngestError> {
    let h = img.height();
    if h < 2 {
        return Err(IngestError::DegenerateImage(h));
    }
    let mut sums: Vec<u64> = (0..h - 1)
        .map(|r| {
            img.row(r)
                .iter()
                .zip(img.row(r + 1))
                .map(|(&a, &b)| a.abs_diff(b) as u64)
                .sum()
        })
        .collect();
    sums.push(sums[h - 2]);
    Ok(sums)
}

/// Per-row edge energy; length equals the image height.
pub fn row_energy(img: &RawImage) -> Result<Vec<f64>, IngestError> {
    let denom = (img.width() * img.channels()) as f64;
    Ok(row_gradient_sums(img)?
        .into_iter()
        .map(|s| s as f64 / denom)
        .collect())
}

/// Maximal runs `[start, end)` of at least `min_len` rows with energy below
/// `threshold`.
pub fn low_energy_runs(energy: &[f64], threshold: f64, min_len: usize) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (r, &e) in energy.iter().enumerate() {
        match (e < threshold, start) {
            (true, None) => start = Some(r),
            (false, Some(s)) => {
                if r - s >= min_len {
                    runs.push((s, r));
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if energy.len() - s >= min_len {
            runs.push((s, energy.len()));
        }
    }
    runs
}

/// Row boundaries of the pieces `cut_long_image` would produce, as
/// half-open ranges tiling `[0, height)`.
pub fn plan_cuts(img: &RawImage, p: &CutParams) -> Result<Vec<(usize, usize)>, IngestError> {
    p.validate()?;
    let h = img.height();
    if h < 2 {
        return Err(IngestError::DegenerateImage(h));
    }
    if (h as f64) / (img.width() as f64) <= p.aspect_trigger {
        return Ok(vec![(0, h)]);
    }
    let energy = row_energy(img)?;
    let mut bounds = vec![0];
    for (s, e) in low_energy_runs(&energy, p.gap_energy_threshold, p.min_gap_rows) {
        let mid = s + (e - s) / 2;
        if mid > 0 && mid < h && mid > *bounds.last().unwrap() {
            bounds.push(mid);
        }
    }
    bounds.push(h);
    let mut ranges: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1])).collect();
    merge_short(&mut ranges, p.min_segment_height);
    Ok(ranges)
}

/// Folds ranges shorter than `min_height` into their predecessor (the first
/// range folds into its successor).
fn merge_short(ranges: &mut Vec<(usize, usize)>, min_height: usize) {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(ranges.len());
    for &(s, e) in ranges.iter() {
        match out.last_mut() {
            Some(last) if e - s < min_height => last.1 = e,
            _ => out.push((s, e)),
        }
    }
    if out.len() > 1 && out[0].1 - out[0].0 < min_height {
        let first = out.remove(0);
        out[0].0 = first.0;
    }
    *ranges = out;
}

/// Splits an overlong image at the middles of low-energy row runs. OCR
/// blocks are assigned to every piece they intersect, clipped to it and
/// shifted into piece coordinates.
pub fn cut_long_image(
    img: &RawImage,
    ocr: &[OcrBlock],
    p: &CutParams,
) -> Result<Vec<ImagePiece>, IngestError> {
    Ok(plan_cuts(img, p)?
        .into_iter()
        .map(|(s, e)| ImagePiece {
            image: img.crop_rows(s, e),
            source_rows: (s, e),
            ocr: ocr.iter().filter_map(|b| b.clip_to_rows(s, e)).collect(),
            verdict: Verdict::Pending,
        })
        .collect())
}

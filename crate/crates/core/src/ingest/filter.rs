use serde::{Deserialize, Serialize};

use super::cut::{DropReason, ImagePiece, Verdict};
use super::IngestError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub max_text_area_ratio: f64,
    pub max_block_count: usize,
    /// Promotional or time-limited markers, matched as substrings.
    pub banned_phrases: Vec<String>,
}

impl Default for FilterParams {
    fn default() -> Self {
        FilterParams {
            max_text_area_ratio: 0.5,
            max_block_count: 10,
            banned_phrases: Vec::new(),
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), IngestError> {
        if (0.0..=1.0).contains(&self.max_text_area_ratio) {
            Ok(())
        } else {
            Err(IngestError::InvalidParams(format!(
                "max_text_area_ratio {} not in [0, 1]",
                self.max_text_area_ratio
            )))
        }
    }
}

/// First failing rule in the order text area, block count, banned phrase.
pub fn judge(piece: &ImagePiece, f: &FilterParams) -> Verdict {
    let area = (piece.image.width() * piece.image.height()) as f64;
    let text_area: usize = piece.ocr.iter().map(|b| b.area()).sum();
    if text_area as f64 / area > f.max_text_area_ratio {
        return Verdict::Dropped(DropReason::TextArea);
    }
    if piece.ocr.len() > f.max_block_count {
        return Verdict::Dropped(DropReason::BlockCount);
    }
    let banned = piece.ocr.iter().any(|b| {
        f.banned_phrases
            .iter()
            .any(|p| !p.is_empty() && b.text.contains(p.as_str()))
    });
    if banned {
        return Verdict::Dropped(DropReason::BannedPhrase);
    }
    Verdict::Kept
}

pub fn filter_noise(mut piece: ImagePiece, f: &FilterParams) -> ImagePiece {
    piece.verdict = judge(&piece, f);
    piece
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Positioned OCR text. Coordinates are pixels relative to the owning image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrBlock {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub text: String,
}

impl OcrBlock {
    pub fn new(x: usize, y: usize, w: usize, h: usize, text: impl Into<String>) -> Self {
        OcrBlock {
            x,
            y,
            w,
            h,
            text: text.into(),
        }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn check(&self, width: usize, height: usize) -> Result<(), IngestError> {
        if self.text.is_empty() {
            return Err(IngestError::InvalidOcr("empty text".into()));
        }
        if self.w == 0 || self.h == 0 || self.x + self.w > width || self.y + self.h > height {
            return Err(IngestError::InvalidOcr(format!(
                "bbox ({}, {}, {}, {}) outside {width}x{height}",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    /// Portion of this block inside rows `start..end`, in coordinates relative
    /// to `start`. `None` when the block does not intersect the range.
    pub fn clip_to_rows(&self, start: usize, end: usize) -> Option<OcrBlock> {
        let top = self.y.max(start);
        let bottom = (self.y + self.h).min(end);
        (top < bottom).then(|| OcrBlock {
            y: top - start,
            h: bottom - top,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrSidecar {
    pub blocks: Vec<OcrBlock>,
}

/// `<image>.ocr.json` next to `image`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut name = image.file_name().unwrap_or_default().to_os_string();
    name.push(".ocr.json");
    image.with_file_name(name)
}

/// Loads the sidecar for `image`; a missing sidecar means no text.
pub fn load_sidecar(image: &Path) -> Result<Vec<OcrBlock>, IngestError> {
    let path = sidecar_path(image);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| IngestError::Io(e.to_string()))?;
    let sidecar: OcrSidecar = serde_json::from_str(&text)
        .map_err(|e| IngestError::InvalidOcr(format!("{}: {e}", path.display())))?;
    Ok(sidecar.blocks)
}

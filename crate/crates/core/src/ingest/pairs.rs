use super::cut::{ImagePiece, Verdict};
use super::raster::RawImage;

/// OCR texts in reading order: top-to-bottom, then left-to-right.
pub fn reading_order_text(piece: &ImagePiece) -> String {
    let mut blocks: Vec<_> = piece.ocr.iter().collect();
    blocks.sort_by_key(|b| (b.y, b.x));
    blocks
        .iter()
        .map(|b| b.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Image/sentence pairs from kept pieces that carry text, in input order.
pub fn build_pairs<'a>(pieces: impl IntoIterator<Item = &'a ImagePiece>) -> Vec<(RawImage, String)> {
    pieces
        .into_iter()
        .filter(|p| p.verdict == Verdict::Kept && !p.ocr.is_empty())
        .map(|p| (p.image.clone(), reading_order_text(p)))
        .collect()
}

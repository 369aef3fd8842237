use std::path::Path;

use mkg_core::ingest::{read_pairs, run_pipeline, FilterParams, IngestParams, OcrBlock, RawImage};

/// Three textured bands split by uniform gaps, with one OCR block per band.
fn write_long_image(dir: &Path, name: &str, texts: [&str; 3]) {
    let width = 24;
    let mut px = Vec::new();
    let mut blocks = Vec::new();
    let mut state = 0x2545_f491_u32;
    for (b, text) in texts.iter().enumerate() {
        let top = px.len() / width;
        for _ in 0..60 * width {
            state ^= state << 13;
            state ^= state >> 17;
            state ^= state << 5;
            px.push((state >> 24) as u8);
        }
        blocks.push(OcrBlock::new(1, top + 10, 12, 6, *text));
        if b < 2 {
            px.extend(std::iter::repeat_n(128u8, 20 * width));
        }
    }
    let height = px.len() / width;
    let path = dir.join(name);
    RawImage::new(width, height, 1, px).unwrap().write_pnm(&path).unwrap();
    let sidecar = serde_json::json!({ "blocks": blocks });
    std::fs::write(dir.join(format!("{name}.ocr.json")), sidecar.to_string()).unwrap();
}

#[test]
fn pipeline_writes_pieces_and_pairs_relative_to_output() {
    let src = tempfile::tempdir().unwrap();
    write_long_image(src.path(), "a.pgm", ["纯棉面料", "限时秒杀", "尺码表"]);
    write_long_image(src.path(), "b.pgm", ["透气", "舒适", "包邮"]);
    let out = tempfile::tempdir().unwrap();
    let pairs_path = out.path().join("nested/pairs.jsonl");
    let params = IngestParams {
        filter: FilterParams {
            banned_phrases: vec!["秒杀".into()],
            ..FilterParams::default()
        },
        ..IngestParams::default()
    };
    let report = run_pipeline(src.path(), &params, &pairs_path).unwrap();
    assert_eq!((report.images, report.pieces), (2, 6));
    assert_eq!((report.kept, report.dropped_banned_phrase), (5, 1));
    assert_eq!(report.pairs, 5);

    let pairs = read_pairs(&pairs_path).unwrap();
    let texts: Vec<&str> = pairs.iter().map(|p| p.text.as_str()).collect();
    assert_eq!(texts, ["纯棉面料", "尺码表", "透气", "舒适", "包邮"]);
    for p in &pairs {
        let piece = RawImage::read_pnm(pairs_path.parent().unwrap().join(&p.image)).unwrap();
        assert_eq!(piece.width(), 24);
        assert!(!p.image.contains('/'), "{}", p.image);
    }
}

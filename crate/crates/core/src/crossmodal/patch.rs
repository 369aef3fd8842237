use ndarray::Array2;

use super::ModelError;
use crate::ingest::RawImage;
use crate::Scalar;

/// Flattened image patches in raster order over the patch grid; each row is
/// one `P x P x C` block flattened row-major with channels innermost, scaled
/// to `[0, 1]`. The encoder prepends its own CLS slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSequence<T> {
    pub patches: Array2<T>,
    /// Indexes into `patches` rows.
    pub mask_positions: Vec<usize>,
}

impl<T: Scalar> PatchSequence<T> {
    pub fn len(&self) -> usize {
        self.patches.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.nrows() == 0
    }

    pub fn with_mask(mut self, positions: Vec<usize>) -> Self {
        self.mask_positions = positions;
        self
    }
}

pub fn patchify<T: Scalar>(img: &RawImage, p: usize) -> Result<PatchSequence<T>, ModelError> {
    let (h, w, c) = (img.height(), img.width(), img.channels());
    if p == 0 || h % p != 0 || w % p != 0 {
        return Err(ModelError::IndivisibleDimensions {
            height: h,
            width: w,
            patch: p,
        });
    }
    let (gh, gw) = (h / p, w / p);
    let dim = p * p * c;
    let scale = T::of(1.0 / 255.0);
    let px = img.pixels();
    let mut patches = Array2::zeros((gh * gw, dim));
    for gy in 0..gh {
        for gx in 0..gw {
            let mut row = patches.row_mut(gy * gw + gx);
            let mut k = 0;
            for dy in 0..p {
                let start = ((gy * p + dy) * w + gx * p) * c;
                for &v in &px[start..start + p * c] {
                    row[k] = T::of(v as f64) * scale;
                    k += 1;
                }
            }
        }
    }
    Ok(PatchSequence {
        patches,
        mask_positions: Vec::new(),
    })
}

/// Inverse of [`patchify`], rounding back to bytes.
pub fn unpatchify<T: Scalar>(seq: &PatchSequence<T>, height: usize, width: usize, channels: usize, p: usize) -> RawImage {
    let gw = width / p;
    let mut px = vec![0u8; height * width * channels];
    for (n, row) in seq.patches.rows().into_iter().enumerate() {
        let (gy, gx) = (n / gw, n % gw);
        let mut k = 0;
        for dy in 0..p {
            let start = ((gy * p + dy) * width + gx * p) * channels;
            for v in &mut px[start..start + p * channels] {
                *v = (row[k].as_f64() * 255.0).round().clamp(0.0, 255.0) as u8;
                k += 1;
            }
        }
    }
    RawImage::new(width, height, channels, px).expect("dimensions come from a valid sequence")
}

/// Nearest-neighbour resample to `width x height` with `channels` channels
/// (RGB to gray by channel mean, gray to RGB by replication).
pub fn fit_image(img: &RawImage, width: usize, height: usize, channels: usize) -> RawImage {
    let src_c = img.channels();
    let mut px = Vec::with_capacity(width * height * channels);
    for y in 0..height {
        let sy = y * img.height() / height;
        for x in 0..width {
            let sx = x * img.width() / width;
            match (src_c, channels) {
                (a, b) if a == b => (0..b).for_each(|c| px.push(img.get(sx, sy, c))),
                (3, 1) => {
                    let sum: u32 = (0..3).map(|c| img.get(sx, sy, c) as u32).sum();
                    px.push(((sum + 1) / 3) as u8);
                }
                _ => (0..channels).for_each(|_| px.push(img.get(sx, sy, 0))),
            }
        }
    }
    RawImage::new(width, height, channels, px).expect("target dimensions are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vit_base_shape() {
        let img = RawImage::filled(224, 224, 3, 255).unwrap();
        let seq = patchify::<f32>(&img, 16).unwrap();
        assert_eq!(seq.patches.dim(), (196, 768));
        assert!(seq.patches.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn single_patch_is_whole_image() {
        let img = RawImage::new(2, 2, 3, (0..12).map(|v| v * 20).collect()).unwrap();
        let seq = patchify::<f64>(&img, 2).unwrap();
        assert_eq!(seq.len(), 1);
        let expect: Vec<f64> = img.pixels().iter().map(|&v| v as f64 / 255.0).collect();
        for (a, b) in seq.patches.row(0).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn raster_order_4x4() {
        let img = RawImage::new(4, 4, 1, (0..16).collect()).unwrap();
        let seq = patchify::<f64>(&img, 2).unwrap();
        let bytes: Vec<Vec<u8>> = seq
            .patches
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| (v * 255.0).round() as u8).collect())
            .collect();
        assert_eq!(bytes, vec![vec![0, 1, 4, 5], vec![2, 3, 6, 7], vec![8, 9, 12, 13], vec![10, 11, 14, 15]]);
        assert_eq!(unpatchify(&seq, 4, 4, 1, 2), img);
    }

    #[test]
    fn indivisible() {
        let img = RawImage::filled(10, 8, 1, 0).unwrap();
        assert!(matches!(patchify::<f32>(&img, 4), Err(ModelError::IndivisibleDimensions { .. })));
    }

    #[test]
    fn fit_converts_channels() {
        let rgb = RawImage::new(1, 1, 3, vec![30, 60, 90]).unwrap();
        assert_eq!(fit_image(&rgb, 2, 2, 1).pixels(), &[60, 60, 60, 60]);
        let gray = RawImage::new(1, 1, 1, vec![7]).unwrap();
        assert_eq!(fit_image(&gray, 1, 1, 3).pixels(), &[7, 7, 7]);
    }
}

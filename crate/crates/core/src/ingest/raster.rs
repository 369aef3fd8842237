use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use super::IngestError;

/// Row-major 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidImage(format!("zero dimension {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(IngestError::InvalidImage(format!("{channels} channels")));
        }
        if pixels.len() != width * height * channels {
            return Err(IngestError::InvalidImage(format!(
                "expected {} bytes, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, IngestError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn row(&self, r: usize) -> &[u8] {
        let stride = self.width * self.channels;
        &self.pixels[r * stride..(r + 1) * stride]
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    /// Copy of rows `start..end`.
    pub fn crop_rows(&self, start: usize, end: usize) -> RawImage {
        assert!(start < end && end <= self.height);
        let stride = self.width * self.channels;
        RawImage {
            width: self.width,
            height: end - start,
            channels: self.channels,
            pixels: self.pixels[start * stride..end * stride].to_vec(),
        }
    }

    /// Reads a binary PGM (P5) or PPM (P6) file with maxval 255.
    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| IngestError::Decode(path.display().to_string(), e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(buf) => Self::new(w, h, 1, buf.into_raw()),
            DynamicImage::ImageRgb8(buf) => Self::new(w, h, 3, buf.into_raw()),
            other => Err(IngestError::Decode(
                path.display().to_string(),
                format!("unsupported pixel layout {:?}", other.color()),
            )),
        }
    }

    /// Writes binary PGM (P5) for gray images, PPM (P6) for RGB.
    pub fn write_pnm(&self, path: impl AsRef<Path>) -> Result<(), IngestError> {
        let path = path.as_ref();
        let err = |e: String| IngestError::Decode(path.display().to_string(), e);
        let (subtype, color) = if self.channels == 1 {
            (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8)
        } else {
            (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8)
        };
        let file = File::create(path).map_err(|e| err(e.to_string()))?;
        let mut writer = BufWriter::new(file);
        PnmEncoder::new(&mut writer)
            .with_subtype(subtype)
            .write_image(&self.pixels, self.width as u32, self.height as u32, color)
            .map_err(|e| err(e.to_string()))?;
        writer.flush().map_err(|e| err(e.to_string()))
    }

    /// Conventional extension for this channel count.
    pub fn pnm_extension(&self) -> &'static str {
        if self.channels == 1 {
            "pgm"
        } else {
            "ppm"
        }
    }
}

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "val" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(()),
        }
    }
}

/// Provenance of a tile: which patient, slide and site it came from, its
/// binary class label and its dataset split.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TileMeta {
    pub tile_id: String,
    pub patient_id: String,
    pub slide_id: String,
    pub domain_id: String,
    pub label: u8,
    pub split: Split,
}

/// An RGB tile with channel values in `[0, 1]`, stored row-major and
/// channel-interleaved (`(y * width + x) * 3 + c`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTile {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
    meta: TileMeta,
}

impl ImageTile {
    /// Builds a tile from interleaved RGB values, clamping them into `[0, 1]`.
    pub fn new(width: usize, height: usize, mut pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension);
        }
        let expected = width * height * 3;
        if pixels.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        if let Some(i) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinitePixel(i));
        }
        for v in &mut pixels {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            pixels,
            meta: TileMeta::default(),
        })
    }

    /// Builds a tile by evaluating `f(x, y, channel)`; non-finite results become 0.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    let v = f(x, y, c);
                    pixels.push(if v.is_finite() { v } else { 0.0 });
                }
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, vec![value; width * height * 3])
    }

    /// Wraps values the caller has already clamped; used on internal hot paths.
    pub(crate) fn from_clamped(width: usize, height: usize, pixels: Vec<f32>, meta: TileMeta) -> Self {
        debug_assert_eq!(pixels.len(), width * height * 3);
        debug_assert!(pixels.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            pixels,
            meta,
        }
    }

    /// Clamps `values` into `[0, 1]` (NaN maps to 0) and keeps this tile's metadata.
    pub(crate) fn with_values(&self, width: usize, height: usize, values: impl IntoIterator<Item = f64>) -> Self {
        let pixels: Vec<f32> = values.into_iter().map(clamp_unit).collect();
        Self::from_clamped(width, height, pixels, self.meta.clone())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.pixels[(y * self.width + x) * 3 + c]
    }

    pub fn meta(&self) -> &TileMeta {
        &self.meta
    }

    pub fn set_meta(&mut self, meta: TileMeta) {
        self.meta = meta;
    }

    pub fn with_meta(mut self, meta: TileMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Converts 8-bit RGB samples with `v / 255`.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::new(width, height, data.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// Quantizes with `round(v * 255)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Reads an 8-bit (or 16-bit, stripped to 8) PNG. Gray images are
    /// replicated to RGB and alpha is discarded.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decode_err = |message: String| Error::PngDecode {
            path: path.to_path_buf(),
            message,
        };
        let file = File::open(path).map_err(io_err(path))?;
        let mut decoder = png::Decoder::new(BufReader::new(file));
        decoder.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = decoder.read_info().map_err(|e| decode_err(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| decode_err("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| decode_err(e.to_string()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            png::ColorType::Indexed => return Err(decode_err("unexpanded palette".into())),
        };
        let mut rgb = Vec::with_capacity(w * h * 3);
        for row in buf.chunks(info.line_size).take(h) {
            for px in row[..w * channels].chunks_exact(channels) {
                match channels {
                    1 | 2 => rgb.extend_from_slice(&[px[0]; 3]),
                    _ => rgb.extend_from_slice(&px[..3]),
                }
            }
        }
        Self::from_rgb8(w, h, &rgb)
    }

    /// Writes an 8-bit RGB PNG with pinned compression and filter settings so
    /// identical tiles always produce identical bytes.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let encode_err = |e: png::EncodingError| Error::PngEncode {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::create(path).map_err(io_err(path))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder.set_compression(png::Compression::Balanced);
        encoder.set_filter(png::Filter::Paeth);
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(&self.to_rgb8()).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
        Ok(())
    }

    pub fn mean_abs_diff(&self, other: &ImageTile) -> f64 {
        assert_eq!(self.pixels.len(), other.pixels.len(), "tile sizes differ");
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .sum();
        sum / self.pixels.len() as f64
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0) as f32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_clamps_and_validates() {
        let t = ImageTile::new(1, 1, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(t.pixels(), &[0.0, 0.5, 1.0]);
        assert!(matches!(ImageTile::new(0, 1, vec![]), Err(Error::ZeroDimension)));
        assert!(matches!(
            ImageTile::new(2, 1, vec![0.0; 3]),
            Err(Error::DimensionMismatch { expected: 6, actual: 3 })
        ));
        assert!(matches!(
            ImageTile::new(1, 1, vec![0.0, f32::NAN, 0.0]),
            Err(Error::NonFinitePixel(1))
        ));
    }

    #[test]
    fn png_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let data: Vec<u8> = (0..7 * 5 * 3).map(|i| (i * 37 % 256) as u8).collect();
        let t = ImageTile::from_rgb8(7, 5, &data).unwrap();
        t.save_png(&path).unwrap();
        let back = ImageTile::load_png(&path).unwrap();
        assert_eq!(back.width(), 7);
        assert_eq!(back.height(), 5);
        assert_eq!(back.to_rgb8(), data);
        assert_eq!(back.pixels(), t.pixels());
    }

    #[test]
    fn png_bytes_are_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let t = ImageTile::from_fn(16, 16, |x, y, c| ((x * 3 + y * 5 + c) % 17) as f32 / 16.0).unwrap();
        t.save_png(dir.path().join("a.png")).unwrap();
        t.save_png(dir.path().join("b.png")).unwrap();
        let a = std::fs::read(dir.path().join("a.png")).unwrap();
        let b = std::fs::read(dir.path().join("b.png")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_parsing() {
        assert_eq!("TEST".parse::<Split>(), Ok(Split::Test));
        assert_eq!("val".parse::<Split>(), Ok(Split::Valid));
        assert!("holdout".parse::<Split>().is_err());
    }
}

//! Pixel containers and histogram views.
//!
//! Every pipeline stage works on one of four value types: [`RgbImage`] and
//! [`GrayImage`] hold 8-bit row-major pixel buffers, [`Histogram`] counts
//! occurrences of each of the 256 gray levels, and [`Pmf`] is the histogram
//! normalized to a probability mass function. All four are immutable after
//! construction and cheap to clone relative to the work done on them.

use thiserror::Error;

pub mod netpbm;

pub use netpbm::{decode_netpbm, encode_pgm, encode_ppm, NetpbmError, NetpbmImage};

/// Number of representable gray levels (8-bit, maxval 255).
pub const LEVELS: usize = 256;

/// RGB-to-gray channel weights.
const WEIGHT_R: f64 = 0.2989;
const WEIGHT_G: f64 = 0.587;
const WEIGHT_B: f64 = 0.1141;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("pixel buffer length {got} does not match {width}x{height} ({expected} expected)")]
    BufferMismatch {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },
    #[error("histogram is empty (total count 0)")]
    EmptyHistogram,
    #[error("probabilities must be non-negative and sum to 1 (sum = {sum})")]
    InvalidPmf { sum: f64 },
}

/// 8-bit RGB image, row-major from the top-left corner, three interleaved
/// channel bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(RasterError::BufferMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Interleaved RGB bytes, `3 * width * height` long.
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// The (R, G, B) triple at column `x`, row `y`.
    pub fn get(&self, x: u32, y: u32) -> (u8, u8, u8) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])
    }
}

/// 8-bit grayscale image, row-major from the top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyDimensions { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::BufferMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Per-level pixel counts over the 256 gray levels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: [u64; LEVELS],
    total: u64,
}

impl Histogram {
    pub fn from_counts(counts: [u64; LEVELS]) -> Self {
        let total = counts.iter().sum();
        Self { counts, total }
    }

    pub fn counts(&self) -> &[u64; LEVELS] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// Probability mass function over the 256 gray levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    probs: [f64; LEVELS],
}

impl Pmf {
    /// Builds a pmf from raw probabilities. The sum must be 1 within 1e-9
    /// and every entry non-negative.
    pub fn from_probs(probs: [f64; LEVELS]) -> Result<Self, RasterError> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(RasterError::InvalidPmf { sum });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64; LEVELS] {
        &self.probs
    }
}

/// Rounds half-up to the nearest integer and clamps into `[0, 255]`.
pub(crate) fn round_clamp_u8(v: f64) -> u8 {
    let r = (v + 0.5).floor();
    if r <= 0.0 {
        0
    } else if r >= 255.0 {
        255
    } else {
        r as u8
    }
}

/// Weighted grayscale conversion, `G' = 0.2989*R + 0.587*G + 0.1141*B`
/// rounded half-up per pixel.
pub fn to_grayscale(image: &RgbImage) -> GrayImage {
    let pixels = image
        .pixels
        .chunks_exact(3)
        .map(|px| {
            let v = WEIGHT_R * f64::from(px[0]) + WEIGHT_G * f64::from(px[1])
                + WEIGHT_B * f64::from(px[2]);
            round_clamp_u8(v)
        })
        .collect();
    GrayImage {
        width: image.width,
        height: image.height,
        pixels,
    }
}

/// Tallies pixel values into per-level counts. The total always equals
/// `width * height`.
pub fn compute_histogram(image: &GrayImage) -> Histogram {
    let mut counts = [0u64; LEVELS];
    for &p in &image.pixels {
        counts[p as usize] += 1;
    }
    Histogram {
        counts,
        total: image.pixels.len() as u64,
    }
}

/// Normalizes a histogram into a pmf: `probs[i] = counts[i] / total`.
///
/// Fails on an empty histogram, which in the pipeline signals a degenerate
/// (zero-area) crop.
pub fn to_pmf(hist: &Histogram) -> Result<Pmf, RasterError> {
    if hist.total == 0 {
        return Err(RasterError::EmptyHistogram);
    }
    let total = hist.total as f64;
    let mut probs = [0.0f64; LEVELS];
    for (p, &c) in probs.iter_mut().zip(hist.counts.iter()) {
        *p = c as f64 / total;
    }
    Ok(Pmf { probs })
}

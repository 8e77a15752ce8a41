//! Contrast enhancement: histogram equalization, CLAHE, and the hybrid
//! CLAHE-then-HE pipeline.
//!
//! CLAHE partitions the image into a tile grid, clips each tile histogram at
//! a limit derived from the tile area and the clip factor, redistributes the
//! clipped mass uniformly over all bins, builds a per-tile equalization
//! transfer, and blends the transfers bilinearly between tile centers.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::raster::{compute_histogram, round_clamp_u8, GrayImage, Histogram, LEVELS};

#[derive(Debug, Error, PartialEq)]
pub enum EnhanceError {
    #[error("tile pixel count must be >= 1")]
    EmptyTile,
    #[error("level count must be {LEVELS}, got {0}")]
    BadLevelCount(usize),
    #[error("clip factor must be in [1, 100], got {0}")]
    BadClipFactor(f64),
    #[error("maximum slope must be >= 1, got {0}")]
    BadMaxSlope(f64),
    #[error("tile grid must be at least 1x1")]
    BadTileGrid,
}

/// CLAHE parameters. `alpha` is the clip factor in percent and `s_max` the
/// maximum slope the transfer function may reach.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheConfig {
    pub tiles_x: u32,
    pub tiles_y: u32,
    pub alpha: f64,
    pub s_max: f64,
}

impl Default for ClaheConfig {
    fn default() -> Self {
        Self {
            tiles_x: 8,
            tiles_y: 8,
            alpha: 40.0,
            s_max: 4.0,
        }
    }
}

impl ClaheConfig {
    pub fn validate(&self) -> Result<(), EnhanceError> {
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(EnhanceError::BadTileGrid);
        }
        if !(1.0..=100.0).contains(&self.alpha) {
            return Err(EnhanceError::BadClipFactor(self.alpha));
        }
        if !(self.s_max >= 1.0) {
            return Err(EnhanceError::BadMaxSlope(self.s_max));
        }
        Ok(())
    }
}

/// Materialized transfer function: one output level per input level,
/// monotone non-decreasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMap {
    map: [u8; LEVELS],
}

impl LevelMap {
    /// Wraps a raw table, rejecting non-monotone input.
    pub fn new(map: [u8; LEVELS]) -> Option<Self> {
        if map.windows(2).any(|w| w[1] < w[0]) {
            return None;
        }
        Some(Self { map })
    }

    pub fn as_array(&self) -> &[u8; LEVELS] {
        &self.map
    }

    pub fn apply(&self, image: &GrayImage) -> GrayImage {
        let pixels = image.pixels().iter().map(|&p| self.map[p as usize]).collect();
        GrayImage::new(image.width(), image.height(), pixels)
            .expect("dimensions unchanged by level mapping")
    }
}

/// Equalization transfer from per-level counts: `map[k]` is `255 * CDF(k)`
/// rounded half-up.
fn transfer_from_counts(counts: &[u64; LEVELS], total: u64) -> LevelMap {
    debug_assert!(total > 0);
    let mut map = [0u8; LEVELS];
    let mut cum = 0u64;
    for (k, &c) in counts.iter().enumerate() {
        cum += c;
        map[k] = round_clamp_u8(255.0 * (cum as f64 / total as f64));
    }
    LevelMap { map }
}

/// The global histogram-equalization transfer for an image.
pub fn he_transfer(hist: &Histogram) -> LevelMap {
    transfer_from_counts(hist.counts(), hist.total())
}

/// Global histogram equalization.
pub fn equalize_hist(image: &GrayImage) -> GrayImage {
    he_transfer(&compute_histogram(image)).apply(image)
}

/// Clip limit `beta = (M/N) * (1 + (alpha/100) * (s_max - 1))` for a tile of
/// `tile_pixels` over `levels` gray levels.
///
/// The integer ceiling actually applied to histogram bins is
/// `max(1, floor(beta))`.
pub fn clip_limit(
    tile_pixels: u64,
    levels: usize,
    alpha: f64,
    s_max: f64,
) -> Result<f64, EnhanceError> {
    if tile_pixels == 0 {
        return Err(EnhanceError::EmptyTile);
    }
    if levels != LEVELS {
        return Err(EnhanceError::BadLevelCount(levels));
    }
    if !(1.0..=100.0).contains(&alpha) {
        return Err(EnhanceError::BadClipFactor(alpha));
    }
    if !(s_max >= 1.0) {
        return Err(EnhanceError::BadMaxSlope(s_max));
    }
    Ok((tile_pixels as f64 / levels as f64) * (1.0 + (alpha / 100.0) * (s_max - 1.0)))
}

/// Integer bin ceiling derived from [`clip_limit`].
pub fn clip_ceiling(beta: f64) -> u64 {
    (beta.floor() as u64).max(1)
}

/// Caps every bin at `ceiling`, returning the clipped bins and the total
/// mass removed.
pub fn clip_histogram(counts: &[u64; LEVELS], ceiling: u64) -> ([u64; LEVELS], u64) {
    let mut clipped = *counts;
    let mut excess = 0u64;
    for bin in clipped.iter_mut() {
        if *bin > ceiling {
            excess += *bin - ceiling;
            *bin = ceiling;
        }
    }
    (clipped, excess)
}

/// Spreads `excess` uniformly over all bins in a single pass: every bin gets
/// `excess / 256`, and the first `excess % 256` bins one more. Total mass is
/// conserved exactly.
pub fn redistribute(counts: &[u64; LEVELS], excess: u64) -> [u64; LEVELS] {
    let share = excess / LEVELS as u64;
    let remainder = (excess % LEVELS as u64) as usize;
    let mut out = *counts;
    for (i, bin) in out.iter_mut().enumerate() {
        *bin += share + u64::from(i < remainder);
    }
    out
}

/// Reflect-101 coordinate fold, mapping an extended coordinate back into
/// `[0, len)`. Keeps every tile the same size regardless of divisibility,
/// which in turn keeps the transfer of a constant image identical across
/// tiles.
fn reflect101(coord: u32, len: u32) -> u32 {
    if len == 1 {
        return 0;
    }
    let period = 2 * len - 2;
    let r = coord % period;
    if r >= len {
        period - r
    } else {
        r
    }
}

/// For a pixel coordinate, the two neighboring tile indices along one axis
/// and the blend weight toward the second. Pixels outside the outermost tile
/// centers use the edge tile alone.
fn axis_blend(centers: &[f64], coord: f64) -> (usize, usize, f64) {
    let last = centers.len() - 1;
    if coord <= centers[0] {
        return (0, 0, 0.0);
    }
    if coord >= centers[last] {
        return (last, last, 0.0);
    }
    let hi = centers.partition_point(|&c| c <= coord);
    let lo = hi - 1;
    let span = centers[hi] - centers[lo];
    (lo, hi, (coord - centers[lo]) / span)
}

/// Contrast-limited adaptive histogram equalization.
///
/// The grid shrinks to `min(tiles, dimension)` so every tile holds at least
/// one pixel; dimensions that do not divide evenly are handled by
/// reflect-extending tile histograms, so every tile sees the same pixel
/// count. Output is deterministic: tiles are processed and blended by
/// position.
pub fn clahe(image: &GrayImage, cfg: &ClaheConfig) -> Result<GrayImage, EnhanceError> {
    cfg.validate()?;
    let tiles_x = cfg.tiles_x.min(image.width());
    let tiles_y = cfg.tiles_y.min(image.height());
    // Uniform tile size over a reflect-extended image.
    let tile_w = image.width().div_ceil(tiles_x);
    let tile_h = image.height().div_ceil(tiles_y);
    let area = u64::from(tile_w) * u64::from(tile_h);
    let beta = clip_limit(area, LEVELS, cfg.alpha, cfg.s_max)?;
    let ceiling = clip_ceiling(beta);

    let mut maps: Vec<Vec<LevelMap>> = Vec::with_capacity(tiles_y as usize);
    for ty in 0..tiles_y {
        let mut row = Vec::with_capacity(tiles_x as usize);
        for tx in 0..tiles_x {
            let mut counts = [0u64; LEVELS];
            for y in ty * tile_h..(ty + 1) * tile_h {
                let sy = reflect101(y, image.height());
                for x in tx * tile_w..(tx + 1) * tile_w {
                    let sx = reflect101(x, image.width());
                    counts[image.get(sx, sy) as usize] += 1;
                }
            }
            let (clipped, excess) = clip_histogram(&counts, ceiling);
            let spread = redistribute(&clipped, excess);
            row.push(transfer_from_counts(&spread, area));
        }
        maps.push(row);
    }

    let center = |t: u32, size: u32| f64::from(t * size) + f64::from(size - 1) / 2.0;
    let cx: Vec<f64> = (0..tiles_x).map(|t| center(t, tile_w)).collect();
    let cy: Vec<f64> = (0..tiles_y).map(|t| center(t, tile_h)).collect();

    let mut pixels = Vec::with_capacity(image.pixels().len());
    for y in 0..image.height() {
        let (ty0, ty1, wy) = axis_blend(&cy, f64::from(y));
        for x in 0..image.width() {
            let (tx0, tx1, wx) = axis_blend(&cx, f64::from(x));
            let p = image.get(x, y) as usize;
            let top = (1.0 - wx) * f64::from(maps[ty0][tx0].map[p])
                + wx * f64::from(maps[ty0][tx1].map[p]);
            let bottom = (1.0 - wx) * f64::from(maps[ty1][tx0].map[p])
                + wx * f64::from(maps[ty1][tx1].map[p]);
            pixels.push(round_clamp_u8((1.0 - wy) * top + wy * bottom));
        }
    }
    Ok(GrayImage::new(image.width(), image.height(), pixels)
        .expect("dimensions unchanged by clahe"))
}

/// The hybrid enhancement: CLAHE first, then global HE on the result.
pub fn hybrid_clahe_he(image: &GrayImage, cfg: &ClaheConfig) -> Result<GrayImage, EnhanceError> {
    Ok(equalize_hist(&clahe(image, cfg)?))
}

/// Which enhancement the preprocessing stage applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnhanceMode {
    None,
    He,
    Clahe,
    #[default]
    ClaheHe,
}

impl EnhanceMode {
    pub fn apply(self, image: &GrayImage, cfg: &ClaheConfig) -> Result<GrayImage, EnhanceError> {
        match self {
            EnhanceMode::None => Ok(image.clone()),
            EnhanceMode::He => Ok(equalize_hist(image)),
            EnhanceMode::Clahe => clahe(image, cfg),
            EnhanceMode::ClaheHe => hybrid_clahe_he(image, cfg),
        }
    }
}

impl FromStr for EnhanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(EnhanceMode::None),
            "he" => Ok(EnhanceMode::He),
            "clahe" => Ok(EnhanceMode::Clahe),
            "clahe-he" => Ok(EnhanceMode::ClaheHe),
            other => Err(format!("unknown enhance mode: {other}")),
        }
    }
}

impl fmt::Display for EnhanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EnhanceMode::None => "none",
            EnhanceMode::He => "he",
            EnhanceMode::Clahe => "clahe",
            EnhanceMode::ClaheHe => "clahe-he",
        };
        f.write_str(s)
    }
}

//! Deterministic synthetic candling-image generator.
//!
//! Each image is a bright egg-shaped ellipse on a dark background. The
//! interior follows a radial glow profile (strongest at the center, so the
//! object always clears the default segmentation threshold) whose average
//! matches the configured class brightness. Fertile eggs additionally get a
//! dark embryo blob and a few dark vessel strokes. Randomness comes from a
//! ChaCha8 stream seeded per image; normal noise uses the Box-Muller
//! transform, so identical configs reproduce identical bytes on every
//! platform.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::eval::Label;
use crate::pipeline::{DatasetManifest, ManifestEntry};
use crate::raster::{encode_ppm, round_clamp_u8, RgbImage};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Peak-over-mean factor of the radial glow `exp(-3 d^2)`: dividing by its
/// average over the unit disk keeps the interior mean at the configured
/// brightness.
const GLOW_PEAK: f64 = 3.0 / (1.0 - 0.049787068367863944); // 3 / (1 - e^-3)

/// Channel multipliers giving the glow a warm candling tint. Their
/// gray-conversion weight sum is close to 1 so gray values track the
/// configured brightness.
const TINT: [f64; 3] = [1.12, 0.96, 0.55];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub width: u32,
    pub height: u32,
    pub class: Label,
    pub seed: u64,
    /// Mean interior intensity of a fertile egg.
    pub brightness_fertile: u8,
    /// Mean interior intensity of an infertile egg.
    pub brightness_infertile: u8,
    /// Embryo radius as a fraction of the egg minor axis (fertile only).
    pub embryo_radius_frac: f64,
    pub noise_sigma: f64,
    pub background: u8,
}

impl SynthConfig {
    /// Default, well-separated classes.
    pub fn for_class(class: Label, seed: u64) -> Self {
        Self {
            width: 200,
            height: 280,
            class,
            seed,
            brightness_fertile: 180,
            brightness_infertile: 60,
            embryo_radius_frac: 0.15,
            noise_sigma: 8.0,
            background: 10,
        }
    }

    /// Overlapping classes: shrunken brightness gap and heavy noise, for
    /// exercising misclassification paths.
    pub fn hard(class: Label, seed: u64) -> Self {
        Self {
            brightness_fertile: 110,
            brightness_infertile: 88,
            noise_sigma: 30.0,
            ..Self::for_class(class, seed)
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 8 || self.height < 8 {
            return Err(SynthError::InvalidConfig(format!(
                "image {}x{} too small for an egg ellipse (minimum 8x8)",
                self.width, self.height
            )));
        }
        if self.class == Label::Unknown {
            return Err(SynthError::InvalidConfig(
                "class must be fertile or infertile".into(),
            ));
        }
        if !(self.embryo_radius_frac > 0.0 && self.embryo_radius_frac < 1.0) {
            return Err(SynthError::InvalidConfig(format!(
                "embryo radius fraction {} outside (0, 1)",
                self.embryo_radius_frac
            )));
        }
        if self.brightness_fertile <= self.brightness_infertile {
            return Err(SynthError::InvalidConfig(format!(
                "fertile brightness {} must exceed infertile {}",
                self.brightness_fertile, self.brightness_infertile
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SynthError::InvalidConfig("negative noise sigma".into()));
        }
        if self.background >= self.brightness_infertile {
            return Err(SynthError::InvalidConfig(format!(
                "background {} not darker than infertile interior {}",
                self.background, self.brightness_infertile
            )));
        }
        Ok(())
    }
}

/// Box-Muller normal sampler; keeps the second draw of each pair.
struct Gaussian {
    spare: Option<f64>,
}

impl Gaussian {
    fn new() -> Self {
        Self { spare: None }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..=1.0);
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * sin);
        r * cos
    }
}

/// Renders one candling image. Deterministic for a fixed config.
pub fn generate(cfg: &SynthConfig) -> Result<RgbImage, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let w = cfg.width as usize;
    let h = cfg.height as usize;

    // Egg geometry: centered ellipse with jittered axes and position.
    let semi_a = f64::from(cfg.width) * (0.36 + 0.04 * rng.gen::<f64>());
    let semi_b = f64::from(cfg.height) * (0.38 + 0.04 * rng.gen::<f64>());
    let cx = f64::from(cfg.width - 1) / 2.0 + (rng.gen::<f64>() - 0.5) * 0.04 * f64::from(cfg.width);
    let cy =
        f64::from(cfg.height - 1) / 2.0 + (rng.gen::<f64>() - 0.5) * 0.04 * f64::from(cfg.height);
    let minor_semi = semi_a.min(semi_b);

    // Darkening multipliers for embryo and vessels, 1.0 elsewhere.
    let mut shade = vec![1.0f64; w * h];
    if cfg.class == Label::Fertile {
        let ex = cx + (rng.gen::<f64>() - 0.5) * 0.2 * minor_semi;
        let ey = cy + (rng.gen::<f64>() - 0.5) * 0.2 * minor_semi;
        let radius = cfg.embryo_radius_frac * 2.0 * minor_semi;
        stamp_disk(&mut shade, w, h, ex, ey, radius, |r| {
            0.25 + 0.55 * (r / radius).powi(2)
        });

        let vessels = rng.gen_range(2..=4u32);
        for _ in 0..vessels {
            let angle = rng.gen::<f64>() * 2.0 * PI;
            let length = (0.45 + 0.25 * rng.gen::<f64>()) * minor_semi;
            let (dy, dx) = angle.sin_cos();
            let mut t = 0.0;
            while t <= length {
                stamp_disk(&mut shade, w, h, ex + t * dx, ey + t * dy, 1.2, |_| 0.45);
                t += 0.5;
            }
        }
    }

    let mut gauss = Gaussian::new();
    let mut pixels = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let nx = (x as f64 - cx) / semi_a;
            let ny = (y as f64 - cy) / semi_b;
            let d2 = nx * nx + ny * ny;
            let base = if d2 <= 1.0 {
                let brightness = match cfg.class {
                    Label::Fertile => f64::from(cfg.brightness_fertile),
                    _ => f64::from(cfg.brightness_infertile),
                };
                brightness * GLOW_PEAK * (-3.0 * d2).exp() * shade[y * w + x]
            } else {
                f64::from(cfg.background)
            };
            let v = (base + cfg.noise_sigma * gauss.next(&mut rng)).clamp(0.0, 255.0);
            for weight in TINT {
                pixels.push(round_clamp_u8(v * weight));
            }
        }
    }
    Ok(RgbImage::new(cfg.width, cfg.height, pixels).expect("buffer sized to dimensions"))
}

/// Multiplies `shade` by `factor(dist)` over a disk, keeping the darker of
/// existing and new values where strokes overlap.
fn stamp_disk<F: Fn(f64) -> f64>(
    shade: &mut [f64],
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    radius: f64,
    factor: F,
) {
    let x0 = ((cx - radius).floor().max(0.0)) as usize;
    let x1 = ((cx + radius).ceil().min(w as f64 - 1.0)) as usize;
    let y0 = ((cy - radius).floor().max(0.0)) as usize;
    let y1 = ((cy + radius).ceil().min(h as f64 - 1.0)) as usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let r = (dx * dx + dy * dy).sqrt();
            if r <= radius {
                let cell = &mut shade[y * w + x];
                *cell = cell.min(factor(r));
            }
        }
    }
}

/// Writes `n_fertile` + `n_infertile` P6 images plus `manifest.json` into
/// `out_dir`. Image `i` (fertile first, then infertile) uses seed
/// `seed + i`, so datasets are reproducible byte for byte.
pub fn generate_dataset(
    n_fertile: usize,
    n_infertile: usize,
    seed: u64,
    out_dir: &Path,
    hard: bool,
) -> Result<DatasetManifest, SynthError> {
    if n_fertile == 0 || n_infertile == 0 {
        return Err(SynthError::InvalidConfig(
            "need at least one image per class".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let make = |class, seed| {
        if hard {
            SynthConfig::hard(class, seed)
        } else {
            SynthConfig::for_class(class, seed)
        }
    };

    let mut relative = Vec::with_capacity(n_fertile + n_infertile);
    let mut resolved = Vec::with_capacity(n_fertile + n_infertile);
    let classes = [(Label::Fertile, n_fertile), (Label::Infertile, n_infertile)];
    let mut index = 0u64;
    for (label, count) in classes {
        for i in 0..count {
            let cfg = make(label, seed.wrapping_add(index));
            index += 1;
            let image = generate(&cfg)?;
            let name = format!("{label}_{i:04}.ppm");
            let path = out_dir.join(&name);
            fs::write(&path, encode_ppm(&image, true)).map_err(|source| SynthError::Io {
                path: path.clone(),
                source,
            })?;
            relative.push(ManifestEntry {
                path: PathBuf::from(&name),
                label,
            });
            resolved.push(ManifestEntry { path, label });
        }
    }

    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&relative).expect("manifest entries serialize");
    fs::write(&manifest_path, json).map_err(|source| SynthError::Io {
        path: manifest_path,
        source,
    })?;

    Ok(DatasetManifest { entries: resolved })
}

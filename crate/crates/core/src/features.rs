//! First-order statistical features of the gray-level histogram.
//!
//! Five values characterize an image through its pmf alone: mean, entropy
//! (base-2, so the ceiling for 256 levels is 8 bits), variance, skewness and
//! excess kurtosis. Skewness and kurtosis are undefined for a constant image
//! (zero variance), which surfaces as [`FeatureError::DegenerateHistogram`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{compute_histogram, to_pmf, GrayImage, Pmf};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("degenerate histogram: image is constant, skewness/kurtosis undefined")]
    DegenerateHistogram,
}

/// The five first-order statistics in table column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub mean: f64,
    pub entropy: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// CSV / model column order for the five features.
pub const FEATURE_ORDER: [&str; 5] = ["mean", "entropy", "variance", "skewness", "kurtosis"];

impl FeatureVector {
    pub fn to_array(self) -> [f64; 5] {
        [
            self.mean,
            self.entropy,
            self.variance,
            self.skewness,
            self.kurtosis,
        ]
    }
}

/// Mean gray level: `sum(n * p[n])`.
pub fn fos_mean(pmf: &Pmf) -> f64 {
    pmf.probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| n as f64 * p)
        .sum()
}

/// Shannon entropy in bits: `-sum(p[n] * log2 p[n])` with `0 log 0 = 0`.
pub fn fos_entropy(pmf: &Pmf) -> f64 {
    -pmf.probs()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Variance about `mu`: `sum((n - mu)^2 * p[n])`.
pub fn fos_variance(pmf: &Pmf, mu: f64) -> f64 {
    pmf.probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let d = n as f64 - mu;
            d * d * p
        })
        .sum()
}

/// Skewness: `(1/sigma^3) * sum((n - mu)^3 * p[n])`.
pub fn fos_skewness(pmf: &Pmf, mu: f64, sigma: f64) -> Result<f64, FeatureError> {
    if sigma <= 0.0 {
        return Err(FeatureError::DegenerateHistogram);
    }
    let third: f64 = pmf
        .probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let d = n as f64 - mu;
            d * d * d * p
        })
        .sum();
    Ok(third / (sigma * sigma * sigma))
}

/// Excess kurtosis: `(1/sigma^4) * sum((n - mu)^4 * p[n]) - 3`.
pub fn fos_kurtosis(pmf: &Pmf, mu: f64, sigma: f64) -> Result<f64, FeatureError> {
    if sigma <= 0.0 {
        return Err(FeatureError::DegenerateHistogram);
    }
    let fourth: f64 = pmf
        .probs()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let d = n as f64 - mu;
            let d2 = d * d;
            d2 * d2 * p
        })
        .sum();
    let s2 = sigma * sigma;
    Ok(fourth / (s2 * s2) - 3.0)
}

/// All five features from a pmf.
pub fn features_from_pmf(pmf: &Pmf) -> Result<FeatureVector, FeatureError> {
    let mean = fos_mean(pmf);
    let variance = fos_variance(pmf, mean);
    if variance == 0.0 {
        return Err(FeatureError::DegenerateHistogram);
    }
    let sigma = variance.sqrt();
    Ok(FeatureVector {
        mean,
        entropy: fos_entropy(pmf),
        variance,
        skewness: fos_skewness(pmf, mean, sigma)?,
        kurtosis: fos_kurtosis(pmf, mean, sigma)?,
    })
}

/// Histogram -> pmf -> five features, for a non-constant image.
pub fn extract_features(image: &GrayImage) -> Result<FeatureVector, FeatureError> {
    let pmf = to_pmf(&compute_histogram(image)).expect("image has at least one pixel");
    features_from_pmf(&pmf)
}

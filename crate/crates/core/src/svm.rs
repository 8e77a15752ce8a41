//! Soft-margin linear SVM trained by sequential minimal optimization.
//!
//! The solver maximizes the dual objective
//! `sum(a_j) - 1/2 sum(a_j a_k y_j y_k x_j.x_k)` under the box `0 <= a <= c`
//! and the equality `sum(a_j y_j) = 0`, optimizing one pair of coefficients
//! per step. Coefficients are kept on a fixed binary grid (multiples of
//! 2^-44) so the pairwise updates cancel exactly and the equality constraint
//! holds as an exact floating-point zero, not just approximately.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid quantum for dual coefficients. Powers of two make the scaling in
/// [`snap_to_grid`] exact.
const ALPHA_GRID: f64 = 1.0 / (1u64 << 44) as f64;

/// Alphas closer than this to a box bound are treated as sitting on it.
const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SvmError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("training set contains a single class")]
    SingleClass,
    #[error("label must be +1 or -1")]
    InvalidLabel,
    #[error("feature vector contains a non-finite value")]
    NonFinite,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("penalty c must be positive")]
    BadPenalty,
    #[error("tolerances must be positive")]
    BadTolerance,
}

/// One training sample: features plus a class label in {+1, -1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Result<Self, SvmError> {
        if y != 1.0 && y != -1.0 {
            return Err(SvmError::InvalidLabel);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite);
        }
        Ok(Self { x, y })
    }
}

/// SMO solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Soft-margin penalty.
    pub c: f64,
    /// KKT residual the converged model must satisfy.
    pub kkt_tol: f64,
    /// Smallest coefficient change worth applying.
    pub eps: f64,
    /// Upper bound on optimization passes over the samples.
    pub max_passes: u32,
    /// Seed for the random partner-index selection.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            kkt_tol: 1e-3,
            eps: 1e-8,
            max_passes: 200,
            seed: 0,
        }
    }
}

/// A sample that ended training with a positive dual coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: Vec<f64>,
    pub y: f64,
    pub alpha: f64,
}

/// Trained model. When `standardize` is set, `weights` and the support
/// vectors live in standardized feature space and inputs are transformed
/// before the dot product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub support_vectors: Vec<SupportVector>,
    pub feature_order: Vec<String>,
    pub standardize: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    pub converged: bool,
    /// Dual coefficients aligned with the training set; not persisted.
    #[serde(default, skip)]
    pub alphas: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rounds onto the coefficient grid. Exact because the quantum is a power
/// of two.
fn snap_to_grid(v: f64) -> f64 {
    (v / ALPHA_GRID).round() * ALPHA_GRID
}

fn grid_at_least(v: f64) -> f64 {
    (v / ALPHA_GRID).ceil() * ALPHA_GRID
}

fn grid_at_most(v: f64) -> f64 {
    (v / ALPHA_GRID).floor() * ALPHA_GRID
}

/// Dual objective `sum(a_j) - 1/2 sum_jk(a_j a_k y_j y_k x_j.x_k)` with the
/// linear kernel.
pub fn dual_objective(samples: &[LabeledSample], alphas: &[f64]) -> Result<f64, SvmError> {
    if samples.len() != alphas.len() {
        return Err(SvmError::LengthMismatch {
            left: samples.len(),
            right: alphas.len(),
        });
    }
    let linear: f64 = alphas.iter().sum();
    let mut quad = 0.0;
    for (j, sj) in samples.iter().enumerate() {
        if alphas[j] == 0.0 {
            continue;
        }
        for (k, sk) in samples.iter().enumerate() {
            if alphas[k] == 0.0 {
                continue;
            }
            quad += alphas[j] * alphas[k] * sj.y * sk.y * dot(&sj.x, &sk.x);
        }
    }
    Ok(linear - 0.5 * quad)
}

fn validate_training_input(
    samples: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<usize, SvmError> {
    if samples.len() < 2 {
        return Err(SvmError::TooFewSamples(samples.len()));
    }
    if !(cfg.c > 0.0) {
        return Err(SvmError::BadPenalty);
    }
    if !(cfg.kkt_tol > 0.0) || !(cfg.eps > 0.0) {
        return Err(SvmError::BadTolerance);
    }
    let dim = samples[0].x.len();
    for s in samples {
        if s.x.len() != dim {
            return Err(SvmError::DimensionMismatch {
                expected: dim,
                got: s.x.len(),
            });
        }
        if s.y != 1.0 && s.y != -1.0 {
            return Err(SvmError::InvalidLabel);
        }
        if s.x.iter().any(|v| !v.is_finite()) {
            return Err(SvmError::NonFinite);
        }
    }
    if samples.iter().all(|s| s.y > 0.0) || samples.iter().all(|s| s.y < 0.0) {
        return Err(SvmError::SingleClass);
    }
    Ok(dim)
}

struct Solver<'a> {
    samples: &'a [LabeledSample],
    gram: Vec<f64>,
    n: usize,
    c: f64,
    alphas: Vec<f64>,
    b: f64,
    /// Largest Gram diagonal entry; bounds every kernel value.
    kmax: f64,
}

impl<'a> Solver<'a> {
    fn new(samples: &'a [LabeledSample], c: f64) -> Self {
        let n = samples.len();
        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = dot(&samples[i].x, &samples[j].x);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        let kmax = (0..n).map(|i| gram[i * n + i]).fold(0.0f64, f64::max);
        Self {
            samples,
            gram,
            n,
            c,
            alphas: vec![0.0; n],
            b: 0.0,
            kmax,
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    fn decision(&self, i: usize) -> f64 {
        let mut f = self.b;
        for (j, &a) in self.alphas.iter().enumerate() {
            if a != 0.0 {
                f += a * self.samples[j].y * self.k(i, j);
            }
        }
        f
    }

    /// Jointly optimizes the pair (i, j). Returns whether the step was
    /// applied.
    fn step(&mut self, i: usize, j: usize, e_i: f64, eps: f64) -> bool {
        if i == j {
            return false;
        }
        let (y_i, y_j) = (self.samples[i].y, self.samples[j].y);
        let (a_i_old, a_j_old) = (self.alphas[i], self.alphas[j]);
        let e_j = self.decision(j) - y_j;

        let (lo, hi) = if y_i != y_j {
            (
                f64::max(0.0, a_j_old - a_i_old),
                f64::min(self.c, self.c + a_j_old - a_i_old),
            )
        } else {
            (
                f64::max(0.0, a_i_old + a_j_old - self.c),
                f64::min(self.c, a_i_old + a_j_old),
            )
        };
        // Smallest/largest representable grid points inside the box slice.
        let lo_g = grid_at_least(lo);
        let hi_g = grid_at_most(hi);
        if hi_g <= lo_g {
            return false;
        }

        let eta = 2.0 * self.k(i, j) - self.k(i, i) - self.k(j, j);
        if eta >= 0.0 {
            return false;
        }

        let raw = a_j_old - y_j * (e_i - e_j) / eta;
        let a_j_new = snap_to_grid(raw).clamp(lo_g, hi_g);
        if (a_j_new - a_j_old).abs() < eps {
            return false;
        }
        // Exact on the grid, so the equality constraint is preserved
        // exactly.
        let a_i_new = a_i_old + y_i * y_j * (a_j_old - a_j_new);

        let d_i = a_i_new - a_i_old;
        let d_j = a_j_new - a_j_old;
        let b1 = self.b - e_i - y_i * d_i * self.k(i, i) - y_j * d_j * self.k(i, j);
        let b2 = self.b - e_j - y_i * d_i * self.k(i, j) - y_j * d_j * self.k(j, j);

        self.alphas[i] = a_i_new;
        self.alphas[j] = a_j_new;
        self.b = if a_i_new > BOUND_TOL && a_i_new < self.c - BOUND_TOL {
            b1
        } else if a_j_new > BOUND_TOL && a_j_new < self.c - BOUND_TOL {
            b2
        } else {
            (b1 + b2) / 2.0
        };

        #[cfg(debug_assertions)]
        self.check_invariants();
        true
    }

    #[cfg(debug_assertions)]
    fn check_invariants(&self) {
        let sum: f64 = self
            .alphas
            .iter()
            .zip(self.samples)
            .map(|(a, s)| a * s.y)
            .sum();
        debug_assert_eq!(sum, 0.0, "equality constraint must hold exactly");
        debug_assert!(self
            .alphas
            .iter()
            .all(|&a| (0.0..=self.c).contains(&a)));
    }

    fn weights(&self, dim: usize) -> Vec<f64> {
        let mut w = vec![0.0; dim];
        for (a, s) in self.alphas.iter().zip(self.samples) {
            if *a != 0.0 {
                for (wk, xk) in w.iter_mut().zip(&s.x) {
                    *wk += a * s.y * xk;
                }
            }
        }
        w
    }

    /// Bias from the mean of `y - w.x` over free support vectors; when every
    /// coefficient sits on a box bound, the midpoint of the KKT-feasible
    /// interval.
    fn final_bias(&self, w: &[f64]) -> f64 {
        let mut free_sum = 0.0;
        let mut free_count = 0usize;
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for (a, s) in self.alphas.iter().zip(self.samples) {
            let e = s.y - dot(w, &s.x);
            if *a > BOUND_TOL && *a < self.c - BOUND_TOL {
                free_sum += e;
                free_count += 1;
            } else if (*a <= BOUND_TOL) == (s.y > 0.0) {
                // a=0 with y=+1, or a=c with y=-1: a lower bound on b.
                lower = lower.max(e);
            } else {
                upper = upper.min(e);
            }
        }
        if free_count > 0 {
            free_sum / free_count as f64
        } else if lower.is_finite() && upper.is_finite() {
            (lower + upper) / 2.0
        } else if lower.is_finite() {
            lower
        } else if upper.is_finite() {
            upper
        } else {
            0.0
        }
    }
}

/// Trains a linear soft-margin SVM with simplified SMO.
///
/// Passes sweep all samples in order; a KKT-violating sample is paired with
/// a seeded random partner first and, failing that, with each other index in
/// turn. Convergence is declared only when a full pass applies no update and
/// the finalized weights and bias satisfy the KKT residual within
/// `cfg.kkt_tol`; hitting `cfg.max_passes` first returns the best iterate
/// with `converged = false`.
pub fn train_smo(samples: &[LabeledSample], cfg: &TrainConfig) -> Result<SvmModel, SvmError> {
    let dim = validate_training_input(samples, cfg)?;
    let mut solver = Solver::new(samples, cfg.c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // The optimization works against a slightly tighter tolerance so the
    // final model clears `kkt_tol` after the bias is recomputed.
    let inner_tol = cfg.kkt_tol * 0.5;

    let mut converged = false;
    let mut passes = 0;
    while passes < cfg.max_passes {
        passes += 1;
        let mut changed = 0usize;

        #[cfg(debug_assertions)]
        let mut objective = dual_objective(samples, &solver.alphas)?;

        for i in 0..solver.n {
            let e_i = solver.decision(i) - samples[i].y;
            let r_i = e_i * samples[i].y;
            let violates = (r_i < -inner_tol && solver.alphas[i] < cfg.c)
                || (r_i > inner_tol && solver.alphas[i] > 0.0);
            if !violates {
                continue;
            }
            let random_j = if solver.n > 1 {
                let j = rng.gen_range(0..solver.n - 1);
                if j >= i {
                    j + 1
                } else {
                    j
                }
            } else {
                i
            };
            let mut stepped = solver.step(i, random_j, e_i, cfg.eps);
            if !stepped {
                for j in 0..solver.n {
                    if solver.step(i, j, e_i, cfg.eps) {
                        stepped = true;
                        break;
                    }
                }
            }
            if stepped {
                changed += 1;
                #[cfg(debug_assertions)]
                {
                    // Each accepted pair step is exactly optimal for the
                    // pair, so the objective cannot decrease beyond the
                    // float noise of evaluating it plus the coefficient
                    // grid quantum, both of which scale with the kernel
                    // magnitude.
                    let scale =
                        (1.0 + cfg.c * cfg.c) * (1.0 + solver.kmax) * solver.n as f64;
                    let slack = 1e-9 * (1.0 + objective.abs())
                        + 64.0 * f64::EPSILON * solver.n as f64 * scale
                        + 4.0 * ALPHA_GRID * scale;
                    let next = dual_objective(samples, &solver.alphas)?;
                    debug_assert!(
                        next >= objective - slack,
                        "dual objective decreased: {objective} -> {next}"
                    );
                    objective = next;
                }
            }
        }

        if changed == 0 {
            let w = solver.weights(dim);
            let b = solver.final_bias(&w);
            if max_kkt_residual(samples, &solver.alphas, &w, b, cfg.c) <= cfg.kkt_tol {
                converged = true;
                break;
            }
            // The recomputed bias moved the margins; keep optimizing
            // against it.
            solver.b = b;
        }
    }

    let weights = solver.weights(dim);
    let bias = solver.final_bias(&weights);
    let support_vectors = solver
        .alphas
        .iter()
        .zip(samples)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, s)| SupportVector {
            x: s.x.clone(),
            y: s.y,
            alpha: *a,
        })
        .collect();

    Ok(SvmModel {
        weights,
        bias,
        c: cfg.c,
        support_vectors,
        feature_order: (0..dim).map(|i| format!("x{i}")).collect(),
        standardize: false,
        means: None,
        scales: None,
        converged,
        alphas: solver.alphas,
    })
}

impl SvmModel {
    fn transformed(&self, x: &[f64]) -> Vec<f64> {
        match (&self.means, &self.scales) {
            (Some(means), Some(scales)) if self.standardize => x
                .iter()
                .zip(means.iter().zip(scales))
                .map(|(v, (m, s))| (v - m) / s)
                .collect(),
            _ => x.to_vec(),
        }
    }
}

/// `w.x + b`, standardizing the input first when the model asks for it.
pub fn decision_value(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    if x.len() != model.weights.len() {
        return Err(SvmError::DimensionMismatch {
            expected: model.weights.len(),
            got: x.len(),
        });
    }
    let z = model.transformed(x);
    Ok(dot(&model.weights, &z) + model.bias)
}

/// Signed classification: strictly positive decision values are +1, zero
/// and below are -1 (ties fail toward the negative class).
pub fn predict(model: &SvmModel, x: &[f64]) -> Result<f64, SvmError> {
    let d = decision_value(model, x)?;
    Ok(if d > 0.0 { 1.0 } else { -1.0 })
}

fn max_kkt_residual(
    samples: &[LabeledSample],
    alphas: &[f64],
    w: &[f64],
    b: f64,
    c: f64,
) -> f64 {
    let mut worst = 0.0f64;
    for (a, s) in alphas.iter().zip(samples) {
        let margin = s.y * (dot(w, &s.x) + b);
        let residual = if *a <= BOUND_TOL {
            (1.0 - margin).max(0.0)
        } else if *a >= c - BOUND_TOL {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(residual);
    }
    worst
}

/// Largest KKT residual of the model over `samples`. A converged model
/// reports at most its training `kkt_tol`.
pub fn kkt_violation(model: &SvmModel, samples: &[LabeledSample]) -> Result<f64, SvmError> {
    if model.alphas.len() != samples.len() {
        return Err(SvmError::LengthMismatch {
            left: model.alphas.len(),
            right: samples.len(),
        });
    }
    Ok(max_kkt_residual(
        samples,
        &model.alphas,
        &model.weights,
        model.bias,
        model.c,
    ))
}

/// Per-feature affine transform to zero mean and unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Fits population means and standard deviations; constant features get
    /// scale 1 so the transform stays defined.
    pub fn fit(samples: &[LabeledSample]) -> Self {
        let n = samples.len().max(1) as f64;
        let dim = samples.first().map_or(0, |s| s.x.len());
        let mut means = vec![0.0; dim];
        for s in samples {
            for (m, v) in means.iter_mut().zip(&s.x) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n;
        }
        let mut scales = vec![0.0; dim];
        for s in samples {
            for ((sc, m), v) in scales.iter_mut().zip(&means).zip(&s.x) {
                let d = v - m;
                *sc += d * d;
            }
        }
        for sc in scales.iter_mut() {
            *sc = (*sc / n).sqrt();
            if *sc == 0.0 {
                *sc = 1.0;
            }
        }
        Self { means, scales }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

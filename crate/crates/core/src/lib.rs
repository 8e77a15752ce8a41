//! Egg-candling image classification.
//!
//! The pipeline mirrors the classic candling workflow: a single bright egg
//! is photographed against a dark background, segmented and cropped, the
//! crop is converted to grayscale and contrast-enhanced (CLAHE followed by
//! histogram equalization), five first-order statistics of the gray-level
//! histogram are extracted, and a soft-margin linear SVM separates fertile
//! from infertile eggs. Evaluation uses a confusion matrix and incremental
//! test scenarios.
//!
//! Module layout:
//!
//! - [`raster`] — image containers, Netpbm I/O, grayscale, histograms;
//! - [`segmentation`] — thresholding, connected components, cropping;
//! - [`enhancement`] — HE, CLAHE, and the hybrid CLAHE-HE pipeline;
//! - [`features`] — first-order statistics of the histogram;
//! - [`svm`] — SMO solver, decision function, model serialization;
//! - [`eval`] — confusion matrix, accuracy, scenario runner;
//! - [`synthgen`] — deterministic synthetic dataset generator;
//! - [`pipeline`] — stage composition, manifests, CSV feature tables.

pub mod enhancement;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod svm;
pub mod synthgen;

pub use eval::Label;
pub use features::FeatureVector;
pub use pipeline::{DatasetManifest, PipelineConfig, PipelineError};
pub use raster::{GrayImage, RgbImage};
pub use svm::SvmModel;

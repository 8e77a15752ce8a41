//! `ovoscope` — candling-image fertility classification from the command
//! line.
//!
//! Subcommands mirror the pipeline stages: `synth` generates a reproducible
//! dataset, `preprocess`/`extract` turn images into the feature table,
//! `split`/`train`/`predict`/`eval` handle the classifier, and `pipeline`
//! chains everything.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O failure, 3 validation failure,
//! 4 training finished without convergence (outputs still written).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ovoscope_core::enhancement::{ClaheConfig, EnhanceMode};
use ovoscope_core::eval::format_percent;
use ovoscope_core::pipeline::{
    self, DatasetManifest, PipelineConfig, PipelineError,
};
use ovoscope_core::raster::encode_pgm;
use ovoscope_core::svm::TrainConfig;
use ovoscope_core::synthgen::{generate_dataset, SynthError};

const EXIT_USAGE: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_UNCONVERGED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ovoscope",
    version,
    about = "Classify egg candling images as fertile or infertile"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Preprocessing knobs shared by image-consuming commands.
#[derive(Args, Clone)]
struct ProcessOpts {
    /// Segmentation threshold on the grayscale image
    #[arg(long, default_value_t = 125)]
    threshold: u8,
    /// Enhancement stage: none, he, clahe, or clahe-he
    #[arg(long, default_value = "clahe-he", value_parser = parse_enhance)]
    enhance: EnhanceMode,
    /// CLAHE tile grid, e.g. 8x8
    #[arg(long, default_value = "8x8", value_parser = parse_tiles)]
    tiles: (u32, u32),
    /// CLAHE clip factor in [1, 100]
    #[arg(long, default_value_t = 40.0)]
    alpha: f64,
    /// CLAHE maximum slope
    #[arg(long, default_value_t = 4.0)]
    smax: f64,
}

/// Classifier knobs shared by training commands.
#[derive(Args, Clone)]
struct TrainOpts {
    /// Soft-margin penalty
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Standardize features before training (off by default; the pipeline
    /// uses raw feature values)
    #[arg(long)]
    standardize: bool,
    /// Seed for splitting and solver randomness
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic candling dataset with a manifest
    Synth {
        #[arg(long, default_value_t = 50)]
        fertile: usize,
        #[arg(long, default_value_t = 50)]
        infertile: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Shrink the class brightness gap and raise noise
        #[arg(long)]
        hard: bool,
    },
    /// Preprocess one image; writes the enhanced grayscale crop as PGM
    Preprocess {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write ASCII (P2) instead of binary (P5)
        #[arg(long)]
        ascii: bool,
        #[command(flatten)]
        process: ProcessOpts,
    },
    /// Extract the feature table for every manifest entry
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        process: ProcessOpts,
    },
    /// Stratified, seeded train/test split of a manifest
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        train_frac: f64,
    },
    /// Train the linear SVM on a labeled feature table
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainOpts,
    },
    /// Append a `predicted` column to a feature table
    Predict {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Incremental-scenario evaluation of a model on labeled features
    Eval {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Scenario prefix step
        #[arg(long, default_value_t = 10)]
        step: usize,
        /// Write the report JSON here as well
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split, extract, train, predict, and evaluate in one run
    Pipeline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[arg(long, default_value_t = 0.5)]
        train_frac: f64,
        #[command(flatten)]
        process: ProcessOpts,
        #[command(flatten)]
        train: TrainOpts,
    },
}

fn parse_enhance(s: &str) -> Result<EnhanceMode, String> {
    s.parse()
}

fn parse_tiles(s: &str) -> Result<(u32, u32), String> {
    let (x, y) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let parse = |v: &str| {
        v.parse::<u32>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| format!("tile count '{v}' must be a positive integer"))
    };
    Ok((parse(x)?, parse(y)?))
}

/// A failure plus the exit code it maps to.
struct Failure {
    message: String,
    code: u8,
}

impl From<PipelineError> for Failure {
    fn from(err: PipelineError) -> Self {
        let code = if err.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        Failure {
            message: err.to_string(),
            code,
        }
    }
}

impl From<SynthError> for Failure {
    fn from(err: SynthError) -> Self {
        let code = match err {
            SynthError::Io { .. } => EXIT_IO,
            SynthError::InvalidConfig(_) => EXIT_VALIDATION,
        };
        Failure {
            message: err.to_string(),
            code,
        }
    }
}

fn io_failure(path: &std::path::Path, source: std::io::Error) -> Failure {
    Failure {
        message: format!("{}: {source}", path.display()),
        code: EXIT_IO,
    }
}

fn config_from(process: &ProcessOpts, train: &TrainOpts, train_frac: f64) -> PipelineConfig {
    PipelineConfig {
        threshold: process.threshold,
        clahe: ClaheConfig {
            tiles_x: process.tiles.0,
            tiles_y: process.tiles.1,
            alpha: process.alpha,
            s_max: process.smax,
        },
        enhance_mode: process.enhance,
        svm: TrainConfig {
            c: train.c,
            seed: train.seed,
            ..TrainConfig::default()
        },
        train_fraction: train_frac,
        standardize: train.standardize,
    }
}

fn default_train_opts() -> TrainOpts {
    TrainOpts {
        c: 1.0,
        standardize: false,
        seed: 0,
    }
}

/// Exit code summarizing a batch with per-file failures: I/O problems
/// dominate validation problems.
fn batch_code(failures: &[(PathBuf, PipelineError)]) -> u8 {
    if failures.is_empty() {
        0
    } else if failures.iter().any(|(_, e)| e.is_io()) {
        EXIT_IO
    } else {
        EXIT_VALIDATION
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Synth {
            fertile,
            infertile,
            seed,
            out,
            hard,
        } => {
            let manifest = generate_dataset(fertile, infertile, seed, &out, hard)?;
            println!(
                "wrote {} images and manifest.json to {}",
                manifest.entries.len(),
                out.display()
            );
            Ok(0)
        }
        Command::Preprocess {
            input,
            out,
            ascii,
            process,
        } => {
            let cfg = config_from(&process, &default_train_opts(), 0.5);
            let gray = pipeline::preprocess_one(&input, &cfg)?;
            fs::write(&out, encode_pgm(&gray, !ascii)).map_err(|e| io_failure(&out, e))?;
            println!(
                "wrote {} ({}x{})",
                out.display(),
                gray.width(),
                gray.height()
            );
            Ok(0)
        }
        Command::Extract {
            manifest,
            out,
            process,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let cfg = config_from(&process, &default_train_opts(), 0.5);
            let (rows, failures) = pipeline::extract_all(&manifest, &cfg);
            for (path, err) in &failures {
                eprintln!("skipped {}: {err}", path.display());
            }
            pipeline::write_features_csv(&out, &rows, None)?;
            println!("wrote {} feature rows to {}", rows.len(), out.display());
            Ok(batch_code(&failures))
        }
        Command::Split {
            manifest,
            out_train,
            out_test,
            seed,
            train_frac,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let (train, test) = pipeline::split(&manifest, seed, train_frac)?;
            train.save(&out_train)?;
            test.save(&out_test)?;
            println!(
                "split {} entries into {} train / {} test",
                manifest.entries.len(),
                train.entries.len(),
                test.entries.len()
            );
            Ok(0)
        }
        Command::Train {
            features,
            out,
            train,
        } => {
            let rows = pipeline::read_features_csv(&features)?;
            let cfg = config_from(
                &ProcessOpts {
                    threshold: 125,
                    enhance: EnhanceMode::ClaheHe,
                    tiles: (8, 8),
                    alpha: 40.0,
                    smax: 4.0,
                },
                &train,
                0.5,
            );
            let model = pipeline::train_features(&rows, &cfg)?;
            pipeline::save_model(&model, &out)?;
            println!(
                "trained on {} rows, {} support vectors, model written to {}",
                rows.len(),
                model.support_vectors.len(),
                out.display()
            );
            if model.converged {
                Ok(0)
            } else {
                eprintln!("warning: training did not converge within max passes");
                Ok(EXIT_UNCONVERGED)
            }
        }
        Command::Predict {
            features,
            model,
            out,
        } => {
            let rows = pipeline::read_features_csv(&features)?;
            let model = pipeline::load_model(&model)?;
            let predictions = pipeline::predict_rows(&model, &rows)?;
            pipeline::write_features_csv(&out, &rows, Some(&predictions))?;
            println!("wrote {} predictions to {}", predictions.len(), out.display());
            Ok(0)
        }
        Command::Eval {
            features,
            model,
            step,
            out,
        } => {
            let rows = pipeline::read_features_csv(&features)?;
            let model = pipeline::load_model(&model)?;
            let report = pipeline::eval_rows(&model, &rows, step)?;
            print!("{}", report.render_table());
            if let Some(path) = out {
                pipeline::save_report(&report, &path)?;
                println!("report written to {}", path.display());
            }
            Ok(0)
        }
        Command::Pipeline {
            manifest,
            out_dir,
            step,
            train_frac,
            process,
            train,
        } => {
            let manifest = DatasetManifest::load(&manifest)?;
            let cfg = config_from(&process, &train, train_frac);
            fs::create_dir_all(&out_dir).map_err(|e| io_failure(&out_dir, e))?;
            let summary = pipeline::run_pipeline(&manifest, &cfg, step)?;

            for (path, err) in &summary.failures {
                eprintln!("skipped {}: {err}", path.display());
            }

            summary.train_manifest.save(&out_dir.join("split_train.json"))?;
            summary.test_manifest.save(&out_dir.join("split_test.json"))?;
            pipeline::write_features_csv(
                &out_dir.join("features_train.csv"),
                &summary.train_rows,
                None,
            )?;
            pipeline::write_features_csv(
                &out_dir.join("features_test.csv"),
                &summary.test_rows,
                None,
            )?;
            pipeline::save_model(&summary.model, &out_dir.join("model.json"))?;
            pipeline::write_features_csv(
                &out_dir.join("predictions.csv"),
                &summary.test_rows,
                Some(&summary.predictions),
            )?;
            pipeline::save_report(&summary.resubstitution, &out_dir.join("resubstitution.json"))?;
            pipeline::save_report(&summary.report, &out_dir.join("report.json"))?;

            println!(
                "train {} rows / test {} rows",
                summary.train_rows.len(),
                summary.test_rows.len()
            );
            println!(
                "resubstitution accuracy: {}%",
                format_percent(summary.resubstitution.pooled)
            );
            print!("{}", summary.report.render_table());
            println!("outputs written to {}", out_dir.display());

            let code = batch_code(&summary.failures);
            if code != 0 {
                Ok(code)
            } else if !summary.model.converged {
                eprintln!("warning: training did not converge within max passes");
                Ok(EXIT_UNCONVERGED)
            } else {
                Ok(0)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version print to stdout and succeed; real usage
            // errors exit 1.
            let code = if err.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

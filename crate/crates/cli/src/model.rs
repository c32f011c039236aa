//! Versioned model files and the `train` / `predict` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use mlrate_core::crossfit::{cross_fit_with_folds, predict_out_of_fold};
use mlrate_core::data::{format_real, split_folds, CsvTable, ExperimentDataset};
use mlrate_core::learners::train as train_learner;
use mlrate_core::{Error, LearnerSpec, Predictor, RandomStream};
use serde::{Deserialize, Serialize};

use crate::learner::LearnerArgs;
use crate::output::{with_file, write_csv, write_json};
use crate::{is_stdout, split_list, user_error};

pub const MODEL_VERSION: u32 = 1;

/// How the stored models relate to the rows they will score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// One model per fold, each trained without its own fold's rows.
    CrossFitted,
    /// A single model trained on pre-experiment data only.
    PrePeriod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub provenance: Provenance,
    pub learner: LearnerSpec,
    pub target: String,
    pub feature_names: Vec<String>,
    pub n_rows: usize,
    /// Fold of each training row (cross-fitted models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_assignment: Option<Vec<usize>>,
    pub models: Vec<Predictor>,
}

impl ModelFile {
    pub fn read(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: serde_json::Value = serde_json::from_str(&text)?;
        let version = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Schema(format!("{}: model file has no numeric `version`", path.display())))?;
        if version != u64::from(MODEL_VERSION) {
            return Err(Error::UnsupportedModelVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        let expected_models = match (file.provenance, &file.fold_assignment) {
            (Provenance::PrePeriod, None) => 1,
            (Provenance::CrossFitted, Some(folds)) if folds.len() == file.n_rows => {
                folds.iter().max().map_or(0, |m| m + 1)
            }
            _ => return Err(Error::Schema("model file provenance and fold assignment disagree".into())),
        };
        if file.models.len() != expected_models {
            return Err(Error::Schema(format!(
                "model file has {} models, expected {expected_models}",
                file.models.len()
            )));
        }
        Ok(file)
    }

    pub fn write(&self, out: &mut dyn Write) -> Result<(), Error> {
        write_json(out, self)
    }

    /// Predictions for `features`, which must have the training column count.
    /// Cross-fitted files only score their own training rows, out of fold.
    pub fn predict(&self, features: &mlrate_core::DenseMatrix) -> Result<Vec<f64>, Error> {
        match (self.provenance, &self.fold_assignment) {
            (Provenance::PrePeriod, _) => self.models[0].predict(features),
            (Provenance::CrossFitted, Some(folds)) => {
                if features.rows() != folds.len() {
                    return Err(user_error(format!(
                        "cross-fitted models score only their {} training rows, got {} rows",
                        folds.len(),
                        features.rows()
                    )));
                }
                predict_out_of_fold(&self.models, folds, features)
            }
            (Provenance::CrossFitted, None) => Err(Error::Schema("cross-fitted model file lacks folds".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV file
    #[arg(long)]
    pub data: PathBuf,
    /// Target column
    #[arg(long, default_value = "y")]
    pub outcome: String,
    /// Comma-separated feature columns
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// cross-fitted: K fold models; pre-period: one model on all rows
    #[arg(long, value_enum, default_value = "cross-fitted")]
    pub provenance: Provenance,
    /// Number of folds (cross-fitted)
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Seed for the fold split
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write (`-` for standard output)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// CSV file to score
    #[arg(long)]
    pub data: PathBuf,
    /// Model file written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Feature columns in training order (default: the model's feature names)
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Name of the appended prediction column
    #[arg(long, default_value = "g_hat")]
    pub column: String,
    /// CSV file to write (`-` for standard output)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn features_or_error(features: &[String], needed: bool) -> Result<Vec<String>, Error> {
    let names: Vec<String> = features.iter().flat_map(|f| split_list(f)).collect();
    if needed && names.is_empty() {
        return Err(user_error("this learner needs --features"));
    }
    Ok(names)
}

pub fn train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), Error> {
    let spec = args.learner.spec()?;
    let names = features_or_error(&args.features, args.learner.needs_features())?;
    let table = CsvTable::read(&args.data)?;
    table.column_position(&args.outcome)?;
    for name in &names {
        table.column_position(name)?;
    }
    let targets = table.numeric_column(&args.outcome)?;
    let features = table.numeric_matrix(&names)?;
    let n = targets.len();

    let file = match args.provenance {
        Provenance::PrePeriod => ModelFile {
            version: MODEL_VERSION,
            provenance: Provenance::PrePeriod,
            learner: spec.clone(),
            target: args.outcome.clone(),
            feature_names: names,
            n_rows: n,
            fold_assignment: None,
            models: vec![train_learner(&spec, &features, &targets)?],
        },
        Provenance::CrossFitted => {
            let folds = split_folds(n, args.k, &mut RandomStream::new(args.seed, 0))?;
            // Treatment plays no part in training, so a placeholder arm vector is fine.
            let ds = ExperimentDataset::new(targets, vec![false; n], features, names.clone())?;
            let cf = cross_fit_with_folds(&ds, &spec, &folds, args.k, None, None)?;
            ModelFile {
                version: MODEL_VERSION,
                provenance: Provenance::CrossFitted,
                learner: spec,
                target: args.outcome.clone(),
                feature_names: names,
                n_rows: n,
                fold_assignment: Some(cf.fold_assignment),
                models: cf.models,
            }
        }
    };
    if is_stdout(&args.output) {
        file.write(out)
    } else {
        with_file(args.output.as_ref().unwrap(), |w| file.write(w))
    }
}

pub fn predict(args: &PredictArgs, out: &mut dyn Write) -> Result<(), Error> {
    let model = ModelFile::read(&args.model)?;
    let names = features_or_error(&args.features, false)?;
    let names = if names.is_empty() { model.feature_names.clone() } else { names };
    if names.len() != model.feature_names.len() {
        return Err(user_error(format!(
            "model was trained on {} features, got {}",
            model.feature_names.len(),
            names.len()
        )));
    }
    let table = CsvTable::read(&args.data)?;
    if table.header.contains(&args.column) {
        return Err(user_error(format!("column `{}` already exists in {}", args.column, args.data.display())));
    }
    for name in &names {
        table.column_position(name)?;
    }
    let features = table.numeric_matrix(&names)?;
    let predictions = model.predict(&features)?;

    let mut header: Vec<&str> = table.header.iter().map(String::as_str).collect();
    header.push(&args.column);
    let rows: Vec<Vec<String>> = table
        .records
        .iter()
        .zip(&predictions)
        .map(|(rec, p)| rec.iter().map(String::from).chain(std::iter::once(format_real(*p))).collect())
        .collect();
    if is_stdout(&args.output) {
        write_csv(out, &header, &rows)
    } else {
        with_file(args.output.as_ref().unwrap(), |w| write_csv(w, &header, &rows))
    }
}

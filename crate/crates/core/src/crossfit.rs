//! Cross-fitting: out-of-fold predictions for the adjustment covariate.
//!
//! Each row's prediction comes from a model trained only on the other folds,
//! using outcome and covariates. Treatment never enters training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fold_members, split_folds, ExperimentDataset, PanelDataset};
use crate::error::{Error, Result};
use crate::learners::{train, LearnerSpec, Predictor};
use crate::numerics::{mean, DenseMatrix, RandomStream};

/// Default number of folds.
pub const DEFAULT_FOLDS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFitResult {
    /// Fold index of each row.
    pub fold_assignment: Vec<usize>,
    /// Out-of-fold prediction for each row.
    pub predictions: Vec<f64>,
    /// Mean of `predictions` over all rows.
    pub g_bar: f64,
    /// `models[f]` was trained without the rows of fold `f`.
    pub models: Vec<Predictor>,
    pub k: usize,
}

/// Covariate columns used as learner input. `None` selects every column.
fn selected_features(ds: &ExperimentDataset, features: Option<&[usize]>) -> Result<DenseMatrix> {
    match features {
        None => Ok(ds.covariates().clone()),
        Some(cols) => {
            if let Some(&bad) = cols.iter().find(|&&c| c >= ds.covariates().cols()) {
                return Err(Error::invalid(format!(
                    "feature column {bad} out of range for {} covariates",
                    ds.covariates().cols()
                )));
            }
            Ok(ds.covariates().select_columns(cols))
        }
    }
}

/// Splits rows into `k` random folds drawn from `stream`, then cross-fits.
pub fn cross_fit(
    ds: &ExperimentDataset,
    spec: &LearnerSpec,
    k: usize,
    stream: &mut RandomStream,
    features: Option<&[usize]>,
) -> Result<CrossFitResult> {
    let folds = split_folds(ds.len(), k, stream)?;
    cross_fit_with_folds(ds, spec, &folds, k, features, None)
}

/// Cross-fits with a given fold assignment.
///
/// Rows of `auxiliary` (for example non-experiment users) are appended,
/// unweighted, to every fold's training set and never predicted.
pub fn cross_fit_with_folds(
    ds: &ExperimentDataset,
    spec: &LearnerSpec,
    folds: &[usize],
    k: usize,
    features: Option<&[usize]>,
    auxiliary: Option<&ExperimentDataset>,
) -> Result<CrossFitResult> {
    spec.validate()?;
    let n = ds.len();
    if k < 2 {
        return Err(Error::invalid(format!("cross-fitting needs k >= 2, got {k}")));
    }
    if folds.len() != n {
        return Err(Error::invalid(format!(
            "fold assignment has {} entries for {n} rows",
            folds.len()
        )));
    }
    if let Some(&bad) = folds.iter().find(|&&f| f >= k) {
        return Err(Error::invalid(format!("fold index {bad} out of range for k={k}")));
    }
    let members = fold_members(folds, k);
    if let Some(f) = members.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!("fold {f} is empty")));
    }
    if let Some(f) = members.iter().position(|m| n - m.len() < 2) {
        return Err(Error::invalid(format!("fold {f} leaves fewer than 2 training rows")));
    }

    let x = selected_features(ds, features)?;
    let aux = match auxiliary {
        Some(a) => {
            let ax = selected_features(a, features)?;
            if ax.cols() != x.cols() {
                return Err(Error::invalid("auxiliary data has a different feature count"));
            }
            Some((ax, a.outcome()))
        }
        None => None,
    };

    let fitted: Vec<Result<(Predictor, Vec<f64>)>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let complement: Vec<usize> = (0..n).filter(|&i| folds[i] != fold).collect();
            let mut train_x = x.select_rows(&complement);
            let mut train_y: Vec<f64> = complement.iter().map(|&i| ds.outcome()[i]).collect();
            if let Some((ax, ay)) = &aux {
                train_x = train_x.vstack(ax)?;
                train_y.extend_from_slice(ay);
            }
            let model = train(spec, &train_x, &train_y)?;
            let held_out = x.select_rows(&members[fold]);
            let preds = model.predict(&held_out)?;
            Ok((model, preds))
        })
        .collect();

    let mut predictions = vec![0.0; n];
    let mut models = Vec::with_capacity(k);
    for (fold, result) in fitted.into_iter().enumerate() {
        let (model, preds) = result?;
        for (&row, p) in members[fold].iter().zip(preds) {
            predictions[row] = p;
        }
        models.push(model);
    }
    let g_bar = mean(&predictions);
    Ok(CrossFitResult {
        fold_assignment: folds.to_vec(),
        predictions,
        g_bar,
        models,
        k,
    })
}

/// Out-of-fold predictions from stored fold models, for the same rows and
/// fold assignment they were trained with.
pub fn predict_out_of_fold(models: &[Predictor], folds: &[usize], features: &DenseMatrix) -> Result<Vec<f64>> {
    if folds.len() != features.rows() {
        return Err(Error::invalid(format!(
            "fold assignment has {} entries for {} rows",
            folds.len(),
            features.rows()
        )));
    }
    folds
        .iter()
        .zip(features.iter_rows())
        .map(|(&f, row)| {
            let model = models
                .get(f)
                .ok_or_else(|| Error::invalid(format!("no model for fold {f}")))?;
            if row.len() != model.n_features {
                return Err(Error::invalid(format!(
                    "model expects {} feature columns, got {}",
                    model.n_features,
                    row.len()
                )));
            }
            Ok(model.predict_row(row))
        })
        .collect()
}

/// Trains one model on pre-period data: lagged features → pre-period outcome.
pub fn preperiod_model(panel: &PanelDataset, spec: &LearnerSpec) -> Result<Predictor> {
    let lagged = panel
        .lagged_features
        .as_ref()
        .ok_or_else(|| Error::Schema("panel has no lagged (t-2) feature columns".into()))?;
    train(spec, lagged, &panel.pre_outcome)
}

/// Pre-period mode: one model trained entirely on pre-experiment data, then
/// applied to the latest pre-period features. The result is measurable before
/// the experiment and can be used as an ordinary covariate.
pub fn preperiod_fit(panel: &PanelDataset, spec: &LearnerSpec) -> Result<Vec<f64>> {
    preperiod_model(panel, spec)?.predict(panel.experiment.covariates())
}

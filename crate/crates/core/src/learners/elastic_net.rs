//! Elastic net regression by cyclic coordinate descent.
//!
//! Minimizes, over standardized features,
//!
//! ```text
//! (1/2n)·‖y − b − Xw‖² + λ·(α‖w‖₁ + (1 − α)/2·‖w‖²)
//! ```
//!
//! Each feature is centered and scaled so that (1/n)·Σx² = 1, which makes the
//! coordinate update a plain soft-threshold followed by a ridge shrink. The
//! intercept is the target mean and is never penalized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RandomStream};

/// Soft-thresholding operator S(z, γ) = sign(z)·max(|z| − γ, 0).
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Optional K-fold search over a penalty grid. Off unless requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub lambda: f64,
    /// Share of the penalty on the L1 term (α).
    pub l1_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub cv: Option<CvConfig>,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            l1_ratio: 0.5,
            tol: 1e-6,
            max_iter: 1000,
            cv: None,
        }
    }
}

impl ElasticNetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("elastic net lambda must be >= 0, got {}", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::invalid(format!("l1_ratio must lie in [0, 1], got {}", self.l1_ratio)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        if let Some(cv) = &self.cv {
            if cv.folds < 2 || cv.lambdas.is_empty() {
                return Err(Error::invalid("cross-validation needs >= 2 folds and a non-empty grid"));
            }
            if cv.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                return Err(Error::invalid("cross-validation grid must hold finite lambdas >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticNetModel {
    /// Coefficients on the standardized scale.
    pub weights: Vec<f64>,
    /// Target mean; the prediction at the feature means.
    pub intercept: f64,
    pub feature_means: Vec<f64>,
    /// Population standard deviations; 0 marks a constant feature.
    pub feature_scales: Vec<f64>,
    pub lambda: f64,
    pub l1_ratio: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective value after each full sweep.
    pub objective_history: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl ElasticNetModel {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut out = self.intercept;
        for (j, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                out += w * (row[j] - self.feature_means[j]) / self.feature_scales[j];
            }
        }
        out
    }

    /// Weights on the original feature scale.
    pub fn raw_weights(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.feature_scales)
            .map(|(&w, &s)| if w == 0.0 { 0.0 } else { w / s })
            .collect()
    }
}

/// Centered and scaled copy of the training features, column-major.
pub struct Standardized {
    pub columns: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardized {
    pub fn new(features: &DenseMatrix) -> Self {
        let n = features.rows() as f64;
        let mut columns = Vec::with_capacity(features.cols());
        let mut means = Vec::with_capacity(features.cols());
        let mut scales = Vec::with_capacity(features.cols());
        for j in 0..features.cols() {
            let mut col = features.column(j);
            let (lo, hi) = col
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            let m = col.iter().sum::<f64>() / n;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            if lo == hi || s == 0.0 {
                col.iter_mut().for_each(|v| *v = 0.0);
                means.push(m);
                scales.push(0.0);
            } else {
                col.iter_mut().for_each(|v| *v = (*v - m) / s);
                means.push(m);
                scales.push(s);
            }
            columns.push(col);
        }
        Self { columns, means, scales }
    }
}

fn objective(residual: &[f64], weights: &[f64], lambda: f64, l1_ratio: f64) -> f64 {
    let n = residual.len() as f64;
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n);
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    loss + lambda * (l1_ratio * l1 + 0.5 * (1.0 - l1_ratio) * l2)
}

/// Fits at a single penalty level.
pub fn elastic_net_fit(
    features: &DenseMatrix,
    targets: &[f64],
    lambda: f64,
    l1_ratio: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ElasticNetModel> {
    let params = ElasticNetParams {
        lambda,
        l1_ratio,
        tol,
        max_iter,
        cv: None,
    };
    params.validate()?;
    check_inputs(features, targets)?;
    Ok(fit_standardized(&Standardized::new(features), targets, &params))
}

pub(crate) fn check_inputs(features: &DenseMatrix, targets: &[f64]) -> Result<()> {
    if features.rows() != targets.len() {
        return Err(Error::invalid(format!(
            "{} feature rows for {} targets",
            features.rows(),
            targets.len()
        )));
    }
    if targets.len() < 2 {
        return Err(Error::invalid(format!("training needs at least 2 rows, got {}", targets.len())));
    }
    if !features.is_finite() || targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in training data"));
    }
    Ok(())
}

fn fit_standardized(std: &Standardized, targets: &[f64], params: &ElasticNetParams) -> ElasticNetModel {
    let n = targets.len() as f64;
    let d = std.columns.len();
    let intercept = targets.iter().sum::<f64>() / n;
    let mut residual: Vec<f64> = targets.iter().map(|y| y - intercept).collect();
    let mut weights = vec![0.0; d];
    let l1 = params.lambda * params.l1_ratio;
    let shrink = 1.0 + params.lambda * (1.0 - params.l1_ratio);

    let mut history = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < params.max_iter {
        sweeps += 1;
        let mut max_delta = 0.0f64;
        for j in 0..d {
            if std.scales[j] == 0.0 {
                continue;
            }
            let col = &std.columns[j];
            let grad = col.iter().zip(&residual).map(|(x, r)| x * r).sum::<f64>() / n;
            let updated = soft_threshold(grad + weights[j], l1) / shrink;
            let delta = updated - weights[j];
            if delta != 0.0 {
                for (r, x) in residual.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                weights[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        history.push(objective(&residual, &weights, params.lambda, params.l1_ratio));
        if max_delta < params.tol {
            converged = true;
            break;
        }
    }

    let warning = (!converged).then(|| {
        format!(
            "coordinate descent did not converge within {} sweeps; returning last iterate",
            params.max_iter
        )
    });
    ElasticNetModel {
        weights,
        intercept,
        feature_means: std.means.clone(),
        feature_scales: std.scales.clone(),
        lambda: params.lambda,
        l1_ratio: params.l1_ratio,
        sweeps,
        converged,
        objective_history: history,
        warning,
    }
}

/// Fits with the configured penalty, or picks one by cross-validation.
pub(crate) fn fit_with_params(
    features: &DenseMatrix,
    targets: &[f64],
    params: &ElasticNetParams,
    seed: u64,
) -> Result<ElasticNetModel> {
    params.validate()?;
    check_inputs(features, targets)?;
    let Some(cv) = &params.cv else {
        return Ok(fit_standardized(&Standardized::new(features), targets, params));
    };

    let folds = crate::data::split_folds(targets.len(), cv.folds, &mut RandomStream::new(seed, 0))?;
    let members = crate::data::fold_members(&folds, cv.folds);
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &cv.lambdas {
        let trial = ElasticNetParams {
            lambda,
            cv: None,
            ..params.clone()
        };
        let mut sse = 0.0;
        for held_out in &members {
            let train_rows: Vec<usize> = (0..targets.len()).filter(|i| folds[*i] != folds[held_out[0]]).collect();
            if train_rows.len() < 2 {
                return Err(Error::invalid("cross-validation fold leaves fewer than 2 training rows"));
            }
            let x = features.select_rows(&train_rows);
            let y: Vec<f64> = train_rows.iter().map(|&i| targets[i]).collect();
            let model = fit_standardized(&Standardized::new(&x), &y, &trial);
            sse += held_out
                .iter()
                .map(|&i| {
                    let e = targets[i] - model.predict_row(features.row(i));
                    e * e
                })
                .sum::<f64>();
        }
        // Ties go to the larger penalty.
        let better = match best {
            None => true,
            Some((best_sse, best_lambda)) => sse < best_sse || (sse == best_sse && lambda > best_lambda),
        };
        if better {
            best = Some((sse, lambda));
        }
    }
    let chosen = ElasticNetParams {
        lambda: best.map(|b| b.1).unwrap_or(params.lambda),
        cv: None,
        ..params.clone()
    };
    Ok(fit_standardized(&Standardized::new(features), targets, &chosen))
}

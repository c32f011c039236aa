//! Average-treatment-effect estimators and their confidence intervals.
//!
//! [`mlrate_estimate`] cross-fits a learner, optionally censors its
//! predictions, and uses them as the covariate in [`adjusted_fit`]. The
//! baselines are difference in means, difference in differences on
//! `Y − g`, and CUPED on the pre-period outcome.

pub mod adjustment;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::crossfit::{cross_fit, CrossFitResult};
use crate::data::{ExperimentDataset, PanelDataset};
use crate::error::{Error, Result};
use crate::learners::LearnerSpec;
use crate::numerics::{normal::quantile_unchecked, RandomStream};

pub use adjustment::{adjusted_fit, variance_estimator, AdjustmentFit, SampleMoments, DEGENERATE_VARIANCE_RATIO};
pub use report::{relative_efficiency, Diagnostics, Efficiency, EstimateReport};

/// Default significance level a (95% intervals).
pub const DEFAULT_SIGNIFICANCE: f64 = 0.05;

fn check_significance(significance: f64) -> Result<()> {
    if significance > 0.0 && significance < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("significance level must lie in (0, 1), got {significance}")))
    }
}

/// estimate ± Φ⁻¹(1 − a/2)·√(σ²/n) for significance level a.
pub fn confidence_interval(estimate: f64, sigma2: f64, n: usize, significance: f64) -> Result<(f64, f64)> {
    check_significance(significance)?;
    if !sigma2.is_finite() || sigma2 < 0.0 {
        return Err(Error::invalid(format!("variance must be finite and >= 0, got {sigma2}")));
    }
    if n == 0 {
        return Err(Error::invalid("interval needs n >= 1"));
    }
    let half = quantile_unchecked(1.0 - significance / 2.0) * (sigma2 / n as f64).sqrt();
    Ok((estimate - half, estimate + half))
}

/// ȳ₁ − ȳ₀ with variance V̂ar(Y|T=0)/(1−p̂) + V̂ar(Y|T=1)/p̂.
pub fn diff_in_means(y: &[f64], t: &[bool], significance: f64) -> Result<EstimateReport> {
    check_significance(significance)?;
    let moments = SampleMoments::compute(y, t)?;
    EstimateReport::from_moments("dim", &moments, significance)
}

/// Difference in means of the residual outcome Y − g.
pub fn diff_in_diff(y: &[f64], t: &[bool], g: &[f64], significance: f64) -> Result<EstimateReport> {
    if g.len() != y.len() {
        return Err(Error::invalid(format!(
            "covariate has {} rows, outcome has {}",
            g.len(),
            y.len()
        )));
    }
    let residual: Vec<f64> = y.iter().zip(g).map(|(a, b)| a - b).collect();
    let mut report = diff_in_means(&residual, t, significance)?;
    report.method = "dind".into();
    Ok(report)
}

/// Regression adjustment on the pre-period outcome.
pub fn cuped_estimate(panel: &PanelDataset, significance: f64) -> Result<EstimateReport> {
    check_significance(significance)?;
    let ds = &panel.experiment;
    let fit = adjusted_fit(ds.outcome(), ds.treatment(), &panel.pre_outcome)?;
    EstimateReport::from_fit("cuped", &fit, ds.outcome(), &panel.pre_outcome, significance)
}

/// Hard thresholding u·1{u ≥ τ}. `τ = −∞` leaves `g` unchanged.
pub fn censor_predictions(g: &[f64], threshold: f64) -> Vec<f64> {
    g.iter().map(|&u| if u >= threshold { u } else { 0.0 }).collect()
}

/// Options for one MLRATE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrateConfig {
    pub learner: LearnerSpec,
    pub k: usize,
    pub significance: f64,
    /// Hard-threshold for predictions; `None` disables censoring.
    pub censor: Option<f64>,
    /// Covariate columns fed to the learner; `None` uses all of them.
    pub features: Option<Vec<usize>>,
}

impl MlrateConfig {
    pub fn new(learner: LearnerSpec) -> Self {
        Self {
            learner,
            k: crate::crossfit::DEFAULT_FOLDS,
            significance: DEFAULT_SIGNIFICANCE,
            censor: None,
            features: None,
        }
    }

    /// Report method name, e.g. `mlrate-gbdt`.
    pub fn method_name(&self) -> String {
        format!("mlrate-{}", self.learner.name())
    }
}

/// Everything produced by one MLRATE run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrateOutcome {
    pub report: EstimateReport,
    pub fit: AdjustmentFit,
    pub cross_fit: CrossFitResult,
    /// The covariate actually used, after censoring.
    pub covariate: Vec<f64>,
}

/// Cross-fit, optionally censor, then adjust.
pub fn mlrate_run(ds: &ExperimentDataset, cfg: &MlrateConfig, stream: &mut RandomStream) -> Result<MlrateOutcome> {
    check_significance(cfg.significance)?;
    let cf = cross_fit(ds, &cfg.learner, cfg.k, stream, cfg.features.as_deref())?;
    let covariate = match cfg.censor {
        Some(tau) => {
            if tau.is_nan() {
                return Err(Error::invalid("censoring threshold is NaN"));
            }
            censor_predictions(&cf.predictions, tau)
        }
        None => cf.predictions.clone(),
    };
    let fit = adjusted_fit(ds.outcome(), ds.treatment(), &covariate)?;
    let report = EstimateReport::from_fit(&cfg.method_name(), &fit, ds.outcome(), &covariate, cfg.significance)?;
    Ok(MlrateOutcome {
        report,
        fit,
        cross_fit: cf,
        covariate,
    })
}

/// MLRATE point estimate and interval.
pub fn mlrate_estimate(
    ds: &ExperimentDataset,
    spec: &LearnerSpec,
    k: usize,
    stream: &mut RandomStream,
    significance: f64,
    censor: Option<f64>,
) -> Result<EstimateReport> {
    let cfg = MlrateConfig {
        learner: spec.clone(),
        k,
        significance,
        censor,
        features: None,
    };
    Ok(mlrate_run(ds, &cfg, stream)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::FixedFunction;
    use crate::numerics::DenseMatrix;

    fn arms(t: &[u8]) -> Vec<bool> {
        t.iter().map(|&v| v == 1).collect()
    }

    #[test]
    fn interval_examples() {
        let (lo, hi) = confidence_interval(0.0, 1.0, 100, 0.05).unwrap();
        assert!((hi - 0.195_996_398_5).abs() < 1e-9 && (lo + hi).abs() < 1e-15);
        assert_eq!(confidence_interval(2.5, 0.0, 10, 0.05).unwrap(), (2.5, 2.5));
        let narrow = confidence_interval(1.0, 4.0, 50, 0.32).unwrap();
        let wide = confidence_interval(1.0, 4.0, 50, 0.05).unwrap();
        assert!(wide.0 < narrow.0 && narrow.1 < wide.1);
        for a in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(confidence_interval(0.0, 1.0, 10, a).is_err());
        }
        assert!(confidence_interval(0.0, -1.0, 10, 0.05).is_err());
        assert!(confidence_interval(0.0, 1.0, 0, 0.05).is_err());
    }

    #[test]
    fn diff_in_means_examples() {
        let t = arms(&[0, 0, 1, 1]);
        let r = diff_in_means(&[1.0, 2.0, 3.0, 4.0], &t, 0.05).unwrap();
        assert_eq!(r.estimate, 2.0);
        let y: Vec<f64> = t.iter().map(|&v| f64::from(u8::from(v))).collect();
        let r = diff_in_means(&y, &t, 0.05).unwrap();
        assert_eq!((r.estimate, r.sigma2_hat), (1.0, 0.0));
        let r = diff_in_means(&[3.0; 4], &t, 0.05).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(diff_in_means(&[1.0, 2.0, 3.0], &arms(&[0, 1, 1]), 0.05).is_err());
    }

    #[test]
    fn diff_in_diff_examples() {
        let y = [1.0, 5.0, 2.0, 8.0, 3.0, 4.0];
        let t = arms(&[0, 1, 0, 1, 0, 1]);
        let dim = diff_in_means(&y, &t, 0.05).unwrap();
        let zero = diff_in_diff(&y, &t, &[0.0; 6], 0.05).unwrap();
        assert_eq!((zero.estimate, zero.sigma2_hat, zero.ci), (dim.estimate, dim.sigma2_hat, dim.ci));
        assert_eq!(diff_in_diff(&y, &t, &y, 0.05).unwrap().estimate, 0.0);
        let g: Vec<f64> = y.iter().zip(&t).map(|(v, &ti)| v - f64::from(u8::from(ti))).collect();
        let r = diff_in_diff(&y, &t, &g, 0.05).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-12 && r.sigma2_hat < 1e-24);
    }

    #[test]
    fn censoring() {
        assert_eq!(censor_predictions(&[-1.0, 0.5, 2.0], 1.0), vec![0.0, 0.0, 2.0]);
        let g = [-3.0, 0.0, 7.5];
        assert_eq!(censor_predictions(&g, f64::NEG_INFINITY), g.to_vec());
        assert_eq!(censor_predictions(&[0.0, 1.0, 2.0], 0.0), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn relative_efficiency_rules() {
        let t = arms(&[0, 1, 0, 1, 0, 1]);
        let a = diff_in_means(&[1.0, 5.0, 2.0, 8.0, 3.0, 4.0], &t, 0.05).unwrap();
        let e = relative_efficiency(&a, &a).unwrap();
        assert_eq!((e.variance_ratio, e.width_ratio), (1.0, 1.0));
        let b = diff_in_means(&[2.0, 10.0, 4.0, 16.0, 6.0, 8.0], &t, 0.05).unwrap();
        let e = relative_efficiency(&a, &b).unwrap();
        assert!((e.width_ratio - e.variance_ratio.sqrt()).abs() < 1e-12);
        let flat = diff_in_means(&[0.0, 1.0, 0.0, 1.0, 0.0, 1.0], &t, 0.05).unwrap();
        assert!(relative_efficiency(&a, &flat).is_err());
        let other_level = diff_in_means(&[1.0, 5.0, 2.0, 8.0, 3.0, 4.0], &t, 0.1).unwrap();
        assert!(relative_efficiency(&a, &other_level).is_err());
    }

    fn small_dataset() -> ExperimentDataset {
        let mut s = RandomStream::new(11, 0);
        let n = 200;
        let x = DenseMatrix::new(n, 2, s.normals(2 * n)).unwrap();
        let t: Vec<bool> = (0..n).map(|_| s.bernoulli(0.5)).collect();
        let y = (0..n)
            .map(|i| 2.0 * x.get(i, 0) + f64::from(u8::from(t[i])) + s.standard_normal())
            .collect();
        ExperimentDataset::new(y, t, x, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn zero_learner_matches_diff_in_means() {
        let ds = small_dataset();
        let r = mlrate_estimate(&ds, &LearnerSpec::zero(), 2, &mut RandomStream::new(1, 0), 0.05, None).unwrap();
        let dim = diff_in_means(ds.outcome(), ds.treatment(), 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.estimate, r.sigma2_hat, r.ci, r.std_error), (dim.estimate, dim.sigma2_hat, dim.ci, dim.std_error));
    }

    #[test]
    fn fixed_function_matches_adjusted_fit() {
        let ds = small_dataset();
        let spec = LearnerSpec::fixed(FixedFunction::Column { index: 0 });
        let r = mlrate_estimate(&ds, &spec, 2, &mut RandomStream::new(1, 0), 0.05, None).unwrap();
        let g = ds.covariates().column(0);
        let fit = adjusted_fit(ds.outcome(), ds.treatment(), &g).unwrap();
        assert_eq!((r.estimate, r.sigma2_hat), (fit.alpha1, fit.sigma2_hat));
        assert_eq!(r.method, "mlrate-fixed-function");
    }

    #[test]
    fn censoring_is_applied_before_adjustment() {
        let ds = small_dataset();
        let mut cfg = MlrateConfig::new(LearnerSpec::fixed(FixedFunction::Column { index: 0 }));
        cfg.censor = Some(0.0);
        let out = mlrate_run(&ds, &cfg, &mut RandomStream::new(1, 0)).unwrap();
        assert_eq!(out.covariate, censor_predictions(&ds.covariates().column(0), 0.0));
        let fit = adjusted_fit(ds.outcome(), ds.treatment(), &out.covariate).unwrap();
        assert_eq!(out.fit, fit);
    }

    #[test]
    fn cuped_with_constant_pre_period_is_dim() {
        let ds = small_dataset();
        let panel = PanelDataset::new(ds.clone(), vec![4.0; ds.len()], None).unwrap();
        let r = cuped_estimate(&panel, 0.05).unwrap();
        let dim = diff_in_means(ds.outcome(), ds.treatment(), 0.05).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.estimate, r.sigma2_hat), (dim.estimate, dim.sigma2_hat));
    }

    #[test]
    fn report_json_shape() {
        let ds = small_dataset();
        let spec = LearnerSpec::fixed(FixedFunction::Column { index: 0 });
        let r = mlrate_estimate(&ds, &spec, 2, &mut RandomStream::new(1, 0), 0.05, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["method", "estimate", "std_error", "ci_level", "ci", "n", "p_hat", "sigma2_hat", "degenerate"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["ci_level"], 0.95);
        assert!(v["diagnostics"]["corr_y_g"].is_f64());
        assert!(r.ci[0] <= r.estimate && r.estimate <= r.ci[1]);
    }
}

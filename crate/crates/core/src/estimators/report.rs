//! The serializable result of one estimator run.

use serde::{Deserialize, Serialize};

use super::adjustment::{AdjustmentFit, SampleMoments};
use super::confidence_interval;
use crate::error::{Error, Result};
use crate::numerics::correlation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Correlation between the outcome and the adjustment covariate, when
    /// both vary.
    pub corr_y_g: Option<f64>,
    pub var_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub estimate: f64,
    pub std_error: f64,
    /// Nominal coverage, i.e. one minus the significance level.
    pub ci_level: f64,
    pub ci: [f64; 2],
    pub n: usize,
    pub p_hat: f64,
    pub sigma2_hat: f64,
    pub degenerate: bool,
    pub diagnostics: Diagnostics,
}

impl EstimateReport {
    #[allow(clippy::too_many_arguments)]
    fn build(
        method: &str,
        estimate: f64,
        sigma2_hat: f64,
        n: usize,
        p_hat: f64,
        significance: f64,
        degenerate: bool,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let (lo, hi) = confidence_interval(estimate, sigma2_hat, n, significance)?;
        Ok(Self {
            method: method.to_string(),
            estimate,
            std_error: (sigma2_hat / n as f64).sqrt(),
            ci_level: 1.0 - significance,
            ci: [lo, hi],
            n,
            p_hat,
            sigma2_hat,
            degenerate,
            diagnostics,
        })
    }

    /// Report for a regression-adjusted fit; `y` and `g` feed the diagnostics.
    pub fn from_fit(method: &str, fit: &AdjustmentFit, y: &[f64], g: &[f64], significance: f64) -> Result<Self> {
        let diagnostics = Diagnostics {
            corr_y_g: correlation(y, g)?,
            var_g: Some(fit.var_g),
        };
        Self::build(
            method,
            fit.alpha1,
            fit.sigma2_hat,
            fit.n,
            fit.p_hat,
            significance,
            fit.degenerate,
            diagnostics,
        )
    }

    /// Difference-in-means report from arm moments.
    pub fn from_moments(method: &str, moments: &SampleMoments, significance: f64) -> Result<Self> {
        let sigma2 = super::variance_estimator(moments, 0.0, 0.0, 0.0);
        Self::build(
            method,
            moments.diff_in_means(),
            sigma2,
            moments.n,
            moments.p_hat,
            significance,
            false,
            Diagnostics {
                corr_y_g: None,
                var_g: None,
            },
        )
    }

    pub fn width(&self) -> f64 {
        self.ci[1] - self.ci[0]
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci[0] <= value && value <= self.ci[1]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Ratios of one report to a reference report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub variance_ratio: f64,
    pub width_ratio: f64,
}

/// σ̂² and CI-width ratios of `a` over `b`. Both must share n and level.
pub fn relative_efficiency(a: &EstimateReport, b: &EstimateReport) -> Result<Efficiency> {
    if a.n != b.n {
        return Err(Error::invalid(format!("reports have different n ({} vs {})", a.n, b.n)));
    }
    if a.ci_level != b.ci_level {
        return Err(Error::invalid(format!(
            "reports have different levels ({} vs {})",
            a.ci_level, b.ci_level
        )));
    }
    if b.width() <= 0.0 || b.sigma2_hat <= 0.0 {
        return Err(Error::invalid(format!("reference method {} has a zero-width interval", b.method)));
    }
    Ok(Efficiency {
        variance_ratio: a.sigma2_hat / b.sigma2_hat,
        width_ratio: a.width() / b.width(),
    })
}

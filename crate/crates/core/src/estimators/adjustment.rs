//! Regression adjustment with a fixed covariate g and the plug-in variance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{least_squares, mean, sample_variance, DenseMatrix};

/// A covariate whose sample variance is below this fraction of Var(Y) is
/// treated as constant.
pub const DEGENERATE_VARIANCE_RATIO: f64 = 1e-12;

/// Per-arm moments shared by every estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub n: usize,
    pub p_hat: f64,
    pub mean_control: f64,
    pub mean_treat: f64,
    pub var_y_control: f64,
    pub var_y_treat: f64,
}

impl SampleMoments {
    pub fn compute(y: &[f64], t: &[bool]) -> Result<Self> {
        if y.len() != t.len() {
            return Err(Error::invalid(format!(
                "outcome has {} rows, treatment has {}",
                y.len(),
                t.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite outcome at row {i}")));
        }
        let (treat, control): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (&v, &ti) in y.iter().zip(t) {
                if ti {
                    a.push(v);
                } else {
                    b.push(v);
                }
            }
            (a, b)
        };
        if treat.len() < 2 || control.len() < 2 {
            return Err(Error::invalid(format!(
                "each arm needs at least 2 rows (treated {}, control {})",
                treat.len(),
                control.len()
            )));
        }
        Ok(Self {
            n: y.len(),
            p_hat: treat.len() as f64 / y.len() as f64,
            mean_control: mean(&control),
            mean_treat: mean(&treat),
            var_y_control: sample_variance(&control)?,
            var_y_treat: sample_variance(&treat)?,
        })
    }

    pub fn diff_in_means(&self) -> f64 {
        self.mean_treat - self.mean_control
    }
}

/// Plug-in asymptotic variance of the adjusted estimator:
///
/// σ̂² = V̂ar(Y|T=0)/(1−p̂) + V̂ar(Y|T=1)/p̂ − V̂ar(g)/(p̂(1−p̂))·[β̂₂p̂ + (β̂₂+β̂₃)(1−p̂)]²,
///
/// floored at zero. With β̂₂ = β̂₃ = 0 it is the difference-in-means variance.
pub fn variance_estimator(moments: &SampleMoments, var_g: f64, beta2: f64, beta3: f64) -> f64 {
    let p = moments.p_hat;
    let unadjusted = moments.var_y_control / (1.0 - p) + moments.var_y_treat / p;
    let slope = beta2 * p + (beta2 + beta3) * (1.0 - p);
    let reduction = var_g / (p * (1.0 - p)) * slope * slope;
    (unadjusted - reduction).max(0.0)
}

/// Result of regressing Y on (1, T, g, T·g).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentFit {
    pub beta: [f64; 4],
    pub alpha1: f64,
    pub g_bar: f64,
    pub p_hat: f64,
    pub var_g: f64,
    pub var_y_control: f64,
    pub var_y_treat: f64,
    pub sigma2_hat: f64,
    pub n: usize,
    /// The covariate was (numerically) constant or collinear with treatment,
    /// so the fit fell back to difference in means.
    pub degenerate: bool,
}

impl AdjustmentFit {
    pub fn std_error(&self) -> f64 {
        (self.sigma2_hat / self.n as f64).sqrt()
    }
}

/// Fits the interacted regression and returns α̂₁ = β̂₁ + β̂₃·ḡ with its
/// plug-in variance. ḡ is the mean of g over all rows.
pub fn adjusted_fit(y: &[f64], t: &[bool], g: &[f64]) -> Result<AdjustmentFit> {
    if g.len() != y.len() {
        return Err(Error::invalid(format!(
            "covariate has {} rows, outcome has {}",
            g.len(),
            y.len()
        )));
    }
    if y.len() < 4 {
        return Err(Error::invalid(format!("adjusted fit needs at least 4 rows, got {}", y.len())));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite covariate at row {i}")));
    }
    let moments = SampleMoments::compute(y, t)?;
    let g_bar = mean(g);
    let var_g = sample_variance(g)?;
    let var_y = sample_variance(y)?;

    let mut fit = AdjustmentFit {
        beta: [moments.mean_control, moments.diff_in_means(), 0.0, 0.0],
        alpha1: moments.diff_in_means(),
        g_bar,
        p_hat: moments.p_hat,
        var_g,
        var_y_control: moments.var_y_control,
        var_y_treat: moments.var_y_treat,
        sigma2_hat: variance_estimator(&moments, var_g, 0.0, 0.0),
        n: moments.n,
        degenerate: true,
    };
    if var_g == 0.0 || var_g < DEGENERATE_VARIANCE_RATIO * var_y {
        return Ok(fit);
    }

    let mut data = Vec::with_capacity(4 * y.len());
    for (&ti, &gi) in t.iter().zip(g) {
        let tf = f64::from(u8::from(ti));
        data.extend_from_slice(&[1.0, tf, gi, tf * gi]);
    }
    let design = DenseMatrix::new(y.len(), 4, data)?;
    let ls = least_squares(&design, y)?;
    if ls.rank < 4 {
        return Ok(fit);
    }
    let b = &ls.coefficients;
    fit.beta = [b[0], b[1], b[2], b[3]];
    fit.alpha1 = b[1] + b[3] * g_bar;
    fit.sigma2_hat = variance_estimator(&moments, var_g, b[2], b[3]);
    fit.degenerate = false;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arms(t: &[u8]) -> Vec<bool> {
        t.iter().map(|&v| v == 1).collect()
    }

    #[test]
    fn zero_covariate_falls_back() {
        let y = [1.0, 2.0, 3.0, 4.0, 6.0, 9.0];
        let t = arms(&[0, 0, 0, 1, 1, 1]);
        let fit = adjusted_fit(&y, &t, &[0.0; 6]).unwrap();
        assert!(fit.degenerate);
        assert!((fit.alpha1 - (19.0 / 3.0 - 2.0)).abs() < 1e-12);
        let m = SampleMoments::compute(&y, &t).unwrap();
        assert_eq!(fit.sigma2_hat, variance_estimator(&m, 0.0, 0.0, 0.0));
    }

    #[test]
    fn covariate_collinear_with_treatment_falls_back() {
        let y = [1.0, 2.0, 3.0, 4.0, 6.0, 9.0];
        let t = arms(&[0, 0, 0, 1, 1, 1]);
        let g: Vec<f64> = t.iter().map(|&ti| if ti { 5.0 } else { -1.0 }).collect();
        let fit = adjusted_fit(&y, &t, &g).unwrap();
        assert!(fit.degenerate);
    }

    #[test]
    fn six_row_example() {
        // The design fits a separate line per arm, so β̂ follows from two
        // simple regressions. Control: y = g, so intercept 0 and slope 1.
        let y = [1.0, 2.0, 3.0, 4.0, 6.0, 7.0];
        let t = arms(&[0, 0, 0, 1, 1, 1]);
        let g = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let fit = adjusted_fit(&y, &t, &g).unwrap();
        // treated slope = Σ(g−5)(y−17/3)/Σ(g−5)² = 3/2; intercept = 17/3 − 7.5 = −11/6.
        let expect = [0.0, -11.0 / 6.0, 1.0, 0.5];
        for (a, b) in fit.beta.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{:?}", fit.beta);
        }
        assert!((fit.alpha1 - (-11.0 / 6.0 + 0.5 * 3.5)).abs() < 1e-12);
        // σ̂² = 1/0.5 + (7/3)/0.5 − 3.5/0.25·(0.5 + 0.75)² is negative, so it floors to 0.
        let sigma2: f64 = 2.0 + 14.0 / 3.0 - 14.0 * 1.5625;
        assert_eq!(fit.sigma2_hat, sigma2.max(0.0));
    }

    #[test]
    fn variance_is_floored() {
        let y = [1.0, 2.0, 3.0, 11.0, 12.0, 13.0];
        let t = arms(&[0, 0, 0, 1, 1, 1]);
        let fit = adjusted_fit(&y, &t, &y).unwrap();
        assert!(fit.sigma2_hat >= 0.0 && fit.sigma2_hat < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let t = arms(&[0, 0, 1, 1]);
        assert!(adjusted_fit(&[1.0, 2.0, 3.0], &t[..3], &[1.0, 2.0, 3.0]).is_err());
        assert!(adjusted_fit(&[1.0, 2.0, 3.0, 4.0], &t, &[1.0, 2.0]).is_err());
        assert!(adjusted_fit(&[1.0, 2.0, 3.0, 4.0], &arms(&[0, 1, 1, 1]), &[1.0, 2.0, 3.0, 5.0]).is_err());
        assert!(adjusted_fit(&[1.0, 2.0, 3.0, 4.0], &t, &[1.0, f64::NAN, 3.0, 5.0]).is_err());
    }
}

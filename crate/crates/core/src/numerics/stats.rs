//! Moment utilities. Every variance here uses the n − 1 divisor.

use crate::error::{Error, Result};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance Σ(v − v̄)²/(n − 1).
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "sample variance needs at least 2 values, got {}",
            values.len()
        )));
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(ss / (values.len() - 1) as f64)
}

/// Sample covariance with the n − 1 divisor. Slices must have equal length ≥ 2.
pub fn sample_covariance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("covariance of slices with different lengths"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("covariance needs at least 2 values"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    Ok(s / (a.len() - 1) as f64)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    let cov = sample_covariance(a, b)?;
    let va = sample_variance(a)?;
    let vb = sample_variance(b)?;
    if va <= 0.0 || vb <= 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0)))
}

//! Synthetic A/A panels with autocorrelated outcomes.
//!
//! Each user has a latent trait u ~ N(0, 1). The outcome in period s is built
//! from z_s = √ρ·u + √(1−ρ)·e_s with independent shocks e_s, so for the
//! gaussian family Corr(y_pre, y) = ρ exactly. Treatment is independent of
//! everything and has no effect, so the true ATE is zero.

use serde::{Deserialize, Serialize};

use crate::data::{ExperimentDataset, PanelDataset};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeFamily {
    /// y = z.
    Gaussian,
    /// y = exp(z), log-normal.
    HeavyTailed,
    /// y ~ Poisson(exp(z/2 + 1)).
    CountLike,
}

impl std::str::FromStr for OutcomeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "heavy-tailed" => Ok(Self::HeavyTailed),
            "count-like" => Ok(Self::CountLike),
            other => Err(Error::invalid(format!(
                "unknown outcome family {other:?} (expected gaussian, heavy-tailed or count-like)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaPanelConfig {
    pub n: usize,
    /// Autocorrelation ρ of the latent outcome between periods, in [0, 1).
    pub rho: f64,
    /// Number of auxiliary pre-period metrics.
    pub n_aux: usize,
    pub family: OutcomeFamily,
}

impl Default for AaPanelConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            rho: 0.7,
            n_aux: 3,
            family: OutcomeFamily::Gaussian,
        }
    }
}

impl AaPanelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("autocorrelation must lie in [0, 1), got {}", self.rho)));
        }
        if self.n < 4 {
            return Err(Error::invalid(format!("panel needs at least 4 rows, got {}", self.n)));
        }
        Ok(())
    }

    /// Covariate names: `y_pre` then `aux1` .. `auxK`.
    pub fn feature_names(&self) -> Vec<String> {
        std::iter::once("y_pre".to_string())
            .chain((1..=self.n_aux).map(|j| format!("aux{j}")))
            .collect()
    }

    /// Names of the same features one period earlier.
    pub fn lagged_names(&self) -> Vec<String> {
        std::iter::once("y_lag2".to_string())
            .chain((1..=self.n_aux).map(|j| format!("aux{j}_lag2")))
            .collect()
    }
}

/// Poisson draw by sequential inversion.
fn poisson(mean: f64, stream: &mut RandomStream) -> f64 {
    let u = stream.uniform01();
    let mut k = 0u32;
    let mut prob = (-mean).exp();
    let mut cdf = prob;
    while u > cdf && prob > 0.0 {
        k += 1;
        prob *= mean / f64::from(k);
        cdf += prob;
    }
    f64::from(k)
}

fn observe(family: OutcomeFamily, z: f64, stream: &mut RandomStream) -> f64 {
    match family {
        OutcomeFamily::Gaussian => z,
        OutcomeFamily::HeavyTailed => z.exp(),
        OutcomeFamily::CountLike => poisson((0.5 * z + 1.0).exp(), stream),
    }
}

/// Auxiliary metric j: a noisy nonlinear view of the latent trait.
fn auxiliary(j: usize, latent: f64, stream: &mut RandomStream) -> f64 {
    let shift = 0.5 * j as f64;
    (latent - shift).tanh() + 0.5 * stream.standard_normal()
}

/// Draws one panel. Experiment covariates are the period t−1 features
/// (`y_pre`, auxiliaries); lagged features are the same metrics at t−2.
pub fn generate_aa_panel(cfg: &AaPanelConfig, stream: &mut RandomStream) -> Result<PanelDataset> {
    cfg.validate()?;
    let (n, width) = (cfg.n, cfg.n_aux + 1);
    let (a, b) = (cfg.rho.sqrt(), (1.0 - cfg.rho).sqrt());
    let mut current = Vec::with_capacity(n);
    let mut pre = Vec::with_capacity(n * width);
    let mut lagged = Vec::with_capacity(n * width);
    let mut treatment = Vec::with_capacity(n);
    for _ in 0..n {
        let u = stream.standard_normal();
        for block in [&mut lagged, &mut pre] {
            let z = a * u + b * stream.standard_normal();
            block.push(observe(cfg.family, z, stream));
            for j in 0..cfg.n_aux {
                block.push(auxiliary(j, u, stream));
            }
        }
        let z = a * u + b * stream.standard_normal();
        current.push(observe(cfg.family, z, stream));
        treatment.push(stream.bernoulli(0.5));
    }
    let covariates = DenseMatrix::new(n, width, pre)?;
    let pre_outcome = covariates.column(0);
    let experiment = ExperimentDataset::new(current, treatment, covariates, cfg.feature_names())?;
    PanelDataset::new(experiment, pre_outcome, Some(DenseMatrix::new(n, width, lagged)?))
}

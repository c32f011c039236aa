//! Friedman benchmark with a heterogeneous treatment effect.
//!
//! Y = b(X) + T·τ(X) + u, with X ~ N(0, I_d), T ~ Bernoulli(p) and
//! u ~ N(0, σ²), where b is the Friedman function and τ(x) = x₁ + softplus(x₂).

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::data::ExperimentDataset;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, GaussHermite, RandomStream};

const QUADRATURE_NODES: usize = 96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanDgpConfig {
    pub n: usize,
    pub d: usize,
    pub noise_sd: f64,
    pub treat_prob: f64,
}

impl Default for FriedmanDgpConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            d: 100,
            noise_sd: 25.0,
            treat_prob: 0.5,
        }
    }
}

impl FriedmanDgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 5 {
            return Err(Error::invalid(format!("the Friedman function needs d >= 5, got {}", self.d)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd > 0.0) {
            return Err(Error::invalid(format!("noise sd must be finite and positive, got {}", self.noise_sd)));
        }
        if !(0.0..=1.0).contains(&self.treat_prob) {
            return Err(Error::invalid(format!("treatment probability {} outside [0, 1]", self.treat_prob)));
        }
        Ok(())
    }
}

/// b(x) = 10 sin(π x₁x₂) + 20(x₃ − 0.5)² + 10x₄ + 5x₅. Panics on rows shorter than 5.
#[inline]
pub fn friedman_b(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Checked variant of [`friedman_b`].
pub fn try_friedman_b(x: &[f64]) -> Result<f64> {
    if x.len() < 5 {
        return Err(Error::invalid(format!("Friedman function needs 5 covariates, got {}", x.len())));
    }
    Ok(friedman_b(x))
}

/// log(1 + eˣ) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// τ(x) = x₁ + log(1 + exp(x₂)).
#[inline]
pub fn friedman_tau(x: &[f64]) -> f64 {
    x[0] + softplus(x[1])
}

/// Draws one dataset. Row i consumes d normals, one uniform for T, then one
/// normal for the noise, in that order.
pub fn generate_friedman(cfg: &FriedmanDgpConfig, stream: &mut RandomStream) -> Result<ExperimentDataset> {
    cfg.validate()?;
    let (n, d) = (cfg.n, cfg.d);
    let mut data = Vec::with_capacity(n * d);
    let mut outcome = Vec::with_capacity(n);
    let mut treatment = Vec::with_capacity(n);
    for _ in 0..n {
        let start = data.len();
        for _ in 0..d {
            data.push(stream.standard_normal());
        }
        let x = &data[start..];
        let t = stream.bernoulli(cfg.treat_prob);
        let u = cfg.noise_sd * stream.standard_normal();
        let tau = if t { friedman_tau(x) } else { 0.0 };
        outcome.push(friedman_b(x) + tau + u);
        treatment.push(t);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    ExperimentDataset::new(outcome, treatment, DenseMatrix::new(n, d, data)?, names)
}

fn quadrature() -> &'static GaussHermite {
    static RULE: OnceLock<GaussHermite> = OnceLock::new();
    RULE.get_or_init(|| GaussHermite::new(QUADRATURE_NODES))
}

/// E[softplus(Z)] and Var[softplus(Z)] for Z ~ N(0, 1) with an `nodes`-point rule.
pub fn softplus_normal_moments(nodes: usize) -> (f64, f64) {
    let rule = GaussHermite::new(nodes);
    let m1 = rule.expectation(softplus);
    let m2 = rule.expectation(|z| softplus(z).powi(2));
    (m1, m2 - m1 * m1)
}

/// True average treatment effect E[τ(X)] = E[softplus(Z)].
pub fn true_ate_friedman() -> f64 {
    static ATE: OnceLock<f64> = OnceLock::new();
    *ATE.get_or_init(|| quadrature().expectation(softplus))
}

/// Var[τ(X)] = Var(X₁) + Var(softplus(X₂)) = 1 + Var(softplus(Z)).
pub fn tau_variance_friedman() -> f64 {
    let rule = quadrature();
    let m1 = rule.expectation(softplus);
    let m2 = rule.expectation(|z| softplus(z).powi(2));
    1.0 + m2 - m1 * m1
}

/// Semiparametric efficiency bound for an ATE with homoskedastic noise:
/// σ²·(1/p + 1/(1 − p)) + Var[τ(X)].
pub fn efficiency_bound(noise_sd: f64, treat_prob: f64, tau_variance: f64) -> Result<f64> {
    if !(treat_prob > 0.0 && treat_prob < 1.0) {
        return Err(Error::invalid(format!("treatment probability must lie in (0, 1), got {treat_prob}")));
    }
    if !(noise_sd >= 0.0 && tau_variance >= 0.0) {
        return Err(Error::invalid("noise sd and effect variance must be non-negative"));
    }
    Ok(noise_sd * noise_sd * (1.0 / treat_prob + 1.0 / (1.0 - treat_prob)) + tau_variance)
}

pub fn efficiency_bound_friedman(noise_sd: f64, treat_prob: f64) -> Result<f64> {
    efficiency_bound(noise_sd, treat_prob, tau_variance_friedman())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{mean, sample_variance};

    fn row(prefix: &[f64]) -> Vec<f64> {
        let mut r = prefix.to_vec();
        r.resize(8, 0.0);
        r
    }

    #[test]
    fn friedman_values() {
        assert!((friedman_b(&row(&[0.5, 1.0, 0.5, 0.0, 0.0])) - 10.0).abs() < 1e-12);
        assert!(friedman_b(&row(&[0.0, 0.0, 0.5, 0.0, 0.0])).abs() < 1e-12);
        assert!((friedman_b(&row(&[0.0, 0.0, 0.0, 1.0, 1.0])) - 20.0).abs() < 1e-12);
        assert!(try_friedman_b(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn tau_values() {
        assert!((friedman_tau(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((friedman_tau(&[1.0, -50.0]) - 1.0).abs() < 1e-20);
        let big = friedman_tau(&[0.0, 100.0]);
        assert!(big.is_finite() && (big - 100.0).abs() < 1e-12);
        assert!(friedman_tau(&[0.0, 800.0]).is_finite());
    }

    #[test]
    fn ate_from_quadrature() {
        // Reference 0.806059183347439784528 from 30-digit adaptive quadrature.
        assert!((true_ate_friedman() - 0.806_059_183_347_439_8).abs() < 1e-13);
        let (a, va) = softplus_normal_moments(64);
        let (b, vb) = softplus_normal_moments(128);
        assert!((a - b).abs() < 1e-10);
        assert!((va - vb).abs() < 1e-10);
    }

    #[test]
    fn ate_agrees_with_monte_carlo() {
        // 10⁸ draws: sd of the mean is sqrt(0.2715/1e8) ≈ 5.2e-5.
        let mut s = RandomStream::new(2024, 0);
        let n = 100_000_000;
        let mc = (0..n).map(|_| softplus(s.standard_normal())).sum::<f64>() / n as f64;
        assert!((mc - true_ate_friedman()).abs() < 2.5e-4, "{mc}");
    }

    #[test]
    fn bound_values() {
        let bound = efficiency_bound_friedman(25.0, 0.5).unwrap();
        assert!((bound - (2500.0 + 1.271_514_501_800_558_7)).abs() < 1e-9, "{bound}");
        assert_eq!(efficiency_bound(0.0, 0.5, 0.0).unwrap(), 0.0);
        let at = |p: f64| efficiency_bound(1.0, p, 0.0).unwrap();
        assert!(at(0.5) < at(0.4) && at(0.5) < at(0.6));
        assert!(efficiency_bound(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn vanishing_noise_control_rows_equal_b() {
        let cfg = FriedmanDgpConfig {
            n: 200,
            d: 6,
            noise_sd: 1e-12,
            treat_prob: 0.0,
        };
        let ds = generate_friedman(&cfg, &mut RandomStream::new(1, 0)).unwrap();
        for i in 0..ds.len() {
            assert!(!ds.treatment()[i]);
            assert!((ds.outcome()[i] - friedman_b(ds.covariates().row(i))).abs() < 1e-10);
        }
        let zero = FriedmanDgpConfig { noise_sd: 0.0, ..cfg };
        assert!(generate_friedman(&zero, &mut RandomStream::new(1, 0)).is_err());
    }

    #[test]
    fn treatment_share() {
        let cfg = FriedmanDgpConfig {
            n: 1_000_000,
            d: 5,
            noise_sd: 1.0,
            treat_prob: 0.5,
        };
        let ds = generate_friedman(&cfg, &mut RandomStream::new(3, 0)).unwrap();
        assert!((ds.treated_fraction() - 0.5).abs() < 0.002);
    }

    #[test]
    fn covariate_moments_and_independence() {
        let cfg = FriedmanDgpConfig {
            n: 100_000,
            d: 10,
            ..Default::default()
        };
        let ds = generate_friedman(&cfg, &mut RandomStream::new(4, 0)).unwrap();
        let bound = 1.0 / (cfg.n as f64).sqrt();
        let t: Vec<f64> = ds.treatment().iter().map(|&t| f64::from(u8::from(t))).collect();
        for j in 0..cfg.d {
            let col = ds.covariates().column(j);
            assert!(mean(&col).abs() < 4.0 * bound);
            assert!((sample_variance(&col).unwrap() - 1.0).abs() < 5.0 * bound);
            let c = crate::numerics::correlation(&col, &t).unwrap().unwrap();
            assert!(c.abs() < 4.0 * bound);
        }
    }

    #[test]
    fn control_outcome_variance() {
        // Oracle: Var(b(X)) from 10⁷ independent draws, then compare the
        // control-arm variance with 25² + Var(b).
        let mut s = RandomStream::new(99, 1);
        let draws: Vec<f64> = (0..10_000_000)
            .map(|_| {
                let x: Vec<f64> = (0..5).map(|_| s.standard_normal()).collect();
                friedman_b(&x)
            })
            .collect();
        let var_b = sample_variance(&draws).unwrap();
        let cfg = FriedmanDgpConfig {
            n: 200_000,
            d: 100,
            ..Default::default()
        };
        let ds = generate_friedman(&cfg, &mut RandomStream::new(5, 0)).unwrap();
        let control: Vec<f64> = ds
            .outcome()
            .iter()
            .zip(ds.treatment())
            .filter(|(_, &t)| !t)
            .map(|(y, _)| *y)
            .collect();
        let v = sample_variance(&control).unwrap();
        let expected = 625.0 + var_b;
        // sd of a sample variance with ~1e5 rows and kurtosis ≈ 4 is ≈ 1%.
        assert!((v / expected - 1.0).abs() < 0.03, "{v} vs {expected}");
    }
}

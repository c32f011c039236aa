//! Supervised learners that produce the outcome predictor used for adjustment.
//!
//! A [`LearnerSpec`] is a recipe; [`train`] turns it into a [`Predictor`],
//! an immutable and serializable prediction function.

pub mod elastic_net;
pub mod gbdt;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::sim::friedman::{friedman_b, friedman_tau};

pub use elastic_net::{elastic_net_fit, soft_threshold, CvConfig, ElasticNetModel, ElasticNetParams};
pub use gbdt::{gbdt_fit, GbdtModel, GbdtParams, RegressionTree, TreeNode};

type RowFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A user-supplied closed-form predictor.
#[derive(Clone)]
pub struct CustomFunction(pub Arc<RowFn>);

impl CustomFunction {
    pub fn new<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self(Arc::new(f))
    }
}

impl fmt::Debug for CustomFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFunction(..)")
    }
}

impl PartialEq for CustomFunction {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

/// A data-independent prediction function. Training on it is a no-op.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FixedFunction {
    /// Returns one covariate unchanged.
    Column { index: usize },
    Linear { intercept: f64, weights: Vec<f64> },
    /// The Friedman baseline b(x), reading the first five covariates.
    Friedman,
    /// b(x) + p·τ(x), the conditional mean of Y under treatment share p.
    FriedmanConditionalMean { treat_prob: f64 },
    #[serde(skip)]
    Custom(CustomFunction),
}

impl FixedFunction {
    fn min_features(&self) -> usize {
        match self {
            FixedFunction::Column { index } => index + 1,
            FixedFunction::Linear { weights, .. } => weights.len(),
            FixedFunction::Friedman | FixedFunction::FriedmanConditionalMean { .. } => 5,
            FixedFunction::Custom(_) => 0,
        }
    }

    #[inline]
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        match self {
            FixedFunction::Column { index } => row[*index],
            FixedFunction::Linear { intercept, weights } => {
                intercept + weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
            }
            FixedFunction::Friedman => friedman_b(row),
            FixedFunction::FriedmanConditionalMean { treat_prob } => friedman_b(row) + treat_prob * friedman_tau(row),
            FixedFunction::Custom(f) => (f.0)(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerKind {
    ElasticNet(ElasticNetParams),
    Gbdt(GbdtParams),
    ConstantMean,
    Zero,
    FixedFunction { function: FixedFunction },
}

/// A supervised-learning recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    /// Seeds any internal randomness (currently the optional CV split).
    #[serde(default)]
    pub seed_offset: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self { kind, seed_offset: 0 }
    }

    pub fn elastic_net() -> Self {
        Self::new(LearnerKind::ElasticNet(ElasticNetParams::default()))
    }

    pub fn gbdt() -> Self {
        Self::new(LearnerKind::Gbdt(GbdtParams::default()))
    }

    pub fn constant_mean() -> Self {
        Self::new(LearnerKind::ConstantMean)
    }

    pub fn zero() -> Self {
        Self::new(LearnerKind::Zero)
    }

    pub fn fixed(function: FixedFunction) -> Self {
        Self::new(LearnerKind::FixedFunction { function })
    }

    /// Short name used in reports, e.g. `gbdt`.
    pub fn name(&self) -> &'static str {
        match self.kind {
            LearnerKind::ElasticNet(_) => "elastic-net",
            LearnerKind::Gbdt(_) => "gbdt",
            LearnerKind::ConstantMean => "constant-mean",
            LearnerKind::Zero => "zero",
            LearnerKind::FixedFunction { .. } => "fixed-function",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            LearnerKind::ElasticNet(p) => p.validate(),
            LearnerKind::Gbdt(p) => p.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    ElasticNet(ElasticNetModel),
    Gbdt(GbdtModel),
    Constant { value: f64 },
    FixedFunction { function: FixedFunction },
}

/// A trained prediction function ĝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub n_features: usize,
    pub model: Model,
}

impl Predictor {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.model {
            Model::ElasticNet(m) => m.predict_row(row),
            Model::Gbdt(m) => m.predict_row(row),
            Model::Constant { value } => *value,
            Model::FixedFunction { function } => function.evaluate(row),
        }
    }

    /// Row-wise predictions; the column count must match training.
    pub fn predict(&self, features: &DenseMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.n_features {
            return Err(Error::invalid(format!(
                "predictor expects {} feature columns, got {}",
                self.n_features,
                features.cols()
            )));
        }
        Ok(features.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    /// Non-fatal training diagnostics, e.g. elastic net non-convergence.
    pub fn warning(&self) -> Option<&str> {
        match &self.model {
            Model::ElasticNet(m) => m.warning.as_deref(),
            _ => None,
        }
    }
}

/// Trains `spec` on the given rows. Deterministic in `(spec, data)`.
pub fn train(spec: &LearnerSpec, features: &DenseMatrix, targets: &[f64]) -> Result<Predictor> {
    spec.validate()?;
    elastic_net::check_inputs(features, targets)?;
    let n_features = features.cols();
    let model = match &spec.kind {
        LearnerKind::ElasticNet(p) => {
            Model::ElasticNet(elastic_net::fit_with_params(features, targets, p, spec.seed_offset)?)
        }
        LearnerKind::Gbdt(p) => Model::Gbdt(gbdt_fit(features, targets, p)?),
        LearnerKind::ConstantMean => Model::Constant {
            value: targets.iter().sum::<f64>() / targets.len() as f64,
        },
        LearnerKind::Zero => Model::Constant { value: 0.0 },
        LearnerKind::FixedFunction { function } => {
            if function.min_features() > n_features {
                return Err(Error::invalid(format!(
                    "fixed function needs at least {} feature columns, got {n_features}",
                    function.min_features()
                )));
            }
            Model::FixedFunction {
                function: function.clone(),
            }
        }
    };
    Ok(Predictor { n_features, model })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{least_squares, RandomStream};
    use proptest::prelude::*;

    fn problem(seed: u64, n: usize, d: usize) -> (DenseMatrix, Vec<f64>) {
        let mut s = RandomStream::new(seed, 0);
        let x = DenseMatrix::new(n, d, s.normals(n * d)).unwrap();
        let y = (0..n)
            .map(|i| {
                let r = x.row(i);
                r[0] * 2.0 - r[d - 1] + (r[0] * r[d - 1]).sin() + 0.5 * s.standard_normal()
            })
            .collect();
        (x, y)
    }

    #[test]
    fn constant_mean_and_zero() {
        let (x, y) = problem(1, 20, 2);
        let mean = y.iter().sum::<f64>() / 20.0;
        let p = train(&LearnerSpec::constant_mean(), &x, &y).unwrap();
        assert!(p.predict(&x).unwrap().iter().all(|&v| v == mean));
        let p = train(&LearnerSpec::zero(), &x, &y).unwrap();
        assert!(p.predict(&x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn column_mismatch_is_rejected() {
        let (x, y) = problem(2, 20, 3);
        let p = train(&LearnerSpec::gbdt(), &x, &y).unwrap();
        assert!(p.predict(&x.select_columns(&[0, 1])).is_err());
    }

    #[test]
    fn too_few_rows() {
        let x = DenseMatrix::zeros(1, 2);
        assert!(train(&LearnerSpec::zero(), &x, &[1.0]).is_err());
        let x = DenseMatrix::zeros(0, 2);
        assert!(train(&LearnerSpec::zero(), &x, &[]).is_err());
    }

    #[test]
    fn gbdt_deep_trees_beat_variance() {
        let (x, y) = problem(3, 80, 3);
        let spec = LearnerSpec::new(LearnerKind::Gbdt(GbdtParams {
            n_trees: 5,
            learning_rate: 1.0,
            max_depth: 6,
            min_samples_leaf: 1,
        }));
        let p = train(&spec, &x, &y).unwrap();
        let pred = p.predict(&x).unwrap();
        let mse = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 80.0;
        let mean = y.iter().sum::<f64>() / 80.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 80.0;
        assert!(mse < var);
    }

    #[test]
    fn elastic_net_without_penalty_is_ols() {
        let (x, y) = problem(4, 100, 3);
        let spec = LearnerSpec::new(LearnerKind::ElasticNet(ElasticNetParams {
            lambda: 0.0,
            tol: 1e-12,
            max_iter: 100_000,
            ..Default::default()
        }));
        let p = train(&spec, &x, &y).unwrap();
        let mut cols = vec![vec![1.0; 100]];
        cols.extend((0..3).map(|j| x.column(j)));
        let design = DenseMatrix::from_columns(&cols).unwrap();
        let ols = least_squares(&design, &y).unwrap();
        let fitted = crate::numerics::mat_vec(&design, &ols.coefficients);
        for (a, b) in p.predict(&x).unwrap().iter().zip(&fitted) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn fixed_function_checks_width() {
        let (x, y) = problem(5, 10, 3);
        assert!(train(&LearnerSpec::fixed(FixedFunction::Friedman), &x, &y).is_err());
        let p = train(&LearnerSpec::fixed(FixedFunction::Column { index: 2 }), &x, &y).unwrap();
        assert_eq!(p.predict(&x).unwrap(), x.column(2));
        let custom = LearnerSpec::fixed(FixedFunction::Custom(CustomFunction::new(|r| r[0] + 1.0)));
        let p = train(&custom, &x, &y).unwrap();
        assert_eq!(p.predict_row(x.row(0)), x.get(0, 0) + 1.0);
    }

    #[test]
    fn spec_json_round_trip() {
        for spec in [
            LearnerSpec::gbdt(),
            LearnerSpec::elastic_net(),
            LearnerSpec::zero(),
            LearnerSpec::fixed(FixedFunction::Linear {
                intercept: 1.0,
                weights: vec![2.0],
            }),
        ] {
            let json = serde_json::to_string(&spec).unwrap();
            let back: LearnerSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(spec, back);
        }
        let json = r#"{"kind":"gbdt","n_trees":7}"#;
        let spec: LearnerSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec.kind,
            LearnerKind::Gbdt(GbdtParams {
                n_trees: 7,
                ..Default::default()
            })
        );
    }

    #[test]
    fn custom_functions_do_not_serialize() {
        let spec = LearnerSpec::fixed(FixedFunction::Custom(CustomFunction::new(|_| 0.0)));
        assert!(serde_json::to_string(&spec).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn training_is_deterministic(seed in any::<u64>()) {
            let (x, y) = problem(seed, 60, 3);
            for spec in [LearnerSpec::gbdt(), LearnerSpec::elastic_net()] {
                let a = train(&spec, &x, &y).unwrap().predict(&x).unwrap();
                let b = train(&spec, &x, &y).unwrap().predict(&x).unwrap();
                prop_assert_eq!(
                    a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
            }
        }

        #[test]
        fn trained_predictor_round_trips_through_json(seed in any::<u64>()) {
            let (x, y) = problem(seed, 40, 2);
            let p = train(&LearnerSpec::gbdt(), &x, &y).unwrap();
            let back: Predictor = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
            prop_assert_eq!(p.predict(&x).unwrap(), back.predict(&x).unwrap());
        }
    }
}

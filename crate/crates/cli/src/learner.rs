use clap::{Args, ValueEnum};
use mlrate_core::learners::{ElasticNetParams, FixedFunction, GbdtParams, LearnerKind, LearnerSpec};
use mlrate_core::Error;

use crate::user_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerChoice {
    Gbdt,
    Elasticnet,
    /// Predicts 0, which reduces the estimate to difference in means
    None,
    ConstantMean,
    /// Uses the first feature column unchanged
    Identity,
}

/// Learner selection and hyperparameters.
#[derive(Debug, Clone, Args)]
pub struct LearnerArgs {
    /// Learner producing the adjustment covariate
    #[arg(long, value_enum, default_value = "gbdt")]
    pub learner: LearnerChoice,
    /// Boosting rounds (gbdt)
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Shrinkage per boosting round, in (0, 1] (gbdt)
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Maximum tree depth (gbdt)
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum rows per leaf (gbdt)
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    /// Penalty strength (elasticnet)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// L1 share of the penalty, in [0, 1] (elasticnet)
    #[arg(long)]
    pub l1_ratio: Option<f64>,
    /// Coordinate-descent sweep limit (elasticnet)
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Convergence tolerance on coefficient updates (elasticnet)
    #[arg(long)]
    pub tol: Option<f64>,
}

impl LearnerArgs {
    pub fn spec(&self) -> Result<LearnerSpec, Error> {
        let gbdt_flags = [
            ("--n-trees", self.n_trees.is_some()),
            ("--learning-rate", self.learning_rate.is_some()),
            ("--max-depth", self.max_depth.is_some()),
            ("--min-samples-leaf", self.min_samples_leaf.is_some()),
        ];
        let en_flags = [
            ("--lambda", self.lambda.is_some()),
            ("--l1-ratio", self.l1_ratio.is_some()),
            ("--max-iter", self.max_iter.is_some()),
            ("--tol", self.tol.is_some()),
        ];
        let reject = |flags: &[(&str, bool)]| -> Result<(), Error> {
            match flags.iter().find(|(_, set)| *set) {
                Some((name, _)) => Err(user_error(format!(
                    "{name} does not apply to --learner {}",
                    self.learner.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
                ))),
                None => Ok(()),
            }
        };
        let kind = match self.learner {
            LearnerChoice::Gbdt => {
                reject(&en_flags)?;
                let d = GbdtParams::default();
                LearnerKind::Gbdt(GbdtParams {
                    n_trees: self.n_trees.unwrap_or(d.n_trees),
                    learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
                    max_depth: self.max_depth.unwrap_or(d.max_depth),
                    min_samples_leaf: self.min_samples_leaf.unwrap_or(d.min_samples_leaf),
                })
            }
            LearnerChoice::Elasticnet => {
                reject(&gbdt_flags)?;
                let d = ElasticNetParams::default();
                LearnerKind::ElasticNet(ElasticNetParams {
                    lambda: self.lambda.unwrap_or(d.lambda),
                    l1_ratio: self.l1_ratio.unwrap_or(d.l1_ratio),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                    tol: self.tol.unwrap_or(d.tol),
                    cv: None,
                })
            }
            other => {
                reject(&gbdt_flags)?;
                reject(&en_flags)?;
                match other {
                    LearnerChoice::None => LearnerKind::Zero,
                    LearnerChoice::ConstantMean => LearnerKind::ConstantMean,
                    _ => LearnerKind::FixedFunction {
                        function: FixedFunction::Column { index: 0 },
                    },
                }
            }
        };
        let spec = LearnerSpec::new(kind);
        spec.validate()?;
        Ok(spec)
    }

    /// Whether the learner reads any feature column.
    pub fn needs_features(&self) -> bool {
        !matches!(self.learner, LearnerChoice::None | LearnerChoice::ConstantMean)
    }
}

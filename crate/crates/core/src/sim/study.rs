//! Monte Carlo coverage and interval-width studies.
//!
//! Repetition r draws its data from stream `(master_seed, r)` and its fold
//! split from a stream derived from that one, so any repetition can be
//! replayed alone and results do not depend on the worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::friedman::{generate_friedman, true_ate_friedman, FriedmanDgpConfig};
use super::panel::{generate_aa_panel, AaPanelConfig};
use crate::crossfit::preperiod_fit;
use crate::data::{format_real, write_table, ExperimentDataset, PanelDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    adjusted_fit, cuped_estimate, diff_in_diff, diff_in_means, mlrate_run, EstimateReport, MlrateConfig,
};
use crate::learners::LearnerSpec;
use crate::numerics::RandomStream;

const FOLD_SALT: u64 = 0x666f_6c64_7321;

/// Studies fail when more than this share of repetitions of any method fail.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Data-generating process for a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dgp", rename_all = "kebab-case")]
pub enum Dgp {
    Friedman(FriedmanDgpConfig),
    AaPanel(AaPanelConfig),
}

/// One generated dataset.
#[derive(Debug, Clone)]
pub enum SimSample {
    Plain(ExperimentDataset),
    Panel(PanelDataset),
}

impl SimSample {
    pub fn experiment(&self) -> &ExperimentDataset {
        match self {
            SimSample::Plain(ds) => ds,
            SimSample::Panel(p) => &p.experiment,
        }
    }

    pub fn panel(&self) -> Option<&PanelDataset> {
        match self {
            SimSample::Plain(_) => None,
            SimSample::Panel(p) => Some(p),
        }
    }
}

impl Dgp {
    pub fn name(&self) -> &'static str {
        match self {
            Dgp::Friedman(_) => "friedman",
            Dgp::AaPanel(_) => "aa-panel",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Dgp::Friedman(c) => c.n,
            Dgp::AaPanel(c) => c.n,
        }
    }

    pub fn true_ate(&self) -> f64 {
        match self {
            Dgp::Friedman(_) => true_ate_friedman(),
            Dgp::AaPanel(_) => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dgp::Friedman(c) => c.validate(),
            Dgp::AaPanel(c) => c.validate(),
        }
    }

    pub fn generate(&self, stream: &mut RandomStream) -> Result<SimSample> {
        match self {
            Dgp::Friedman(c) => generate_friedman(c, stream).map(SimSample::Plain),
            Dgp::AaPanel(c) => generate_aa_panel(c, stream).map(SimSample::Panel),
        }
    }
}

/// Which estimator a study method runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "kebab-case")]
pub enum Estimator {
    Mlrate {
        learner: LearnerSpec,
        k: usize,
        #[serde(default)]
        censor: Option<f64>,
    },
    DiffInMeans,
    /// Difference in means of Y − y_pre (panels only).
    DiffInDiff,
    /// Adjustment on y_pre (panels only).
    Cuped,
    /// Adjustment on a single model trained on pre-period data (panels only).
    Preperiod { learner: LearnerSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMethod {
    pub label: String,
    pub estimator: Estimator,
    /// Multiplies the interval half-width. Anything other than 1 yields a
    /// deliberately miscalibrated method.
    #[serde(default = "unit")]
    pub ci_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl StudyMethod {
    pub fn new(label: impl Into<String>, estimator: Estimator) -> Self {
        Self {
            label: label.into(),
            estimator,
            ci_scale: 1.0,
        }
    }

    pub fn mlrate(label: impl Into<String>, learner: LearnerSpec, k: usize) -> Self {
        Self::new(label, Estimator::Mlrate { learner, k, censor: None })
    }

    fn run(&self, sample: &SimSample, fold_stream: &RandomStream, significance: f64) -> Result<EstimateReport> {
        let ds = sample.experiment();
        let panel = || {
            sample
                .panel()
                .ok_or_else(|| Error::invalid(format!("method {} needs a panel DGP", self.label)))
        };
        let mut report = match &self.estimator {
            Estimator::Mlrate { learner, k, censor } => {
                let cfg = MlrateConfig {
                    learner: learner.clone(),
                    k: *k,
                    significance,
                    censor: *censor,
                    features: None,
                };
                mlrate_run(ds, &cfg, &mut fold_stream.clone())?.report
            }
            Estimator::DiffInMeans => diff_in_means(ds.outcome(), ds.treatment(), significance)?,
            Estimator::DiffInDiff => diff_in_diff(ds.outcome(), ds.treatment(), &panel()?.pre_outcome, significance)?,
            Estimator::Cuped => cuped_estimate(panel()?, significance)?,
            Estimator::Preperiod { learner } => {
                let g = preperiod_fit(panel()?, learner)?;
                let fit = adjusted_fit(ds.outcome(), ds.treatment(), &g)?;
                EstimateReport::from_fit("preperiod", &fit, ds.outcome(), &g, significance)?
            }
        };
        if self.ci_scale != 1.0 {
            let half = 0.5 * report.width() * self.ci_scale;
            report.ci = [report.estimate - half, report.estimate + half];
        }
        report.method = self.label.clone();
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dgp: Dgp,
    pub methods: Vec<StudyMethod>,
    pub reps: usize,
    pub significance: f64,
    pub master_seed: u64,
    /// Label of the method widths are compared against.
    pub baseline: Option<String>,
}

/// One method on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub method: String,
    pub estimate: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub sigma2_hat: Option<f64>,
    pub covered: Option<bool>,
    pub error: Option<String>,
}

impl RepRecord {
    pub fn width(&self) -> Option<f64> {
        Some(self.upper? - self.lower?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub completed: usize,
    pub failures: usize,
    pub coverage: f64,
    /// 1.96·√(c(1−c)/reps).
    pub coverage_ci: f64,
    pub mean_estimate: f64,
    pub mean_width: f64,
    pub mean_sigma2_hat: f64,
    /// Mean over repetitions of this method's width divided by the baseline's.
    pub mean_relative_width: Option<f64>,
    /// Coverage is more than three binomial standard errors from nominal.
    pub miscalibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStudyResult {
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    pub ci_level: f64,
    pub master_seed: u64,
    pub true_ate: f64,
    pub baseline: Option<String>,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<RepRecord>,
}

/// Binomial 95% half-width 1.96·√(c(1−c)/reps).
pub fn coverage_half_width(coverage: f64, reps: usize) -> f64 {
    1.96 * (coverage * (1.0 - coverage) / reps as f64).sqrt()
}

fn run_rep(cfg: &StudyConfig, rep: usize) -> Vec<RepRecord> {
    let mut data_stream = RandomStream::new(cfg.master_seed, rep as u64);
    let fold_stream = data_stream.derive(FOLD_SALT);
    let truth = cfg.dgp.true_ate();
    let sample = cfg.dgp.generate(&mut data_stream);
    cfg.methods
        .iter()
        .map(|m| {
            let outcome = sample
                .as_ref()
                .map_err(|e| Error::invalid(format!("data generation failed: {e}")))
                .and_then(|s| m.run(s, &fold_stream, cfg.significance));
            match outcome {
                Ok(r) => RepRecord {
                    rep,
                    method: m.label.clone(),
                    estimate: Some(r.estimate),
                    lower: Some(r.ci[0]),
                    upper: Some(r.ci[1]),
                    sigma2_hat: Some(r.sigma2_hat),
                    covered: Some(r.covers(truth)),
                    error: None,
                },
                Err(e) => RepRecord {
                    rep,
                    method: m.label.clone(),
                    estimate: None,
                    lower: None,
                    upper: None,
                    sigma2_hat: None,
                    covered: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn summarize(cfg: &StudyConfig, records: &[RepRecord]) -> Vec<MethodSummary> {
    let m = cfg.methods.len();
    let baseline = cfg
        .baseline
        .as_ref()
        .and_then(|b| cfg.methods.iter().position(|x| &x.label == b));
    let nominal = 1.0 - cfg.significance;
    (0..m)
        .map(|j| {
            let rows: Vec<&RepRecord> = records.iter().skip(j).step_by(m).collect();
            let done: Vec<&RepRecord> = rows.iter().copied().filter(|r| r.error.is_none()).collect();
            let completed = done.len();
            let avg = |f: &dyn Fn(&RepRecord) -> f64| done.iter().map(|r| f(r)).sum::<f64>() / completed as f64;
            let coverage = avg(&|r| f64::from(u8::from(r.covered == Some(true))));
            let ratios: Vec<f64> = baseline
                .map(|b| {
                    (0..cfg.reps)
                        .filter_map(|rep| {
                            let own = records[rep * m + j].width()?;
                            let base = records[rep * m + b].width()?;
                            (base > 0.0).then(|| own / base)
                        })
                        .collect()
                })
                .unwrap_or_default();
            let mean_relative_width =
                (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
            MethodSummary {
                method: cfg.methods[j].label.clone(),
                completed,
                failures: rows.len() - completed,
                coverage,
                coverage_ci: coverage_half_width(coverage, completed),
                mean_estimate: avg(&|r| r.estimate.unwrap_or(f64::NAN)),
                mean_width: avg(&|r| r.width().unwrap_or(f64::NAN)),
                mean_sigma2_hat: avg(&|r| r.sigma2_hat.unwrap_or(f64::NAN)),
                mean_relative_width,
                miscalibrated: (coverage - nominal).abs() > 3.0 * (nominal * (1.0 - nominal) / completed as f64).sqrt(),
            }
        })
        .collect()
}

/// Runs every method on `reps` independent datasets using `threads` workers
/// (0 means the rayon default). The result depends only on `cfg`.
pub fn run_coverage_study(cfg: &StudyConfig, threads: usize) -> Result<CoverageStudyResult> {
    cfg.dgp.validate()?;
    if cfg.reps == 0 {
        return Err(Error::invalid("a study needs at least one repetition"));
    }
    if cfg.methods.is_empty() {
        return Err(Error::invalid("a study needs at least one method"));
    }
    if !(cfg.significance > 0.0 && cfg.significance < 1.0) {
        return Err(Error::invalid(format!(
            "significance level must lie in (0, 1), got {}",
            cfg.significance
        )));
    }
    for (i, m) in cfg.methods.iter().enumerate() {
        if cfg.methods[..i].iter().any(|o| o.label == m.label) {
            return Err(Error::invalid(format!("duplicate method label {}", m.label)));
        }
        if !(m.ci_scale.is_finite() && m.ci_scale > 0.0) {
            return Err(Error::invalid(format!("ci scale of {} must be positive", m.label)));
        }
        if let Estimator::Mlrate { learner, .. } | Estimator::Preperiod { learner } = &m.estimator {
            learner.validate()?;
        }
    }
    if let Some(b) = &cfg.baseline {
        if !cfg.methods.iter().any(|m| &m.label == b) {
            return Err(Error::invalid(format!("baseline {b} is not among the methods")));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let per_rep: Vec<Vec<RepRecord>> = pool.install(|| (0..cfg.reps).into_par_iter().map(|r| run_rep(cfg, r)).collect());
    let records: Vec<RepRecord> = per_rep.into_iter().flatten().collect();
    let methods = summarize(cfg, &records);

    if let Some(bad) = methods
        .iter()
        .find(|s| s.failures as f64 > MAX_FAILURE_RATE * cfg.reps as f64)
    {
        let first = records
            .iter()
            .find(|r| r.method == bad.method && r.error.is_some())
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::StudyFailed(format!(
            "method {} failed on {} of {} repetitions (first error: {first})",
            bad.method, bad.failures, cfg.reps
        )));
    }

    Ok(CoverageStudyResult {
        dgp: cfg.dgp.name().to_string(),
        n: cfg.dgp.n(),
        reps: cfg.reps,
        ci_level: 1.0 - cfg.significance,
        master_seed: cfg.master_seed,
        true_ate: cfg.dgp.true_ate(),
        baseline: cfg.baseline.clone(),
        methods,
        records,
    })
}

impl CoverageStudyResult {
    /// Summary row for a method label.
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == label)
    }

    /// One CSV row per repetition per method.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<()> {
        let header: Vec<String> = ["rep", "method", "estimate", "lower", "upper", "sigma2_hat", "covered", "error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let opt = |v: Option<f64>| v.map(format_real).unwrap_or_default();
        let rows: Vec<Vec<String>> = self
            .records
            .iter()
            .map(|r| {
                vec![
                    r.rep.to_string(),
                    r.method.clone(),
                    opt(r.estimate),
                    opt(r.lower),
                    opt(r.upper),
                    opt(r.sigma2_hat),
                    r.covered.map(|c| u8::from(c).to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_table(out, &header, &rows)
    }
}

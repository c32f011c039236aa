//! `mlrate estimate`: MLRATE plus baselines on a CSV file.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use mlrate_core::data::{validate, CsvTable};
use mlrate_core::estimators::{
    adjusted_fit, cuped_estimate, diff_in_diff, diff_in_means, mlrate_run, relative_efficiency, EstimateReport,
    MlrateConfig,
};
use mlrate_core::{Error, ExperimentDataset, PanelDataset, RandomStream};
use serde::Serialize;

use crate::learner::LearnerArgs;
use crate::model::{ModelFile, Provenance};
use crate::output::{fixed, write_csv, write_json, write_text_table};
use crate::{split_list, user_error, Format};

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input CSV file with a header row
    #[arg(long)]
    pub data: PathBuf,
    /// Outcome column
    #[arg(long, default_value = "y")]
    pub outcome: String,
    /// Treatment column holding 0 or 1
    #[arg(long, default_value = "t")]
    pub treatment: String,
    /// Comma-separated feature columns for the learner
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Number of cross-fitting folds
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Seed for the fold split
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Significance level a; intervals have coverage 1 - a
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Zero out predictions below this threshold before adjusting
    #[arg(long, allow_hyphen_values = true)]
    pub censor: Option<f64>,
    /// Comma-separated baselines: dim, dind, cuped
    #[arg(long, default_value = "dim")]
    pub baselines: String,
    /// Pre-period outcome column (needed by cuped)
    #[arg(long)]
    pub pre_outcome: Option<String>,
    /// Use this precomputed prediction column instead of cross-fitting
    #[arg(long, requires = "model")]
    pub g_column: Option<String>,
    /// Model file that produced --g-column (must be a pre-period model)
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Baseline {
    Dim,
    Dind,
    Cuped,
}

fn parse_baselines(raw: &str) -> Result<Vec<Baseline>, Error> {
    let mut out = Vec::new();
    for name in split_list(raw) {
        let b = match name.as_str() {
            "dim" => Baseline::Dim,
            "dind" => Baseline::Dind,
            "cuped" => Baseline::Cuped,
            other => {
                return Err(user_error(format!(
                    "unknown baseline `{other}` (expected dim, dind or cuped)"
                )))
            }
        };
        if !out.contains(&b) {
            out.push(b);
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Ratio {
    pub method: String,
    pub baseline: String,
    pub variance_ratio: Option<f64>,
    pub width_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct EstimateOutput {
    pub reports: Vec<EstimateReport>,
    pub ratios: Vec<Ratio>,
}

fn check_dataset(ds: &ExperimentDataset) -> Result<(), Error> {
    match validate(ds).into_iter().next() {
        None => Ok(()),
        Some(v) => match v.row {
            Some(row) => Err(Error::Validation {
                row: row + 1,
                message: v.message,
            }),
            None => Err(user_error(format!("{}: {}", v.code, v.message))),
        },
    }
}

/// Runs every requested estimator. Exposed for reuse by tests.
pub fn compute(args: &EstimateArgs) -> Result<EstimateOutput, Error> {
    let baselines = parse_baselines(&args.baselines)?;
    let spec = args.learner.spec()?;
    let features: Vec<String> = args.features.iter().flat_map(|f| split_list(f)).collect();
    if args.g_column.is_none() && args.learner.needs_features() && features.is_empty() {
        return Err(user_error("this learner needs --features"));
    }
    if baselines.contains(&Baseline::Cuped) && args.pre_outcome.is_none() {
        return Err(user_error("the cuped baseline needs --pre-outcome"));
    }

    let table = CsvTable::read(&args.data)?;
    let mut wanted = vec![args.outcome.as_str(), args.treatment.as_str()];
    wanted.extend(features.iter().map(String::as_str));
    wanted.extend(args.pre_outcome.as_deref());
    wanted.extend(args.g_column.as_deref());
    for name in wanted {
        table.column_position(name)?;
    }
    let y = table.numeric_column(&args.outcome)?;
    let t = table.treatment_column(&args.treatment)?;
    let x = table.numeric_matrix(&features)?;
    let ds = ExperimentDataset::new(y, t, x, features)?;
    check_dataset(&ds)?;

    let (primary, covariate) = match &args.g_column {
        Some(col) => {
            let model = ModelFile::read(args.model.as_ref().expect("clap enforces --model"))?;
            if model.provenance != Provenance::PrePeriod {
                return Err(user_error(
                    "--g-column needs predictions from a pre-period model; cross-fitted predictions \
                     depend on this experiment's outcomes, so adjusting on them without refitting \
                     would leak the outcome into the covariate",
                ));
            }
            let g = table.numeric_column(col)?;
            let fit = adjusted_fit(ds.outcome(), ds.treatment(), &g)?;
            let report = EstimateReport::from_fit("mlrate-pre-period", &fit, ds.outcome(), &g, args.level)?;
            (report, g)
        }
        None => {
            let cfg = MlrateConfig {
                learner: spec,
                k: args.k,
                significance: args.level,
                censor: args.censor,
                features: None,
            };
            let run = mlrate_run(&ds, &cfg, &mut RandomStream::new(args.seed, 0))?;
            (run.report, run.covariate)
        }
    };

    let dim = diff_in_means(ds.outcome(), ds.treatment(), args.level)?;
    let mut reports = vec![primary];
    for b in &baselines {
        reports.push(match b {
            Baseline::Dim => dim.clone(),
            Baseline::Dind => diff_in_diff(ds.outcome(), ds.treatment(), &covariate, args.level)?,
            Baseline::Cuped => {
                let pre = table.numeric_column(args.pre_outcome.as_deref().unwrap_or_default())?;
                cuped_estimate(&PanelDataset::new(ds.clone(), pre, None)?, args.level)?
            }
        });
    }
    let ratios = reports
        .iter()
        .map(|r| {
            let eff = relative_efficiency(r, &dim).ok();
            Ratio {
                method: r.method.clone(),
                baseline: dim.method.clone(),
                variance_ratio: eff.map(|e| e.variance_ratio),
                width_ratio: eff.map(|e| e.width_ratio),
            }
        })
        .collect();
    Ok(EstimateOutput { reports, ratios })
}

pub fn run(args: &EstimateArgs, out: &mut dyn Write) -> Result<(), Error> {
    let result = compute(args)?;
    let header = [
        "method", "estimate", "std_error", "ci_lower", "ci_upper", "n", "sigma2_hat", "width_ratio",
    ];
    let rows = |digits: Option<usize>| -> Vec<Vec<String>> {
        let num = |v: f64| match digits {
            Some(d) => fixed(v, d),
            None => mlrate_core::data::format_real(v),
        };
        result
            .reports
            .iter()
            .zip(&result.ratios)
            .map(|(r, q)| {
                vec![
                    r.method.clone(),
                    num(r.estimate),
                    num(r.std_error),
                    num(r.ci[0]),
                    num(r.ci[1]),
                    r.n.to_string(),
                    num(r.sigma2_hat),
                    q.width_ratio.map(&num).unwrap_or_default(),
                ]
            })
            .collect()
    };
    match args.format {
        Format::Json => write_json(out, &result),
        Format::Csv => write_csv(out, &header, &rows(None)),
        Format::Table => write_text_table(out, &header, &rows(Some(4))),
    }
}

//! `mlrate simulate`: coverage and width studies on synthetic data.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mlrate_core::learners::{ElasticNetParams, FixedFunction, GbdtParams, LearnerKind, LearnerSpec};
use mlrate_core::sim::{
    run_coverage_study, AaPanelConfig, CoverageStudyResult, Dgp, Estimator, FriedmanDgpConfig, OutcomeFamily,
    StudyConfig, StudyMethod,
};
use mlrate_core::Error;

use crate::output::{fixed, with_file, write_csv, write_json, write_line, write_text_table};
use crate::{split_list, user_error, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DgpChoice {
    Friedman,
    AaPanel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyChoice {
    Gaussian,
    HeavyTailed,
    CountLike,
}

impl From<FamilyChoice> for OutcomeFamily {
    fn from(f: FamilyChoice) -> Self {
        match f {
            FamilyChoice::Gaussian => OutcomeFamily::Gaussian,
            FamilyChoice::HeavyTailed => OutcomeFamily::HeavyTailed,
            FamilyChoice::CountLike => OutcomeFamily::CountLike,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Data-generating process
    #[arg(value_enum)]
    pub dgp: DgpChoice,
    /// Monte Carlo repetitions
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Rows per dataset
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Comma-separated methods: gbdt, elasticnet, dim, dind, cuped, preperiod, oracle
    /// (default: gbdt,elasticnet,dim for friedman and cuped,preperiod,dim for aa-panel)
    #[arg(long)]
    pub methods: Option<String>,
    /// Master seed; repetition r uses stream r
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Significance level a; intervals have coverage 1 - a
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    /// Cross-fitting folds for ML methods
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Run 10000 repetitions of 10000 rows
    #[arg(long)]
    pub paper_scale: bool,
    /// Covariate count (friedman)
    #[arg(long, default_value_t = 100)]
    pub d: usize,
    /// Noise standard deviation (friedman)
    #[arg(long, default_value_t = 25.0)]
    pub noise_sd: f64,
    /// Treatment probability (friedman)
    #[arg(long, default_value_t = 0.5)]
    pub treat_prob: f64,
    /// Period-to-period autocorrelation in [0, 1) (aa-panel)
    #[arg(long, default_value_t = 0.7)]
    pub rho: f64,
    /// Auxiliary pre-period metrics (aa-panel)
    #[arg(long, default_value_t = 3)]
    pub n_aux: usize,
    /// Outcome family (aa-panel)
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyChoice,
    /// Also write one CSV row per repetition and method to this file
    #[arg(long)]
    pub per_rep_csv: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
}

fn method(name: &str, args: &SimulateArgs) -> Result<StudyMethod, Error> {
    let mlrate = |kind| StudyMethod::mlrate(name, LearnerSpec::new(kind), args.k);
    Ok(match name {
        "gbdt" => mlrate(LearnerKind::Gbdt(GbdtParams::default())),
        "elasticnet" => mlrate(LearnerKind::ElasticNet(ElasticNetParams::default())),
        "dim" => StudyMethod::new(name, Estimator::DiffInMeans),
        "dind" | "cuped" | "preperiod" if args.dgp != DgpChoice::AaPanel => {
            return Err(user_error(format!("method `{name}` needs the aa-panel DGP")))
        }
        "dind" => StudyMethod::new(name, Estimator::DiffInDiff),
        "cuped" => StudyMethod::new(name, Estimator::Cuped),
        "preperiod" => StudyMethod::new(
            name,
            Estimator::Preperiod {
                learner: LearnerSpec::gbdt(),
            },
        ),
        "oracle" if args.dgp == DgpChoice::Friedman => mlrate(LearnerKind::FixedFunction {
            function: FixedFunction::FriedmanConditionalMean {
                treat_prob: args.treat_prob,
            },
        }),
        "oracle" => return Err(user_error("method `oracle` needs the friedman DGP")),
        other => {
            return Err(user_error(format!(
                "unknown method `{other}` (expected gbdt, elasticnet, dim, dind, cuped, preperiod or oracle)"
            )))
        }
    })
}

pub fn study_config(args: &SimulateArgs) -> Result<StudyConfig, Error> {
    let (reps, n) = if args.paper_scale {
        (10_000, 10_000)
    } else {
        (args.reps, args.n)
    };
    let dgp = match args.dgp {
        DgpChoice::Friedman => Dgp::Friedman(FriedmanDgpConfig {
            n,
            d: args.d,
            noise_sd: args.noise_sd,
            treat_prob: args.treat_prob,
        }),
        DgpChoice::AaPanel => Dgp::AaPanel(AaPanelConfig {
            n,
            rho: args.rho,
            n_aux: args.n_aux,
            family: args.family.into(),
        }),
    };
    let default_methods = match args.dgp {
        DgpChoice::Friedman => "gbdt,elasticnet,dim",
        DgpChoice::AaPanel => "cuped,preperiod,dim",
    };
    let names = split_list(args.methods.as_deref().unwrap_or(default_methods));
    if names.is_empty() {
        return Err(user_error("--methods is empty"));
    }
    let methods = names.iter().map(|m| method(m, args)).collect::<Result<Vec<_>, _>>()?;
    let baseline = names.iter().any(|m| m == "dim").then(|| "dim".to_string());
    Ok(StudyConfig {
        dgp,
        methods,
        reps,
        significance: args.level,
        master_seed: args.seed,
        baseline,
    })
}

fn summary_rows(result: &CoverageStudyResult, digits: Option<usize>) -> Vec<Vec<String>> {
    let num = |v: f64, d: usize| match digits {
        Some(_) => fixed(v, d),
        None => mlrate_core::data::format_real(v),
    };
    result
        .methods
        .iter()
        .map(|m| {
            vec![
                m.method.clone(),
                num(100.0 * m.coverage, 2),
                num(100.0 * m.coverage_ci, 2),
                m.mean_relative_width.map(|w| num(w, 3)).unwrap_or_default(),
                num(m.mean_width, 4),
                m.failures.to_string(),
                if m.miscalibrated { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect()
}

pub fn run(args: &SimulateArgs, threads: usize, out: &mut dyn Write) -> Result<(), Error> {
    let cfg = study_config(args)?;
    let result = run_coverage_study(&cfg, threads)?;
    if let Some(path) = &args.per_rep_csv {
        with_file(path, |w| result.write_records_csv(w))?;
    }
    let header = [
        "method",
        "coverage_pct",
        "coverage_ci_pct",
        "relative_width",
        "mean_width",
        "failures",
        "miscalibrated",
    ];
    match args.format {
        Format::Json => write_json(out, &result),
        Format::Csv => write_csv(out, &header, &summary_rows(&result, None)),
        Format::Table => {
            write_line(
                out,
                &format!(
                    "dgp={} n={} reps={} level={} seed={}",
                    result.dgp, result.n, result.reps, result.ci_level, result.master_seed
                ),
            )?;
            write_text_table(out, &header, &summary_rows(&result, Some(4)))
        }
    }
}

//! `mlrate generate`: synthetic datasets as CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use mlrate_core::data::format_real;
use mlrate_core::sim::{generate_aa_panel, generate_friedman, AaPanelConfig, FriedmanDgpConfig};
use mlrate_core::{Error, ExperimentDataset, RandomStream};

use crate::output::{with_file, write_csv};
use crate::simulate::{DgpChoice, FamilyChoice};
use crate::is_stdout;

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Data-generating process
    #[arg(value_enum)]
    pub dgp: DgpChoice,
    /// Rows to generate
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Seed of the random stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
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
    /// CSV file to write (`-` for standard output)
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn experiment_columns(ds: &ExperimentDataset) -> (Vec<String>, Vec<Vec<f64>>, Vec<bool>) {
    let names = ds.covariate_names().to_vec();
    let cols = (0..names.len()).map(|j| ds.covariates().column(j)).collect();
    (names, cols, ds.treatment().to_vec())
}

pub fn run(args: &GenerateArgs, out: &mut dyn Write) -> Result<(), Error> {
    let mut stream = RandomStream::new(args.seed, 0);
    let (outcome, mut names, mut columns, treatment) = match args.dgp {
        DgpChoice::Friedman => {
            let cfg = FriedmanDgpConfig {
                n: args.n,
                d: args.d,
                noise_sd: args.noise_sd,
                treat_prob: args.treat_prob,
            };
            let ds = generate_friedman(&cfg, &mut stream)?;
            let (names, cols, t) = experiment_columns(&ds);
            (ds.outcome().to_vec(), names, cols, t)
        }
        DgpChoice::AaPanel => {
            let cfg = AaPanelConfig {
                n: args.n,
                rho: args.rho,
                n_aux: args.n_aux,
                family: args.family.into(),
            };
            let panel = generate_aa_panel(&cfg, &mut stream)?;
            let (mut names, mut cols, t) = experiment_columns(&panel.experiment);
            let lagged = panel.lagged_features.as_ref().expect("generator fills lagged features");
            names.extend(cfg.lagged_names());
            cols.extend((0..lagged.cols()).map(|j| lagged.column(j)));
            (panel.experiment.outcome().to_vec(), names, cols, t)
        }
    };
    names.splice(0..0, ["y".to_string(), "t".to_string()]);
    columns.insert(0, outcome);
    let rows: Vec<Vec<String>> = (0..treatment.len())
        .map(|i| {
            let mut row = Vec::with_capacity(names.len());
            row.push(format_real(columns[0][i]));
            row.push(if treatment[i] { "1" } else { "0" }.to_string());
            row.extend(columns[1..].iter().map(|c| format_real(c[i])));
            row
        })
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    if is_stdout(&args.output) {
        write_csv(out, &header, &rows)
    } else {
        with_file(args.output.as_ref().unwrap(), |w| write_csv(w, &header, &rows))
    }
}

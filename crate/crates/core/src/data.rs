//! Experiment datasets, CSV ingestion and fold splitting.
//!
//! Row order is the identity key throughout: fold assignments, predictions
//! and any appended columns are aligned by row index.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, RandomStream};

/// Outcomes, binary treatment indicators and covariates for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDataset {
    outcome: Vec<f64>,
    treatment: Vec<bool>,
    covariates: DenseMatrix,
    covariate_names: Vec<String>,
}

impl ExperimentDataset {
    /// Checks shapes only; use [`validate`] for the remaining invariants.
    pub fn new(
        outcome: Vec<f64>,
        treatment: Vec<bool>,
        covariates: DenseMatrix,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = outcome.len();
        if treatment.len() != n || covariates.rows() != n {
            return Err(Error::invalid(format!(
                "length mismatch: {n} outcomes, {} treatments, {} covariate rows",
                treatment.len(),
                covariates.rows()
            )));
        }
        if covariate_names.len() != covariates.cols() {
            return Err(Error::invalid(format!(
                "{} covariate names for {} columns",
                covariate_names.len(),
                covariates.cols()
            )));
        }
        Ok(Self {
            outcome,
            treatment,
            covariates,
            covariate_names,
        })
    }

    /// Dataset without covariates.
    pub fn without_covariates(outcome: Vec<f64>, treatment: Vec<bool>) -> Result<Self> {
        let n = outcome.len();
        Self::new(outcome, treatment, DenseMatrix::zeros(n, 0), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn covariates(&self) -> &DenseMatrix {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// Fraction of treated rows.
    pub fn treated_fraction(&self) -> f64 {
        self.treatment.iter().filter(|&&t| t).count() as f64 / self.len() as f64
    }

    /// Rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        Self {
            outcome: indices.iter().map(|&i| self.outcome[i]).collect(),
            treatment: indices.iter().map(|&i| self.treatment[i]).collect(),
            covariates: self.covariates.select_rows(indices),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Same rows with a different outcome vector.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Self> {
        Self::new(
            outcome,
            self.treatment.clone(),
            self.covariates.clone(),
            self.covariate_names.clone(),
        )
    }
}

/// An experiment plus pre-period history aligned by row.
///
/// `experiment.covariates()` hold features measured in the last pre-period
/// (t − 1); `lagged_features` are the same features one period earlier
/// (t − 2), and `pre_outcome` is the outcome in period t − 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub experiment: ExperimentDataset,
    pub pre_outcome: Vec<f64>,
    pub lagged_features: Option<DenseMatrix>,
}

impl PanelDataset {
    pub fn new(
        experiment: ExperimentDataset,
        pre_outcome: Vec<f64>,
        lagged_features: Option<DenseMatrix>,
    ) -> Result<Self> {
        if pre_outcome.len() != experiment.len() {
            return Err(Error::invalid(format!(
                "pre-period outcome has {} rows, experiment has {}",
                pre_outcome.len(),
                experiment.len()
            )));
        }
        if let Some(lagged) = &lagged_features {
            if lagged.rows() != experiment.len() || lagged.cols() != experiment.covariates().cols() {
                return Err(Error::invalid(format!(
                    "lagged features are {}x{}, expected {}x{}",
                    lagged.rows(),
                    lagged.cols(),
                    experiment.len(),
                    experiment.covariates().cols()
                )));
            }
        }
        Ok(Self {
            experiment,
            pre_outcome,
            lagged_features,
        })
    }
}

/// A broken dataset invariant. `code` is stable and machine-readable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    /// 0-based row index, when the violation is tied to a row.
    pub row: Option<usize>,
    pub message: String,
}

/// Lists every broken invariant; empty means the dataset is usable.
pub fn validate(ds: &ExperimentDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if ds.is_empty() {
        out.push(Violation {
            code: "empty",
            row: None,
            message: "dataset has no rows".into(),
        });
        return out;
    }
    for (i, y) in ds.outcome.iter().enumerate() {
        if !y.is_finite() {
            out.push(Violation {
                code: "non-finite",
                row: Some(i),
                message: format!("outcome is {y}"),
            });
        }
    }
    for (i, row) in ds.covariates.iter_rows().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            out.push(Violation {
                code: "non-finite",
                row: Some(i),
                message: format!("covariate {} is {}", ds.covariate_names[j], row[j]),
            });
        }
    }
    let treated = ds.treatment.iter().filter(|&&t| t).count();
    if treated == 0 || treated == ds.len() {
        out.push(Violation {
            code: "degenerate-arm",
            row: None,
            message: format!("{treated} of {} rows treated; both arms must be non-empty", ds.len()),
        });
    }
    out
}

fn parse_cell(record: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<f64> {
    let raw = record.get(col).unwrap_or("").trim();
    if raw.is_empty() {
        return Err(Error::Parse {
            row,
            message: format!("missing value in column `{name}`"),
        });
    }
    let value: f64 = raw.parse().map_err(|_| Error::Parse {
        row,
        message: format!("column `{name}`: `{raw}` is not a number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column `{name}`: non-finite value `{raw}`"),
        });
    }
    Ok(value)
}

/// Parsed CSV table: header plus numeric columns requested by name.
pub struct CsvTable {
    pub header: Vec<String>,
    pub records: Vec<csv::StringRecord>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
        let header = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let records = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { header, records })
    }

    pub fn column_position(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in header")))
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self.column_position(name)?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| parse_cell(rec, col, i + 1, name))
            .collect()
    }

    pub fn numeric_matrix(&self, names: &[String]) -> Result<DenseMatrix> {
        let positions = names
            .iter()
            .map(|n| self.column_position(n))
            .collect::<Result<Vec<_>>>()?;
        let mut data = Vec::with_capacity(self.records.len() * names.len());
        for (i, rec) in self.records.iter().enumerate() {
            for (&col, name) in positions.iter().zip(names) {
                data.push(parse_cell(rec, col, i + 1, name)?);
            }
        }
        DenseMatrix::new(self.records.len(), names.len(), data)
    }

    pub fn treatment_column(&self, name: &str) -> Result<Vec<bool>> {
        let col = self.column_position(name)?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, rec)| match rec.get(col).map(str::trim) {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                Some("") | None => Err(Error::Parse {
                    row: i + 1,
                    message: format!("missing value in column `{name}`"),
                }),
                Some(other) => Err(Error::Validation {
                    row: i + 1,
                    message: format!("treatment `{name}` must be 0 or 1, got `{other}`"),
                }),
            })
            .collect()
    }
}

/// Reads an experiment from a headered CSV file. Rows keep file order.
pub fn load_csv(
    path: &Path,
    outcome_col: &str,
    treatment_col: &str,
    feature_cols: &[String],
) -> Result<ExperimentDataset> {
    let table = CsvTable::read(path)?;
    // Resolve every name first so schema errors win over cell errors.
    table.column_position(outcome_col)?;
    table.column_position(treatment_col)?;
    for name in feature_cols {
        table.column_position(name)?;
    }
    let outcome = table.numeric_column(outcome_col)?;
    let treatment = table.treatment_column(treatment_col)?;
    let covariates = table.numeric_matrix(feature_cols)?;
    ExperimentDataset::new(outcome, treatment, covariates, feature_cols.to_vec())
}

/// Writes `y`, `t` and the covariate columns, in that order.
pub fn write_csv(ds: &ExperimentDataset, path: &Path, outcome_col: &str, treatment_col: &str) -> Result<()> {
    let mut columns: Vec<(&str, Vec<String>)> = Vec::new();
    columns.push((outcome_col, ds.outcome.iter().map(|v| format_real(*v)).collect()));
    columns.push((
        treatment_col,
        ds.treatment.iter().map(|&t| if t { "1" } else { "0" }.to_string()).collect(),
    ));
    for (j, name) in ds.covariate_names.iter().enumerate() {
        columns.push((name, ds.covariates.column(j).into_iter().map(format_real).collect()));
    }
    write_columns(path, &columns)
}

/// Writes named string columns of equal length as CSV.
pub fn write_columns(path: &Path, columns: &[(&str, Vec<String>)]) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(columns.iter().map(|(name, _)| *name))?;
    let n = columns.first().map_or(0, |(_, v)| v.len());
    for i in 0..n {
        writer.write_record(columns.iter().map(|(_, v)| v[i].as_str()))?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

/// Writes a CSV with `header` followed by `rows` (used for panels and reports).
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush().map_err(|source| Error::Io {
        path: "<stream>".into(),
        source,
    })?;
    Ok(())
}

/// Assigns each of `n` rows to one of `k` folds.
///
/// A seeded permutation is cut into `k` contiguous blocks whose sizes differ
/// by at most one (the first `n mod k` blocks get the extra row).
pub fn split_folds(n: usize, k: usize, stream: &mut RandomStream) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::invalid(format!("need 2 <= k <= n for fold splitting, got k={k}, n={n}")));
    }
    let perm = stream.permutation(n);
    let base = n / k;
    let extra = n % k;
    let mut folds = vec![0usize; n];
    let mut pos = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        for &row in &perm[pos..pos + size] {
            folds[row] = fold;
        }
        pos += size;
    }
    Ok(folds)
}

/// Row indices grouped by fold.
pub fn fold_members(folds: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (row, &f) in folds.iter().enumerate() {
        members[f].push(row);
    }
    members
}

//! Dense row-major matrices and rank-revealing least squares.
//!
//! The solver is a Householder QR with column pivoting. Columns are chosen
//! greedily by largest remaining norm, and the factorization stops as soon as
//! the next pivot falls below `RANK_TOLERANCE` times the first one. Dropped
//! columns get a zero coefficient, which is what the adjustment regression
//! relies on when the prediction column is (nearly) constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold below which a column counts as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix of shape {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Builds a matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let cols = columns.len();
        let mut out = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            let col = col.as_ref();
            if col.len() != rows {
                return Err(Error::invalid(format!(
                    "column {j} has {} entries, expected {rows}",
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                out.data[i * cols + j] = v;
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies the listed rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Copies the listed columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for row in 0..self.rows {
            let r = self.row(row);
            data.extend(indices.iter().map(|&j| r[j]));
        }
        Self {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::invalid(format!(
                "cannot stack matrices with {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Output of [`least_squares`].
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub rank: usize,
}

/// Minimizes `‖response − design · β‖²` with a column-pivoted QR factorization.
///
/// Columns whose pivot falls below `RANK_TOLERANCE × |largest pivot|` are
/// treated as dependent and receive a zero coefficient.
pub fn least_squares(design: &DenseMatrix, response: &[f64]) -> Result<LeastSquares> {
    let (m, n) = (design.rows(), design.cols());
    if n == 0 {
        return Err(Error::invalid("design matrix has no columns"));
    }
    if response.len() != m {
        return Err(Error::invalid(format!(
            "design has {m} rows but response has {} entries",
            response.len()
        )));
    }
    if m < n {
        return Err(Error::invalid(format!(
            "underdetermined system: {m} rows for {n} columns"
        )));
    }
    if !design.is_finite() || response.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite entry in least-squares input"));
    }

    // Column-major working copy: each column is contiguous for the reflections.
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| design.column(j)).collect();
    let mut b = response.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r_diag = vec![0.0; n];
    let mut rank = 0;
    let mut first_pivot = 0.0;

    for k in 0..n {
        // Exact remaining norms; n is small for every design this crate builds.
        let (best, best_norm) = (k..n)
            .map(|j| (j, a[j][k..].iter().map(|v| v * v).sum::<f64>().sqrt()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if k == 0 {
            first_pivot = best_norm;
        }
        if best_norm == 0.0 || best_norm <= RANK_TOLERANCE * first_pivot {
            break;
        }
        a.swap(k, best);
        perm.swap(k, best);

        // Householder reflector zeroing a[k][k+1..].
        let alpha = if a[k][k] > 0.0 { -best_norm } else { best_norm };
        let mut v = a[k][k..].to_vec();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|x| x * x).sum();
        if v_norm2 > 0.0 {
            for col in a.iter_mut().skip(k + 1) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(x, y)| x * y).sum();
                let scale = 2.0 * dot / v_norm2;
                for (c, vi) in col[k..].iter_mut().zip(&v) {
                    *c -= scale * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(x, y)| x * y).sum();
            let scale = 2.0 * dot / v_norm2;
            for (bi, vi) in b[k..].iter_mut().zip(&v) {
                *bi -= scale * vi;
            }
        }
        r_diag[k] = alpha;
        rank += 1;
    }

    // Back substitution on the leading rank×rank block of R.
    let mut z = vec![0.0; n];
    for i in (0..rank).rev() {
        let mut s = b[i];
        for j in (i + 1)..rank {
            s -= a[j][i] * z[j];
        }
        z[i] = s / r_diag[i];
    }

    let mut coefficients = vec![0.0; n];
    for (pos, &col) in perm.iter().enumerate() {
        coefficients[col] = z[pos];
    }
    Ok(LeastSquares { coefficients, rank })
}

/// Matrix–vector product `design · coefficients`.
pub fn mat_vec(design: &DenseMatrix, coefficients: &[f64]) -> Vec<f64> {
    design
        .iter_rows()
        .map(|row| row.iter().zip(coefficients).map(|(x, b)| x * b).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Normal equations solved by Gaussian elimination with partial pivoting.
    fn normal_equations(design: &DenseMatrix, y: &[f64]) -> Vec<f64> {
        let n = design.cols();
        let mut m = vec![vec![0.0; n + 1]; n];
        for row_idx in 0..design.rows() {
            let row = design.row(row_idx);
            for i in 0..n {
                for j in 0..n {
                    m[i][j] += row[i] * row[j];
                }
                m[i][n] += row[i] * y[row_idx];
            }
        }
        for c in 0..n {
            let p = (c..n)
                .max_by(|&a, &b| m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap())
                .unwrap();
            m.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = m[r][c] / m[c][c];
                    for k in c..=n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
        (0..n).map(|i| m[i][n] / m[i][i]).collect()
    }

    #[test]
    fn identity_design() {
        let x = DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let fit = least_squares(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fit.rank, 3);
        for (c, e) in fit.coefficients.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(*c, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn duplicated_column_is_dropped() {
        let x = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let fit = least_squares(&x, &[2.0, 2.0]).unwrap();
        assert_eq!(fit.rank, 1);
        assert!(fit.coefficients.contains(&0.0));
        assert_relative_eq!(fit.coefficients.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn straight_line() {
        // Normal equations by hand: [4 6; 6 14] β = [16 34] → β = (1, 2).
        let x = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let fit = least_squares(&x, &[1.0, 3.0, 5.0, 7.0]).unwrap();
        assert_eq!(fit.rank, 2);
        assert_relative_eq!(fit.coefficients[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let x = DenseMatrix::from_rows(&[[1.0], [f64::NAN]]).unwrap();
        assert!(matches!(least_squares(&x, &[1.0, 2.0]), Err(Error::InvalidArgument(_))));
        let x = DenseMatrix::from_rows(&[[1.0], [2.0]]).unwrap();
        assert!(least_squares(&x, &[1.0]).is_err());
        let x = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(least_squares(&x, &[1.0]).is_err());
    }

    #[test]
    fn zero_design_has_rank_zero() {
        let x = DenseMatrix::zeros(3, 2);
        let fit = least_squares(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fit.rank, 0);
        assert_eq!(fit.coefficients, vec![0.0, 0.0]);
    }

    fn instance() -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
        (1usize..6, 0usize..20).prop_flat_map(|(cols, extra)| {
            let rows = cols + extra + 1;
            (
                prop::collection::vec(-10.0f64..10.0, rows * cols),
                prop::collection::vec(-10.0f64..10.0, rows),
            )
                .prop_map(move |(data, y)| (DenseMatrix::new(rows, cols, data).unwrap(), y))
        })
    }

    proptest! {
        #[test]
        fn residual_orthogonal_to_columns((x, y) in instance()) {
            let fit = least_squares(&x, &y).unwrap();
            prop_assume!(fit.rank == x.cols());
            let fitted = mat_vec(&x, &fit.coefficients);
            let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
            let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..x.cols() {
                let col = x.column(j);
                let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                let dot: f64 = col.iter().zip(&resid).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() <= 1e-8 * cnorm * rnorm + 1e-12);
            }
        }

        #[test]
        fn matches_normal_equations((x, y) in instance()) {
            let fit = least_squares(&x, &y).unwrap();
            prop_assume!(fit.rank == x.cols());
            // Keep to well-conditioned draws so the oracle itself is accurate.
            let reference = normal_equations(&x, &y);
            let scale = reference.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            prop_assume!(scale < 1e3);
            for (a, b) in fit.coefficients.iter().zip(&reference) {
                prop_assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b}");
            }
        }
    }
}

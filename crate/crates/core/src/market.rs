//! Return matrices and their annualized moments.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("cannot read returns file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("returns file has an empty header")]
    EmptyHeader,
    #[error("duplicate asset id {0:?} in header")]
    DuplicateId(String),
    #[error("line {line}: expected {expected} fields, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column}: {value:?} is not a finite number")]
    NonNumeric { line: u64, column: usize, value: String },
    #[error("need at least 2 return periods, found {found}")]
    TooFewPeriods { found: usize },
    #[error("periods_per_year must be positive")]
    ZeroPeriodsPerYear,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("covariance matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPsd(f64),
}

/// Simple per-period returns, one row per period and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    asset_ids: Vec<String>,
    data: DMatrix<f64>,
    periods_per_year: u32,
}

impl ReturnMatrix {
    pub fn new(
        asset_ids: Vec<String>,
        data: DMatrix<f64>,
        periods_per_year: u32,
    ) -> Result<Self, MarketError> {
        if periods_per_year == 0 {
            return Err(MarketError::ZeroPeriodsPerYear);
        }
        if asset_ids.is_empty() {
            return Err(MarketError::EmptyHeader);
        }
        if data.ncols() != asset_ids.len() {
            return Err(MarketError::Dimension(format!(
                "{} asset ids but {} columns",
                asset_ids.len(),
                data.ncols()
            )));
        }
        check_unique(&asset_ids)?;
        if data.nrows() < 2 {
            return Err(MarketError::TooFewPeriods { found: data.nrows() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(MarketError::NonNumeric {
                line: row as u64 + 2,
                column: col + 1,
                value: data[(row, col)].to_string(),
            });
        }
        Ok(Self {
            asset_ids,
            data,
            periods_per_year,
        })
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn periods_per_year(&self) -> u32 {
        self.periods_per_year
    }

    pub fn n_periods(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.data.ncols()
    }
}

fn check_unique(ids: &[String]) -> Result<(), MarketError> {
    let mut seen = std::collections::HashSet::new();
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(MarketError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Reads a comma-separated returns file whose first row holds the asset ids.
///
/// Errors carry the 1-based line number (the header is line 1) and, for bad cells, the
/// 1-based column.
pub fn load_returns(path: &Path, periods_per_year: u32) -> Result<ReturnMatrix, MarketError> {
    let file = std::fs::File::open(path).map_err(|source| MarketError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |e: csv::Error| MarketError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(MarketError::EmptyHeader);
    }
    check_unique(&header)?;

    let n = header.len();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n {
            return Err(MarketError::Ragged {
                line,
                expected: n,
                found: record.len(),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| MarketError::NonNumeric {
                    line,
                    column: j + 1,
                    value: field.to_owned(),
                })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(MarketError::TooFewPeriods { found: rows });
    }
    let data = DMatrix::from_row_slice(rows, n, &values);
    ReturnMatrix::new(header, data, periods_per_year)
}

/// Annualized expected returns and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetStats {
    asset_ids: Vec<String>,
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl AssetStats {
    /// Builds stats from already-annualized moments. `sigma` must be symmetric (within 1e-12
    /// relative) and positive semidefinite (smallest eigenvalue at least `-1e-10 * trace`);
    /// it is stored exactly symmetric.
    pub fn new(
        asset_ids: Vec<String>,
        mu: DVector<f64>,
        sigma: DMatrix<f64>,
    ) -> Result<Self, MarketError> {
        let n = mu.len();
        if n == 0 || asset_ids.len() != n || sigma.nrows() != n || sigma.ncols() != n {
            return Err(MarketError::Dimension(format!(
                "{} ids, {} means, {}x{} covariance",
                asset_ids.len(),
                n,
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        check_unique(&asset_ids)?;
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(MarketError::Dimension("non-finite moment".into()));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        let asym = (&sigma - sigma.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(MarketError::Asymmetric(asym));
        }
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let trace = sigma.trace();
        let min_eig = sigma.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * trace.abs().max(f64::MIN_POSITIVE) {
            return Err(MarketError::NotPsd(min_eig));
        }
        Ok(Self {
            asset_ids,
            mu,
            sigma,
        })
    }

    /// Convenience constructor with ids `A1..AN`.
    pub fn unnamed(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self, MarketError> {
        let ids = (1..=mu.len()).map(|i| format!("A{i}")).collect();
        Self::new(ids, mu, sigma)
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Restricts the universe to the given asset indices, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            asset_ids: indices.iter().map(|&i| self.asset_ids[i].clone()).collect(),
            mu: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.mu[i])),
            sigma: self.sigma.select_rows(indices).select_columns(indices),
        }
    }
}

/// Sample mean and unbiased sample covariance (divisor `T - 1`), both multiplied by
/// `periods_per_year`.
pub fn estimate_stats(returns: &ReturnMatrix) -> Result<AssetStats, MarketError> {
    let t = returns.n_periods();
    if t < 2 {
        return Err(MarketError::TooFewPeriods { found: t });
    }
    let n = returns.n_assets();
    let ppy = f64::from(returns.periods_per_year());
    let data = returns.data();

    let means: Vec<f64> = (0..n).map(|j| data.column(j).sum() / t as f64).collect();
    let mut sigma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..t)
                .map(|k| (data[(k, i)] - means[i]) * (data[(k, j)] - means[j]))
                .sum();
            let v = s / (t - 1) as f64 * ppy;
            sigma[(i, j)] = v;
            sigma[(j, i)] = v;
        }
    }
    let mu = DVector::from_iterator(n, means.iter().map(|m| m * ppy));
    Ok(AssetStats {
        asset_ids: returns.asset_ids().to_vec(),
        mu,
        sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn matrix(cols: usize, rows: &[f64], ppy: u32) -> ReturnMatrix {
        let ids = (0..cols).map(|i| format!("X{i}")).collect();
        ReturnMatrix::new(ids, DMatrix::from_row_slice(rows.len() / cols, cols, rows), ppy)
            .unwrap()
    }

    #[test]
    fn parses_two_by_two() {
        let f = write_tmp("A,B\n0.01,0.02\n0.03,-0.01\n");
        let m = load_returns(f.path(), 12).unwrap();
        assert_eq!(m.asset_ids(), ["A", "B"]);
        assert_eq!(m.data(), &DMatrix::from_row_slice(2, 2, &[0.01, 0.02, 0.03, -0.01]));
        assert_eq!(m.periods_per_year(), 12);
    }

    #[test]
    fn parses_single_asset() {
        let f = write_tmp("ONLY\n0.01\n0.02\n-0.03\n");
        let m = load_returns(f.path(), 12).unwrap();
        assert_eq!((m.n_periods(), m.n_assets()), (3, 1));
    }

    #[test]
    fn ragged_row_reports_line() {
        let f = write_tmp("A,B\n0.01,0.02\n0.01,0.02,0.03\n");
        match load_returns(f.path(), 12) {
            Err(MarketError::Ragged { line, expected, found }) => {
                assert_eq!((line, expected, found), (3, 2, 3));
            }
            other => panic!("expected ragged error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_position() {
        let f = write_tmp("A,B\n0.01,0.02\n0.01,abc\n0.0,0.0\n");
        match load_returns(f.path(), 12) {
            Err(MarketError::NonNumeric { line, column, value }) => {
                assert_eq!((line, column, value.as_str()), (3, 2, "abc"));
            }
            other => panic!("expected non-numeric error, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows_and_missing_file() {
        let f = write_tmp("A,B\n0.01,0.02\n");
        assert!(matches!(
            load_returns(f.path(), 12),
            Err(MarketError::TooFewPeriods { found: 1 })
        ));
        let err = load_returns(Path::new("/nonexistent/returns.csv"), 12).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/returns.csv"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_tmp("A,A\n0.01,0.02\n0.0,0.0\n");
        assert!(matches!(load_returns(f.path(), 12), Err(MarketError::DuplicateId(_))));
    }

    #[test]
    fn constant_column_has_zero_variance() {
        let stats = estimate_stats(&matrix(1, &[0.01, 0.01, 0.01], 12)).unwrap();
        assert_relative_eq!(stats.mu()[0], 0.12, epsilon = 1e-15);
        assert_eq!(stats.sigma()[(0, 0)], 0.0);
    }

    #[test]
    fn two_period_variance() {
        // sample variance (0.01^2 + 0.01^2) / 1 = 2e-4, times 12
        let stats = estimate_stats(&matrix(1, &[0.0, 0.02], 12)).unwrap();
        assert_relative_eq!(stats.mu()[0], 0.12, epsilon = 1e-15);
        assert_relative_eq!(stats.sigma()[(0, 0)], 0.0024, epsilon = 1e-15);
    }

    #[test]
    fn identical_columns_are_perfectly_correlated() {
        let stats =
            estimate_stats(&matrix(2, &[0.01, 0.01, -0.02, -0.02, 0.03, 0.03], 12)).unwrap();
        let s = stats.sigma();
        assert_eq!(s[(0, 0)], s[(1, 1)]);
        assert_eq!(s[(0, 1)], s[(0, 0)]);
    }

    fn returns_strategy() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..6, 2usize..20).prop_flat_map(|(n, t)| {
            (Just(n), prop::collection::vec(-0.2f64..0.2, n * t))
        })
    }

    proptest! {
        #[test]
        fn covariance_is_symmetric_psd((n, rows) in returns_strategy()) {
            let stats = estimate_stats(&matrix(n, &rows, 12)).unwrap();
            let s = stats.sigma();
            prop_assert_eq!(s, &s.transpose());
            let min_eig = s.clone().symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-10 * s.trace().max(1e-300));
        }

        #[test]
        fn scaling_returns_scales_moments((n, rows) in returns_strategy(), c in -3.0f64..3.0) {
            let base = estimate_stats(&matrix(n, &rows, 12)).unwrap();
            let scaled: Vec<f64> = rows.iter().map(|r| r * c).collect();
            let scaled = estimate_stats(&matrix(n, &scaled, 12)).unwrap();
            for i in 0..n {
                prop_assert!((scaled.mu()[i] - c * base.mu()[i]).abs() <= 1e-12);
                for j in 0..n {
                    let want = c * c * base.sigma()[(i, j)];
                    prop_assert!((scaled.sigma()[(i, j)] - want).abs() <= 1e-12);
                }
            }
        }
    }
}

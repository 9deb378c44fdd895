//! Dataset ingestion, train/test splitting, pseudo-observations, and the
//! empirical residual margins.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::stream;
use crate::scalar::Real;

/// Integer encoding of a categorical column, codes assigned in
/// first-appearance order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encoding {
    labels: Vec<String>,
}

impl Encoding {
    pub fn code_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Covariate/response matrices with named columns. Rows with missing or
/// unparseable cells are dropped at ingestion and counted.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Dataset<F> {
    covariates: Matrix<F>,
    responses: Matrix<F>,
    covariate_names: Vec<String>,
    response_names: Vec<String>,
    categorical: Vec<bool>,
    encodings: Vec<Option<Encoding>>,
    dropped_rows: usize,
}

impl<F: Real> Dataset<F> {
    pub fn new(
        covariates: Matrix<F>,
        responses: Matrix<F>,
        covariate_names: Vec<String>,
        response_names: Vec<String>,
    ) -> Result<Self> {
        if covariates.nrows() != responses.nrows() {
            return Err(Error::dim(format!(
                "covariates have {} rows, responses {}",
                covariates.nrows(),
                responses.nrows()
            )));
        }
        if responses.ncols() == 0 || covariates.ncols() == 0 {
            return Err(Error::invalid("need d >= 1 responses and p >= 1 covariates"));
        }
        let p = covariates.ncols();
        Ok(Dataset {
            covariates,
            responses,
            covariate_names,
            response_names,
            categorical: vec![false; p],
            encodings: vec![None; p],
            dropped_rows: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.responses.nrows()
    }

    pub fn d(&self) -> usize {
        self.responses.ncols()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> &Matrix<F> {
        &self.covariates
    }

    pub fn responses(&self) -> &Matrix<F> {
        &self.responses
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_names(&self) -> &[String] {
        &self.response_names
    }

    pub fn categorical_flags(&self) -> &[bool] {
        &self.categorical
    }

    pub fn encodings(&self) -> &[Option<Encoding>] {
        &self.encodings
    }

    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Seeded disjoint train/test partition; the union is the input and the
    /// result is deterministic for a fixed seed.
    pub fn split(&self, n_test: usize, seed: u64) -> Result<(Dataset<F>, Dataset<F>)> {
        let n = self.n();
        if n_test == 0 || n_test >= n {
            return Err(Error::invalid(format!(
                "n_test must satisfy 0 < n_test < {n}, got {n_test}"
            )));
        }
        // partial Fisher-Yates: first n_test entries are the test rows
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = stream(seed);
        for i in 0..n_test {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut test_idx: Vec<usize> = idx[..n_test].to_vec();
        test_idx.sort_unstable();
        let test_set: HashSet<usize> = test_idx.iter().copied().collect();
        let train_idx: Vec<usize> = (0..n).filter(|i| !test_set.contains(i)).collect();
        Ok((self.take_rows(&train_idx), self.take_rows(&test_idx)))
    }

    fn take_rows(&self, idx: &[usize]) -> Dataset<F> {
        Dataset {
            covariates: self.covariates.select_rows(idx),
            responses: self.responses.select_rows(idx),
            covariate_names: self.covariate_names.clone(),
            response_names: self.response_names.clone(),
            categorical: self.categorical.clone(),
            encodings: self.encodings.clone(),
            dropped_rows: 0,
        }
    }

    /// Encode a named covariate row (e.g. parsed from `age=6,male=1`) into
    /// the numeric layout used at fit time.
    pub fn encode_covariate_row(&self, pairs: &[(String, String)]) -> Result<Vec<F>> {
        encode_row(
            &self.covariate_names,
            &self.encodings,
            pairs,
        )
    }
}

pub(crate) fn encode_row<F: Real>(
    names: &[String],
    encodings: &[Option<Encoding>],
    pairs: &[(String, String)],
) -> Result<Vec<F>> {
    let mut row = vec![None; names.len()];
    for (name, value) in pairs {
        let j = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        let v = match &encodings[j] {
            Some(enc) => match enc.code_of(value) {
                Some(code) => F::from_count(code),
                None => value.parse::<f64>().map(F::of).map_err(|_| {
                    Error::invalid(format!("unknown label `{value}` for column `{name}`"))
                })?,
            },
            None => value
                .parse::<f64>()
                .map(F::of)
                .map_err(|_| Error::invalid(format!("non-numeric value for column `{name}`")))?,
        };
        row[j] = Some(v);
    }
    row.into_iter()
        .enumerate()
        .map(|(j, v)| v.ok_or_else(|| Error::invalid(format!("missing value for column `{}`", names[j]))))
        .collect()
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
        || t.eq_ignore_ascii_case("n/a")
        || t.eq_ignore_ascii_case("null")
}

/// Load a header-first, comma-delimited CSV and assemble a [`Dataset`].
///
/// Response columns must be numeric; rows with missing or unparseable
/// response cells are dropped and counted. A covariate column containing any
/// non-numeric entry is treated as categorical and integer-encoded in
/// first-appearance order.
pub fn load_csv<F: Real>(
    path: impl AsRef<Path>,
    response_cols: &[&str],
    covariate_cols: &[&str],
) -> Result<Dataset<F>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let locate = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let resp_idx: Vec<usize> = response_cols.iter().map(|c| locate(c)).collect::<Result<_>>()?;
    let cov_idx: Vec<usize> = covariate_cols.iter().map(|c| locate(c)).collect::<Result<_>>()?;

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        records.push(rec?);
    }

    // classify covariate columns: categorical iff any non-missing cell fails
    // to parse as a number
    let mut categorical = vec![false; cov_idx.len()];
    for (cj, &col) in cov_idx.iter().enumerate() {
        for rec in &records {
            let cell = rec.get(col).unwrap_or("");
            if !is_missing(cell) && cell.parse::<f64>().is_err() {
                categorical[cj] = true;
                break;
            }
        }
    }

    let mut encodings: Vec<Option<Encoding>> = categorical
        .iter()
        .map(|&c| if c { Some(Encoding { labels: Vec::new() }) } else { None })
        .collect();

    let mut cov_rows: Vec<Vec<F>> = Vec::new();
    let mut resp_rows: Vec<Vec<F>> = Vec::new();
    let mut dropped = 0usize;
    'rows: for rec in &records {
        let mut resp_row = Vec::with_capacity(resp_idx.len());
        for &col in &resp_idx {
            let cell = rec.get(col).unwrap_or("");
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => resp_row.push(F::of(v)),
                _ => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        let mut cov_row = Vec::with_capacity(cov_idx.len());
        for (cj, &col) in cov_idx.iter().enumerate() {
            let cell = rec.get(col).unwrap_or("");
            if is_missing(cell) {
                dropped += 1;
                continue 'rows;
            }
            if categorical[cj] {
                let enc = encodings[cj].as_mut().expect("categorical column has encoding");
                let code = match enc.code_of(cell) {
                    Some(c) => c,
                    None => {
                        enc.labels.push(cell.to_string());
                        enc.labels.len() - 1
                    }
                };
                cov_row.push(F::from_count(code));
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => cov_row.push(F::of(v)),
                    _ => {
                        dropped += 1;
                        continue 'rows;
                    }
                }
            }
        }
        resp_rows.push(resp_row);
        cov_rows.push(cov_row);
    }

    if resp_rows.is_empty() {
        return Err(Error::invalid("no usable rows after ingestion"));
    }

    let mut ds = Dataset::new(
        Matrix::from_rows(cov_rows)?,
        Matrix::from_rows(resp_rows)?,
        covariate_cols.iter().map(|s| s.to_string()).collect(),
        response_cols.iter().map(|s| s.to_string()).collect(),
    )?;
    ds.categorical = categorical;
    ds.encodings = encodings;
    ds.dropped_rows = dropped;
    Ok(ds)
}

/// Column-wise average ranks scaled by 1/(n+1); every entry lies in (0, 1).
pub fn pseudo_observations<F: Real>(m: &Matrix<F>) -> Matrix<F> {
    let n = m.nrows();
    let mut out = Matrix::zeros(n, m.ncols());
    for j in 0..m.ncols() {
        let col = m.column(j);
        let ranks = average_ranks(&col);
        let denom = F::from_count(n + 1);
        for i in 0..n {
            out[(i, j)] = ranks[i] / denom;
        }
    }
    out
}

/// Average ranks (1-based); tied values share the mean of their rank range.
pub(crate) fn average_ranks<F: Real>(values: &[F]) -> Vec<F> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share the average (i + j + 2) / 2
        let avg = F::from_count(i + j + 2) / F::of(2.0);
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Empirical distribution of training residuals, stored as a sorted sample.
/// The CDF is scaled by 1/(n+1) so values at sample points lie in
/// [1/(n+1), n/(n+1)]; tied sample points share average ranks so that this
/// path agrees with [`pseudo_observations`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmpiricalMargin<F> {
    sorted: Vec<F>,
}

impl<F: Real> EmpiricalMargin<F> {
    pub fn fit(residuals: &[F]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::invalid("empirical margin needs at least one residual"));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("residuals must be finite"));
        }
        let mut sorted = residuals.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
        Ok(EmpiricalMargin { sorted })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_residuals(&self) -> &[F] {
        &self.sorted
    }

    pub fn min(&self) -> F {
        self.sorted[0]
    }

    pub fn max(&self) -> F {
        *self.sorted.last().expect("non-empty")
    }

    /// F-hat(t): count of residuals <= t over n+1. At a tied sample point the
    /// tied block contributes its average rank.
    pub fn cdf(&self, t: F) -> F {
        let n = self.sorted.len();
        let below = self.sorted.partition_point(|&r| r < t);
        let at_or_below = self.sorted.partition_point(|&r| r <= t);
        let denom = F::from_count(n + 1);
        if at_or_below > below + 1 {
            // tied block: average rank of the tied values
            F::from_count(below + 1 + at_or_below) / (F::of(2.0) * denom)
        } else {
            F::from_count(at_or_below) / denom
        }
    }

    /// Generalized inverse of the (n+1)-scaled CDF, clamped to the observed
    /// support: sorted[ceil(u * (n+1))] with a 1-based index limited to
    /// [1, n]. A small epsilon guards ceil against floating error on exact
    /// grid points u = k/(n+1).
    pub fn quantile(&self, u: F) -> Result<F> {
        if u <= F::zero() || u >= F::one() {
            return Err(Error::invalid(format!("quantile requires u in (0,1), got {u}")));
        }
        let n = self.sorted.len();
        let t = u * F::from_count(n + 1);
        let idx = (t - F::of(1e-9)).ceil().as_f64() as usize;
        let idx = idx.clamp(1, n);
        Ok(self.sorted[idx - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col_matrix(values: &[f64]) -> Matrix<f64> {
        Matrix::from_rows(values.iter().map(|&v| vec![v]).collect()).unwrap()
    }

    #[test]
    fn pseudo_observations_simple_column() {
        let m = col_matrix(&[3.2, 1.1, 5.0]);
        let u = pseudo_observations(&m);
        assert_eq!(u.column(0), vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn pseudo_observations_ties_use_average_ranks() {
        let m = col_matrix(&[7.0, 7.0]);
        let u = pseudo_observations(&m);
        assert_eq!(u.column(0), vec![0.5, 0.5]);
    }

    #[test]
    fn ecdf_basic_values() {
        let m = EmpiricalMargin::fit(&[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.cdf(0.0), 0.5); // 2/4
        assert_eq!(m.cdf(2.0), 0.75); // n/(n+1)
        assert_eq!(m.cdf(-2.0), 0.0); // below the minimum
    }

    #[test]
    fn quantile_applies_order_statistic_rule() {
        let m = EmpiricalMargin::fit(&[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.quantile(0.5).unwrap(), 0.0); // index ceil(2) = 2
        assert_eq!(m.quantile(0.99).unwrap(), 2.0); // clamped to max
        assert!(m.quantile(1.2).is_err());
    }

    #[test]
    fn quantile_round_trips_stored_residuals() {
        let m = EmpiricalMargin::fit(&[3.0, -2.5, 0.1, 0.1, 9.0]).unwrap();
        for &r in m.sorted_residuals() {
            let u = m.cdf(r);
            assert_eq!(m.quantile(u).unwrap(), r);
        }
    }

    #[test]
    fn empty_residuals_rejected() {
        assert!(EmpiricalMargin::<f64>::fit(&[]).is_err());
    }

    #[test]
    fn split_is_partition_and_deterministic() {
        let cov = Matrix::from_fn(10, 2, |i, j| (i * 2 + j) as f64);
        let resp = Matrix::from_fn(10, 1, |i, _| i as f64);
        let ds = Dataset::new(cov, resp, vec!["a".into(), "b".into()], vec!["y".into()]).unwrap();
        let (tr, te) = ds.split(3, 9).unwrap();
        assert_eq!(tr.n(), 7);
        assert_eq!(te.n(), 3);
        let mut all: Vec<f64> = tr.responses().column(0);
        all.extend(te.responses().column(0));
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());

        let (tr2, te2) = ds.split(3, 9).unwrap();
        assert_eq!(tr.responses().column(0), tr2.responses().column(0));
        assert_eq!(te.responses().column(0), te2.responses().column(0));
    }

    #[test]
    fn split_rejects_out_of_range() {
        let cov = Matrix::from_fn(2, 1, |i, _| i as f64);
        let resp = Matrix::from_fn(2, 1, |i, _| i as f64);
        let ds = Dataset::new(cov, resp, vec!["a".into()], vec!["y".into()]).unwrap();
        assert!(ds.split(0, 1).is_err());
        assert!(ds.split(2, 1).is_err());
        let (tr, te) = ds.split(1, 5).unwrap();
        assert_eq!(tr.n(), 1);
        assert_eq!(te.n(), 1);
    }
}

//! Price panels: loading, standardized log returns, correlation estimate.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};

/// Dated observations of several named channels, rows ordered by date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Panel {
    pub timestamps: Vec<NaiveDate>,
    pub channels: Vec<String>,
    /// `values[t][j]`: channel `j` at `timestamps[t]`.
    pub values: Vec<Vec<f64>>,
}

impl Panel {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Keeps only the named channels, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Panel> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.channels
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::InvalidConfig(format!("no channel named `{n}`")))
            })
            .collect::<Result<_>>()?;
        Ok(Panel {
            timestamps: self.timestamps.clone(),
            channels: names.to_vec(),
            values: self
                .values
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub panel: Panel,
    pub warnings: Vec<String>,
}

/// Reads a `date,NAME1,...,NAMEN` file. The delimiter (comma, tab or
/// semicolon) is taken from the header line.
pub fn load_panel(path: impl AsRef<Path>) -> Result<LoadedPanel> {
    let text = std::fs::read_to_string(path)?;
    parse_panel(text.as_bytes())
}

pub fn parse_panel<R: Read>(mut reader: R) -> Result<LoadedPanel> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = [b',', b'\t', b';']
        .into_iter()
        .max_by_key(|d| header_line.bytes().filter(|b| b == d).count())
        .unwrap_or(b',');
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 {
        return Err(Error::Parse {
            row: 1,
            column: 1,
            message: "header needs a date column and at least one channel".into(),
        });
    }
    let channels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let date_cell = rec.get(0).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|e| Error::Parse {
            row: line,
            column: 1,
            message: format!("bad date `{date_cell}`: {e}"),
        })?;
        let mut vals = Vec::with_capacity(channels.len());
        for (j, name) in channels.iter().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("");
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("null") {
                return Err(Error::MissingValue {
                    row: line,
                    column: name.clone(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: line,
                column: j + 2,
                message: format!("not a number: `{cell}`"),
            })?;
            if v.is_nan() {
                return Err(Error::MissingValue {
                    row: line,
                    column: name.clone(),
                });
            }
            vals.push(v);
        }
        rows.push((date, vals));
    }

    let mut warnings = Vec::new();
    if rows.windows(2).any(|w| w[0].0 > w[1].0) {
        warnings.push("rows were not in date order and have been sorted".to_string());
        rows.sort_by_key(|r| r.0);
    }
    let mut seen = HashSet::new();
    for (d, _) in &rows {
        if !seen.insert(*d) {
            return Err(Error::DuplicateDate(*d));
        }
    }
    let (timestamps, values) = rows.into_iter().unzip();
    Ok(LoadedPanel {
        panel: Panel {
            timestamps,
            channels,
            values,
        },
        warnings,
    })
}

/// How log returns are scaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// One standard deviation per channel over the whole sample.
    #[default]
    WholeSample,
    /// Standard deviation of the preceding `n` returns; the first `n`
    /// returns are dropped.
    Trailing(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Returns {
    pub panel: Panel,
    /// Whole-sample standard deviation of each channel's log differences.
    pub scales: Vec<f64>,
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Log differences of each channel divided by the channel's sample
/// standard deviation (denominator `T - 2` for `T` prices).
pub fn standardized_returns(panel: &Panel) -> Result<Returns> {
    standardized_returns_with(panel, ScaleMode::WholeSample)
}

pub fn standardized_returns_with(panel: &Panel, mode: ScaleMode) -> Result<Returns> {
    let t = panel.len();
    if t < 3 {
        return Err(Error::TooShort { needed: 3, got: t });
    }
    for (i, row) in panel.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(v > 0.0) {
                return Err(Error::NonPositivePrice {
                    row: i + 1,
                    column: panel.channels[j].clone(),
                });
            }
        }
    }
    let n = panel.dim();
    let diffs: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            panel
                .values
                .windows(2)
                .map(|w| w[1][j].ln() - w[0][j].ln())
                .collect()
        })
        .collect();
    let mut scales = Vec::with_capacity(n);
    for (j, d) in diffs.iter().enumerate() {
        let s = sample_sd(d);
        if !(s >= 1e-12) {
            return Err(Error::DegenerateChannel(panel.channels[j].clone()));
        }
        scales.push(s);
    }
    let (start, values) = match mode {
        ScaleMode::WholeSample => (
            1,
            (0..t - 1)
                .map(|i| (0..n).map(|j| diffs[j][i] / scales[j]).collect())
                .collect::<Vec<Vec<f64>>>(),
        ),
        ScaleMode::Trailing(win) => {
            if win < 2 || win >= t - 1 {
                return Err(Error::InvalidConfig(format!(
                    "trailing window must lie in [2, {}), got {win}",
                    t - 1
                )));
            }
            let mut out = Vec::with_capacity(t - 1 - win);
            for i in win..t - 1 {
                let mut row = Vec::with_capacity(n);
                for (j, d) in diffs.iter().enumerate() {
                    let s = sample_sd(&d[i - win..i]);
                    if !(s >= 1e-12) {
                        return Err(Error::DegenerateChannel(panel.channels[j].clone()));
                    }
                    row.push(d[i] / s);
                }
                out.push(row);
            }
            (win + 1, out)
        }
    };
    Ok(Returns {
        panel: Panel {
            timestamps: panel.timestamps[start..].to_vec(),
            channels: panel.channels.clone(),
            values,
        },
        scales,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSummary {
    /// Eigenvalues in decreasing order.
    pub values: Vec<f64>,
    pub largest: f64,
    pub smallest: f64,
}

#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub model: CovarianceModel,
    pub eigen: EigenSummary,
    /// Whether `1e-8 I` had to be added to factor the matrix.
    pub jittered: bool,
}

const JITTER: f64 = 1e-8;
/// Smallest acceptable squared pivot ratio after jittering; below this the
/// matrix is treated as singular rather than ill-conditioned.
const MIN_PIVOT_RATIO: f64 = 1e-6;

/// Sample correlation matrix of the panel's channels.
pub fn correlation_matrix(panel: &Panel) -> Result<DMatrix<f64>> {
    let t = panel.len();
    let n = panel.dim();
    if t <= n {
        return Err(Error::TooShort { needed: n + 1, got: t });
    }
    let means: Vec<f64> = (0..n)
        .map(|j| panel.values.iter().map(|r| r[j]).sum::<f64>() / t as f64)
        .collect();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for r in &panel.values {
        for i in 0..n {
            let a = r[i] - means[i];
            for j in 0..=i {
                m[(i, j)] += a * (r[j] - means[j]);
            }
        }
    }
    let sd: Vec<f64> = (0..n).map(|i| m[(i, i)].sqrt()).collect();
    for (i, s) in sd.iter().enumerate() {
        if !(*s > 0.0) {
            return Err(Error::DegenerateChannel(panel.channels[i].clone()));
        }
    }
    for i in 0..n {
        for j in 0..i {
            let c = (m[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
        m[(i, i)] = 1.0;
    }
    Ok(m)
}

/// Correlation matrix of standardized returns wrapped as a covariance model.
///
/// A matrix that fails to factor (or factors with a vanishing pivot) is
/// retried once with `1e-8 I` added; the retry is kept only if the result
/// is not numerically singular.
pub fn estimate_covariance(returns: &Panel) -> Result<CorrelationEstimate> {
    let corr = correlation_matrix(returns)?;
    let n = corr.nrows();
    let (model, jittered) = match CovarianceModel::new(corr.clone()) {
        Ok(m) if m.pivot_ratio() >= 1e-12 => (m, false),
        Ok(_) | Err(Error::NotPositiveDefinite) => {
            let m = CovarianceModel::new(&corr + DMatrix::identity(n, n) * JITTER)?;
            if m.pivot_ratio() < MIN_PIVOT_RATIO {
                return Err(Error::NotPositiveDefinite);
            }
            (m, true)
        }
        Err(e) => return Err(e),
    };
    let eig = SymmetricEigen::new(corr);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(CorrelationEstimate {
        eigen: EigenSummary {
            largest: values[0],
            smallest: *values.last().expect("n >= 1"),
            values,
        },
        model,
        jittered,
    })
}

/// Autocorrelation diagnostic for one channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfChannel {
    pub channel: String,
    pub max_abs_acf: f64,
    pub max_abs_acf_squared: f64,
    /// Lags (of `max_lag`) outside the `1.96/sqrt(T)` band, for returns and squared returns.
    pub exceedances: usize,
    pub exceedances_squared: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfSummary {
    pub max_lag: usize,
    pub band: f64,
    pub channels: Vec<AcfChannel>,
}

pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let c0: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (1..=max_lag.min(n.saturating_sub(1)))
        .map(|k| {
            let ck: f64 = (k..n).map(|i| (xs[i] - mean) * (xs[i - k] - mean)).sum();
            if c0 > 0.0 {
                ck / c0
            } else {
                0.0
            }
        })
        .collect()
}

/// Sample ACF of each channel and of its square up to `max_lag`.
pub fn acf_summary(returns: &Panel, max_lag: usize) -> AcfSummary {
    let band = 1.96 / (returns.len() as f64).sqrt();
    let channels = (0..returns.dim())
        .map(|j| {
            let x = returns.column(j);
            let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
            let a = autocorrelation(&x, max_lag);
            let b = autocorrelation(&sq, max_lag);
            let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            AcfChannel {
                channel: returns.channels[j].clone(),
                max_abs_acf: max_abs(&a),
                max_abs_acf_squared: max_abs(&b),
                exceedances: a.iter().filter(|v| v.abs() > band).count(),
                exceedances_squared: b.iter().filter(|v| v.abs() > band).count(),
            }
        })
        .collect();
    AcfSummary {
        max_lag,
        band,
        channels,
    }
}

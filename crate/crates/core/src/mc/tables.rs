//! Reproduction of the comparison tables, with the published values alongside.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{simulate_alarms, SimConfig};
use crate::approx::{fdp, OvershootConvention};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::model::{ChartSpec, ScenarioSpec};

const PUBLISHED: &str = include_str!("../../resources/published_values.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableId {
    T1,
    T2,
    T3,
    T4,
    T5,
}

impl TableId {
    pub const ALL: [TableId; 5] = [TableId::T1, TableId::T2, TableId::T3, TableId::T4, TableId::T5];

    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "t1",
            TableId::T2 => "t2",
            TableId::T3 => "t3",
            TableId::T4 => "t4",
            TableId::T5 => "t5",
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix('t').unwrap_or(&t);
        match t {
            "1" => Ok(TableId::T1),
            "2" => Ok(TableId::T2),
            "3" => Ok(TableId::T3),
            "4" => Ok(TableId::T4),
            "5" => Ok(TableId::T5),
            _ => Err(Error::UnknownTable(s.to_string())),
        }
    }
}

/// One cell of a reproduced table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub table: TableId,
    pub design: String,
    /// Per-channel signal mean, or the threshold `b` for table 2.
    pub strength: f64,
    pub horizon: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// Mean delay among detected replications.
    pub conditional_delay: Option<f64>,
    pub published: Option<f64>,
    /// Closed-form FDP computed here (table 2, and the null row of table 1).
    pub approx: Option<f64>,
    pub published_approx: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalPattern {
    AllChannels,
    SingleChannel,
}

/// A column of one of the tables: a chart and how its signal is laid out.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDesign {
    pub key: &'static str,
    pub spec: ChartSpec,
    pub pattern: SignalPattern,
}

fn grid(step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 * step).collect()
}

// The published GLR-type simulations use windows 20 < w <= 50, i.e.
// `w in [21, 51)` in the `[window_lo, window_hi)` convention of the charts.
const GLR_WINDOW_LO: usize = 21;
const GLR_WINDOW_HI: usize = 51;

/// Signal strengths and horizons swept by a POD table.
pub fn table_grid(id: TableId) -> (Vec<f64>, Vec<u64>) {
    match id {
        TableId::T1 => (grid(0.25, 9), vec![20, 30, 40, 50]),
        TableId::T2 => (
            (0..=10).map(|i| 6.0 + 0.1 * i as f64).collect(),
            vec![20],
        ),
        TableId::T3 => (vec![0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5], vec![20, 30, 50]),
        TableId::T4 => (grid(0.25, 9), vec![20, 30, 50]),
        TableId::T5 => (grid(0.25, 9), vec![10, 20, 30, 50]),
    }
}

/// Columns of table `id`. For table 2 the threshold is a placeholder that
/// [`reproduce_table`] replaces row by row.
pub fn table_designs(id: TableId) -> Vec<TableDesign> {
    use SignalPattern::*;
    let n = 20;
    let mv = |pattern| {
        let sq = |w: f64| w.sqrt();
        vec![
            TableDesign {
                key: "mewma",
                spec: ChartSpec::Mewma {
                    dim: n,
                    beta: 0.05,
                    b: 6.5,
                },
                pattern,
            },
            TableDesign {
                key: "mma10",
                spec: ChartSpec::Mma {
                    dim: n,
                    window: 10,
                    h: 6.6 / sq(10.0),
                },
                pattern,
            },
            TableDesign {
                key: "mma20",
                spec: ChartSpec::Mma {
                    dim: n,
                    window: 20,
                    h: 6.5 / sq(20.0),
                },
                pattern,
            },
            TableDesign {
                key: "mma50",
                spec: ChartSpec::Mma {
                    dim: n,
                    window: 50,
                    h: 6.37 / sq(50.0),
                },
                pattern,
            },
            TableDesign {
                key: "mcusum",
                spec: ChartSpec::Mcusum {
                    dim: n,
                    window_lo: 20,
                    window_hi: 50,
                    delta: 0.25 * sq(20.0),
                    d: 20.3,
                },
                pattern,
            },
            TableDesign {
                key: "mglrt",
                spec: ChartSpec::Mglrt {
                    dim: n,
                    window_lo: GLR_WINDOW_LO,
                    window_hi: GLR_WINDOW_HI,
                    b: 6.84,
                },
                pattern,
            },
        ]
    };
    match id {
        TableId::T1 => {
            let d = |key, spec| TableDesign {
                key,
                spec,
                pattern: SingleChannel,
            };
            vec![
                d("ewma", ChartSpec::Ewma { beta: 0.05, b: 2.95 }),
                d("ma10", ChartSpec::Ma { window: 10, h: 0.99074 }),
                d("ma20", ChartSpec::Ma { window: 20, h: 0.6578 }),
                d("ma50", ChartSpec::Ma { window: 50, h: 0.394 }),
                d("cusum05", ChartSpec::Cusum { delta: 0.5, d: 10.8 }),
                d("cusum10", ChartSpec::Cusum { delta: 1.0, d: 5.88 }),
                d(
                    "glrt",
                    ChartSpec::WindowedGlr {
                        window_lo: GLR_WINDOW_LO,
                        window_hi: GLR_WINDOW_HI,
                        b: 3.27,
                    },
                ),
            ]
        }
        TableId::T2 => {
            let mut all = mv(AllChannels);
            all.retain(|d| matches!(d.key, "mewma" | "mma10" | "mma20" | "mglrt"));
            all
        }
        TableId::T3 => mv(AllChannels),
        TableId::T4 => mv(SingleChannel),
        TableId::T5 => {
            let d = |key, spec| TableDesign {
                key,
                spec,
                pattern: SingleChannel,
            };
            vec![
                d(
                    "mewma_soft",
                    ChartSpec::MewmaSoft {
                        dim: n,
                        beta: 0.05,
                        p: 0.1,
                        level: 0.1165,
                    },
                ),
                d(
                    "mewma_hard",
                    ChartSpec::MewmaHard {
                        dim: n,
                        beta: 0.05,
                        cut: 0.25,
                        level: 0.396,
                    },
                ),
                d(
                    "mma_hard20",
                    ChartSpec::MmaHard {
                        dim: n,
                        window: 20,
                        cut: 0.25,
                        level: 1.26,
                    },
                ),
                d(
                    "mma_hard10",
                    ChartSpec::MmaHard {
                        dim: n,
                        window: 10,
                        cut: 0.25,
                        level: 3.47,
                    },
                ),
                d(
                    "mglrt_hard",
                    ChartSpec::MglrtHard {
                        dim: n,
                        window_lo: GLR_WINDOW_LO,
                        window_hi: GLR_WINDOW_HI,
                        cut: 0.25,
                        b: 5.12,
                    },
                ),
            ]
        }
    }
}

struct PublishedCell {
    table: String,
    design: String,
    horizon: u64,
    strength: f64,
    column: String,
    value: f64,
}

fn published_cells() -> &'static [PublishedCell] {
    static CELLS: OnceLock<Vec<PublishedCell>> = OnceLock::new();
    CELLS.get_or_init(|| {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(PUBLISHED.as_bytes());
        rdr.records()
            .map(|r| {
                let r = r.expect("embedded table is well formed");
                PublishedCell {
                    table: r[0].to_string(),
                    design: r[1].to_string(),
                    horizon: r[2].parse().expect("horizon"),
                    strength: r[3].parse().expect("strength"),
                    column: r[4].to_string(),
                    value: r[5].parse().expect("value"),
                }
            })
            .collect()
    })
}

/// Published value of a cell; `column` is `"sim"` or `"approx"`.
pub fn published_value(
    table: TableId,
    design: &str,
    horizon: u64,
    strength: f64,
    column: &str,
) -> Option<f64> {
    published_cells()
        .iter()
        .find(|c| {
            c.table == table.name()
                && c.design == design
                && c.horizon == horizon
                && (c.strength - strength).abs() < 1e-9
                && c.column == column
        })
        .map(|c| c.value)
}

fn scenario_mean(pattern: SignalPattern, dim: usize, m: f64) -> Vec<f64> {
    match pattern {
        SignalPattern::AllChannels => ScenarioSpec::all_channels(dim, m, 1).mu,
        SignalPattern::SingleChannel => ScenarioSpec::single_channel(dim, m, 1).mu,
    }
}

/// Simulates one design over its table's grid.
pub fn run_design(id: TableId, design: &TableDesign, cfg: &SimConfig) -> Result<Vec<TableRow>> {
    let (strengths, horizons) = table_grid(id);
    let dim = design.spec.dim();
    let cov = CovarianceModel::identity(dim);
    let conv = OvershootConvention::default();
    let mut rows = Vec::new();
    if id == TableId::T2 {
        let null = vec![vec![0.0; dim]];
        for &b in &strengths {
            let spec = match design.spec {
                ChartSpec::Mma { window, .. } => design.spec.with_threshold(b / (window as f64).sqrt()),
                _ => design.spec.with_threshold(b),
            };
            let s = simulate_alarms(&spec, &null, 20, &cov, cfg)?;
            let est = s.pod(0, 20);
            rows.push(TableRow {
                table: id,
                design: design.key.to_string(),
                strength: b,
                horizon: 20,
                estimate: est.value,
                std_error: est.std_error,
                conditional_delay: None,
                published: published_value(id, design.key, 20, b, "sim"),
                approx: Some(fdp(&spec, 20, &conv)?.value),
                published_approx: published_value(id, design.key, 20, b, "approx"),
            });
        }
        return Ok(rows);
    }
    let means: Vec<Vec<f64>> = strengths
        .iter()
        .map(|&m| scenario_mean(design.pattern, dim, m))
        .collect();
    let horizon = *horizons.iter().max().expect("non-empty");
    let sample = simulate_alarms(&design.spec, &means, horizon, &cov, cfg)?;
    for &l in &horizons {
        for (s, &m) in strengths.iter().enumerate() {
            let est = sample.pod(s, l);
            let delay = sample.conditional_delay(s, l);
            let null_row = m == 0.0 && id == TableId::T1 && l == 20;
            rows.push(TableRow {
                table: id,
                design: design.key.to_string(),
                strength: m,
                horizon: l,
                estimate: est.value,
                std_error: est.std_error,
                conditional_delay: (delay.reps > 0).then_some(delay.value),
                published: published_value(id, design.key, l, m, "sim"),
                approx: if null_row {
                    Some(fdp(&design.spec, l, &conv)?.value)
                } else {
                    None
                },
                published_approx: if null_row {
                    published_value(id, design.key, l, 0.0, "approx")
                } else {
                    None
                },
            });
        }
    }
    Ok(rows)
}

/// Every cell of table `id`, ordered by design, then horizon, then strength.
pub fn reproduce_table(id: TableId, cfg: &SimConfig) -> Result<Vec<TableRow>> {
    if cfg.reps < 1000 {
        return Err(Error::InvalidConfig(format!(
            "table reproduction needs reps >= 1000, got {}",
            cfg.reps
        )));
    }
    let mut rows = Vec::new();
    for design in table_designs(id) {
        rows.extend(run_design(id, &design, cfg)?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_values_are_complete() {
        for id in TableId::ALL {
            let (strengths, horizons) = table_grid(id);
            for d in table_designs(id) {
                for &l in &horizons {
                    for &m in &strengths {
                        assert!(
                            published_value(id, d.key, l, m, "sim").is_some(),
                            "{id} {} {l} {m}",
                            d.key
                        );
                    }
                }
            }
        }
        assert_eq!(published_value(TableId::T1, "ma20", 20, 0.5, "sim"), Some(0.3188));
        assert_eq!(published_value(TableId::T1, "cusum05", 20, 0.0, "approx"), Some(0.0063));
        assert_eq!(published_value(TableId::T2, "mewma", 20, 6.8, "approx"), Some(0.0063));
    }

    #[test]
    fn table_ids_parse() {
        assert_eq!("T3".parse::<TableId>().unwrap(), TableId::T3);
        assert_eq!("5".parse::<TableId>().unwrap(), TableId::T5);
        assert!(matches!("t9".parse::<TableId>(), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn too_few_reps_is_rejected() {
        assert!(reproduce_table(TableId::T2, &SimConfig::new(0, 1)).is_err());
        assert!(reproduce_table(TableId::T2, &SimConfig::new(999, 1)).is_err());
    }

    #[test]
    fn table_two_approximation_column_tracks_published_brackets() {
        let conv = OvershootConvention::default();
        for d in table_designs(TableId::T2) {
            if d.key != "mewma" {
                continue;
            }
            for b in [6.0, 6.5, 6.8, 7.0] {
                let ours = fdp(&d.spec.with_threshold(b), 20, &conv).unwrap().value;
                let theirs = published_value(TableId::T2, d.key, 20, b, "approx").unwrap();
                assert!(((ours - theirs) / theirs).abs() < 0.05, "b={b}: {ours} vs {theirs}");
            }
        }
    }
}

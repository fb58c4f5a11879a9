//! Sequential detection of transient mean shifts.
//!
//! The crate provides streaming stopping rules for univariate and whitened
//! multivariate series ([`Monitor`]), closed-form approximations of their
//! false detection and detection probabilities ([`approx`]), threshold
//! calibration ([`calibrate`]), a reproducible Monte Carlo engine ([`mc`]) and
//! an ingestion pipeline for price panels ([`ingest`]).

pub mod approx;
pub mod calibrate;
pub mod charts1d;
pub mod covariance;
pub mod error;
pub mod ingest;
pub mod mc;
pub mod model;
pub mod monitor;
pub mod mv_charts;
pub mod special;
mod window;

pub use charts1d::{run_first_alarm, Monitor1d, RunTrace, StepDecision};
pub use covariance::{build_whitener, CovarianceModel};
pub use error::{Error, Result};
pub use model::{ChartKind, ChartSpec, EstimateWithError, ScenarioSpec};
pub use monitor::Monitor;
pub use mv_charts::{threshold_stat, MonitorMv, ThresholdMode};

#[cfg(test)]
pub(crate) mod testutil {
    use crate::model::{ChartKind, ChartSpec};

    /// A small valid spec of each kind.
    pub fn sample_spec(kind: ChartKind) -> ChartSpec {
        match kind {
            ChartKind::Ewma => ChartSpec::Ewma { beta: 0.05, b: 2.95 },
            ChartKind::Ma => ChartSpec::Ma { window: 10, h: 0.99 },
            ChartKind::MovingEwma => ChartSpec::MovingEwma {
                beta: 0.1,
                window: 15,
                h: 0.8,
            },
            ChartKind::Cusum => ChartSpec::Cusum { delta: 0.5, d: 10.8 },
            ChartKind::WindowedGlr => ChartSpec::WindowedGlr {
                window_lo: 20,
                window_hi: 50,
                b: 3.27,
            },
            ChartKind::Mewma => ChartSpec::Mewma {
                dim: 3,
                beta: 0.05,
                b: 4.0,
            },
            ChartKind::Mma => ChartSpec::Mma {
                dim: 3,
                window: 10,
                h: 1.3,
            },
            ChartKind::Mcusum => ChartSpec::Mcusum {
                dim: 3,
                window_lo: 10,
                window_hi: 30,
                delta: 0.8,
                d: 8.0,
            },
            ChartKind::Mglrt => ChartSpec::Mglrt {
                dim: 3,
                window_lo: 10,
                window_hi: 30,
                b: 4.0,
            },
            ChartKind::Mc1 => ChartSpec::Mc1 {
                dim: 3,
                k1: 0.5,
                h1: 8.0,
                cap: None,
            },
            ChartKind::MewmaSoft => ChartSpec::MewmaSoft {
                dim: 3,
                beta: 0.05,
                p: 0.1,
                level: 0.1,
            },
            ChartKind::MewmaHard => ChartSpec::MewmaHard {
                dim: 3,
                beta: 0.05,
                cut: 0.25,
                level: 0.4,
            },
            ChartKind::MmaHard => ChartSpec::MmaHard {
                dim: 3,
                window: 20,
                cut: 0.1,
                level: 1.0,
            },
            ChartKind::MglrtHard => ChartSpec::MglrtHard {
                dim: 3,
                window_lo: 10,
                window_hi: 30,
                cut: 0.05,
                b: 4.0,
            },
        }
    }
}

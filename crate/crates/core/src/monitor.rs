//! One entry point over the univariate and multivariate charts.

use crate::charts1d::{Monitor1d, StepDecision};
use crate::error::{Error, Result};
use crate::model::ChartSpec;
use crate::mv_charts::MonitorMv;

#[derive(Debug, Clone)]
pub enum Monitor {
    Univariate(Monitor1d),
    Multivariate(MonitorMv),
}

impl Monitor {
    pub fn new(spec: &ChartSpec) -> Result<Self> {
        if spec.kind().is_univariate() {
            Ok(Monitor::Univariate(Monitor1d::new(spec)?))
        } else {
            Ok(Monitor::Multivariate(MonitorMv::new(spec)?))
        }
    }

    pub fn spec(&self) -> &ChartSpec {
        match self {
            Monitor::Univariate(m) => m.spec(),
            Monitor::Multivariate(m) => m.spec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.spec().dim()
    }

    pub fn t(&self) -> u64 {
        match self {
            Monitor::Univariate(m) => m.t(),
            Monitor::Multivariate(m) => m.t(),
        }
    }

    pub fn level(&self) -> f64 {
        match self {
            Monitor::Univariate(m) => m.level(),
            Monitor::Multivariate(m) => m.level(),
        }
    }

    pub fn reset(&mut self) {
        match self {
            Monitor::Univariate(m) => m.reset(),
            Monitor::Multivariate(m) => m.reset(),
        }
    }

    /// Feeds one (whitened) observation of length `dim`.
    pub fn step(&mut self, x: &[f64]) -> Result<StepDecision> {
        match self {
            Monitor::Univariate(m) => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                Ok(m.step(x[0]))
            }
            Monitor::Multivariate(m) => m.step(x),
        }
    }

    #[inline]
    pub(crate) fn step_unchecked(&mut self, x: &[f64]) -> StepDecision {
        match self {
            Monitor::Univariate(m) => m.step(x[0]),
            Monitor::Multivariate(m) => m.step_whitened(x),
        }
    }
}

/// Runs `spec` over a sequence of rows and collects every step decision.
pub fn run_rows(spec: &ChartSpec, rows: &[Vec<f64>]) -> Result<Vec<StepDecision>> {
    let mut m = Monitor::new(spec)?;
    rows.iter().map(|r| m.step(r)).collect()
}

//! Chart parameterizations, signal scenarios and Monte Carlo estimates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field-free discriminant of [`ChartSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Ewma,
    Ma,
    MovingEwma,
    Cusum,
    WindowedGlr,
    Mewma,
    Mma,
    Mcusum,
    Mglrt,
    Mc1,
    MewmaSoft,
    MewmaHard,
    MmaHard,
    MglrtHard,
}

impl ChartKind {
    pub const ALL: [ChartKind; 14] = [
        ChartKind::Ewma,
        ChartKind::Ma,
        ChartKind::MovingEwma,
        ChartKind::Cusum,
        ChartKind::WindowedGlr,
        ChartKind::Mewma,
        ChartKind::Mma,
        ChartKind::Mcusum,
        ChartKind::Mglrt,
        ChartKind::Mc1,
        ChartKind::MewmaSoft,
        ChartKind::MewmaHard,
        ChartKind::MmaHard,
        ChartKind::MglrtHard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ChartKind::Ewma => "ewma",
            ChartKind::Ma => "ma",
            ChartKind::MovingEwma => "moving_ewma",
            ChartKind::Cusum => "cusum",
            ChartKind::WindowedGlr => "windowed_glr",
            ChartKind::Mewma => "mewma",
            ChartKind::Mma => "mma",
            ChartKind::Mcusum => "mcusum",
            ChartKind::Mglrt => "mglrt",
            ChartKind::Mc1 => "mc1",
            ChartKind::MewmaSoft => "mewma_soft",
            ChartKind::MewmaHard => "mewma_hard",
            ChartKind::MmaHard => "mma_hard",
            ChartKind::MglrtHard => "mglrt_hard",
        }
    }

    pub fn is_univariate(self) -> bool {
        matches!(
            self,
            ChartKind::Ewma
                | ChartKind::Ma
                | ChartKind::MovingEwma
                | ChartKind::Cusum
                | ChartKind::WindowedGlr
        )
    }
}

impl fmt::Display for ChartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChartKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let alias = match norm.as_str() {
            "glr" | "glrt" | "wglr" => "windowed_glr",
            "mosum" => "ma",
            "mglr" => "mglrt",
            other => other,
        };
        ChartKind::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown chart kind `{s}`")))
    }
}

/// Full parameterization of one chart instance.
///
/// Each variant carries exactly the fields its stopping rule needs; a
/// serialized spec missing one of them fails to deserialize. The EWMA family
/// stores the standardized limit `b`; the alarm level on the raw statistic is
/// derived in [`ChartSpec::alarm_level`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartSpec {
    /// `Y_n = (1-beta) Y_{n-1} + beta X_n`, alarm when `Y_n > b sqrt(beta/(2-beta))`.
    Ewma { beta: f64, b: f64 },
    /// Moving average of the last `window` observations, alarm above `h`.
    Ma { window: usize, h: f64 },
    /// Truncated EWMA over `window` lags, normalized by its total weight.
    MovingEwma { beta: f64, window: usize, h: f64 },
    /// Page's CUSUM with reference strength `delta`, alarm above `d`.
    Cusum { delta: f64, d: f64 },
    /// `max_{lo <= w < hi} sqrt(w) * mean_w > b`.
    WindowedGlr {
        window_lo: usize,
        window_hi: usize,
        b: f64,
    },
    /// Multivariate EWMA, alarm when `|Y|^2 > b^2 beta/(2-beta)`.
    Mewma { dim: usize, beta: f64, b: f64 },
    /// Multivariate MA, alarm when `|mean_w| > h`.
    Mma { dim: usize, window: usize, h: f64 },
    /// Windowed multivariate CUSUM over `lo < w <= hi` with reference norm `delta`.
    Mcusum {
        dim: usize,
        window_lo: usize,
        window_hi: usize,
        delta: f64,
        d: f64,
    },
    /// Windowed multivariate GLRT over `lo <= w < hi`, alarm when `w |mean_w|^2 > b^2`.
    Mglrt {
        dim: usize,
        window_lo: usize,
        window_hi: usize,
        b: f64,
    },
    /// Recursive multivariate CUSUM with a running change-point anchor.
    Mc1 {
        dim: usize,
        k1: f64,
        h1: f64,
        /// Optional cap on `t - anchor`; `None` follows the unbounded recursion.
        #[serde(default)]
        cap: Option<usize>,
    },
    /// MEWMA with soft per-channel weights; `level` is compared to the weighted sum.
    MewmaSoft {
        dim: usize,
        beta: f64,
        p: f64,
        level: f64,
    },
    /// MEWMA dropping channels with `Y_j^2 <= cut`; `level` is compared to the truncated sum.
    MewmaHard {
        dim: usize,
        beta: f64,
        cut: f64,
        level: f64,
    },
    /// MMA on channelwise truncated squared means; `level` plays the role of `h^2`.
    MmaHard {
        dim: usize,
        window: usize,
        cut: f64,
        level: f64,
    },
    /// Windowed GLRT on channelwise truncated squared means, alarm above `b^2`.
    MglrtHard {
        dim: usize,
        window_lo: usize,
        window_hi: usize,
        cut: f64,
        b: f64,
    },
}

/// `beta / (2 - beta)`, the stationary variance of a unit-noise EWMA.
pub fn ewma_variance(beta: f64) -> f64 {
    beta / (2.0 - beta)
}

impl ChartSpec {
    pub fn kind(&self) -> ChartKind {
        match self {
            ChartSpec::Ewma { .. } => ChartKind::Ewma,
            ChartSpec::Ma { .. } => ChartKind::Ma,
            ChartSpec::MovingEwma { .. } => ChartKind::MovingEwma,
            ChartSpec::Cusum { .. } => ChartKind::Cusum,
            ChartSpec::WindowedGlr { .. } => ChartKind::WindowedGlr,
            ChartSpec::Mewma { .. } => ChartKind::Mewma,
            ChartSpec::Mma { .. } => ChartKind::Mma,
            ChartSpec::Mcusum { .. } => ChartKind::Mcusum,
            ChartSpec::Mglrt { .. } => ChartKind::Mglrt,
            ChartSpec::Mc1 { .. } => ChartKind::Mc1,
            ChartSpec::MewmaSoft { .. } => ChartKind::MewmaSoft,
            ChartSpec::MewmaHard { .. } => ChartKind::MewmaHard,
            ChartSpec::MmaHard { .. } => ChartKind::MmaHard,
            ChartSpec::MglrtHard { .. } => ChartKind::MglrtHard,
        }
    }

    /// Number of channels the chart consumes per step.
    pub fn dim(&self) -> usize {
        match *self {
            ChartSpec::Ewma { .. }
            | ChartSpec::Ma { .. }
            | ChartSpec::MovingEwma { .. }
            | ChartSpec::Cusum { .. }
            | ChartSpec::WindowedGlr { .. } => 1,
            ChartSpec::Mewma { dim, .. }
            | ChartSpec::Mma { dim, .. }
            | ChartSpec::Mcusum { dim, .. }
            | ChartSpec::Mglrt { dim, .. }
            | ChartSpec::Mc1 { dim, .. }
            | ChartSpec::MewmaSoft { dim, .. }
            | ChartSpec::MewmaHard { dim, .. }
            | ChartSpec::MmaHard { dim, .. }
            | ChartSpec::MglrtHard { dim, .. } => dim,
        }
    }

    /// The design threshold as parameterized (b, h, d, h1 or level).
    pub fn threshold(&self) -> f64 {
        match *self {
            ChartSpec::Ewma { b, .. }
            | ChartSpec::WindowedGlr { b, .. }
            | ChartSpec::Mewma { b, .. }
            | ChartSpec::Mglrt { b, .. }
            | ChartSpec::MglrtHard { b, .. } => b,
            ChartSpec::Ma { h, .. } | ChartSpec::MovingEwma { h, .. } | ChartSpec::Mma { h, .. } => {
                h
            }
            ChartSpec::Cusum { d, .. } | ChartSpec::Mcusum { d, .. } => d,
            ChartSpec::Mc1 { h1, .. } => h1,
            ChartSpec::MewmaSoft { level, .. }
            | ChartSpec::MewmaHard { level, .. }
            | ChartSpec::MmaHard { level, .. } => level,
        }
    }

    /// Copy of this spec with the design threshold replaced.
    pub fn with_threshold(&self, value: f64) -> ChartSpec {
        let mut out = self.clone();
        match &mut out {
            ChartSpec::Ewma { b, .. }
            | ChartSpec::WindowedGlr { b, .. }
            | ChartSpec::Mewma { b, .. }
            | ChartSpec::Mglrt { b, .. }
            | ChartSpec::MglrtHard { b, .. } => *b = value,
            ChartSpec::Ma { h, .. } | ChartSpec::MovingEwma { h, .. } | ChartSpec::Mma { h, .. } => {
                *h = value
            }
            ChartSpec::Cusum { d, .. } | ChartSpec::Mcusum { d, .. } => *d = value,
            ChartSpec::Mc1 { h1, .. } => *h1 = value,
            ChartSpec::MewmaSoft { level, .. }
            | ChartSpec::MewmaHard { level, .. }
            | ChartSpec::MmaHard { level, .. } => *level = value,
        }
        out
    }

    /// Alarm level on the natural scale of the statistic the chart reports.
    pub fn alarm_level(&self) -> f64 {
        match *self {
            ChartSpec::Ewma { beta, b } => b * ewma_variance(beta).sqrt(),
            ChartSpec::Mewma { beta, b, .. } => b * b * ewma_variance(beta),
            ChartSpec::Mglrt { b, .. } | ChartSpec::MglrtHard { b, .. } => b * b,
            _ => self.threshold(),
        }
    }

    /// First step index (1-based) at which the chart may raise an alarm.
    pub fn first_alarm_step(&self) -> u64 {
        match *self {
            ChartSpec::Ma { window, .. }
            | ChartSpec::MovingEwma { window, .. }
            | ChartSpec::Mma { window, .. }
            | ChartSpec::MmaHard { window, .. } => window as u64,
            ChartSpec::WindowedGlr { window_hi, .. } | ChartSpec::Mcusum { window_hi, .. } => {
                window_hi as u64 + 1
            }
            ChartSpec::Mglrt { window_lo, .. } | ChartSpec::MglrtHard { window_lo, .. } => {
                window_lo as u64
            }
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn unit_open(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must lie in (0, 1), got {v}")))
            }
        }
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {v}")))
            }
        }
        fn nonnegative(name: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} must be nonnegative, got {v}")))
            }
        }
        fn window(w: usize) -> Result<()> {
            if w == 0 {
                Err(Error::InvalidSpec("window must be at least 1".into()))
            } else {
                Ok(())
            }
        }
        fn window_pair(lo: usize, hi: usize) -> Result<()> {
            if lo == 0 || lo >= hi {
                Err(Error::InvalidSpec(format!(
                    "window range needs 1 <= window_lo < window_hi, got [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        }
        fn dim(n: usize) -> Result<()> {
            if n == 0 {
                Err(Error::InvalidSpec("dimension must be at least 1".into()))
            } else {
                Ok(())
            }
        }

        match *self {
            ChartSpec::Ewma { beta, b } => {
                unit_open("beta", beta)?;
                positive("b", b)
            }
            ChartSpec::Ma { window: w, h } => {
                window(w)?;
                positive("h", h)
            }
            ChartSpec::MovingEwma { beta, window: w, h } => {
                unit_open("beta", beta)?;
                window(w)?;
                positive("h", h)
            }
            ChartSpec::Cusum { delta, d } => {
                nonnegative("delta", delta)?;
                positive("d", d)
            }
            ChartSpec::WindowedGlr {
                window_lo,
                window_hi,
                b,
            } => {
                window_pair(window_lo, window_hi)?;
                positive("b", b)
            }
            ChartSpec::Mewma { dim: n, beta, b } => {
                dim(n)?;
                unit_open("beta", beta)?;
                positive("b", b)
            }
            ChartSpec::Mma { dim: n, window: w, h } => {
                dim(n)?;
                window(w)?;
                positive("h", h)
            }
            ChartSpec::Mcusum {
                dim: n,
                window_lo,
                window_hi,
                delta,
                d,
            } => {
                dim(n)?;
                window_pair(window_lo, window_hi)?;
                nonnegative("delta", delta)?;
                positive("d", d)
            }
            ChartSpec::Mglrt {
                dim: n,
                window_lo,
                window_hi,
                b,
            } => {
                dim(n)?;
                window_pair(window_lo, window_hi)?;
                positive("b", b)
            }
            ChartSpec::Mc1 { dim: n, k1, h1, cap } => {
                dim(n)?;
                nonnegative("k1", k1)?;
                positive("h1", h1)?;
                if cap == Some(0) {
                    return Err(Error::InvalidSpec("cap must be at least 1".into()));
                }
                Ok(())
            }
            ChartSpec::MewmaSoft {
                dim: n,
                beta,
                p,
                level,
            } => {
                dim(n)?;
                unit_open("beta", beta)?;
                unit_open("p", p)?;
                positive("level", level)
            }
            ChartSpec::MewmaHard {
                dim: n,
                beta,
                cut,
                level,
            } => {
                dim(n)?;
                unit_open("beta", beta)?;
                nonnegative("cut", cut)?;
                positive("level", level)
            }
            ChartSpec::MmaHard {
                dim: n,
                window: w,
                cut,
                level,
            } => {
                dim(n)?;
                window(w)?;
                nonnegative("cut", cut)?;
                positive("level", level)
            }
            ChartSpec::MglrtHard {
                dim: n,
                window_lo,
                window_hi,
                cut,
                b,
            } => {
                dim(n)?;
                window_pair(window_lo, window_hi)?;
                nonnegative("cut", cut)?;
                positive("b", b)
            }
        }
    }
}

/// A transient signal: mean `mu` on steps `change_time+1 ..= change_time+length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub change_time: u64,
    pub length: u64,
    pub mu: Vec<f64>,
}

impl ScenarioSpec {
    pub fn null(dim: usize, length: u64) -> Self {
        ScenarioSpec {
            change_time: 0,
            length,
            mu: vec![0.0; dim],
        }
    }

    /// Equal shift `m` in every channel.
    pub fn all_channels(dim: usize, m: f64, length: u64) -> Self {
        ScenarioSpec {
            change_time: 0,
            length,
            mu: vec![m; dim],
        }
    }

    /// Shift `m` in the first channel only, `mu = m (1, 0, ..., 0)`.
    pub fn single_channel(dim: usize, m: f64, length: u64) -> Self {
        let mut mu = vec![0.0; dim];
        mu[0] = m;
        ScenarioSpec {
            change_time: 0,
            length,
            mu,
        }
    }

    pub fn is_null(&self) -> bool {
        self.mu.iter().all(|&m| m == 0.0)
    }

    pub fn validate_for(&self, spec: &ChartSpec) -> Result<()> {
        if self.mu.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: self.mu.len(),
            });
        }
        if self.length == 0 {
            return Err(Error::InvalidSpec("signal length must be at least 1".into()));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec("signal mean must be finite".into()));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub reps: u64,
    pub seed: u64,
}

impl EstimateWithError {
    /// Binomial proportion `hits / reps` with `sqrt(p(1-p)/reps)` standard error.
    pub fn proportion(hits: u64, reps: u64, seed: u64) -> Self {
        let value = if reps == 0 { 0.0 } else { hits as f64 / reps as f64 };
        let std_error = if reps == 0 {
            0.0
        } else {
            (value * (1.0 - value) / reps as f64).sqrt()
        };
        EstimateWithError {
            value,
            std_error,
            reps,
            seed,
        }
    }

    /// Sample mean with standard error `s / sqrt(n)` from integer-valued sums.
    pub fn mean_of(sum: u64, sum_sq: u64, n: u64, seed: u64) -> Self {
        if n == 0 {
            return EstimateWithError {
                value: f64::NAN,
                std_error: f64::NAN,
                reps: 0,
                seed,
            };
        }
        let nf = n as f64;
        let mean = sum as f64 / nf;
        let std_error = if n > 1 {
            let var = (sum_sq as f64 - nf * mean * mean) / (nf - 1.0);
            (var.max(0.0) / nf).sqrt()
        } else {
            0.0
        };
        EstimateWithError {
            value: mean,
            std_error,
            reps: n,
            seed,
        }
    }

    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

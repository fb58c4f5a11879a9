//! Multivariate stopping rules on whitened (identity-covariance) vectors.
//!
//! The direction-invariant charts (MEWMA, MMA, MCUSUM, MGLRT, MC1) depend on
//! the data only through Euclidean norms of whitened sums. The threshold
//! variants act channelwise and so depend on the whitening coordinates.

use serde::{Deserialize, Serialize};

use crate::charts1d::StepDecision;
use crate::error::{Error, Result};
use crate::model::ChartSpec;
use crate::window::WindowSums;

/// Channel shrinkage applied to per-channel squared statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Weight `e^{y^2/2} / ((1-p)/p + e^{y^2/2})` on each `y^2`.
    Soft { p: f64 },
    /// Keep `y^2` only when `y^2 > cut`.
    Hard { cut: f64 },
}

/// Soft weight for one channel, evaluated without overflowing `e^{y^2/2}`.
#[inline]
pub fn soft_weight(y_sq: f64, p: f64) -> f64 {
    1.0 / (1.0 + (1.0 - p) / p * (-0.5 * y_sq).exp())
}

/// Thresholded sum of squares over the channels of `y`.
pub fn threshold_stat(y: &[f64], mode: ThresholdMode) -> f64 {
    match mode {
        ThresholdMode::Soft { p } => y
            .iter()
            .map(|v| {
                let s = v * v;
                soft_weight(s, p) * s
            })
            .sum(),
        ThresholdMode::Hard { cut } => y.iter().map(|v| v * v).filter(|&s| s > cut).sum(),
    }
}

#[derive(Debug, Clone)]
enum State {
    Ewma {
        beta: f64,
        y: Vec<f64>,
        shrink: Option<ThresholdMode>,
    },
    Ma {
        window: usize,
        sums: WindowSums,
        cut: Option<f64>,
    },
    Mcusum {
        lo: usize,
        hi: usize,
        half_delta: f64,
        sums: WindowSums,
    },
    Mglrt {
        lo: usize,
        hi: usize,
        sums: WindowSums,
        cut: Option<f64>,
    },
    Mc1 {
        half_k: f64,
        anchor: u64,
        sum: Vec<f64>,
        capped: Option<WindowSums>,
    },
}

/// Streaming state of a multivariate chart.
#[derive(Debug, Clone)]
pub struct MonitorMv {
    spec: ChartSpec,
    dim: usize,
    level: f64,
    first_alarm: u64,
    t: u64,
    state: State,
    scratch: Vec<f64>,
}

impl MonitorMv {
    pub fn new(spec: &ChartSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.dim();
        let state = match *spec {
            ChartSpec::Mewma { beta, .. } => State::Ewma {
                beta,
                y: vec![0.0; dim],
                shrink: None,
            },
            ChartSpec::MewmaSoft { beta, p, .. } => State::Ewma {
                beta,
                y: vec![0.0; dim],
                shrink: Some(ThresholdMode::Soft { p }),
            },
            ChartSpec::MewmaHard { beta, cut, .. } => State::Ewma {
                beta,
                y: vec![0.0; dim],
                shrink: Some(ThresholdMode::Hard { cut }),
            },
            ChartSpec::Mma { window, .. } => State::Ma {
                window,
                sums: WindowSums::new(dim, window),
                cut: None,
            },
            ChartSpec::MmaHard { window, cut, .. } => State::Ma {
                window,
                sums: WindowSums::new(dim, window),
                cut: Some(cut),
            },
            ChartSpec::Mcusum {
                window_lo,
                window_hi,
                delta,
                ..
            } => State::Mcusum {
                lo: window_lo,
                hi: window_hi,
                half_delta: delta / 2.0,
                sums: WindowSums::new(dim, window_hi),
            },
            ChartSpec::Mglrt {
                window_lo,
                window_hi,
                ..
            } => State::Mglrt {
                lo: window_lo,
                hi: window_hi,
                sums: WindowSums::new(dim, window_hi - 1),
                cut: None,
            },
            ChartSpec::MglrtHard {
                window_lo,
                window_hi,
                cut,
                ..
            } => State::Mglrt {
                lo: window_lo,
                hi: window_hi,
                sums: WindowSums::new(dim, window_hi - 1),
                cut: Some(cut),
            },
            ChartSpec::Mc1 { k1, cap, .. } => State::Mc1 {
                half_k: k1 / 2.0,
                anchor: 0,
                sum: vec![0.0; dim],
                capped: cap.map(|c| WindowSums::new(dim, c)),
            },
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "{} is not a multivariate chart",
                    spec.kind()
                )))
            }
        };
        Ok(MonitorMv {
            spec: spec.clone(),
            dim,
            level: spec.alarm_level(),
            first_alarm: spec.first_alarm_step(),
            t: 0,
            state,
            scratch: vec![0.0; dim],
        })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// MC1 change-point estimate; `None` for other kinds.
    pub fn anchor(&self) -> Option<u64> {
        match self.state {
            State::Mc1 { anchor, .. } => Some(anchor),
            _ => None,
        }
    }

    /// Current per-channel EWMA vector for the MEWMA family.
    pub fn ewma_vector(&self) -> Option<&[f64]> {
        match &self.state {
            State::Ewma { y, .. } => Some(y),
            _ => None,
        }
    }

    pub fn reset(&mut self) {
        self.t = 0;
        match &mut self.state {
            State::Ewma { y, .. } => y.fill(0.0),
            State::Ma { sums, .. } | State::Mcusum { sums, .. } | State::Mglrt { sums, .. } => {
                sums.reset()
            }
            State::Mc1 {
                anchor,
                sum,
                capped,
                ..
            } => {
                *anchor = 0;
                sum.fill(0.0);
                if let Some(ring) = capped {
                    ring.reset();
                }
            }
        }
    }

    /// Consumes one whitened observation.
    pub fn step(&mut self, x: &[f64]) -> Result<StepDecision> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.step_whitened(x))
    }

    pub(crate) fn step_whitened(&mut self, x: &[f64]) -> StepDecision {
        self.t += 1;
        let t = self.t;
        let scratch = &mut self.scratch;
        let statistic = match &mut self.state {
            State::Ewma { beta, y, shrink } => {
                for (yj, xj) in y.iter_mut().zip(x) {
                    *yj = (1.0 - *beta) * *yj + *beta * xj;
                }
                match shrink {
                    None => y.iter().map(|v| v * v).sum(),
                    Some(mode) => threshold_stat(y, *mode),
                }
            }
            State::Ma { window, sums, cut } => {
                sums.push(x);
                sums.sum_last_into(*window, scratch);
                let inv_w = 1.0 / *window as f64;
                match cut {
                    None => scratch.iter().map(|s| s * s).sum::<f64>().sqrt() * inv_w,
                    Some(c) => scratch
                        .iter()
                        .map(|s| (s * inv_w) * (s * inv_w))
                        .filter(|&m2| m2 > *c)
                        .sum(),
                }
            }
            State::Mcusum {
                lo,
                hi,
                half_delta,
                sums,
            } => {
                sums.push(x);
                let mut best = f64::NEG_INFINITY;
                for w in (*lo + 1)..=*hi {
                    sums.sum_last_into(w, scratch);
                    let norm = scratch.iter().map(|s| s * s).sum::<f64>().sqrt();
                    best = best.max(norm - w as f64 * *half_delta);
                }
                best
            }
            State::Mglrt { lo, hi, sums, cut } => {
                sums.push(x);
                let mut best = f64::NEG_INFINITY;
                for w in *lo..*hi {
                    sums.sum_last_into(w, scratch);
                    let wf = w as f64;
                    let v = match cut {
                        None => scratch.iter().map(|s| s * s).sum::<f64>() / wf,
                        // w * sum_j mean_j^2 over channels with mean_j^2 > cut
                        Some(c) => {
                            let limit = *c * wf * wf;
                            scratch
                                .iter()
                                .map(|s| s * s)
                                .filter(|&s2| s2 > limit)
                                .sum::<f64>()
                                / wf
                        }
                    };
                    best = best.max(v);
                }
                best
            }
            State::Mc1 {
                half_k,
                anchor,
                sum,
                capped,
            } => {
                if let Some(ring) = capped {
                    if t - 1 - *anchor == ring.capacity() as u64 {
                        for (s, o) in sum.iter_mut().zip(ring.oldest()) {
                            *s -= o;
                        }
                        *anchor += 1;
                    }
                    ring.push(x);
                }
                for (s, xj) in sum.iter_mut().zip(x) {
                    *s += xj;
                }
                let norm = sum.iter().map(|s| s * s).sum::<f64>().sqrt();
                let stat = (norm - *half_k * (t - *anchor) as f64).max(0.0);
                if stat == 0.0 {
                    *anchor = t;
                    sum.fill(0.0);
                }
                stat
            }
        };
        StepDecision {
            t,
            statistic,
            alarm: t >= self.first_alarm && statistic > self.level,
        }
    }

    /// Current statistic recomputed by direct summation over the stored
    /// window; `None` for recursive kinds.
    pub fn naive_statistic(&self) -> Option<f64> {
        let norm_sq = |v: &[f64]| v.iter().map(|s| s * s).sum::<f64>();
        match &self.state {
            State::Ma { window, sums, cut } => {
                let s = sums.naive_sum_last(*window);
                let w = *window as f64;
                Some(match cut {
                    None => norm_sq(&s).sqrt() / w,
                    Some(c) => s.iter().map(|v| (v / w).powi(2)).filter(|m| m > c).sum(),
                })
            }
            State::Mcusum {
                lo, hi, half_delta, sums,
            } => Some(
                ((*lo + 1)..=*hi)
                    .map(|w| norm_sq(&sums.naive_sum_last(w)).sqrt() - w as f64 * half_delta)
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            State::Mglrt { lo, hi, sums, cut } => Some(
                (*lo..*hi)
                    .map(|w| {
                        let wf = w as f64;
                        let s = sums.naive_sum_last(w);
                        match cut {
                            None => norm_sq(&s) / wf,
                            Some(c) => {
                                wf * s.iter().map(|v| (v / wf).powi(2)).filter(|m| m > c).sum::<f64>()
                            }
                        }
                    })
                    .fold(f64::NEG_INFINITY, f64::max),
            ),
            _ => None,
        }
    }
}

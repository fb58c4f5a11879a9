//! One-dimensional stopping rules: EWMA, MA, moving-EWMA, CUSUM and the
//! windowed GLR scan. All are one-sided (alarm on upward shifts).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChartSpec;
use crate::window::{WindowSums, REBUILD_EVERY};

/// Decision emitted after each observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecision {
    /// 1-based index of the observation just consumed.
    pub t: u64,
    pub statistic: f64,
    pub alarm: bool,
}

#[derive(Debug, Clone)]
enum State {
    Ewma {
        beta: f64,
        y: f64,
    },
    Ma {
        window: usize,
        sums: WindowSums,
    },
    MovingEwma {
        beta: f64,
        /// `(1-beta)^w`, weight of the observation leaving the window.
        tail: f64,
        ring: WindowSums,
        y: f64,
        since_rebuild: u32,
    },
    Cusum {
        half_delta: f64,
        y: f64,
    },
    WindowedGlr {
        lo: usize,
        hi: usize,
        inv_sqrt: Vec<f64>,
        sums: WindowSums,
    },
}

/// Streaming state of a univariate chart.
///
/// Alarms are reported but never stop the chart; callers decide what a
/// crossing means.
#[derive(Debug, Clone)]
pub struct Monitor1d {
    spec: ChartSpec,
    level: f64,
    first_alarm: u64,
    t: u64,
    state: State,
}

impl Monitor1d {
    pub fn new(spec: &ChartSpec) -> Result<Self> {
        spec.validate()?;
        let state = match *spec {
            ChartSpec::Ewma { beta, .. } => State::Ewma { beta, y: 0.0 },
            ChartSpec::Ma { window, .. } => State::Ma {
                window,
                sums: WindowSums::new(1, window),
            },
            ChartSpec::MovingEwma { beta, window, .. } => State::MovingEwma {
                beta,
                tail: (1.0 - beta).powi(window as i32),
                ring: WindowSums::new(1, window),
                y: 0.0,
                since_rebuild: 0,
            },
            ChartSpec::Cusum { delta, .. } => State::Cusum {
                half_delta: delta / 2.0,
                y: 0.0,
            },
            ChartSpec::WindowedGlr {
                window_lo,
                window_hi,
                ..
            } => State::WindowedGlr {
                lo: window_lo,
                hi: window_hi,
                inv_sqrt: (0..window_hi).map(|w| 1.0 / (w as f64).sqrt()).collect(),
                sums: WindowSums::new(1, window_hi - 1),
            },
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "{} is not a univariate chart",
                    spec.kind()
                )))
            }
        };
        Ok(Monitor1d {
            spec: spec.clone(),
            level: spec.alarm_level(),
            first_alarm: spec.first_alarm_step(),
            t: 0,
            state,
        })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Alarm level on the statistic's scale.
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn reset(&mut self) {
        self.t = 0;
        match &mut self.state {
            State::Ewma { y, .. } | State::Cusum { y, .. } => *y = 0.0,
            State::Ma { sums, .. } | State::WindowedGlr { sums, .. } => sums.reset(),
            State::MovingEwma {
                ring,
                y,
                since_rebuild,
                ..
            } => {
                ring.reset();
                *y = 0.0;
                *since_rebuild = 0;
            }
        }
    }

    /// Starts a CUSUM from level `y0` instead of zero. No-op for other kinds.
    pub fn set_cusum_level(&mut self, y0: f64) {
        if let State::Cusum { y, .. } = &mut self.state {
            *y = y0.max(0.0);
        }
    }

    pub fn step(&mut self, x: f64) -> StepDecision {
        self.t += 1;
        let statistic = match &mut self.state {
            State::Ewma { beta, y } => {
                *y = (1.0 - *beta) * *y + *beta * x;
                *y
            }
            State::Ma { window, sums } => {
                sums.push(&[x]);
                sums.sum_last(*window) / *window as f64
            }
            State::MovingEwma {
                beta,
                tail,
                ring,
                y,
                since_rebuild,
            } => {
                let leaving = ring.oldest()[0];
                ring.push(&[x]);
                *since_rebuild += 1;
                if *since_rebuild >= REBUILD_EVERY {
                    *y = moving_ewma_naive(ring, *beta);
                    *since_rebuild = 0;
                } else {
                    *y = (1.0 - *beta) * *y + *beta * x - *beta * *tail * leaving;
                }
                *y / (1.0 - *tail)
            }
            State::Cusum { half_delta, y } => {
                *y = (*y + x - *half_delta).max(0.0);
                *y
            }
            State::WindowedGlr {
                lo,
                hi,
                inv_sqrt,
                sums,
            } => {
                sums.push(&[x]);
                let mut best = f64::NEG_INFINITY;
                for w in *lo..*hi {
                    best = best.max(sums.sum_last(w) * inv_sqrt[w]);
                }
                best
            }
        };
        StepDecision {
            t: self.t,
            statistic,
            alarm: self.t >= self.first_alarm && statistic > self.level,
        }
    }

    /// Current statistic recomputed directly from the stored window (windowed
    /// kinds) or the recursive state (EWMA, CUSUM).
    pub fn naive_statistic(&self) -> f64 {
        match &self.state {
            State::Ewma { y, .. } | State::Cusum { y, .. } => *y,
            State::Ma { window, sums } => sums.naive_sum_last(*window)[0] / *window as f64,
            State::MovingEwma {
                beta, tail, ring, ..
            } => moving_ewma_naive(ring, *beta) / (1.0 - *tail),
            State::WindowedGlr { lo, hi, sums, .. } => (*lo..*hi)
                .map(|w| sums.naive_sum_last(w)[0] / (w as f64).sqrt())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

fn moving_ewma_naive(ring: &WindowSums, beta: f64) -> f64 {
    let mut acc = 0.0;
    let mut weight = beta;
    for j in 0..ring.capacity() {
        acc += weight * ring.recent(j)[0];
        weight *= 1.0 - beta;
    }
    acc
}

/// Statistic trace and first alarm of a chart run over a whole series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub first_alarm: Option<u64>,
    pub statistics: Vec<f64>,
    pub alarms: Vec<bool>,
    pub level: f64,
}

impl RunTrace {
    /// Maximal runs `[start, end]` (1-based, inclusive) of consecutive alarms.
    pub fn alarm_runs(&self) -> Vec<(u64, u64)> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &a) in self.alarms.iter().enumerate() {
            let t = i as u64 + 1;
            match (a, start) {
                (true, None) => start = Some(t),
                (false, Some(s)) => {
                    runs.push((s, t - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, self.alarms.len() as u64));
        }
        runs
    }
}

/// Runs a univariate chart over `series` from a fresh state.
pub fn run_first_alarm(spec: &ChartSpec, series: &[f64]) -> Result<RunTrace> {
    let mut monitor = Monitor1d::new(spec)?;
    let mut trace = RunTrace {
        first_alarm: None,
        statistics: Vec::with_capacity(series.len()),
        alarms: Vec::with_capacity(series.len()),
        level: monitor.level(),
    };
    for &x in series {
        let d = monitor.step(x);
        if d.alarm && trace.first_alarm.is_none() {
            trace.first_alarm = Some(d.t);
        }
        trace.statistics.push(d.statistic);
        trace.alarms.push(d.alarm);
    }
    Ok(trace)
}

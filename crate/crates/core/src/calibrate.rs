//! Threshold calibration to a target FDP, by inverting the closed forms or
//! by bisection on simulated FDP.

use serde::{Deserialize, Serialize};

use crate::approx::{fdp, has_fdp_formula, OvershootConvention};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::mc::{estimate_fdp, SimConfig};
use crate::model::{ChartSpec, EstimateWithError};

const BRACKET_LIMIT: f64 = 1e3;
const MC_ITERATIONS: u32 = 20;
const Z95: f64 = 1.959_963_984_540_054;

/// Threshold at which the closed-form FDP over `l` steps equals `target`.
///
/// The threshold field of `spec` is only used as the starting point of the
/// bracket search.
pub fn solve_threshold(
    spec: &ChartSpec,
    target: f64,
    l: u64,
    conv: &OvershootConvention,
) -> Result<f64> {
    if !has_fdp_formula(spec.kind()) {
        return Err(Error::UnsupportedKind(spec.kind()));
    }
    if !(target > 1e-8 && target < 0.5) {
        return Err(Error::Domain(format!("target FDP must lie in (1e-8, 0.5), got {target}")));
    }
    let eval = |t: f64| -> Result<f64> { Ok(fdp(&spec.with_threshold(t), l, conv)?.value) };
    let no_bracket = || Error::NoBracket {
        kind: spec.kind(),
        target,
        limit: BRACKET_LIMIT,
    };

    let start = spec.threshold();
    let mut hi = if start > 0.0 && start.is_finite() { start } else { 1.0 };
    while eval(hi)? >= target {
        hi *= 2.0;
        if hi > BRACKET_LIMIT {
            return Err(no_bracket());
        }
    }
    let mut lo = hi / 2.0;
    while eval(lo)? <= target {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-12 {
            return Err(no_bracket());
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * hi {
            break;
        }
        if eval(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCalibration {
    pub threshold: f64,
    pub estimate: EstimateWithError,
    pub evaluations: u32,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Stochastic bisection on simulated FDP with common random numbers.
///
/// Every evaluation reuses `cfg.seed`, so the estimated FDP is (up to
/// warm-up rejection) a deterministic decreasing function of the threshold.
/// The search starts from the closed-form solution when one exists and from
/// the threshold in `spec` otherwise, and stops as soon as the 95% interval
/// of an estimate covers `target`.
pub fn calibrate_mc(
    spec: &ChartSpec,
    target: f64,
    l: u64,
    cov: &CovarianceModel,
    cfg: &SimConfig,
) -> Result<McCalibration> {
    if cfg.reps < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "Monte Carlo calibration needs reps >= 10000, got {}",
            cfg.reps
        )));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!("target FDP must lie in (0, 1), got {target}")));
    }
    spec.validate()?;
    let start = if has_fdp_formula(spec.kind()) {
        solve_threshold(spec, target.min(0.49), l, &OvershootConvention::default())
            .unwrap_or_else(|_| spec.threshold())
    } else {
        spec.threshold()
    };

    let mut evaluations = 0u32;
    let mut best: Option<(f64, EstimateWithError)> = None;
    let mut eval = |t: f64| -> Result<EstimateWithError> {
        let e = estimate_fdp(&spec.with_threshold(t), l, cov, cfg)?;
        evaluations += 1;
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| (e.value - target).abs() < (b.value - target).abs());
        if better {
            best = Some((t, e));
        }
        Ok(e)
    };
    let covers = |e: &EstimateWithError| (e.value - target).abs() <= Z95 * e.std_error;

    let first = eval(start)?;
    if covers(&first) {
        return Ok(done(start, first, evaluations));
    }
    // bracket with accelerating steps: lo has FDP above target, hi below
    let (mut lo, mut hi);
    if first.value > target {
        lo = start;
        let mut step = 1.1;
        hi = start * step;
        let mut found = false;
        for _ in 0..MC_ITERATIONS {
            let e = eval(hi)?;
            if covers(&e) {
                return Ok(done(hi, e, evaluations));
            }
            if e.value < target {
                found = true;
                break;
            }
            lo = hi;
            step *= step;
            hi *= step;
        }
        if !found {
            return Ok(unconverged(best, evaluations));
        }
    } else {
        hi = start;
        let mut step = 1.1;
        lo = start / step;
        let mut found = false;
        for _ in 0..MC_ITERATIONS {
            let e = eval(lo)?;
            if covers(&e) {
                return Ok(done(lo, e, evaluations));
            }
            if e.value > target {
                found = true;
                break;
            }
            hi = lo;
            step *= step;
            lo /= step;
        }
        if !found {
            return Ok(unconverged(best, evaluations));
        }
    }
    for _ in 0..MC_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let e = eval(mid)?;
        if covers(&e) {
            return Ok(done(mid, e, evaluations));
        }
        if e.value > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(unconverged(best, evaluations))
}

fn done(threshold: f64, estimate: EstimateWithError, evaluations: u32) -> McCalibration {
    McCalibration {
        threshold,
        estimate,
        evaluations,
        converged: true,
        warning: None,
    }
}

fn unconverged(best: Option<(f64, EstimateWithError)>, evaluations: u32) -> McCalibration {
    let (threshold, estimate) = best.expect("at least one evaluation");
    McCalibration {
        threshold,
        estimate,
        evaluations,
        converged: false,
        warning: Some(format!(
            "no candidate's 95% interval covered the target after {evaluations} evaluations; returning the closest"
        )),
    }
}

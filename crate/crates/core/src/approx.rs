//! Closed-form false detection probability (FDP) and detection probability
//! (POD) approximations, and conditional delay moments.
//!
//! All functions are pure. Returned probabilities are clamped to `[0, 1]`
//! and carry the list of asymptotic conditions that the inputs violate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ewma_variance, ChartKind, ChartSpec};
use crate::special::{adaptive_simpson, integrate_to_infinity, ln_gamma, norm_cdf, norm_pdf};

/// Overshoot constant `rho_+` of the normal random walk.
pub const RHO_PLUS: f64 = 0.5826;

const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OvershootMode {
    /// `nu(x) = exp(-rho_+ x)`.
    #[default]
    Exponential,
    /// `nu(x) = (2/x)(Phi(x/2) - 1/2) / ((x/2) Phi(x/2) + phi(x/2))`.
    Accurate,
}

/// Argument passed to `nu` by the EWMA-type formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EwmaArg {
    /// Variance-matched for univariate EWMA, plain `b sqrt(2 beta)` for MEWMA.
    #[default]
    Auto,
    PlainSqrt2Beta,
    /// `b sqrt(2 beta / (2 - beta))`.
    VarianceMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct OvershootConvention {
    pub mode: OvershootMode,
    pub ewma_arg: EwmaArg,
}

impl OvershootConvention {
    pub fn accurate() -> Self {
        OvershootConvention {
            mode: OvershootMode::Accurate,
            ewma_arg: EwmaArg::Auto,
        }
    }

    fn nu(&self, x: f64) -> f64 {
        nu_unchecked(x, self.mode)
    }

    /// Multiplier `c` with `nu(b c)` in the EWMA-type formulas.
    fn ewma_scale(&self, beta: f64, univariate: bool) -> f64 {
        let matched = match self.ewma_arg {
            EwmaArg::Auto => univariate,
            EwmaArg::PlainSqrt2Beta => false,
            EwmaArg::VarianceMatched => true,
        };
        if matched {
            (2.0 * beta / (2.0 - beta)).sqrt()
        } else {
            (2.0 * beta).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LocalIntegral,
    NormalLaw,
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub value: f64,
    pub regime: Regime,
    pub validity_warnings: Vec<String>,
}

impl ApproxResult {
    fn new(raw: f64, regime: Regime, validity_warnings: Vec<String>) -> Self {
        ApproxResult {
            value: raw.clamp(0.0, 1.0),
            regime,
            validity_warnings,
        }
    }
}

/// Overshoot correction `nu(x)` for `x > 0`.
pub fn nu(x: f64, mode: OvershootMode) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("nu needs x > 0, got {x}")));
    }
    Ok(nu_unchecked(x, mode))
}

fn nu_unchecked(x: f64, mode: OvershootMode) -> f64 {
    match mode {
        OvershootMode::Exponential => (-RHO_PLUS * x).exp(),
        OvershootMode::Accurate => {
            if x < 1e-8 {
                return 1.0;
            }
            let h = 0.5 * x;
            let cdf = norm_cdf(h);
            (2.0 / x) * (cdf - 0.5) / (h * cdf + norm_pdf(h))
        }
    }
}

/// `int_lo^hi u nu(u)^2 / 2 du`, the window factor of the GLR formulas.
fn glr_window_integral(lo: f64, hi: f64, conv: &OvershootConvention) -> f64 {
    adaptive_simpson(
        |u| {
            let v = conv.nu(u);
            0.5 * u * v * v
        },
        lo,
        hi,
        QUAD_TOL,
    )
}

/// `ln[(x/2)^{n/2} / Gamma(n/2) e^{-x/2}]` for `x = b^2`.
fn ln_chi_tail_factor(b_sq: f64, n: usize) -> f64 {
    let half_n = n as f64 / 2.0;
    half_n * (0.5 * b_sq).ln() - ln_gamma(half_n) - 0.5 * b_sq
}

/// FDP of a univariate chart over a horizon of `l` steps.
pub fn fdp_1d(spec: &ChartSpec, l: u64, conv: &OvershootConvention) -> Result<ApproxResult> {
    spec.validate()?;
    let lf = l as f64;
    let mut warnings = Vec::new();
    let raw = match *spec {
        ChartSpec::Ewma { beta, b } => {
            if beta > 0.2 {
                warnings.push("beta not small".to_string());
            }
            lf * beta * b * norm_pdf(b) * conv.nu(b * conv.ewma_scale(beta, true))
        }
        ChartSpec::Ma { window, h } => {
            let w = window as f64;
            lf * h / w.sqrt() * norm_pdf(h * w.sqrt()) * conv.nu(std::f64::consts::SQRT_2 * h)
        }
        ChartSpec::Cusum { delta, d } => {
            if delta == 0.0 {
                return Err(Error::Domain("cusum reference delta must be positive".into()));
            }
            if lf * (-delta * d).exp() > 0.1 {
                warnings.push("L*exp(-delta*d) not small".to_string());
            }
            if delta * lf / 2.0 <= d {
                warnings.push("delta*L/2 <= d".to_string());
            }
            0.5 * lf * delta * delta * (-delta * (d + 2.0 * RHO_PLUS)).exp()
        }
        ChartSpec::WindowedGlr {
            window_lo,
            window_hi,
            b,
        } => {
            let lo = b / (window_hi as f64).sqrt();
            let hi = b / (window_lo as f64).sqrt();
            lf * b * norm_pdf(b) * glr_window_integral(lo, hi, conv)
        }
        ChartSpec::MovingEwma { .. } => return Err(Error::UnsupportedKind(spec.kind())),
        _ => {
            return Err(Error::InvalidSpec(format!(
                "{} is not a univariate chart",
                spec.kind()
            )))
        }
    };
    Ok(ApproxResult::new(raw, Regime::ClosedForm, warnings))
}

/// FDP of a direction-invariant multivariate chart over `l` steps.
pub fn fdp_mv(spec: &ChartSpec, l: u64, conv: &OvershootConvention) -> Result<ApproxResult> {
    spec.validate()?;
    if l == 0 {
        return Ok(ApproxResult::new(0.0, Regime::ClosedForm, Vec::new()));
    }
    let lf = l as f64;
    let n = spec.dim();
    let mut warnings = Vec::new();
    let ln_raw = match *spec {
        ChartSpec::Mma { window, h, .. } => {
            let w = window as f64;
            let b = h * w.sqrt();
            small_dim_warning(n, b, &mut warnings);
            (2.0 * lf / w).ln()
                + ln_chi_tail_factor(b * b, n)
                + conv.nu(b * (2.0 / w).sqrt()).ln()
        }
        ChartSpec::Mewma { beta, b, .. } => {
            small_dim_warning(n, b, &mut warnings);
            if beta * b * b / n as f64 > 0.5 {
                warnings.push("beta*b^2/N not small".to_string());
            }
            (2.0 * lf * beta).ln()
                + ln_chi_tail_factor(b * b, n)
                + conv.nu(b * conv.ewma_scale(beta, false)).ln()
        }
        ChartSpec::Mglrt {
            window_lo,
            window_hi,
            b,
            ..
        } => {
            small_dim_warning(n, b, &mut warnings);
            if lf.ln() / (b * b) > 0.2 {
                warnings.push("ln(L)/b^2 not small".to_string());
            }
            let lo = b / (window_hi as f64).sqrt();
            let hi = b / (window_lo as f64).sqrt();
            (2.0 * lf).ln() + ln_chi_tail_factor(b * b, n) + glr_window_integral(lo, hi, conv).ln()
        }
        ChartSpec::Mcusum { delta, d, .. } => {
            if n < 2 {
                return Err(Error::Domain("the multivariate cusum formula needs N >= 2".into()));
            }
            if delta == 0.0 {
                return Err(Error::Domain("reference norm delta must be positive".into()));
            }
            if lf * (-delta * d).exp() > 0.1 {
                warnings.push("L*exp(-|delta|*d) not small".to_string());
            }
            let m = (n - 1) as f64;
            (0.5 * lf * delta * delta).ln()
                + 0.5 * m * (4.0 * delta * d).ln()
                + ln_gamma(0.5 * m)
                - ln_gamma(m)
                - delta * (d + 2.0 * RHO_PLUS)
        }
        ChartSpec::Mc1 { .. }
        | ChartSpec::MewmaSoft { .. }
        | ChartSpec::MewmaHard { .. }
        | ChartSpec::MmaHard { .. }
        | ChartSpec::MglrtHard { .. } => return Err(Error::UnsupportedKind(spec.kind())),
        _ => {
            return Err(Error::InvalidSpec(format!(
                "{} is not a multivariate chart",
                spec.kind()
            )))
        }
    };
    Ok(ApproxResult::new(ln_raw.exp(), Regime::ClosedForm, warnings))
}

fn small_dim_warning(n: usize, b: f64, warnings: &mut Vec<String>) {
    if n as f64 / (b * b) > 0.5 {
        warnings.push("N/b^2 not small".to_string());
    }
}

/// Dispatches to [`fdp_1d`] or [`fdp_mv`].
pub fn fdp(spec: &ChartSpec, l: u64, conv: &OvershootConvention) -> Result<ApproxResult> {
    if spec.kind().is_univariate() {
        fdp_1d(spec, l, conv)
    } else {
        fdp_mv(spec, l, conv)
    }
}

/// Second-order FDP of a CUSUM started at zero rather than in stationarity.
pub fn fdp_cusum_zero_start(delta: f64, d: f64, l: u64) -> Result<ApproxResult> {
    if !(delta > 0.0 && d > 0.0) {
        return Err(Error::Domain("delta and d must be positive".into()));
    }
    let lf = l as f64;
    let mut warnings = Vec::new();
    if lf * (-delta * d).exp() > 0.1 {
        warnings.push("L*exp(-delta*d) not small".to_string());
    }
    let k = d + 2.0 * RHO_PLUS;
    let raw = (delta * (delta * lf / 2.0 - k) + 3.0) * (-delta * k).exp();
    Ok(ApproxResult::new(raw, Regime::ClosedForm, warnings))
}

/// Probability that the unwindowed GLR statistic crosses `b` within `m`
/// steps, with `m = c b^2`.
pub fn fdp_glr_horizon(b: f64, m: u64, conv: &OvershootConvention) -> Result<ApproxResult> {
    if !(b > 0.0) || m == 0 {
        return Err(Error::Domain("need b > 0 and m >= 1".into()));
    }
    let mf = m as f64;
    let c = mf / (b * b);
    let a = c.powf(-0.5);
    let first = integrate_to_infinity(
        |x| {
            let v = conv.nu(x);
            x * v * v
        },
        a,
        QUAD_TOL,
    );
    let second = integrate_to_infinity(
        |x| {
            let v = conv.nu(x);
            v * v / x
        },
        a,
        QUAD_TOL,
    );
    let raw = mf * b * norm_pdf(b) * (first - second / c);
    Ok(ApproxResult::new(raw, Regime::ClosedForm, Vec::new()))
}

/// Applies the discrete-time boundary correction: `b + rho_+ sqrt(2 beta)`
/// for EWMA kinds, `h + sqrt(2) rho_+ / w` for moving averages. Other kinds
/// are returned unchanged.
pub fn boundary_corrected(spec: &ChartSpec) -> ChartSpec {
    match *spec {
        ChartSpec::Ewma { beta, b } => ChartSpec::Ewma {
            beta,
            b: b + RHO_PLUS * (2.0 * beta).sqrt(),
        },
        ChartSpec::Mewma { dim, beta, b } => ChartSpec::Mewma {
            dim,
            beta,
            b: b + RHO_PLUS * (2.0 * beta).sqrt(),
        },
        ChartSpec::Ma { window, h } => ChartSpec::Ma {
            window,
            h: h + std::f64::consts::SQRT_2 * RHO_PLUS / window as f64,
        },
        ChartSpec::Mma { dim, window, h } => ChartSpec::Mma {
            dim,
            window,
            h: h + std::f64::consts::SQRT_2 * RHO_PLUS / window as f64,
        },
        _ => spec.clone(),
    }
}

/// POD within `l` steps of a signal with strength `mu` (the whitened norm
/// for multivariate kinds).
///
/// Below the chart's level the local integral is used, at or above it the
/// normal law. The local branches return the integrated crossing intensity
/// itself, so strength 0 reproduces [`fdp`] exactly.
pub fn pod_approx(
    spec: &ChartSpec,
    mu: f64,
    l: u64,
    conv: &OvershootConvention,
) -> Result<ApproxResult> {
    spec.validate()?;
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("signal strength must be >= 0, got {mu}")));
    }
    if mu == 0.0 {
        return fdp(spec, l, conv);
    }
    if l == 0 {
        return Ok(ApproxResult::new(0.0, Regime::ClosedForm, Vec::new()));
    }
    let lf = l as f64;
    let n = spec.dim();
    let mut warnings = Vec::new();
    match *spec {
        ChartSpec::Ewma { beta, b } => {
            let sd = ewma_variance(beta).sqrt();
            let h = b * sd;
            if mu <= h {
                if mu == h {
                    warnings.push("strength equals the level; normal law undefined".to_string());
                }
                let scale = conv.ewma_scale(beta, true);
                let mut sum = 0.0;
                let mut decay = 1.0;
                let mut low = false;
                for _ in 0..l {
                    decay *= 1.0 - beta;
                    let bk = b - (1.0 - decay) * mu / sd;
                    low |= bk <= 1.0;
                    sum += beta * bk * norm_pdf(bk) * conv.nu(bk * scale);
                }
                if low {
                    warnings.push("b(t) not large".to_string());
                }
                return Ok(ApproxResult::new(sum, Regime::LocalIntegral, warnings));
            }
            let gap = mu - h;
            let num = beta * lf + (1.0 - h / mu).ln() - beta / (4.0 * gap * gap);
            let den = (beta / 2.0).sqrt() / gap;
            Ok(ApproxResult::new(norm_cdf(num / den), Regime::NormalLaw, warnings))
        }
        ChartSpec::Ma { window, h } => {
            let w = window as f64;
            if mu <= h {
                if mu == h {
                    warnings.push("strength equals the level; normal law undefined".to_string());
                }
                let g = |x: f64| {
                    let s = w.sqrt() * x;
                    s * norm_pdf(s) * conv.nu(std::f64::consts::SQRT_2 * x)
                };
                let span = lf / w;
                if w.sqrt() * (h - mu * span.min(1.0)) <= 1.0 {
                    warnings.push("sqrt(w) h(t) not large".to_string());
                }
                let head = adaptive_simpson(|u| g(h - u * mu), 0.0, span.min(1.0), QUAD_TOL);
                let tail = (span - 1.0).max(0.0) * g(h - mu);
                return Ok(ApproxResult::new(head + tail, Regime::LocalIntegral, warnings));
            }
            let z = mu * w.sqrt() * (lf / w - h / mu);
            Ok(ApproxResult::new(norm_cdf(z), Regime::NormalLaw, warnings))
        }
        ChartSpec::Cusum { delta, d } => {
            let drift = mu - delta / 2.0;
            if drift <= 0.0 {
                return Err(Error::Domain(format!(
                    "cusum POD needs mu > delta/2, got mu={mu}, delta={delta}"
                )));
            }
            let mean = d / drift + 1.0 / (2.0 * drift * drift);
            let sd = d.sqrt() / drift.powf(1.5);
            Ok(ApproxResult::new(norm_cdf((lf - mean) / sd), Regime::NormalLaw, warnings))
        }
        ChartSpec::WindowedGlr {
            window_lo,
            window_hi,
            b,
        } => {
            glr_range_warning(mu, b, window_lo, window_hi, &mut warnings);
            let mu2 = mu * mu;
            let z = (lf - (b * b + 1.0) / mu2) / (2.0 * b / mu2);
            Ok(ApproxResult::new(norm_cdf(z), Regime::NormalLaw, warnings))
        }
        ChartSpec::Mewma { beta, b, .. } => {
            let h = b * ewma_variance(beta).sqrt();
            if mu <= h {
                if mu == h {
                    warnings.push("strength equals the level; normal law undefined".to_string());
                }
                let scale = conv.ewma_scale(beta, false);
                let shift = mu * mu / ewma_variance(beta);
                let last_sq = b * b - (1.0 - (1.0 - beta).powi(l.min(i32::MAX as u64) as i32)).powi(2) * shift;
                if last_sq <= n as f64 {
                    warnings.push("N/b(t)^2 not small".to_string());
                }
                let mut sum = 0.0;
                let mut decay = 1.0;
                for _ in 0..l {
                    decay *= 1.0 - beta;
                    let bk_sq = b * b - (1.0 - decay).powi(2) * shift;
                    let bk = bk_sq.sqrt();
                    sum += 2.0 * beta * ln_chi_tail_factor(bk_sq, n).exp() * conv.nu(bk * scale);
                }
                return Ok(ApproxResult::new(sum, Regime::LocalIntegral, warnings));
            }
            let gap = mu - h;
            let nf = n as f64;
            let num = beta * lf + (1.0 - h / mu).ln() - beta * mu / (4.0 * h * gap * gap)
                + nf * beta / (4.0 * h * gap);
            let den = (beta / 2.0).sqrt() / gap;
            Ok(ApproxResult::new(norm_cdf(num / den), Regime::NormalLaw, warnings))
        }
        ChartSpec::Mma { window, h, .. } => {
            let w = window as f64;
            if mu <= h {
                if mu == h {
                    warnings.push("strength equals the level; normal law undefined".to_string());
                }
                let f = |t: f64| {
                    let ht_sq = h * h - mu * mu * t.min(1.0).powi(2);
                    2.0 * (ln_chi_tail_factor(ht_sq * w, n)).exp()
                        * conv.nu(ht_sq.sqrt() * std::f64::consts::SQRT_2)
                };
                let span = lf / w;
                if (h * h - mu * mu * span.min(1.0).powi(2)) * w <= n as f64 {
                    warnings.push("N/(w h(t)^2) not small".to_string());
                }
                let head = adaptive_simpson(f, 0.0, span.min(1.0), QUAD_TOL);
                let tail = (span - 1.0).max(0.0) * f(1.0);
                return Ok(ApproxResult::new(head + tail, Regime::LocalIntegral, warnings));
            }
            let nf = n as f64;
            let z = w.sqrt() * mu * (lf / w - h / mu + (nf - 1.0) / (2.0 * h * mu * w));
            Ok(ApproxResult::new(norm_cdf(z), Regime::NormalLaw, warnings))
        }
        ChartSpec::Mcusum {
            window_lo,
            window_hi,
            delta,
            d,
            ..
        } => {
            let drift = mu - delta / 2.0;
            if drift <= 0.0 {
                return Err(Error::Domain(format!(
                    "multivariate cusum POD needs |mu| > |delta|/2, got {mu} and {delta}"
                )));
            }
            if !(d / window_hi as f64 <= drift && drift <= d / window_lo as f64) {
                warnings.push("drift outside (d/w1, d/w0)".to_string());
            }
            let nf = n as f64;
            let mean = d / drift + 1.0 / (2.0 * drift * drift) - (nf - 1.0) / (2.0 * mu * drift);
            let sd = d.sqrt() / drift.powf(1.5);
            Ok(ApproxResult::new(norm_cdf((lf - mean) / sd), Regime::NormalLaw, warnings))
        }
        ChartSpec::Mglrt {
            window_lo,
            window_hi,
            b,
            ..
        } => {
            glr_range_warning(mu, b, window_lo, window_hi, &mut warnings);
            let mu2 = mu * mu;
            let z = (lf - (b * b + n as f64) / mu2 - 2.0) / (2.0 * b / mu2);
            Ok(ApproxResult::new(norm_cdf(z), Regime::NormalLaw, warnings))
        }
        _ => Err(Error::UnsupportedKind(spec.kind())),
    }
}

fn glr_range_warning(mu: f64, b: f64, lo: usize, hi: usize, warnings: &mut Vec<String>) {
    if !(b / (hi as f64).sqrt() < mu && mu < b / (lo as f64).sqrt()) {
        warnings.push("strength outside (b/sqrt(w1), b/sqrt(w0))".to_string());
    }
}

/// Approximate mean and variance of the detection delay given detection,
/// for strengths above the chart's crossing level.
pub fn delay_moments(spec: &ChartSpec, mu: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    let below = |level: f64| {
        Err(Error::Domain(format!(
            "{} delay moments need strength > {level}, got {mu}",
            spec.kind()
        )))
    };
    let nf = spec.dim() as f64;
    match *spec {
        ChartSpec::Ewma { beta, b } => {
            let h = b * ewma_variance(beta).sqrt();
            if mu <= h {
                return below(h);
            }
            let gap = mu - h;
            Ok((
                -(1.0 - h / mu).ln() / beta + 1.0 / (4.0 * gap * gap),
                1.0 / (2.0 * beta * gap * gap),
            ))
        }
        ChartSpec::Ma { window, h } => {
            if mu <= h {
                return below(h);
            }
            let w = window as f64;
            Ok((h * w / mu, w / (mu * mu)))
        }
        ChartSpec::Cusum { delta, d } => {
            let drift = mu - delta / 2.0;
            if drift <= 0.0 {
                return below(delta / 2.0);
            }
            Ok((
                d / drift + 1.0 / (2.0 * drift * drift),
                d / drift.powi(3),
            ))
        }
        ChartSpec::WindowedGlr { b, .. } => {
            if mu <= 0.0 {
                return below(0.0);
            }
            Ok(((b * b + 1.0) / (mu * mu), 4.0 * b * b / mu.powi(4)))
        }
        ChartSpec::Mewma { beta, b, .. } => {
            let h = b * ewma_variance(beta).sqrt();
            if mu <= h {
                return below(h);
            }
            let gap = mu - h;
            Ok((
                -(1.0 - h / mu).ln() / beta + mu / (4.0 * h * gap * gap) - nf / (4.0 * h * gap),
                1.0 / (2.0 * beta * gap * gap),
            ))
        }
        ChartSpec::Mma { window, h, .. } => {
            if mu <= h {
                return below(h);
            }
            let w = window as f64;
            Ok((h * w / mu - (nf - 1.0) / (2.0 * h * mu), w / (mu * mu)))
        }
        ChartSpec::Mcusum { delta, d, .. } => {
            let drift = mu - delta / 2.0;
            if drift <= 0.0 {
                return below(delta / 2.0);
            }
            Ok((
                d / drift + 1.0 / (2.0 * drift * drift) - (nf - 1.0) / (2.0 * mu * drift),
                d / drift.powi(3),
            ))
        }
        ChartSpec::Mglrt { b, .. } => {
            if mu <= 0.0 {
                return below(0.0);
            }
            Ok(((b * b + nf) / (mu * mu) + 2.0, 4.0 * b * b / mu.powi(4)))
        }
        _ => Err(Error::UnsupportedKind(spec.kind())),
    }
}

/// Whether a closed-form FDP exists for `kind`.
pub fn has_fdp_formula(kind: ChartKind) -> bool {
    matches!(
        kind,
        ChartKind::Ewma
            | ChartKind::Ma
            | ChartKind::Cusum
            | ChartKind::WindowedGlr
            | ChartKind::Mewma
            | ChartKind::Mma
            | ChartKind::Mcusum
            | ChartKind::Mglrt
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXP: OvershootConvention = OvershootConvention {
        mode: OvershootMode::Exponential,
        ewma_arg: EwmaArg::Auto,
    };

    /// Renewal-series form of the overshoot correction, used as an oracle.
    fn nu_series(x: f64) -> f64 {
        let mut s = 0.0;
        for n in 1..200_000u32 {
            let t = norm_cdf(-x * (n as f64).sqrt() / 2.0) / n as f64;
            s += t;
            if t < 1e-18 {
                break;
            }
        }
        2.0 / (x * x) * (-2.0 * s).exp()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn nu_limits_and_values() {
        assert_eq!(nu(1e-10, OvershootMode::Accurate).unwrap(), 1.0);
        assert!(close(nu(1e-12, OvershootMode::Exponential).unwrap(), 1.0, 1e-11));
        assert!(close(nu(2.0555, OvershootMode::Exponential).unwrap(), 0.3019, 5e-5));
        assert!(nu(0.0, OvershootMode::Exponential).is_err());
        assert!(nu(-1.0, OvershootMode::Accurate).is_err());
    }

    #[test]
    fn accurate_nu_tracks_renewal_series() {
        let exact = nu_series(1.0);
        let acc = nu(1.0, OvershootMode::Accurate).unwrap();
        let expo = nu(1.0, OvershootMode::Exponential).unwrap();
        assert!(acc > 0.5 && acc < 0.65);
        assert!(acc < expo);
        assert!((acc - exact).abs() < 0.02, "{acc} vs {exact}");
        for x in [0.25, 0.5, 2.0, 3.0] {
            let e = nu_series(x);
            assert!((nu(x, OvershootMode::Accurate).unwrap() - e).abs() < 0.02 * e.max(0.1));
        }
    }

    #[test]
    fn univariate_fdp_design_values() {
        let cusum = fdp(&ChartSpec::Cusum { delta: 0.5, d: 10.8 }, 20, &EXP).unwrap();
        assert!(close(cusum.value, 0.006306, 5e-6), "{}", cusum.value);
        let cusum1 = fdp(&ChartSpec::Cusum { delta: 1.0, d: 5.88 }, 20, &EXP).unwrap();
        assert!(close(cusum1.value, 0.008716, 5e-6));
        let ewma = fdp(&ChartSpec::Ewma { beta: 0.05, b: 2.95 }, 20, &EXP).unwrap();
        assert!(close(ewma.value, 0.01028, 5e-6), "{}", ewma.value);
        assert!(close(ewma.value, 0.0103, 3e-4));
        let plain = OvershootConvention {
            ewma_arg: EwmaArg::PlainSqrt2Beta,
            ..EXP
        };
        let ewma_plain = fdp(&ChartSpec::Ewma { beta: 0.05, b: 2.95 }, 20, &plain).unwrap();
        assert!(close(ewma_plain.value, 0.00881, 1e-5));
        let ma = fdp(&ChartSpec::Ma { window: 20, h: 0.6578 }, 20, &EXP).unwrap();
        assert!(close(ma.value, 0.009015, 5e-6), "{}", ma.value);
        let glr = fdp(
            &ChartSpec::WindowedGlr {
                window_lo: 20,
                window_hi: 50,
                b: 3.27,
            },
            20,
            &EXP,
        )
        .unwrap();
        assert!(close(glr.value, 0.004936, 5e-6), "{}", glr.value);
    }

    #[test]
    fn multivariate_fdp_design_values() {
        let mewma = |b| ChartSpec::Mewma {
            dim: 20,
            beta: 0.05,
            b,
        };
        let v65 = fdp(&mewma(6.5), 20, &EXP).unwrap().value;
        assert!(close(v65, 0.019710, 2e-6), "{v65}");
        let v70 = fdp(&mewma(7.0), 20, &EXP).unwrap().value;
        assert!(close(v70, 0.002708, 2e-6), "{v70}");
        let mma = ChartSpec::Mma {
            dim: 20,
            window: 20,
            h: 6.5 / 20f64.sqrt(),
        };
        let m = fdp(&mma, 20, &EXP).unwrap().value;
        assert!(((m - 0.0200) / 0.0200).abs() < 0.02);
        assert!(close(m, v65, 1e-12));
        let mglrt = ChartSpec::Mglrt {
            dim: 20,
            window_lo: 20,
            window_hi: 50,
            b: 6.84,
        };
        assert!(close(fdp(&mglrt, 20, &EXP).unwrap().value, 0.03049, 5e-5));
        let mcusum = ChartSpec::Mcusum {
            dim: 20,
            window_lo: 20,
            window_hi: 50,
            delta: 0.25 * 20f64.sqrt(),
            d: 20.3,
        };
        assert!(close(fdp(&mcusum, 20, &EXP).unwrap().value, 0.0351, 1e-4));
    }

    #[test]
    fn mewma_and_mma_formulas_coincide_when_beta_is_one_over_w() {
        for (n, w, b, l) in [(20, 20, 6.5, 20), (5, 10, 4.2, 37), (1, 50, 3.0, 100)] {
            let mma = ChartSpec::Mma {
                dim: n,
                window: w,
                h: b / (w as f64).sqrt(),
            };
            let mewma = ChartSpec::Mewma {
                dim: n,
                beta: 1.0 / w as f64,
                b,
            };
            let a = fdp(&mma, l, &EXP).unwrap().value;
            let c = fdp(&mewma, l, &EXP).unwrap().value;
            assert!((a - c).abs() <= 1e-12 * a.max(1e-300), "{a} {c}");
        }
    }

    #[test]
    fn horizon_zero_gives_zero() {
        for spec in [
            ChartSpec::Ewma { beta: 0.05, b: 2.95 },
            ChartSpec::Cusum { delta: 0.5, d: 10.8 },
            ChartSpec::Mewma {
                dim: 4,
                beta: 0.1,
                b: 4.0,
            },
        ] {
            assert_eq!(fdp(&spec, 0, &EXP).unwrap().value, 0.0);
        }
    }

    #[test]
    fn unsupported_kinds() {
        let mv = ChartSpec::MovingEwma {
            beta: 0.1,
            window: 10,
            h: 1.0,
        };
        assert!(matches!(fdp(&mv, 20, &EXP), Err(Error::UnsupportedKind(ChartKind::MovingEwma))));
        let hard = ChartSpec::MewmaHard {
            dim: 20,
            beta: 0.05,
            cut: 0.25,
            level: 0.396,
        };
        assert!(matches!(fdp(&hard, 20, &EXP), Err(Error::UnsupportedKind(_))));
    }

    #[test]
    fn zero_start_cusum_and_glr_horizon() {
        let z = fdp_cusum_zero_start(0.5, 10.8, 20).unwrap().value;
        let k: f64 = 10.8 + 2.0 * RHO_PLUS;
        let expect = (0.5 * (0.5 * 20.0 / 2.0 - k) + 3.0) * (-0.5 * k).exp();
        assert!(close(z, expect.max(0.0), 1e-15));
        // first integral against its closed form under exponential nu
        let b: f64 = 3.5;
        let m = 200u64;
        let c = m as f64 / (b * b);
        let a = c.powf(-0.5);
        let r2 = 2.0 * RHO_PLUS;
        let closed_first = (-r2 * a).exp() * (a / r2 + 1.0 / (r2 * r2));
        let second = integrate_to_infinity(|x| (-r2 * x).exp() / x, a, 1e-12);
        let expect = m as f64 * b * norm_pdf(b) * (closed_first - second / c);
        let got = fdp_glr_horizon(b, m, &EXP).unwrap().value;
        assert!(close(got, expect, 1e-9), "{got} {expect}");
    }

    #[test]
    fn quadrature_refinement_is_stable() {
        let fine = |tol: f64| {
            adaptive_simpson(
                |u| {
                    let v = nu_unchecked(u, OvershootMode::Accurate);
                    0.5 * u * v * v
                },
                3.27 / 50f64.sqrt(),
                3.27 / 20f64.sqrt(),
                tol,
            )
        };
        assert!((fine(1e-10) - fine(5e-11)).abs() < 1e-8);
        let ma = |tol: f64| {
            adaptive_simpson(|u| norm_pdf(4.0 * (0.6 - 0.5 * u)), 0.0, 1.0, tol)
        };
        assert!((ma(1e-10) - ma(5e-11)).abs() < 1e-8);
    }

    #[test]
    fn pod_normal_branch_values() {
        let ewma = ChartSpec::Ewma { beta: 0.05, b: 2.95 };
        let r = pod_approx(&ewma, 1.0, 20, &EXP).unwrap();
        assert_eq!(r.regime, Regime::NormalLaw);
        assert!(close(r.value, norm_cdf(1.0535), 2e-4), "{}", r.value);
        assert!(close(r.value, 0.854, 1e-3));
        let ma = ChartSpec::Ma { window: 20, h: 0.6578 };
        let r = pod_approx(&ma, 1.0, 20, &EXP).unwrap();
        assert!(close(r.value, norm_cdf(20f64.sqrt() * (1.0 - 0.6578)), 1e-12));
        assert!(close(r.value, 0.937, 1e-3));
        let mglrt = ChartSpec::Mglrt {
            dim: 20,
            window_lo: 20,
            window_hi: 50,
            b: 6.84,
        };
        let m = 0.25 * 20f64.sqrt();
        let r = pod_approx(&mglrt, m, 50, &EXP).unwrap();
        let z = (50.0 - (6.84f64.powi(2) + 20.0) / 1.25 - 2.0) / (2.0 * 6.84 / 1.25);
        assert!(close(r.value, norm_cdf(z), 1e-12));
    }

    #[test]
    fn pod_at_zero_is_fdp() {
        for kind in ChartKind::ALL.into_iter().filter(|k| has_fdp_formula(*k)) {
            let spec = crate::testutil::sample_spec(kind);
            let a = fdp(&spec, 20, &EXP).unwrap().value;
            let b = pod_approx(&spec, 0.0, 20, &EXP).unwrap().value;
            assert_eq!(a, b, "{kind}");
        }
    }

    #[test]
    fn local_branches_converge_to_fdp() {
        let specs = [
            ChartSpec::Ewma { beta: 0.05, b: 2.95 },
            ChartSpec::Ma { window: 20, h: 0.6578 },
            ChartSpec::Mewma {
                dim: 20,
                beta: 0.05,
                b: 6.5,
            },
            ChartSpec::Mma {
                dim: 20,
                window: 20,
                h: 6.5 / 20f64.sqrt(),
            },
        ];
        for spec in specs {
            let a = fdp(&spec, 20, &EXP).unwrap().value;
            let r = pod_approx(&spec, 1e-8, 20, &EXP).unwrap();
            assert_eq!(r.regime, Regime::LocalIntegral);
            assert!(((r.value - a) / a).abs() < 1e-6, "{}: {} vs {a}", spec.kind(), r.value);
        }
    }

    #[test]
    fn pod_at_level_uses_local_branch_with_warning() {
        let ma = ChartSpec::Ma { window: 20, h: 0.5 };
        let r = pod_approx(&ma, 0.5, 20, &EXP).unwrap();
        assert_eq!(r.regime, Regime::LocalIntegral);
        assert!(!r.validity_warnings.is_empty());
    }

    #[test]
    fn cusum_pod_needs_drift() {
        let c = ChartSpec::Cusum { delta: 0.5, d: 10.8 };
        assert!(matches!(pod_approx(&c, 0.2, 20, &EXP), Err(Error::Domain(_))));
        let r = pod_approx(&c, 1.0, 20, &EXP).unwrap();
        let drift: f64 = 0.75;
        let z = (20.0 - 10.8 / drift - 1.0 / (2.0 * drift * drift)) / (10.8f64.sqrt() / drift.powf(1.5));
        assert!(close(r.value, norm_cdf(z), 1e-12));
    }

    #[test]
    fn delay_moment_values() {
        let (m, v) = delay_moments(&ChartSpec::Ma { window: 20, h: 0.6578 }, 1.0).unwrap();
        assert!(close(m, 13.156, 1e-9) && close(v, 20.0, 1e-12));
        let (m, v) = delay_moments(&ChartSpec::Cusum { delta: 0.5, d: 10.8 }, 1.0).unwrap();
        assert!(close(m, 14.4 + 0.888_888_888_9, 1e-9));
        assert!(close(v, 25.6, 1e-9));
        let glr = ChartSpec::WindowedGlr {
            window_lo: 20,
            window_hi: 50,
            b: 3.27,
        };
        let (m, v) = delay_moments(&glr, 1.0).unwrap();
        assert!(close(m, 11.6929, 1e-9) && close(v, 42.7716, 1e-9));
        assert!(delay_moments(&ChartSpec::Ma { window: 20, h: 0.6578 }, 0.5).is_err());
    }

    #[test]
    fn one_dimensional_reductions_of_moments() {
        let ma = ChartSpec::Ma { window: 20, h: 0.6 };
        let mma = ChartSpec::Mma {
            dim: 1,
            window: 20,
            h: 0.6,
        };
        assert_eq!(delay_moments(&ma, 1.3).unwrap(), delay_moments(&mma, 1.3).unwrap());
        let glr = ChartSpec::WindowedGlr {
            window_lo: 20,
            window_hi: 50,
            b: 3.27,
        };
        let mglrt = ChartSpec::Mglrt {
            dim: 1,
            window_lo: 20,
            window_hi: 50,
            b: 3.27,
        };
        let (a, va) = delay_moments(&glr, 0.7).unwrap();
        let (c, vc) = delay_moments(&mglrt, 0.7).unwrap();
        assert!(close(c, a + 2.0, 1e-12) && close(va, vc, 1e-12));
    }

    #[test]
    fn boundary_correction_shifts() {
        let e = boundary_corrected(&ChartSpec::Ewma { beta: 0.05, b: 2.95 });
        assert!(close(e.threshold(), 2.95 + RHO_PLUS * 0.1f64.sqrt(), 1e-15));
        let m = boundary_corrected(&ChartSpec::Ma { window: 20, h: 0.6578 });
        assert!(close(m.threshold(), 0.6578 + 2f64.sqrt() * RHO_PLUS / 20.0, 1e-15));
    }

    proptest! {
        #[test]
        fn fdp_monotone_in_horizon_and_threshold(b in 2.0f64..4.0, l in 5u64..200) {
            let specs = [
                ChartSpec::Ewma { beta: 0.05, b },
                ChartSpec::Ma { window: 20, h: b / 4.0 },
                ChartSpec::Cusum { delta: 0.5, d: 3.0 * b },
                ChartSpec::WindowedGlr { window_lo: 20, window_hi: 50, b },
                ChartSpec::Mewma { dim: 5, beta: 0.05, b: 2.0 * b },
                ChartSpec::Mma { dim: 5, window: 20, h: b / 2.0 },
                ChartSpec::Mglrt { dim: 5, window_lo: 20, window_hi: 50, b: 2.0 * b },
                ChartSpec::Mcusum { dim: 5, window_lo: 20, window_hi: 50, delta: 1.0, d: 4.0 * b },
            ];
            for spec in specs {
                let a = fdp(&spec, l, &EXP).unwrap().value;
                let longer = fdp(&spec, l + 1, &EXP).unwrap().value;
                let higher = fdp(&spec.with_threshold(spec.threshold() * 1.01), l, &EXP).unwrap().value;
                prop_assert!(a < longer || longer == 1.0, "{} horizon", spec.kind());
                prop_assert!(higher < a || a == 1.0, "{} threshold", spec.kind());
            }
        }

        #[test]
        fn pod_monotone_in_strength(s in 0.0f64..2.0, ds in 1e-3f64..0.5) {
            let specs = [
                ChartSpec::Ewma { beta: 0.05, b: 2.95 },
                ChartSpec::Ma { window: 20, h: 0.6578 },
                ChartSpec::Mewma { dim: 20, beta: 0.05, b: 6.5 },
                ChartSpec::Mma { dim: 20, window: 20, h: 6.5 / 20f64.sqrt() },
            ];
            for spec in specs {
                let lvl = match spec {
                    ChartSpec::Ewma { beta, b } | ChartSpec::Mewma { beta, b, .. } => b * ewma_variance(beta).sqrt(),
                    _ => spec.threshold(),
                };
                let a = pod_approx(&spec, s, 20, &EXP).unwrap();
                let c = pod_approx(&spec, s + ds, 20, &EXP).unwrap();
                let same_branch = (s < lvl) == (s + ds < lvl);
                let valid = a.validity_warnings.is_empty() && c.validity_warnings.is_empty();
                if same_branch && valid && a.regime == c.regime {
                    prop_assert!(c.value >= a.value - 1e-12, "{}: {} -> {}", spec.kind(), a.value, c.value);
                }
            }
        }
    }
}

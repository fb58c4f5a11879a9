//! Stationary-start Monte Carlo estimation of FDP, POD and detection delay.
//!
//! Each replication warms the chart up on in-control noise for the burn-in
//! length, so the state at the end of the warm-up follows the in-control
//! stationary law of the statistic. With [`WarmUp::Reject`] a warm-up that
//! alarms is discarded and restarted instead, which conditions that law on
//! no alarm. The horizon of `L` steps follows, with the (whitened) signal
//! mean added.
//!
//! Replication `i` draws from ChaCha8 seeded by the root seed on stream `i`,
//! so results depend only on `(seed, reps)` and never on the worker count.

mod tables;

pub use tables::{
    published_value, reproduce_table, run_design, table_designs, table_grid, SignalPattern, TableDesign, TableId,
    TableRow,
};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::RHO_PLUS;
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::model::{ChartSpec, EstimateWithError, ScenarioSpec};
use crate::monitor::Monitor;

/// Warm-up attempts per replication before the replication is recorded as
/// an immediate alarm.
pub const MAX_WARMUP_ATTEMPTS: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BurnIn {
    #[default]
    Auto,
    Fixed(u64),
}

/// What happens to a replication whose chart alarms during warm-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WarmUp {
    /// Ignore warm-up alarms, so the horizon starts from the unconditional
    /// in-control law of the statistic.
    #[default]
    Unconditional,
    /// Discard the warm-up and start again, conditioning on no alarm.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub reps: u64,
    pub seed: u64,
    pub burn_in: BurnIn,
    #[serde(default)]
    pub warm_up: WarmUp,
    pub workers: usize,
    /// CUSUM only: start from the approximate stationary law (atom at zero
    /// plus exponential excess) instead of a burn-in.
    #[serde(default)]
    pub cusum_fast_start: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            reps: 10_000,
            seed: 20_240_601,
            burn_in: BurnIn::Auto,
            warm_up: WarmUp::Unconditional,
            workers: default_workers(),
            cusum_fast_start: false,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl SimConfig {
    pub fn new(reps: u64, seed: u64) -> Self {
        SimConfig {
            reps,
            seed,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Burn-in length for `spec` under `burn_in`.
pub fn resolve_burn_in(spec: &ChartSpec, burn_in: BurnIn) -> u64 {
    let ewma = |beta: f64| ((1e-4f64).ln() / (1.0 - beta).ln()).ceil() as u64;
    let cusum = |ref_drift: f64, d: f64| {
        if ref_drift > 0.0 {
            ((10.0 * d / ref_drift).ceil() as u64).max(500)
        } else {
            500
        }
    };
    match burn_in {
        BurnIn::Fixed(n) => n,
        BurnIn::Auto => match *spec {
            ChartSpec::Ewma { beta, .. }
            | ChartSpec::Mewma { beta, .. }
            | ChartSpec::MewmaSoft { beta, .. }
            | ChartSpec::MewmaHard { beta, .. } => ewma(beta),
            ChartSpec::MovingEwma { beta, window, .. } => ewma(beta).max(window as u64),
            ChartSpec::Ma { window, .. }
            | ChartSpec::Mma { window, .. }
            | ChartSpec::MmaHard { window, .. } => window as u64,
            ChartSpec::WindowedGlr { window_hi, .. }
            | ChartSpec::Mglrt { window_hi, .. }
            | ChartSpec::MglrtHard { window_hi, .. }
            | ChartSpec::Mcusum { window_hi, .. } => window_hi as u64,
            ChartSpec::Cusum { delta, d } => cusum(delta, d),
            ChartSpec::Mc1 { k1, h1, .. } => cusum(k1, h1),
        },
    }
}

/// First-alarm steps (1-based within the horizon) of every replication for
/// each of several signal means sharing the same noise.
#[derive(Debug, Clone, PartialEq)]
pub struct AlarmSample {
    pub reps: u64,
    pub seed: u64,
    pub horizon: u64,
    /// `first[s][i]`: alarm step of replication `i` under mean `s`, 0 if none.
    pub first: Vec<Vec<u32>>,
    /// Replications whose warm-up never survived and were counted as alarms at step 1.
    pub forced_warmups: u64,
    /// Total discarded warm-ups across replications.
    pub restarts: u64,
}

impl AlarmSample {
    /// Detection probability within `l <= horizon` steps under mean `s`.
    pub fn pod(&self, s: usize, l: u64) -> EstimateWithError {
        let hits = self.first[s]
            .iter()
            .filter(|&&k| k != 0 && k as u64 <= l)
            .count() as u64;
        EstimateWithError::proportion(hits, self.reps, self.seed)
    }

    /// Mean and standard error of the delay among replications detected within `l`.
    pub fn conditional_delay(&self, s: usize, l: u64) -> EstimateWithError {
        let (mut n, mut sum, mut sum_sq) = (0u64, 0u64, 0u64);
        for &k in &self.first[s] {
            if k != 0 && k as u64 <= l {
                n += 1;
                sum += k as u64;
                sum_sq += (k as u64) * (k as u64);
            }
        }
        EstimateWithError::mean_of(sum, sum_sq, n, self.seed)
    }
}

/// Runs `cfg.reps` replications of `spec` with horizon `horizon`, once per
/// raw-domain mean in `means`, reusing the same noise for every mean.
pub fn simulate_alarms(
    spec: &ChartSpec,
    means: &[Vec<f64>],
    horizon: u64,
    cov: &CovarianceModel,
    cfg: &SimConfig,
) -> Result<AlarmSample> {
    spec.validate()?;
    cfg.validate()?;
    let dim = spec.dim();
    if cov.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: cov.dim(),
        });
    }
    if horizon == 0 || horizon > u32::MAX as u64 {
        return Err(Error::InvalidConfig(format!("horizon out of range: {horizon}")));
    }
    let whitened: Vec<Vec<f64>> = means
        .iter()
        .map(|m| cov.whiten(m))
        .collect::<Result<_>>()?;
    let burn = resolve_burn_in(spec, cfg.burn_in);
    let fast_start = match *spec {
        ChartSpec::Cusum { delta, d } if cfg.cusum_fast_start && delta > 0.0 => Some((delta, d)),
        _ => None,
    };
    let template = Monitor::new(spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let seed = cfg.seed;
    let reject = cfg.warm_up == WarmUp::Reject;
    let outcomes: Vec<RepOutcome> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map_init(
                || Workspace::new(&template, dim, horizon),
                |ws, rep| ws.run(rep, seed, burn, reject, fast_start, &whitened),
            )
            .collect()
    });
    let mut first = vec![Vec::with_capacity(cfg.reps as usize); means.len()];
    let mut forced_warmups = 0;
    let mut restarts = 0;
    for o in outcomes {
        forced_warmups += o.forced as u64;
        restarts += o.restarts as u64;
        for (s, k) in o.first.into_iter().enumerate() {
            first[s].push(k);
        }
    }
    Ok(AlarmSample {
        reps: cfg.reps,
        seed,
        horizon,
        first,
        forced_warmups,
        restarts,
    })
}

struct RepOutcome {
    first: Vec<u32>,
    restarts: u32,
    forced: bool,
}

struct Workspace {
    warm: Monitor,
    run: Monitor,
    dim: usize,
    horizon: u64,
    noise: Vec<f64>,
    x: Vec<f64>,
}

impl Workspace {
    fn new(template: &Monitor, dim: usize, horizon: u64) -> Self {
        Workspace {
            warm: template.clone(),
            run: template.clone(),
            dim,
            horizon,
            noise: vec![0.0; dim * horizon as usize],
            x: vec![0.0; dim],
        }
    }

    fn run(
        &mut self,
        rep: u64,
        seed: u64,
        burn: u64,
        reject: bool,
        fast_start: Option<(f64, f64)>,
        means: &[Vec<f64>],
    ) -> RepOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let dim = self.dim;
        let mut restarts = 0u32;
        let mut survived = false;
        'attempt: for _ in 0..MAX_WARMUP_ATTEMPTS {
            self.warm.reset();
            if let Some((delta, d)) = fast_start {
                if let Monitor::Univariate(m) = &mut self.warm {
                    m.set_cusum_level(stationary_cusum_start(&mut rng, delta, d));
                }
            }
            let steps = if fast_start.is_some() { 0 } else { burn };
            for _ in 0..steps {
                for v in self.x.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                if self.warm.step_unchecked(&self.x).alarm && reject {
                    restarts += 1;
                    continue 'attempt;
                }
            }
            survived = true;
            break;
        }
        if !survived {
            return RepOutcome {
                first: vec![1; means.len()],
                restarts,
                forced: true,
            };
        }
        for v in self.noise.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut first = Vec::with_capacity(means.len());
        for mu in means {
            self.run.clone_from(&self.warm);
            let mut hit = 0u32;
            for k in 0..self.horizon as usize {
                let z = &self.noise[k * dim..(k + 1) * dim];
                for ((x, z), m) in self.x.iter_mut().zip(z).zip(mu) {
                    *x = z + m;
                }
                if self.run.step_unchecked(&self.x).alarm {
                    hit = k as u32 + 1;
                    break;
                }
            }
            first.push(hit);
        }
        RepOutcome {
            first,
            restarts,
            forced: false,
        }
    }
}

/// Draw from the approximate stationary CUSUM law: zero with probability
/// `1 - exp(-rho_+ delta)`, otherwise an `Exp(delta)` excess below `d`.
fn stationary_cusum_start<R: Rng>(rng: &mut R, delta: f64, d: f64) -> f64 {
    let p_zero = 1.0 - (-RHO_PLUS * delta).exp();
    if rng.random::<f64>() < p_zero {
        return 0.0;
    }
    let exp = Exp::new(delta).expect("delta is positive");
    loop {
        let y: f64 = exp.sample(rng);
        if y <= d {
            return y;
        }
    }
}

/// Fraction of replications alarming within `l` steps of a stationary start.
pub fn estimate_fdp(
    spec: &ChartSpec,
    l: u64,
    cov: &CovarianceModel,
    cfg: &SimConfig,
) -> Result<EstimateWithError> {
    let null = vec![vec![0.0; spec.dim()]];
    Ok(simulate_alarms(spec, &null, l, cov, cfg)?.pod(0, l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PodEstimate {
    pub pod: EstimateWithError,
    /// Mean of `tau - nu` over detected replications.
    pub conditional_delay: EstimateWithError,
    pub detected: u64,
    pub forced_warmups: u64,
}

/// Detection probability and conditional delay for a signal scenario.
pub fn estimate_pod(
    spec: &ChartSpec,
    scenario: &ScenarioSpec,
    cov: &CovarianceModel,
    cfg: &SimConfig,
) -> Result<PodEstimate> {
    scenario.validate_for(spec)?;
    let sample = simulate_alarms(spec, std::slice::from_ref(&scenario.mu), scenario.length, cov, cfg)?;
    let delay = sample.conditional_delay(0, scenario.length);
    Ok(PodEstimate {
        pod: sample.pod(0, scenario.length),
        detected: delay.reps,
        conditional_delay: delay,
        forced_warmups: sample.forced_warmups,
    })
}

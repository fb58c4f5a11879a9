mod args;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use transient_scan::approx::{EwmaArg, OvershootConvention, OvershootMode};
use transient_scan::mc::{default_workers, BurnIn, SimConfig, TableId, WarmUp};
use transient_scan::{ChartKind, ChartSpec, Error};

use args::{ChartArgs, Cli, Command, ConventionArgs, EwmaArgChoice, PanelArgs, Pattern, SimArgs, WarmUpChoice};
use run::{Method, PanelConfig, PanelMode, Record, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidSpec(_)
            | Error::InvalidConfig(_)
            | Error::UnknownTable(_)
            | Error::UnsupportedKind(_)
            | Error::DimensionMismatch { .. } => CliError::Usage(msg),
            Error::Domain(_) | Error::NoBracket { .. } => CliError::Numeric(msg),
            _ => CliError::Data(msg),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (config, check) = match cli.command {
        Command::Replay(a) => {
            let text = std::fs::read_to_string(&a.record)
                .map_err(|e| CliError::Data(format!("{}: {e}", a.record.display())))?;
            let record: Record =
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("bad record: {e}")))?;
            let stored = a.check.then_some(record.result);
            (record.config, stored)
        }
        other => (resolve(other)?, None),
    };
    let outcome = run::execute(&config)?;
    // compare after a text round trip so both sides went through the same parser
    let result: serde_json::Value = serde_json::from_str(&outcome.result.to_string())
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    if cli.json {
        let record = Record { config, result: result.clone() };
        println!("{}", serde_json::to_string(&record).map_err(|e| CliError::Numeric(e.to_string()))?);
    } else {
        print!("{}{}", run::config_block(&config), outcome.text);
    }
    if let Some(stored) = check {
        if stored != result {
            return Err(CliError::Numeric("replayed result differs from the stored record".into()));
        }
        if !cli.json {
            println!("replay\tidentical");
        }
    }
    Ok(())
}

fn resolve(command: Command) -> Result<RunConfig, CliError> {
    Ok(match command {
        Command::Calibrate(a) => {
            let chart = chart_spec(&a.chart, None)?;
            RunConfig::Calibrate {
                chart,
                target_fdp: a.target_fdp,
                horizon: a.horizon,
                method: if a.mc { Method::Simulate } else { Method::Approx },
                convention: convention(&a.convention),
                sim: a.mc.then(|| sim_config(&a.sim)),
            }
        }
        Command::Fdp(a) => {
            let method = if a.simulate { Method::Simulate } else { Method::Approx };
            RunConfig::Fdp {
                chart: chart_spec(&a.chart, None)?,
                horizon: a.horizon,
                method,
                corrected: a.corrected,
                convention: convention(&a.convention),
                sim: a.simulate.then(|| sim_config(&a.sim)),
            }
        }
        Command::Pod(a) => {
            let chart = chart_spec(&a.chart, None)?;
            let n = chart.dim();
            let mu = match a.mu_vec {
                Some(v) => v,
                None => match a.pattern {
                    Pattern::All => vec![a.mu; n],
                    Pattern::Single => {
                        let mut v = vec![0.0; n];
                        v[0] = a.mu;
                        v
                    }
                },
            };
            if mu.len() != n {
                return Err(CliError::Usage(format!("--mu-vec has {} entries, chart has dim {n}", mu.len())));
            }
            RunConfig::Pod {
                chart,
                horizon: a.horizon,
                mu,
                method: if a.simulate { Method::Simulate } else { Method::Approx },
                convention: convention(&a.convention),
                sim: a.simulate.then(|| sim_config(&a.sim)),
            }
        }
        Command::Table(a) => {
            let id: TableId = a.id.parse()?;
            let sim = SimConfig {
                reps: a.reps,
                seed: a.seed,
                burn_in: BurnIn::Auto,
                warm_up: WarmUp::Unconditional,
                workers: a.workers.unwrap_or_else(default_workers),
                cusum_fast_start: false,
            };
            sim.validate()?;
            RunConfig::Table { id, sim, out: a.out }
        }
        Command::Analyze(a) => RunConfig::Analyze(panel_config(&a.panel)?),
        Command::Charts(a) => RunConfig::Charts {
            panel: panel_config(&a.panel)?,
            emit: a.emit,
        },
        Command::Replay(_) => unreachable!("handled by dispatch"),
    })
}

fn sim_config(a: &SimArgs) -> SimConfig {
    SimConfig {
        reps: a.reps,
        seed: a.seed,
        burn_in: a.burn_in.map_or(BurnIn::Auto, BurnIn::Fixed),
        warm_up: match a.warm_up {
            WarmUpChoice::Unconditional => WarmUp::Unconditional,
            WarmUpChoice::Reject => WarmUp::Reject,
        },
        workers: a.workers.unwrap_or_else(default_workers),
        cusum_fast_start: a.fast_start,
    }
}

fn convention(a: &ConventionArgs) -> OvershootConvention {
    OvershootConvention {
        mode: if a.accurate {
            OvershootMode::Accurate
        } else {
            OvershootMode::Exponential
        },
        ewma_arg: match a.ewma_arg {
            EwmaArgChoice::Auto => EwmaArg::Auto,
            EwmaArgChoice::Plain => EwmaArg::PlainSqrt2Beta,
            EwmaArgChoice::Matched => EwmaArg::VarianceMatched,
        },
    }
}

fn panel_config(a: &PanelArgs) -> Result<PanelConfig, CliError> {
    let kind: ChartKind = a.chart.chart.parse()?;
    let mut default_dim = None;
    if !kind.is_univariate() && a.chart.dim.is_none() {
        // the chart dimension defaults to the number of monitored channels
        let n = match &a.channels {
            Some(c) => c.len(),
            None => transient_scan::ingest::load_panel(&a.input)?.panel.dim(),
        };
        default_dim = Some(n);
    }
    let mode = if a.independent {
        PanelMode::Independent
    } else {
        PanelMode::Whiten
    };
    Ok(PanelConfig {
        input: a.input.clone(),
        chart: chart_spec(&a.chart, default_dim)?,
        channels: a.channels.clone(),
        mode,
        trailing: a.trailing,
    })
}

fn chart_spec(a: &ChartArgs, default_dim: Option<usize>) -> Result<ChartSpec, CliError> {
    let kind: ChartKind = a.chart.parse()?;
    fn need<T: Copy>(v: Option<T>, flag: &str, kind: ChartKind) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for {kind}")))
    }
    let dim = || -> Result<usize, CliError> {
        a.dim
            .or(default_dim)
            .ok_or_else(|| CliError::Usage(format!("--dim is required for {kind}")))
    };
    if kind.is_univariate() && a.dim.is_some_and(|d| d != 1) {
        return Err(CliError::Usage(format!("{kind} is univariate; --dim must be 1")));
    }
    let spec = match kind {
        ChartKind::Ewma => ChartSpec::Ewma {
            beta: need(a.beta, "beta", kind)?,
            b: need(a.b, "b", kind)?,
        },
        ChartKind::Ma => ChartSpec::Ma {
            window: need(a.w, "w", kind)?,
            h: need(a.h, "h", kind)?,
        },
        ChartKind::MovingEwma => ChartSpec::MovingEwma {
            beta: need(a.beta, "beta", kind)?,
            window: need(a.w, "w", kind)?,
            h: need(a.h, "h", kind)?,
        },
        ChartKind::Cusum => ChartSpec::Cusum {
            delta: need(a.delta, "delta", kind)?,
            d: need(a.d, "d", kind)?,
        },
        ChartKind::WindowedGlr => ChartSpec::WindowedGlr {
            window_lo: need(a.w0, "w0", kind)?,
            window_hi: need(a.w1, "w1", kind)?,
            b: need(a.b, "b", kind)?,
        },
        ChartKind::Mewma => ChartSpec::Mewma {
            dim: dim()?,
            beta: need(a.beta, "beta", kind)?,
            b: need(a.b, "b", kind)?,
        },
        ChartKind::Mma => ChartSpec::Mma {
            dim: dim()?,
            window: need(a.w, "w", kind)?,
            h: need(a.h, "h", kind)?,
        },
        ChartKind::Mcusum => ChartSpec::Mcusum {
            dim: dim()?,
            window_lo: need(a.w0, "w0", kind)?,
            window_hi: need(a.w1, "w1", kind)?,
            delta: need(a.delta, "delta", kind)?,
            d: need(a.d, "d", kind)?,
        },
        ChartKind::Mglrt => ChartSpec::Mglrt {
            dim: dim()?,
            window_lo: need(a.w0, "w0", kind)?,
            window_hi: need(a.w1, "w1", kind)?,
            b: need(a.b, "b", kind)?,
        },
        ChartKind::Mc1 => ChartSpec::Mc1 {
            dim: dim()?,
            k1: need(a.k1, "k1", kind)?,
            h1: need(a.h1, "h1", kind)?,
            cap: a.cap,
        },
        ChartKind::MewmaSoft => ChartSpec::MewmaSoft {
            dim: dim()?,
            beta: need(a.beta, "beta", kind)?,
            p: need(a.p, "p", kind)?,
            level: need(a.level, "level", kind)?,
        },
        ChartKind::MewmaHard => ChartSpec::MewmaHard {
            dim: dim()?,
            beta: need(a.beta, "beta", kind)?,
            cut: need(a.cut, "cut", kind)?,
            level: need(a.level, "level", kind)?,
        },
        ChartKind::MmaHard => ChartSpec::MmaHard {
            dim: dim()?,
            window: need(a.w, "w", kind)?,
            cut: need(a.cut, "cut", kind)?,
            level: need(a.level, "level", kind)?,
        },
        ChartKind::MglrtHard => ChartSpec::MglrtHard {
            dim: dim()?,
            window_lo: need(a.w0, "w0", kind)?,
            window_hi: need(a.w1, "w1", kind)?,
            cut: need(a.cut, "cut", kind)?,
            b: need(a.b, "b", kind)?,
        },
    };
    spec.validate()?;
    Ok(spec)
}

//! Resolved command configurations and their execution.
//!
//! Every command is first turned into a [`RunConfig`] with all defaults
//! filled in. The config is echoed with the result and is what `replay`
//! executes again.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use transient_scan::approx::{self, ApproxResult, OvershootConvention};
use transient_scan::calibrate::{calibrate_mc, solve_threshold, McCalibration};
use transient_scan::ingest::{self, EigenSummary, ScaleMode};
use transient_scan::mc::{self, PodEstimate, SimConfig, TableId, TableRow};
use transient_scan::monitor::run_rows;
use transient_scan::{ChartSpec, CovarianceModel, EstimateWithError, ScenarioSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Approx,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelMode {
    Whiten,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub input: PathBuf,
    pub chart: ChartSpec,
    pub channels: Option<Vec<String>>,
    pub mode: PanelMode,
    /// Trailing scale window; `None` scales by the whole sample.
    pub trailing: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunConfig {
    Calibrate {
        chart: ChartSpec,
        target_fdp: f64,
        horizon: u64,
        method: Method,
        convention: OvershootConvention,
        sim: Option<SimConfig>,
    },
    Fdp {
        chart: ChartSpec,
        horizon: u64,
        method: Method,
        corrected: bool,
        convention: OvershootConvention,
        sim: Option<SimConfig>,
    },
    Pod {
        chart: ChartSpec,
        horizon: u64,
        mu: Vec<f64>,
        method: Method,
        convention: OvershootConvention,
        sim: Option<SimConfig>,
    },
    Table {
        id: TableId,
        sim: SimConfig,
        out: Option<PathBuf>,
    },
    Analyze(PanelConfig),
    Charts {
        panel: PanelConfig,
        emit: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub config: RunConfig,
    pub result: Value,
}

pub struct Outcome {
    pub result: Value,
    pub text: String,
}

#[derive(Debug, Clone, Serialize)]
struct CalibrateResult {
    threshold: f64,
    chart: ChartSpec,
    achieved_fdp: f64,
    std_error: Option<f64>,
    converged: bool,
    warning: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum ProbabilityResult {
    Approx(ApproxResult),
    Simulated {
        estimate: EstimateWithError,
        conditional_delay: Option<EstimateWithError>,
        forced_warmups: u64,
    },
}

#[derive(Debug, Clone, Serialize)]
struct PodApproxResult {
    strength: f64,
    pod: ApproxResult,
    /// Mean and variance of the delay given detection, where defined.
    delay_moments: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Alarm {
    pub t: u64,
    pub date: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorTrace {
    pub name: String,
    pub level: f64,
    pub first_alarm: Option<Alarm>,
    /// Inclusive step ranges of consecutive alarms.
    pub alarm_runs: Vec<(u64, u64)>,
    pub statistics: Vec<f64>,
    pub alarms: Vec<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub dates: Vec<String>,
    pub channels: Vec<String>,
    pub scales: Vec<f64>,
    pub eigen: Option<EigenSummary>,
    pub jittered: bool,
    pub warnings: Vec<String>,
    pub monitors: Vec<MonitorTrace>,
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config {
        RunConfig::Calibrate {
            chart,
            target_fdp,
            horizon,
            method,
            convention,
            sim,
        } => calibrate(chart, *target_fdp, *horizon, *method, convention, sim.as_ref()),
        RunConfig::Fdp {
            chart,
            horizon,
            method,
            corrected,
            convention,
            sim,
        } => fdp(chart, *horizon, *method, *corrected, convention, sim.as_ref()),
        RunConfig::Pod {
            chart,
            horizon,
            mu,
            method,
            convention,
            sim,
        } => pod(chart, *horizon, mu, *method, convention, sim.as_ref()),
        RunConfig::Table { id, sim, out } => table(*id, sim, out.as_deref()),
        RunConfig::Analyze(panel) => {
            let a = analyze(panel)?;
            let text = render_analysis(&a);
            Ok(Outcome {
                result: to_value(&a)?,
                text,
            })
        }
        RunConfig::Charts { panel, emit } => {
            let a = analyze(panel)?;
            write_trace_csv(&a, emit)?;
            let steps = a.dates.len();
            let text = format!("wrote {steps} rows for {} monitor(s) to {}\n", a.monitors.len(), emit.display());
            Ok(Outcome {
                result: serde_json::json!({ "rows": steps, "monitors": a.monitors.len(), "path": emit }),
                text,
            })
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Numeric(format!("cannot encode result: {e}")))
}

fn need_sim(sim: Option<&SimConfig>) -> Result<&SimConfig, CliError> {
    sim.ok_or_else(|| CliError::Usage("simulation settings missing".into()))
}

fn calibrate(
    chart: &ChartSpec,
    target: f64,
    horizon: u64,
    method: Method,
    conv: &OvershootConvention,
    sim: Option<&SimConfig>,
) -> Result<Outcome, CliError> {
    let res = match method {
        Method::Approx => {
            let t = solve_threshold(chart, target, horizon, conv)?;
            let spec = chart.with_threshold(t);
            let achieved = approx::fdp(&spec, horizon, conv)?.value;
            CalibrateResult {
                threshold: t,
                chart: spec,
                achieved_fdp: achieved,
                std_error: None,
                converged: true,
                warning: None,
            }
        }
        Method::Simulate => {
            let cfg = need_sim(sim)?;
            let McCalibration {
                threshold,
                estimate,
                converged,
                warning,
                ..
            } = calibrate_mc(chart, target, horizon, &CovarianceModel::identity(chart.dim()), cfg)?;
            CalibrateResult {
                threshold,
                chart: chart.with_threshold(threshold),
                achieved_fdp: estimate.value,
                std_error: Some(estimate.std_error),
                converged,
                warning,
            }
        }
    };
    let mut text = format!("threshold\t{:.6}\nfdp\t{:.6}", res.threshold, res.achieved_fdp);
    if let Some(se) = res.std_error {
        let _ = write!(text, "\t(se {se:.6})");
    }
    text.push('\n');
    if let Some(w) = &res.warning {
        let _ = writeln!(text, "warning\t{w}");
    }
    Ok(Outcome {
        result: to_value(&res)?,
        text,
    })
}

fn fdp(
    chart: &ChartSpec,
    horizon: u64,
    method: Method,
    corrected: bool,
    conv: &OvershootConvention,
    sim: Option<&SimConfig>,
) -> Result<Outcome, CliError> {
    let spec = if corrected {
        approx::boundary_corrected(chart)
    } else {
        chart.clone()
    };
    let res = match method {
        Method::Approx => ProbabilityResult::Approx(approx::fdp(&spec, horizon, conv)?),
        Method::Simulate => {
            let cfg = need_sim(sim)?;
            let e = mc::estimate_fdp(&spec, horizon, &CovarianceModel::identity(spec.dim()), cfg)?;
            ProbabilityResult::Simulated {
                estimate: e,
                conditional_delay: None,
                forced_warmups: 0,
            }
        }
    };
    let text = render_probability("fdp", &res);
    Ok(Outcome {
        result: to_value(&res)?,
        text,
    })
}

fn pod(
    chart: &ChartSpec,
    horizon: u64,
    mu: &[f64],
    method: Method,
    conv: &OvershootConvention,
    sim: Option<&SimConfig>,
) -> Result<Outcome, CliError> {
    match method {
        Method::Approx => {
            let strength = mu.iter().map(|m| m * m).sum::<f64>().sqrt();
            let pod = approx::pod_approx(chart, strength, horizon, conv)?;
            let res = PodApproxResult {
                strength,
                delay_moments: approx::delay_moments(chart, strength).ok(),
                pod,
            };
            let mut text = render_probability("pod", &ProbabilityResult::Approx(res.pod.clone()));
            if let Some((m, v)) = res.delay_moments {
                let _ = writeln!(text, "delay_mean\t{m:.4}\ndelay_var\t{v:.4}");
            }
            Ok(Outcome {
                result: to_value(&res)?,
                text,
            })
        }
        Method::Simulate => {
            let cfg = need_sim(sim)?;
            let scenario = ScenarioSpec {
                change_time: 0,
                length: horizon,
                mu: mu.to_vec(),
            };
            let PodEstimate {
                pod,
                conditional_delay,
                forced_warmups,
                ..
            } = mc::estimate_pod(chart, &scenario, &CovarianceModel::identity(chart.dim()), cfg)?;
            let res = ProbabilityResult::Simulated {
                estimate: pod,
                conditional_delay: Some(conditional_delay),
                forced_warmups,
            };
            let text = render_probability("pod", &res);
            Ok(Outcome {
                result: to_value(&res)?,
                text,
            })
        }
    }
}

fn render_probability(name: &str, res: &ProbabilityResult) -> String {
    let mut text = String::new();
    match res {
        ProbabilityResult::Approx(a) => {
            let _ = writeln!(text, "{name}\t{:.4}", a.value);
            let _ = writeln!(text, "regime\t{:?}", a.regime);
            for w in &a.validity_warnings {
                let _ = writeln!(text, "warning\t{w}");
            }
        }
        ProbabilityResult::Simulated {
            estimate,
            conditional_delay,
            forced_warmups,
        } => {
            let _ = writeln!(text, "{name}\t{:.4}\nse\t{:.4}", estimate.value, estimate.std_error);
            if let Some(d) = conditional_delay {
                if d.reps > 0 {
                    let _ = writeln!(text, "delay\t{:.3}\tse\t{:.3}", d.value, d.std_error);
                }
            }
            if *forced_warmups > 0 {
                let _ = writeln!(text, "warning\t{forced_warmups} replication(s) never left warm-up");
            }
        }
    }
    text
}

fn table(id: TableId, sim: &SimConfig, out: Option<&Path>) -> Result<Outcome, CliError> {
    let rows = mc::reproduce_table(id, sim)?;
    if let Some(path) = out {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(e.to_string()))?;
        for r in &rows {
            w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Data(e.to_string()))?;
    }
    Ok(Outcome {
        result: to_value(&rows)?,
        text: render_table(&rows),
    })
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

fn render_table(rows: &[TableRow]) -> String {
    let mut text = String::from("design\tstrength\tL\testimate\tse\tpublished\tapprox\tpublished_approx\tdelay\n");
    for r in rows {
        let _ = writeln!(
            text,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}",
            r.design,
            r.strength,
            r.horizon,
            r.estimate,
            r.std_error,
            opt(r.published, 4),
            opt(r.approx, 4),
            opt(r.published_approx, 4),
            opt(r.conditional_delay, 2),
        );
    }
    text
}

fn trace(name: String, level: f64, decisions: &[(f64, bool)], dates: &[String]) -> MonitorTrace {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &(_, a)) in decisions.iter().enumerate() {
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
        runs.push((s, decisions.len() as u64));
    }
    let first_alarm = runs.first().map(|&(t, _)| Alarm {
        t,
        date: dates[t as usize - 1].clone(),
    });
    MonitorTrace {
        name,
        level,
        first_alarm,
        alarm_runs: runs,
        statistics: decisions.iter().map(|d| d.0).collect(),
        alarms: decisions.iter().map(|d| d.1).collect(),
    }
}

pub fn analyze(cfg: &PanelConfig) -> Result<Analysis, CliError> {
    let loaded = ingest::load_panel(&cfg.input)?;
    let mut warnings = loaded.warnings;
    let panel = match &cfg.channels {
        Some(names) => loaded.panel.select(names)?,
        None => loaded.panel,
    };
    let scale = cfg.trailing.map_or(ScaleMode::WholeSample, ScaleMode::Trailing);
    let returns = ingest::standardized_returns_with(&panel, scale)?;
    let r = &returns.panel;
    let dates: Vec<String> = r.timestamps.iter().map(|d| d.to_string()).collect();
    let level = cfg.chart.alarm_level();

    let mut eigen = None;
    let mut jittered = false;
    let mut monitors = Vec::new();
    if cfg.chart.kind().is_univariate() {
        if cfg.mode == PanelMode::Whiten && r.dim() > 1 {
            warnings.push("univariate chart: channels are monitored one by one without whitening".into());
        }
        for (j, name) in r.channels.iter().enumerate() {
            let run = transient_scan::run_first_alarm(&cfg.chart, &r.column(j))?;
            let d: Vec<(f64, bool)> = run.statistics.iter().copied().zip(run.alarms.iter().copied()).collect();
            monitors.push(trace(name.clone(), level, &d, &dates));
        }
    } else {
        if cfg.chart.dim() != r.dim() {
            return Err(CliError::Usage(format!(
                "chart has dim {} but the panel has {} channel(s)",
                cfg.chart.dim(),
                r.dim()
            )));
        }
        let rows = match cfg.mode {
            PanelMode::Whiten => {
                let est = ingest::estimate_covariance(r)?;
                jittered = est.jittered;
                let rows = r
                    .values
                    .iter()
                    .map(|x| est.model.whiten(x))
                    .collect::<transient_scan::Result<Vec<_>>>()?;
                eigen = Some(est.eigen);
                rows
            }
            PanelMode::Independent => r.values.clone(),
        };
        let d: Vec<(f64, bool)> = run_rows(&cfg.chart, &rows)?
            .iter()
            .map(|s| (s.statistic, s.alarm))
            .collect();
        monitors.push(trace("global".into(), level, &d, &dates));
    }
    Ok(Analysis {
        dates,
        channels: r.channels.clone(),
        scales: returns.scales,
        eigen,
        jittered,
        warnings,
        monitors,
    })
}

fn render_analysis(a: &Analysis) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "steps\t{}", a.dates.len());
    if let Some(e) = &a.eigen {
        let _ = writeln!(text, "largest_eigenvalue\t{:.4}\nsmallest_eigenvalue\t{:.4}", e.largest, e.smallest);
    }
    if a.jittered {
        let _ = writeln!(text, "warning\tcorrelation matrix needed a diagonal jitter");
    }
    for w in &a.warnings {
        let _ = writeln!(text, "warning\t{w}");
    }
    text.push_str("monitor\tlevel\tfirst_alarm\tdate\talarm_runs\n");
    for m in &a.monitors {
        let (t, date) = m
            .first_alarm
            .as_ref()
            .map_or(("-".to_string(), "-".to_string()), |f| (f.t.to_string(), f.date.clone()));
        let runs: Vec<String> = m
            .alarm_runs
            .iter()
            .map(|&(s, e)| if s == e { s.to_string() } else { format!("{s}-{e}") })
            .collect();
        let runs = if runs.is_empty() { "-".to_string() } else { runs.join(",") };
        let _ = writeln!(text, "{}\t{:.6}\t{t}\t{date}\t{runs}", m.name, m.level);
    }
    text
}

fn write_trace_csv(a: &Analysis, path: &Path) -> Result<(), CliError> {
    let data = |e: csv::Error| CliError::Data(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(data)?;
    let mut header = vec!["t".to_string(), "date".to_string()];
    for m in &a.monitors {
        header.push(format!("{}_stat", m.name));
        header.push(format!("{}_level", m.name));
        header.push(format!("{}_alarm", m.name));
    }
    w.write_record(&header).map_err(data)?;
    for (i, date) in a.dates.iter().enumerate() {
        let mut row = vec![(i + 1).to_string(), date.clone()];
        for m in &a.monitors {
            row.push(m.statistics[i].to_string());
            row.push(m.level.to_string());
            row.push(u8::from(m.alarms[i]).to_string());
        }
        w.write_record(&row).map_err(data)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

/// `key = value` lines for every top-level field of the config.
pub fn config_block(config: &RunConfig) -> String {
    let mut text = String::from("# config\n");
    if let Ok(Value::Object(map)) = serde_json::to_value(config) {
        for (k, v) in map {
            let _ = writeln!(text, "# {k} = {v}");
        }
    }
    text
}

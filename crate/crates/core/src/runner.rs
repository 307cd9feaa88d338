//! Batch entry points behind the CLI: run scenarios, sweeps, and Pareto
//! dumps, serializing traces and reports to CSV and JSON.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::environment::World;
use crate::error::{HandoffError, Result};
use crate::metrics::{self, SweepParameter, SweepResult};
use crate::objective::pareto_front;
use crate::pipeline::{self, Trace};
use crate::scenario::{ScenarioBundle, SCHEMA_VERSION};

/// Output files of one `run` invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutputs {
    pub events_path: PathBuf,
    pub snapshots_path: PathBuf,
    pub report_path: PathBuf,
    pub radar_path: PathBuf,
}

/// Round to 9 significant digits, keeping determinism checks meaningful.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float")
}

/// Render with 9 significant digits, shortest form.
pub fn fmt_sig(x: f64) -> String {
    format!("{}", round_sig(x))
}

fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if !n.is_i64() && !n.is_u64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Write atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| HandoffError::Input(format!("serialization failed: {e}")))?;
    round_json(&mut v);
    let text = serde_json::to_string_pretty(&v)
        .map_err(|e| HandoffError::Input(format!("serialization failed: {e}")))?;
    write_atomic(path, &(text + "\n"))
        .map_err(|e| HandoffError::Input(format!("cannot write {}: {e}", path.display())))
}

/// Fixed column set of the events CSV, one row per handoff event.
pub const EVENT_COLUMNS: &[&str] = &[
    "start",
    "end",
    "source",
    "target",
    "why",
    "how",
    "who",
    "decision_latency",
    "interruption_latency",
    "handoff_latency",
    "auth_latency",
    "degraded_at_decision",
    "dwell_confirmed",
    "online_intervention",
    "failed",
    "violated_constraints",
    "successful",
    "evaluation_complete",
    "seamlessness",
    "autonomy",
    "security",
    "correctness",
    "adaptability",
];

fn events_csv(trace: &Trace) -> String {
    let mut out = String::new();
    out.push_str(&EVENT_COLUMNS.join(","));
    out.push('\n');
    for e in &trace.events {
        let d = &e.decision;
        let verdict = e.verdict.as_ref();
        let score = |f| {
            verdict
                .map(|v| fmt_sig(v.scores.get(f)))
                .unwrap_or_default()
        };
        let why = match d.why {
            pipeline::HandoffReason::Imperative => "imperative",
            pipeline::HandoffReason::Opportunist => "opportunist",
        };
        let how = match d.how {
            crate::context::ExecutionStrategy::BreakBeforeMake => "break-before-make",
            crate::context::ExecutionStrategy::MakeBeforeBreak => "make-before-break",
        };
        let who = match d.who {
            crate::context::ControlMode::TerminalControlled => "terminal-controlled",
            crate::context::ControlMode::NetworkControlled => "network-controlled",
        };
        let violated = e
            .violated_constraints
            .iter()
            .map(|v| v.as_str())
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{why},{how},{who},{},{},{},{},{},{},{},{},{violated},{},{},{},{},{},{},{}",
            fmt_sig(e.start),
            fmt_sig(e.end),
            e.source.as_deref().unwrap_or(""),
            e.target,
            fmt_sig(d.decision_latency),
            fmt_sig(e.interruption_latency),
            fmt_sig(e.handoff_latency),
            fmt_sig(e.auth_latency),
            d.degraded_at_decision,
            d.dwell_confirmed,
            d.online_intervention,
            e.failed,
            verdict.map(|v| v.successful.to_string()).unwrap_or_default(),
            verdict.map(|v| v.complete.to_string()).unwrap_or_default(),
            score(crate::objective::FeatureId::Seamlessness),
            score(crate::objective::FeatureId::Autonomy),
            score(crate::objective::FeatureId::Security),
            score(crate::objective::FeatureId::Correctness),
            score(crate::objective::FeatureId::Adaptability),
        );
    }
    out
}

fn snapshots_csv(trace: &Trace) -> String {
    let mut vars: BTreeSet<&crate::context::VarId> = BTreeSet::new();
    for s in &trace.steps {
        vars.extend(s.snapshot.values.keys());
    }
    let vars: Vec<_> = vars.into_iter().collect();
    let mut out = String::from("time,current_network,argmax_network,in_best");
    for v in &vars {
        out.push(',');
        out.push_str(v.as_str());
    }
    out.push('\n');
    for s in &trace.steps {
        let _ = write!(
            out,
            "{},{},{},{}",
            fmt_sig(s.time),
            s.current_network.as_deref().unwrap_or(""),
            s.argmax_network.as_deref().unwrap_or(""),
            s.in_best
        );
        for v in &vars {
            out.push(',');
            if let Some(x) = s.snapshot.get(v) {
                out.push_str(&fmt_sig(x));
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    schema_version: u32,
    counters: metrics::PerformanceCounters,
    radar: metrics::RadarReport,
    forced_disconnects: u64,
    online_interventions: u64,
    delivered_variable_count: usize,
    computable_features: &'a [crate::objective::FeatureId],
}

/// Run a scenario and write the events CSV, snapshots CSV, report JSON, and
/// radar JSON into `out_dir`.
pub fn cmd_run(bundle: &ScenarioBundle, out_dir: &Path) -> Result<(RunOutputs, Trace)> {
    let trace = pipeline::run_scenario(bundle)?;
    let counters = metrics::accumulate(&trace);
    let scores = metrics::run_feature_scores(&trace);
    let radar = metrics::radar(&scores, bundle.config.boundary)?;

    let outputs = RunOutputs {
        events_path: out_dir.join("events.csv"),
        snapshots_path: out_dir.join("snapshots.csv"),
        report_path: out_dir.join("report.json"),
        radar_path: out_dir.join("radar.json"),
    };
    let io_err = |path: &Path, e: std::io::Error| {
        HandoffError::Input(format!("cannot write {}: {e}", path.display()))
    };
    write_atomic(&outputs.events_path, &events_csv(&trace))
        .map_err(|e| io_err(&outputs.events_path, e))?;
    write_atomic(&outputs.snapshots_path, &snapshots_csv(&trace))
        .map_err(|e| io_err(&outputs.snapshots_path, e))?;
    write_json(
        &outputs.report_path,
        &RunReport {
            schema_version: SCHEMA_VERSION,
            counters,
            radar: radar.clone(),
            forced_disconnects: trace.forced_disconnects,
            online_interventions: trace.online_interventions,
            delivered_variable_count: trace.delivered_variable_count,
            computable_features: &trace.computable_features,
        },
    )?;
    write_json(&outputs.radar_path, &radar)?;
    Ok((outputs, trace))
}

fn sweep_csv(result: &SweepResult) -> String {
    let (a, b) = (&result.metric_names.0, &result.metric_names.1);
    let mut out = format!("value,{a},{b},extra,non_dominated\n");
    for p in &result.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_sig(p.value),
            fmt_sig(p.metric_a),
            fmt_sig(p.metric_b),
            p.extra.map(fmt_sig).unwrap_or_default(),
            p.non_dominated
        );
    }
    out
}

#[derive(Debug, Serialize)]
struct Frontier<'a> {
    schema_version: u32,
    parameter: SweepParameter,
    metric_names: &'a (String, String),
    points: Vec<&'a metrics::SweepPoint>,
}

/// Run a tradeoff sweep and write the full CSV plus the non-dominated
/// frontier JSON.
pub fn cmd_sweep(
    bundle: &ScenarioBundle,
    parameter: SweepParameter,
    values: &[f64],
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf, SweepResult)> {
    let result = metrics::tradeoff_sweep(bundle, parameter, values)?;
    let csv_path = out_dir.join(format!("sweep_{}.csv", parameter.name()));
    let json_path = out_dir.join(format!("frontier_{}.json", parameter.name()));
    write_atomic(&csv_path, &sweep_csv(&result))
        .map_err(|e| HandoffError::Input(format!("cannot write {}: {e}", csv_path.display())))?;
    write_json(
        &json_path,
        &Frontier {
            schema_version: SCHEMA_VERSION,
            parameter,
            metric_names: &result.metric_names,
            points: result.points.iter().filter(|p| p.non_dominated).collect(),
        },
    )?;
    Ok((csv_path, json_path, result))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoCandidate {
    pub network_id: String,
    pub objectives: crate::objective::ObjectiveVector,
    pub feasible: bool,
    pub score: f64,
    pub in_front: bool,
}

#[derive(Debug, Serialize)]
struct ParetoDump {
    schema_version: u32,
    time: f64,
    candidates: Vec<ParetoCandidate>,
}

/// Freeze the world at time `t`, evaluate every discovered candidate, and
/// write objective vectors, feasibility, scores, and front membership.
pub fn cmd_pareto(
    bundle: &ScenarioBundle,
    t: f64,
    out_dir: &Path,
) -> Result<(PathBuf, Vec<ParetoCandidate>)> {
    if !(0.0..=bundle.scenario.duration).contains(&t) {
        return Err(HandoffError::Input(format!(
            "time {t} outside [0, {}]",
            bundle.scenario.duration
        )));
    }
    let mut world = World::new(bundle.scenario.clone())?;
    while world.time + bundle.scenario.dt / 2.0 < t {
        world.step();
    }
    let evals = pipeline::candidates_now(&world, bundle)?;
    let feasible: Vec<_> = evals.iter().filter(|c| c.feasible).cloned().collect();
    let front = pareto_front(&feasible)?;
    let in_front: BTreeSet<&str> = front.iter().map(|c| c.network_id.as_str()).collect();
    let candidates: Vec<ParetoCandidate> = evals
        .into_iter()
        .map(|c| ParetoCandidate {
            in_front: in_front.contains(c.network_id.as_str()),
            network_id: c.network_id,
            objectives: c.objectives,
            feasible: c.feasible,
            score: c.score,
        })
        .collect();
    let path = out_dir.join("pareto.json");
    write_json(
        &path,
        &ParetoDump {
            schema_version: SCHEMA_VERSION,
            time: world.time,
            candidates: candidates.clone(),
        },
    )?;
    Ok((path, candidates))
}

/// Run a scenario and write only the report and radar JSON, with an optional
/// boundary override.
pub fn cmd_report(
    bundle: &ScenarioBundle,
    boundary: Option<f64>,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let mut bundle = bundle.clone();
    if let Some(b) = boundary {
        bundle.config.boundary = b;
    }
    let trace = pipeline::run_scenario(&bundle)?;
    let counters = metrics::accumulate(&trace);
    let scores = metrics::run_feature_scores(&trace);
    let radar = metrics::radar(&scores, bundle.config.boundary)?;
    let report_path = out_dir.join("report.json");
    let radar_path = out_dir.join("radar.json");
    write_json(
        &report_path,
        &RunReport {
            schema_version: SCHEMA_VERSION,
            counters,
            radar: radar.clone(),
            forced_disconnects: trace.forced_disconnects,
            online_interventions: trace.online_interventions,
            delivered_variable_count: trace.delivered_variable_count,
            computable_features: &trace.computable_features,
        },
    )?;
    write_json(&radar_path, &radar)?;
    Ok((report_path, radar_path))
}

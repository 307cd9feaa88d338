//! Performance counters over traces, the radar evaluation with its
//! boundary-circle verdict, and the tradeoff sweeps.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::context::SEAMLESS_IL_BOUND_SECS;
use crate::error::{HandoffError, Result};
use crate::objective::{dominates, scalarize, FeatureId, ObjectiveVector};
use crate::pipeline::{run_scenario, HandoffReason, Trace};
use crate::scenario::ScenarioBundle;

/// Handoffs evaluated when computing the rolling adaptability score.
pub const ADAPTABILITY_WINDOW: usize = 5;

/// Authentication latency that zeroes the security score, seconds.
pub const AUTH_LATENCY_BOUND_SECS: f64 = 1.0;

/// Security signaling cost charged per handoff, bytes.
pub const SECURITY_BYTES_PER_HANDOFF: f64 = 256.0;

/// Per-feature scores in [0,1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureScores(pub BTreeMap<FeatureId, f64>);

impl FeatureScores {
    pub fn all_zero() -> Self {
        FeatureScores(FeatureId::ALL.iter().map(|f| (*f, 0.0)).collect())
    }

    pub fn get(&self, f: FeatureId) -> f64 {
        self.0.get(&f).copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.0.values().fold(f64::INFINITY, |a, b| a.min(*b))
    }
}

/// Map one handoff's raw measures to the five feature scores.
///
/// Formulas:
/// - seamlessness = 1 - min(1, IL / 0.100 s)
/// - autonomy     = 1 if no online intervention was needed, else 0
/// - security     = 1 - min(1, AL / 1.0 s)
/// - correctness  = mean of the beneficial/timely/selective/necessary bits
/// - adaptability = success rate over the last [`ADAPTABILITY_WINDOW`]
///   evaluated handoffs (1 when none yet)
#[allow(clippy::too_many_arguments)]
pub fn feature_scores(
    interruption_latency: f64,
    interventions: u64,
    auth_latency: f64,
    beneficial: bool,
    timely: bool,
    selective: bool,
    necessary: bool,
    recent_success: &VecDeque<bool>,
) -> FeatureScores {
    let seamlessness = 1.0 - (interruption_latency / SEAMLESS_IL_BOUND_SECS).min(1.0);
    let autonomy = if interventions == 0 { 1.0 } else { 0.0 };
    let security = 1.0 - (auth_latency / AUTH_LATENCY_BOUND_SECS).min(1.0);
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let correctness =
        (bit(beneficial) + bit(timely) + bit(selective) + bit(necessary)) / 4.0;
    let adaptability = if recent_success.is_empty() {
        1.0
    } else {
        recent_success.iter().filter(|s| **s).count() as f64 / recent_success.len() as f64
    };
    FeatureScores(
        [
            (FeatureId::Seamlessness, seamlessness),
            (FeatureId::Autonomy, autonomy),
            (FeatureId::Security, security),
            (FeatureId::Correctness, correctness),
            (FeatureId::Adaptability, adaptability),
        ]
        .into(),
    )
}

/// Table-style handoff performance measures over one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceCounters {
    /// Handoffs per minute.
    pub hor: f64,
    /// Seconds connected to the instantaneous best network.
    pub dtib: f64,
    /// Fraction of successful handoffs (1 when there were none).
    pub shor: f64,
    pub hol_mean: f64,
    pub dlat_mean: f64,
    pub il_mean: f64,
    /// Interruptions per minute.
    pub ir: f64,
    /// Signaling bytes per minute.
    pub so: f64,
    /// Imperative / opportunist handoffs per minute.
    pub ihor: f64,
    pub ohor: f64,
    /// Tardy / premature handoffs per minute.
    pub thor: f64,
    pub phor: f64,
    /// Online user interventions per minute.
    pub ouir: f64,
    /// Mean authentication latency, seconds.
    pub al_mean: f64,
    /// Security signaling bytes per minute.
    pub sso: f64,
    pub handoff_count: u64,
    pub failed_handoffs: u64,
    pub duration: f64,
}

/// Fold a trace into performance counters.
pub fn accumulate(trace: &Trace) -> PerformanceCounters {
    let duration = trace.duration;
    let minutes = duration / 60.0;
    let per_min = |count: f64| if minutes > 0.0 { count / minutes } else { 0.0 };

    let n = trace.events.len() as f64;
    let dtib: f64 = trace
        .steps
        .iter()
        .filter(|s| s.in_best)
        .count() as f64
        * trace.dt;

    let mean = |f: &dyn Fn(&crate::pipeline::HandoffEvent) -> f64| {
        if trace.events.is_empty() {
            0.0
        } else {
            trace.events.iter().map(|e| f(e)).sum::<f64>() / n
        }
    };

    let imperative = trace
        .events
        .iter()
        .filter(|e| e.decision.why == HandoffReason::Imperative)
        .count() as f64;
    let opportunist = n - imperative;
    let tardy = trace
        .events
        .iter()
        .filter(|e| e.decision.degraded_at_decision)
        .count() as f64;
    let premature = trace
        .events
        .iter()
        .filter(|e| e.decision.why == HandoffReason::Opportunist && !e.decision.dwell_confirmed)
        .count() as f64;
    let interruptions = trace
        .events
        .iter()
        .filter(|e| e.interruption_latency > 0.0)
        .count() as f64;
    let successes = trace
        .events
        .iter()
        .filter(|e| e.verdict.as_ref().is_some_and(|v| v.successful))
        .count() as f64;
    let failed = trace.events.iter().filter(|e| e.failed).count() as u64;

    let snapshots = trace.steps.len() as f64;
    let so_bytes = trace.delivered_variable_count as f64 * snapshots * trace.bytes_per_variable;

    PerformanceCounters {
        hor: per_min(n),
        dtib,
        shor: if trace.events.is_empty() {
            1.0
        } else {
            successes / n
        },
        hol_mean: mean(&|e| e.handoff_latency),
        dlat_mean: mean(&|e| e.decision.decision_latency),
        il_mean: mean(&|e| e.interruption_latency),
        ir: per_min(interruptions),
        so: per_min(so_bytes),
        ihor: per_min(imperative),
        ohor: per_min(opportunist),
        thor: per_min(tardy),
        phor: per_min(premature),
        ouir: per_min(trace.online_interventions as f64),
        al_mean: mean(&|e| e.auth_latency),
        sso: per_min(n * SECURITY_BYTES_PER_HANDOFF),
        handoff_count: trace.events.len() as u64,
        failed_handoffs: failed,
        duration,
    }
}

/// Radar evaluation: per-feature scores against the boundary circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarReport {
    pub scores: BTreeMap<FeatureId, f64>,
    pub boundary: f64,
    pub outliers: Vec<FeatureId>,
    pub successful: bool,
}

/// Verdict: successful iff every feature score reaches the boundary radius;
/// otherwise the features below it are the outliers to correct.
pub fn radar(scores: &BTreeMap<FeatureId, f64>, boundary: f64) -> Result<RadarReport> {
    for f in FeatureId::ALL {
        if !scores.contains_key(&f) {
            return Err(HandoffError::Input(format!(
                "radar input lacks a score for {}",
                f.name()
            )));
        }
    }
    let outliers: Vec<FeatureId> = FeatureId::ALL
        .into_iter()
        .filter(|f| scores[f] < boundary)
        .collect();
    Ok(RadarReport {
        scores: scores.clone(),
        boundary,
        successful: outliers.is_empty(),
        outliers,
    })
}

/// Run-level feature scores: mean per feature over all evaluated handoffs,
/// or a perfect score when the run had none to grade.
pub fn run_feature_scores(trace: &Trace) -> BTreeMap<FeatureId, f64> {
    let graded: Vec<&FeatureScores> = trace
        .events
        .iter()
        .filter_map(|e| e.verdict.as_ref())
        .map(|v| &v.scores)
        .collect();
    FeatureId::ALL
        .into_iter()
        .map(|f| {
            let score = if graded.is_empty() {
                1.0
            } else {
                graded.iter().map(|s| s.get(f)).sum::<f64>() / graded.len() as f64
            };
            (f, score)
        })
        .collect()
}

/// Parameter a tradeoff sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Hysteresis,
    DecisionBudget,
    ContextSize,
    UserProviderWeightMix,
}

impl std::str::FromStr for SweepParameter {
    type Err = HandoffError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hysteresis" => Ok(SweepParameter::Hysteresis),
            "decision_budget" => Ok(SweepParameter::DecisionBudget),
            "context_size" => Ok(SweepParameter::ContextSize),
            "user_provider_weight_mix" => Ok(SweepParameter::UserProviderWeightMix),
            other => Err(HandoffError::Input(format!(
                "unsupported sweep parameter {other}"
            ))),
        }
    }
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Hysteresis => "hysteresis",
            SweepParameter::DecisionBudget => "decision_budget",
            SweepParameter::ContextSize => "context_size",
            SweepParameter::UserProviderWeightMix => "user_provider_weight_mix",
        }
    }

    /// Axis labels of the (maximization-oriented) metric pair.
    pub fn metric_names(&self) -> (&'static str, &'static str) {
        match self {
            SweepParameter::Hysteresis => ("dtib", "neg_hor"),
            SweepParameter::DecisionBudget => ("neg_dlat_mean", "shor"),
            SweepParameter::ContextSize => ("context_volume", "neg_so"),
            SweepParameter::UserProviderWeightMix => ("user_score", "provider_score"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// Metric pair, oriented for maximization.
    pub metric_a: f64,
    pub metric_b: f64,
    /// Parameter-specific extra (e.g. computable feature count).
    pub extra: Option<f64>,
    pub non_dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub metric_names: (String, String),
    pub points: Vec<SweepPoint>,
}

/// Pairwise dominance on a 2-metric point, routed through the dominance
/// definition of the objective engine.
pub fn dominates_pair(a: (f64, f64), b: (f64, f64)) -> bool {
    let mk = |p: (f64, f64)| ObjectiveVector {
        values: [(FeatureId::Seamlessness, p.0), (FeatureId::Autonomy, p.1)].into(),
    };
    dominates(&mk(a), &mk(b)).expect("identical feature sets by construction")
}

fn mark_non_dominated(points: &mut [SweepPoint]) {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.metric_a, p.metric_b)).collect();
    for (i, p) in points.iter_mut().enumerate() {
        p.non_dominated = !coords
            .iter()
            .enumerate()
            .any(|(j, c)| j != i && dominates_pair(*c, coords[i]));
    }
}

fn mixed_weights(
    user: &BTreeMap<FeatureId, f64>,
    provider: &BTreeMap<FeatureId, f64>,
    alpha: f64,
) -> BTreeMap<FeatureId, f64> {
    let mut out = BTreeMap::new();
    for f in FeatureId::ALL {
        let u = user.get(&f).copied().unwrap_or(0.0);
        let p = provider.get(&f).copied().unwrap_or(0.0);
        let w = (1.0 - alpha) * u + alpha * p;
        if w > 0.0 {
            out.insert(f, w);
        }
    }
    let total: f64 = out.values().sum();
    if total > 0.0 {
        for w in out.values_mut() {
            *w /= total;
        }
    }
    out
}

/// Mean scalarized objective of the connected network over the run, under a
/// given stakeholder weighting.
fn preference_score(
    bundle: &ScenarioBundle,
    trace: &Trace,
    weights: &BTreeMap<FeatureId, f64>,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for step in &trace.steps {
        if step.current_network.is_none() {
            continue;
        }
        let vector =
            crate::objective::objective_vector(&bundle.correlations, &step.snapshot, &bundle.registry);
        if let Ok(v) = vector {
            sum += scalarize(&v, weights)?;
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// One full run per parameter value on the same seed, reporting the tradeoff
/// metric pair and non-dominated flags.
pub fn tradeoff_sweep(
    bundle: &ScenarioBundle,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(HandoffError::Input("sweep needs at least one value".to_string()));
    }
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut b = bundle.clone();
        match parameter {
            SweepParameter::Hysteresis => b.config.hysteresis = value,
            SweepParameter::DecisionBudget => b.config.decision_budget = value,
            SweepParameter::ContextSize => {
                if value < 1.0 {
                    return Err(HandoffError::Input(format!(
                        "context_size value {value} must be >= 1"
                    )));
                }
                b.config.context_size = Some(value as usize);
            }
            SweepParameter::UserProviderWeightMix => {
                b.config.feature_weights = mixed_weights(
                    &b.user_feature_weights,
                    &b.provider_feature_weights,
                    value,
                );
            }
        }
        let trace = run_scenario(&b)?;
        let counters = accumulate(&trace);
        let (metric_a, metric_b, extra) = match parameter {
            SweepParameter::Hysteresis => (counters.dtib, -counters.hor, None),
            SweepParameter::DecisionBudget => (-counters.dlat_mean, counters.shor, None),
            SweepParameter::ContextSize => (
                trace.delivered_variable_count as f64,
                -counters.so,
                Some(trace.computable_features.len() as f64),
            ),
            SweepParameter::UserProviderWeightMix => (
                preference_score(&b, &trace, &bundle.user_feature_weights)?,
                preference_score(&b, &trace, &bundle.provider_feature_weights)?,
                None,
            ),
        };
        points.push(SweepPoint {
            value,
            metric_a,
            metric_b,
            extra,
            non_dominated: false,
        });
    }
    mark_non_dominated(&mut points);
    let (a, b) = parameter.metric_names();
    Ok(SweepResult {
        parameter,
        metric_names: (a.to_string(), b.to_string()),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radar_all_above_boundary_is_successful() {
        let scores: BTreeMap<FeatureId, f64> = FeatureId::ALL
            .into_iter()
            .zip([0.8, 0.9, 0.7, 0.75, 0.85])
            .collect();
        let r = radar(&scores, 0.6).unwrap();
        assert!(r.successful);
        assert!(r.outliers.is_empty());
    }

    #[test]
    fn radar_flags_sole_outlier() {
        let mut scores: BTreeMap<FeatureId, f64> = FeatureId::ALL
            .into_iter()
            .zip([0.8, 0.9, 0.7, 0.75, 0.85])
            .collect();
        scores.insert(FeatureId::Security, 0.4);
        let r = radar(&scores, 0.6).unwrap();
        assert!(!r.successful);
        assert_eq!(r.outliers, vec![FeatureId::Security]);
    }

    #[test]
    fn radar_zero_boundary_always_successful() {
        let scores: BTreeMap<FeatureId, f64> =
            FeatureId::ALL.into_iter().map(|f| (f, 0.0)).collect();
        assert!(radar(&scores, 0.0).unwrap().successful);
    }

    #[test]
    fn radar_rejects_missing_feature() {
        let mut scores: BTreeMap<FeatureId, f64> =
            FeatureId::ALL.into_iter().map(|f| (f, 1.0)).collect();
        scores.remove(&FeatureId::Autonomy);
        assert!(radar(&scores, 0.5).is_err());
    }

    #[test]
    fn seamlessness_formula() {
        let s = feature_scores(0.0, 0, 0.0, true, true, true, true, &VecDeque::new());
        assert_relative_eq!(s.get(FeatureId::Seamlessness), 1.0);
        let s = feature_scores(0.05, 0, 0.0, true, true, true, true, &VecDeque::new());
        assert_relative_eq!(s.get(FeatureId::Seamlessness), 0.5);
        let s = feature_scores(0.2, 0, 0.0, true, true, true, true, &VecDeque::new());
        assert_relative_eq!(s.get(FeatureId::Seamlessness), 0.0);
    }

    #[test]
    fn autonomy_drops_on_intervention() {
        let s = feature_scores(0.0, 1, 0.0, true, true, true, true, &VecDeque::new());
        assert_eq!(s.get(FeatureId::Autonomy), 0.0);
    }

    #[test]
    fn correctness_is_mean_of_bits() {
        let s = feature_scores(0.0, 0, 0.0, true, false, true, true, &VecDeque::new());
        assert_relative_eq!(s.get(FeatureId::Correctness), 0.75);
    }

    #[test]
    fn adaptability_follows_recent_success() {
        let recent: VecDeque<bool> = [true, false, true, true].into();
        let s = feature_scores(0.0, 0, 0.0, true, true, true, true, &recent);
        assert_relative_eq!(s.get(FeatureId::Adaptability), 0.75);
    }

    #[test]
    fn pair_dominance_matches_definition() {
        assert!(dominates_pair((2.0, 3.0), (1.0, 3.0)));
        assert!(!dominates_pair((1.0, 2.0), (2.0, 1.0)));
        assert!(!dominates_pair((1.0, 1.0), (1.0, 1.0)));
    }
}

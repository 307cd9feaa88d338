//! The six functional subsystems wired into a run loop: control entity,
//! network discovery, decisions (why/when/where/how/who), execution,
//! evaluation, and the context manager feeding them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::context::{
    apply_policies_ordered, check_constraint, normalize_variable, AppClass, ConstraintVerdict,
    ContextSnapshot, ControlMode, Directive, ExecutionStrategy, HandoffConfiguration, VarId,
    SEAMLESS_IL_BOUND_SECS,
};
use crate::environment::{candidate_context, NetworkSpec, World};
use crate::error::Result;
use crate::metrics::{self, FeatureScores};
use crate::objective::{
    feasible, objective_value, CandidateEvaluation, FeatureId, ObjectiveVector,
};
use crate::scenario::ScenarioBundle;

/// Control-loop phase of the handoff control entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Idle,
    Deciding,
    Executing,
    Evaluating,
}

/// Handoff control entity state.
#[derive(Debug, Clone)]
pub struct HceState {
    pub current_network: Option<String>,
    pub phase: Phase,
    pub last_handoff_time: f64,
    // dwell tracking for "consistently better"
    streak_target: Option<String>,
    streak_count: u32,
}

impl HceState {
    pub fn new() -> Self {
        HceState {
            current_network: None,
            phase: Phase::Idle,
            last_handoff_time: 0.0,
            streak_target: None,
            streak_count: 0,
        }
    }

    fn set_phase(&mut self, next: Phase) {
        let legal = matches!(
            (self.phase, next),
            (Phase::Idle, Phase::Deciding)
                | (Phase::Deciding, Phase::Idle)
                | (Phase::Deciding, Phase::Executing)
                | (Phase::Executing, Phase::Evaluating)
                | (Phase::Evaluating, Phase::Idle)
        );
        assert!(legal, "illegal phase transition {:?} -> {next:?}", self.phase);
        self.phase = next;
    }
}

impl Default for HceState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandoffReason {
    Imperative,
    Opportunist,
}

/// The answers of one handoff decision: why, when, where, how, and who.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub why: HandoffReason,
    /// Decision timestamp, seconds.
    pub when: f64,
    /// Target network id.
    pub target: String,
    pub how: ExecutionStrategy,
    pub who: ControlMode,
    /// Simulated decision latency, capped at the decision budget.
    pub decision_latency: f64,
    /// A degradation threshold was already breached when deciding.
    pub degraded_at_decision: bool,
    /// The dwell counter confirmed the target before execution.
    pub dwell_confirmed: bool,
    /// The user had marked a different available target as preferred, so
    /// this choice prompts them online.
    pub online_intervention: bool,
    /// Candidates considered, with their evaluations.
    pub candidates: Vec<CandidateEvaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventVerdict {
    pub scores: FeatureScores,
    pub successful: bool,
    pub complete: bool,
}

/// One executed (or failed) handoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffEvent {
    pub start: f64,
    pub end: f64,
    pub source: Option<String>,
    pub target: String,
    /// Service interruption, seconds.
    pub interruption_latency: f64,
    /// Total handoff latency, seconds.
    pub handoff_latency: f64,
    /// Target network's authentication latency, seconds.
    pub auth_latency: f64,
    pub decision: DecisionRecord,
    pub failed: bool,
    /// Variables whose bounds this event violated (e.g. IL).
    pub violated_constraints: Vec<VarId>,
    pub verdict: Option<EventVerdict>,
}

/// Execution strategy and latency model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionModel {
    pub strategy: ExecutionStrategy,
    /// Base execution latency, seconds.
    pub base_latency: f64,
    /// Extra latency per target technology label, seconds.
    #[serde(default)]
    pub technology_latency: BTreeMap<String, f64>,
}

impl ExecutionModel {
    pub fn latency_for(&self, technology: &str) -> f64 {
        self.base_latency + self.technology_latency.get(technology).copied().unwrap_or(0.0)
    }

    pub fn interruption_for(&self, handoff_latency: f64) -> f64 {
        match self.strategy {
            ExecutionStrategy::BreakBeforeMake => handoff_latency,
            ExecutionStrategy::MakeBeforeBreak => 0.0,
        }
    }
}

/// Per-step record used for accounting and serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: f64,
    /// Network connected at the end of the step.
    pub current_network: Option<String>,
    /// Best feasible, policy-permitted network at this step (fresh view).
    pub argmax_network: Option<String>,
    pub in_best: bool,
    pub phase: Phase,
    /// Delivered snapshot merged with the current network's variables.
    pub snapshot: ContextSnapshot,
}

/// Complete record of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub duration: f64,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
    pub events: Vec<HandoffEvent>,
    pub forced_disconnects: u64,
    pub online_interventions: u64,
    /// Variables delivered in every snapshot by the context manager.
    pub delivered_variable_count: usize,
    /// Features whose correlation variables are all delivered.
    pub computable_features: Vec<FeatureId>,
    /// Signaling cost per delivered variable, bytes (from the configuration).
    pub bytes_per_variable: f64,
}

/// One observation the context manager can deliver: the terminal snapshot
/// plus per-candidate contexts for every discovered network.
#[derive(Debug, Clone)]
struct Observation {
    time: f64,
    base: ContextSnapshot,
    /// Discovered (reachable and authorized) candidates: id -> snapshot.
    candidates: BTreeMap<String, ContextSnapshot>,
}

/// Reachable networks filtered to those that authorize this terminal.
pub fn discover(world: &World) -> Vec<(&NetworkSpec, f64)> {
    let terminal_id = &world.terminal.id;
    world
        .reachable_networks()
        .into_iter()
        .filter(|(n, _)| n.authorized_terminals.contains(terminal_id))
        .collect()
}

fn observe(world: &World, delivered: Option<&[VarId]>) -> Observation {
    let base = world.observe();
    let pos = world.terminal.position;
    let mut candidates = BTreeMap::new();
    for (net, rss) in discover(world) {
        let mut s = candidate_context(&base, &world.scenario, net, rss, pos);
        if let Some(keep) = delivered {
            s = s.restricted_to(keep);
        }
        candidates.insert(net.id.clone(), s);
    }
    let base = match delivered {
        Some(keep) => base.restricted_to(keep),
        None => base,
    };
    Observation {
        time: world.time,
        base,
        candidates,
    }
}

/// Deterministic delivery order for context variables: correlation variables
/// first (in spec order), then the remaining observable ones.
pub fn delivery_order(bundle: &ScenarioBundle) -> Vec<VarId> {
    let mut order = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in &bundle.correlations {
        for v in spec.variables() {
            if seen.insert(v.clone()) {
                order.push(v.clone());
            }
        }
    }
    let mut rest: BTreeSet<VarId> = ["BL", "Vel", "ECR", "RSS", "Dist", "NL", "NBW", "ND", "price"]
        .iter()
        .map(|s| VarId::new(s))
        .collect();
    for net in &bundle.scenario.networks {
        rest.extend(net.extra.keys().cloned());
    }
    for v in rest {
        if seen.insert(v.clone()) {
            order.push(v);
        }
    }
    order
}

/// The delivered variable set under the configured context size.
pub fn delivered_variables(bundle: &ScenarioBundle) -> Vec<VarId> {
    let order = delivery_order(bundle);
    match bundle.config.context_size {
        Some(n) => order.into_iter().take(n).collect(),
        None => order,
    }
}

/// Features whose full correlation variable set is delivered.
pub fn computable_features(bundle: &ScenarioBundle, delivered: &[VarId]) -> Vec<FeatureId> {
    bundle
        .correlations
        .iter()
        .filter(|spec| spec.variables().all(|v| delivered.contains(v)))
        .map(|spec| spec.feature)
        .collect()
}

/// Scalarization weights restricted to the computable features and
/// renormalized to sum 1. Empty when no computable feature has weight.
fn restricted_weights(
    weights: &BTreeMap<FeatureId, f64>,
    computable: &[FeatureId],
) -> BTreeMap<FeatureId, f64> {
    let mut out: BTreeMap<FeatureId, f64> = weights
        .iter()
        .filter(|(f, w)| computable.contains(f) && **w > 0.0)
        .map(|(f, w)| (*f, *w))
        .collect();
    let total: f64 = out.values().sum();
    if total > 0.0 {
        for w in out.values_mut() {
            *w /= total;
        }
    }
    out
}

fn evaluate_candidate(
    bundle: &ScenarioBundle,
    computable: &[FeatureId],
    weights: &BTreeMap<FeatureId, f64>,
    id: &str,
    snapshot: &ContextSnapshot,
) -> Result<CandidateEvaluation> {
    let mut values = BTreeMap::new();
    for spec in &bundle.correlations {
        if computable.contains(&spec.feature) {
            values.insert(
                spec.feature,
                objective_value(spec, snapshot, &bundle.registry)?,
            );
        }
    }
    let objectives = ObjectiveVector { values };
    let score = if weights.is_empty() {
        // no computable weighted feature: fall back to normalized RSS
        let rss_id = VarId::new("RSS");
        match (snapshot.get(&rss_id), bundle.registry.range(&rss_id)) {
            (Some(rss), Some(range)) => normalize_variable(rss, range)?,
            _ => 0.0,
        }
    } else {
        weights
            .iter()
            .map(|(f, w)| w * objectives.get(*f).unwrap_or(0.0))
            .sum()
    };
    Ok(CandidateEvaluation {
        network_id: id.to_string(),
        snapshot_time: snapshot.time,
        objectives,
        feasible: feasible(snapshot, &bundle.registry),
        score,
    })
}

fn evaluate_observation(
    bundle: &ScenarioBundle,
    computable: &[FeatureId],
    weights: &BTreeMap<FeatureId, f64>,
    obs: &Observation,
) -> Result<Vec<CandidateEvaluation>> {
    obs.candidates
        .iter()
        .map(|(id, s)| evaluate_candidate(bundle, computable, weights, id, s))
        .collect()
}

/// Candidate evaluations at the current world state, for external inspection
/// (the Pareto dump command builds on this).
pub fn candidates_now(world: &World, bundle: &ScenarioBundle) -> Result<Vec<CandidateEvaluation>> {
    let delivered = delivered_variables(bundle);
    let computable = computable_features(bundle, &delivered);
    let weights = restricted_weights(&bundle.config.feature_weights, &computable);
    let obs = observe(world, Some(&delivered));
    evaluate_observation(bundle, &computable, &weights, &obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PolicyStanding {
    Forbidden,
    ImperativeOnly,
    Preferred,
    Neutral,
}

fn policy_standing(
    bundle: &ScenarioBundle,
    snapshot: &ContextSnapshot,
    target: &str,
) -> PolicyStanding {
    match apply_policies_ordered(
        &bundle.policies,
        snapshot,
        target,
        bundle.config.user_policy_precedence,
    ) {
        Some(Directive::ForbidTarget) => PolicyStanding::Forbidden,
        Some(Directive::RequireImperativeOnly) => PolicyStanding::ImperativeOnly,
        Some(Directive::PreferTarget) => PolicyStanding::Preferred,
        None => PolicyStanding::Neutral,
    }
}

/// Why a handoff is needed, if at all: imperative when the current link has
/// degraded past a threshold or disappeared, opportunist when a candidate is
/// sufficiently better than a healthy current network. Returns the reason and
/// whether a degradation threshold was already breached.
pub fn classify_reason(
    current: Option<&CandidateEvaluation>,
    current_snapshot: Option<&ContextSnapshot>,
    best_other: Option<&CandidateEvaluation>,
    config: &HandoffConfiguration,
) -> (Option<HandoffReason>, bool) {
    let degraded = match current_snapshot {
        Some(s) => config
            .thresholds
            .iter()
            .any(|(var, min)| s.get(var).is_some_and(|v| v < *min)),
        None => false,
    };
    match current {
        None => (Some(HandoffReason::Imperative), degraded),
        Some(cur) => {
            if degraded {
                return (Some(HandoffReason::Imperative), true);
            }
            match best_other {
                Some(best) if best.score > cur.score + config.hysteresis => {
                    (Some(HandoffReason::Opportunist), false)
                }
                _ => (None, false),
            }
        }
    }
}

enum DecisionOutcome {
    Stay,
    Handoff(DecisionRecord),
    ForcedDisconnect,
}

struct PendingExecution {
    event: HandoffEvent,
    exec_end: f64,
    /// Scalar score of the source network at decision time.
    pre_score: Option<f64>,
    /// Target was the feasible argmax among the considered candidates.
    selective: bool,
}

struct PendingEvaluation {
    event: HandoffEvent,
    eval_time: f64,
    pre_score: Option<f64>,
    selective: bool,
}

struct Runner<'a> {
    bundle: &'a ScenarioBundle,
    computable: Vec<FeatureId>,
    weights: BTreeMap<FeatureId, f64>,
    hce: HceState,
    pending: Option<PendingExecution>,
    pending_eval: Option<PendingEvaluation>,
    interventions: u64,
    forced_disconnects: u64,
    recent_success: VecDeque<bool>,
    events: Vec<HandoffEvent>,
}

impl<'a> Runner<'a> {
    fn new(bundle: &'a ScenarioBundle, delivered: &[VarId]) -> Self {
        let computable = computable_features(bundle, delivered);
        let weights = restricted_weights(&bundle.config.feature_weights, &computable);
        Runner {
            bundle,
            computable,
            weights,
            hce: HceState::new(),
            pending: None,
            pending_eval: None,
            interventions: 0,
            forced_disconnects: 0,
            recent_success: VecDeque::new(),
            events: Vec::new(),
        }
    }

    fn evaluate_obs(&self, obs: &Observation) -> Result<Vec<CandidateEvaluation>> {
        evaluate_observation(self.bundle, &self.computable, &self.weights, obs)
    }

    /// Best candidate by score; ties prefer the current network, then
    /// preferred targets, then the lowest id (input is id-sorted).
    fn select_best<'c>(
        &self,
        cands: &'c [(&CandidateEvaluation, PolicyStanding)],
    ) -> Option<&'c CandidateEvaluation> {
        let mut best: Option<(&CandidateEvaluation, PolicyStanding)> = None;
        for (c, standing) in cands {
            match best {
                None => best = Some((c, *standing)),
                Some((b, b_standing)) => {
                    let better = c.score > b.score
                        || (c.score == b.score && {
                            let c_cur = Some(&c.network_id) == self.hce.current_network.as_ref();
                            let b_cur = Some(&b.network_id) == self.hce.current_network.as_ref();
                            let c_pref = *standing == PolicyStanding::Preferred;
                            let b_pref = b_standing == PolicyStanding::Preferred;
                            (c_cur, c_pref) > (b_cur, b_pref)
                        });
                    if better {
                        best = Some((c, *standing));
                    }
                }
            }
        }
        best.map(|(c, _)| c)
    }

    fn decide(&mut self, obs: &Observation) -> Result<DecisionOutcome> {
        let config = &self.bundle.config;
        let all = self.evaluate_obs(obs)?;

        // budget-limited consideration: only the first k candidates (id
        // order) can be scored within the decision budget
        let affordable = if config.decision_cost_per_candidate > 0.0 {
            ((config.decision_budget / config.decision_cost_per_candidate).floor() as usize).max(1)
        } else {
            all.len()
        };
        let considered: Vec<&CandidateEvaluation> = all.iter().take(affordable).collect();
        let decision_latency = (considered.len() as f64 * config.decision_cost_per_candidate)
            .min(config.decision_budget);

        let standings: Vec<(&CandidateEvaluation, PolicyStanding)> = considered
            .iter()
            .map(|c| {
                let snap = &obs.candidates[&c.network_id];
                (*c, policy_standing(self.bundle, snap, &c.network_id))
            })
            .collect();

        let current_id = self.hce.current_network.clone();
        let current_eval = current_id
            .as_ref()
            .and_then(|id| all.iter().find(|c| &c.network_id == id));
        let current_snapshot = current_id.as_ref().and_then(|id| obs.candidates.get(id));

        // candidates usable for an opportunist move: feasible, not forbidden,
        // not gated to imperative handoffs, and not the current network
        let opportunist_pool: Vec<(&CandidateEvaluation, PolicyStanding)> = standings
            .iter()
            .filter(|(c, s)| {
                c.feasible
                    && matches!(s, PolicyStanding::Neutral | PolicyStanding::Preferred)
                    && Some(&c.network_id) != current_id.as_ref()
            })
            .cloned()
            .collect();
        let best_other = self.select_best(&opportunist_pool);

        let (reason, degraded) = classify_reason(current_eval, current_snapshot, best_other, config);
        let Some(reason) = reason else {
            self.hce.streak_target = None;
            self.hce.streak_count = 0;
            return Ok(DecisionOutcome::Stay);
        };
        if current_id.is_none() && all.is_empty() {
            return Ok(DecisionOutcome::Stay);
        }

        let (target, dwell_confirmed) = match reason {
            HandoffReason::Imperative => {
                // hysteresis and dwell are waived; imperative-only targets
                // become admissible
                let pool: Vec<(&CandidateEvaluation, PolicyStanding)> = standings
                    .iter()
                    .filter(|(c, s)| {
                        c.feasible
                            && *s != PolicyStanding::Forbidden
                            && Some(&c.network_id) != current_id.as_ref()
                    })
                    .cloned()
                    .collect();
                match self.select_best(&pool) {
                    Some(t) => (t.clone(), true),
                    None => {
                        // nowhere to go: drop the connection if the current
                        // link is already gone
                        if current_eval.is_none() && current_id.is_some() {
                            self.hce.current_network = None;
                            self.forced_disconnects += 1;
                            return Ok(DecisionOutcome::ForcedDisconnect);
                        }
                        return Ok(DecisionOutcome::Stay);
                    }
                }
            }
            HandoffReason::Opportunist => {
                let best = best_other.expect("opportunist reason implies a better candidate");
                // "consistently better": the same target must hold its margin
                // for the configured number of consecutive snapshots
                if self.hce.streak_target.as_deref() == Some(best.network_id.as_str()) {
                    self.hce.streak_count += 1;
                } else {
                    self.hce.streak_target = Some(best.network_id.clone());
                    self.hce.streak_count = 1;
                }
                if self.hce.streak_count < config.dwell {
                    return Ok(DecisionOutcome::Stay);
                }
                (best.clone(), true)
            }
        };

        let online_intervention = standings
            .iter()
            .any(|(c, s)| *s == PolicyStanding::Preferred && c.network_id != target.network_id);
        if online_intervention {
            self.interventions += 1;
        }

        self.hce.streak_target = None;
        self.hce.streak_count = 0;

        Ok(DecisionOutcome::Handoff(DecisionRecord {
            why: reason,
            when: obs.time,
            target: target.network_id.clone(),
            how: self.bundle.execution.strategy,
            who: config.control_mode,
            decision_latency,
            degraded_at_decision: degraded,
            dwell_confirmed,
            online_intervention,
            candidates: considered.into_iter().cloned().collect(),
        }))
    }

    /// Build the execution event for a decision.
    fn execute(&self, decision: DecisionRecord, now: f64) -> PendingExecution {
        let target_net = self.bundle.scenario.network(&decision.target);
        let tech = target_net.map(|n| n.technology.as_str()).unwrap_or("");
        let hol = self.bundle.execution.latency_for(tech);
        let il = self.bundle.execution.interruption_for(hol);
        let auth_latency = target_net
            .and_then(|n| n.extra.get(&VarId::new("AL")).copied())
            .unwrap_or(0.0);

        let mut violated = Vec::new();
        if il > SEAMLESS_IL_BOUND_SECS {
            violated.push(VarId::new("IL"));
        }
        // scenario constraints on handoff-performance variables
        let mut perf = ContextSnapshot::new(now);
        perf.set(VarId::new("IL"), il);
        perf.set(VarId::new("HOL"), hol);
        perf.set(VarId::new("DLat"), decision.decision_latency);
        perf.set(VarId::new("AL"), auth_latency);
        for app in &self.bundle.scenario.applications {
            for c in &app.constraints {
                if perf.get(&c.variable).is_some()
                    && check_constraint(c, &perf, app.app_type)
                        .is_ok_and(|v| v == ConstraintVerdict::Violated)
                    && !violated.contains(&c.variable)
                {
                    violated.push(c.variable.clone());
                }
            }
        }
        // scenario-wide constraints apply to every running application class
        // (or unconditionally when the scenario declares no applications)
        let classes: Vec<AppClass> = if self.bundle.scenario.applications.is_empty() {
            vec![AppClass::Any]
        } else {
            self.bundle
                .scenario
                .applications
                .iter()
                .map(|a| a.app_type)
                .collect()
        };
        for c in &self.bundle.constraints {
            if perf.get(&c.variable).is_some()
                && classes.iter().any(|cls| {
                    check_constraint(c, &perf, *cls)
                        .is_ok_and(|v| v == ConstraintVerdict::Violated)
                })
                && !violated.contains(&c.variable)
            {
                violated.push(c.variable.clone());
            }
        }

        let pre_score = self.hce.current_network.as_ref().and_then(|src| {
            decision
                .candidates
                .iter()
                .find(|c| &c.network_id == src)
                .map(|c| c.score)
        });
        let selective = decision
            .candidates
            .iter()
            .filter(|c| c.feasible)
            .max_by(|a, b| a.score.total_cmp(&b.score))
            .map(|b| b.network_id == decision.target)
            .unwrap_or(false);

        let event = HandoffEvent {
            start: now,
            end: now + hol,
            source: self.hce.current_network.clone(),
            target: decision.target.clone(),
            interruption_latency: il,
            handoff_latency: hol,
            auth_latency,
            decision,
            failed: false,
            violated_constraints: violated,
            verdict: None,
        };
        PendingExecution {
            exec_end: event.end,
            event,
            pre_score,
            selective,
        }
    }

    /// Apply a completed execution: connect to the target if it is still
    /// reachable, otherwise mark the event failed. Moves to the evaluating
    /// phase either way.
    fn finish_execution(&mut self, pend: PendingExecution, fresh: &Observation, now: f64) {
        let mut event = pend.event;
        if fresh.candidates.contains_key(&event.target) {
            self.hce.current_network = Some(event.target.clone());
            self.hce.last_handoff_time = event.end;
        } else {
            event.failed = true;
            let source_ok = event
                .source
                .as_ref()
                .is_some_and(|s| fresh.candidates.contains_key(s));
            if !source_ok {
                self.hce.current_network = None;
            }
        }
        self.hce.set_phase(Phase::Evaluating);
        self.pending_eval = Some(PendingEvaluation {
            eval_time: now + self.bundle.config.settle_steps as f64 * self.bundle.scenario.dt,
            event,
            pre_score: pend.pre_score,
            selective: pend.selective,
        });
    }

    /// Grade a finished handoff against the five desirable features.
    fn finish_evaluation(&mut self, post_obs: &Observation, now: f64) {
        let Some(pend) = self.pending_eval.take() else {
            return;
        };
        if now + 1e-9 < pend.eval_time {
            self.pending_eval = Some(pend);
            return;
        }
        let event = &pend.event;
        let post = post_obs.candidates.get(&event.target).and_then(|s| {
            evaluate_candidate(self.bundle, &self.computable, &self.weights, &event.target, s).ok()
        });
        let verdict = match (&post, event.failed) {
            (Some(post), false) => {
                let al = event.auth_latency;
                let beneficial = match pend.pre_score {
                    Some(pre) => post.score > pre,
                    None => true,
                };
                let tardy = event.decision.degraded_at_decision;
                let premature = event.decision.why == HandoffReason::Opportunist
                    && !event.decision.dwell_confirmed;
                let interventions = u64::from(event.decision.online_intervention);
                let scores = metrics::feature_scores(
                    event.interruption_latency,
                    interventions,
                    al,
                    beneficial,
                    !tardy && !premature,
                    pend.selective,
                    true, // no-reason handoffs are never executed
                    &self.recent_success,
                );
                let successful = scores.min() >= self.bundle.config.boundary;
                EventVerdict {
                    scores,
                    successful,
                    complete: true,
                }
            }
            // missing post snapshot or failed execution
            _ => EventVerdict {
                scores: FeatureScores::all_zero(),
                successful: false,
                complete: false,
            },
        };
        self.recent_success.push_back(verdict.successful);
        while self.recent_success.len() > metrics::ADAPTABILITY_WINDOW {
            self.recent_success.pop_front();
        }
        let mut event = pend.event;
        event.verdict = Some(verdict);
        self.events.push(event);
        self.hce.set_phase(Phase::Idle);
    }
}

/// Run the full scenario loop: step, snapshot via the context manager,
/// discover, decide, execute, evaluate. Deterministic given the seed.
pub fn run_scenario(bundle: &ScenarioBundle) -> Result<Trace> {
    let mut world = World::new(bundle.scenario.clone())?;
    let dt = bundle.scenario.dt;
    let delivered = delivered_variables(bundle);
    let mut runner = Runner::new(bundle, &delivered);

    let mut history: VecDeque<Observation> = VecDeque::new();
    let window = bundle.config.staleness as usize + 1;
    let mut steps = Vec::new();

    // initial attachment at t = 0 (association, not a handoff)
    let obs0 = observe(&world, Some(&delivered));
    {
        let evals = runner.evaluate_obs(&obs0)?;
        let standings: Vec<(&CandidateEvaluation, PolicyStanding)> = evals
            .iter()
            .filter(|c| c.feasible)
            .map(|c| (c, policy_standing(bundle, &obs0.candidates[&c.network_id], &c.network_id)))
            .filter(|(_, s)| matches!(s, PolicyStanding::Neutral | PolicyStanding::Preferred))
            .collect();
        runner.hce.current_network = runner.select_best(&standings).map(|c| c.network_id.clone());
    }
    history.push_back(obs0);

    for _ in 0..bundle.scenario.step_count() {
        world.step();
        let fresh = observe(&world, Some(&delivered));
        history.push_back(fresh.clone());
        while history.len() > window {
            history.pop_front();
        }
        // the context manager delivers snapshots `staleness` steps old
        let stale = history.front().expect("history never empty").clone();
        let now = world.time;

        if let Some(pend) = runner.pending.take() {
            if now + 1e-9 >= pend.exec_end {
                runner.finish_execution(pend, &fresh, now);
            } else {
                runner.pending = Some(pend);
            }
        }

        if runner.hce.phase == Phase::Evaluating {
            runner.finish_evaluation(&stale, now);
        }

        if runner.hce.phase == Phase::Idle {
            runner.hce.set_phase(Phase::Deciding);
            match runner.decide(&stale)? {
                DecisionOutcome::Stay | DecisionOutcome::ForcedDisconnect => {
                    runner.hce.set_phase(Phase::Idle);
                }
                DecisionOutcome::Handoff(record) => {
                    runner.hce.set_phase(Phase::Executing);
                    let pend = runner.execute(record, now);
                    if pend.exec_end <= now + dt - 1e-9 {
                        // completes within this step
                        runner.finish_execution(pend, &fresh, now);
                        if bundle.config.settle_steps == 0 {
                            runner.finish_evaluation(&stale, now);
                        }
                    } else {
                        runner.pending = Some(pend);
                    }
                }
            }
        }

        // ground-truth best network for dwell-time accounting (fresh view)
        let argmax = {
            let evals = runner.evaluate_obs(&fresh)?;
            let standings: Vec<(&CandidateEvaluation, PolicyStanding)> = evals
                .iter()
                .filter(|c| c.feasible)
                .map(|c| {
                    (c, policy_standing(bundle, &fresh.candidates[&c.network_id], &c.network_id))
                })
                .filter(|(_, s)| *s != PolicyStanding::Forbidden)
                .collect();
            runner.select_best(&standings).map(|c| c.network_id.clone())
        };

        let mut snapshot = stale.base.clone();
        if let Some(cur) = &runner.hce.current_network {
            if let Some(s) = stale.candidates.get(cur) {
                snapshot = s.clone();
            }
        }
        let in_best = runner.hce.current_network == argmax;
        steps.push(StepRecord {
            time: now,
            current_network: runner.hce.current_network.clone(),
            argmax_network: argmax,
            in_best,
            phase: runner.hce.phase,
            snapshot,
        });
    }

    Ok(Trace {
        duration: bundle.scenario.step_count() as f64 * dt,
        dt,
        steps,
        events: runner.events,
        forced_disconnects: runner.forced_disconnects,
        online_interventions: runner.interventions,
        delivered_variable_count: delivered.len(),
        computable_features: runner.computable,
        bytes_per_variable: bundle.config.bytes_per_variable,
    })
}

//! Structure of handoff context information: variable identities, source
//! domains, normalization ranges, policies, constraints, and configuration.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{HandoffError, Result};

/// Floor applied by [`normalize_variable`] so normalized values stay strictly
/// positive (the objective function takes logarithms).
pub const NORMALIZE_EPSILON: f64 = 1e-6;

/// Interruption-latency bound inherited from 1G voice handoffs: a gap longer
/// than this is audible.
pub const SEAMLESS_IL_BOUND_SECS: f64 = 0.100;

/// The six source domains of context information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextDomain {
    User,
    Terminal,
    Application,
    Network,
    Provider,
    HandoffPerformance,
}

/// Symbolic identifier of a context variable (e.g. `RSS`, `NL`, `price`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub String);

impl VarId {
    pub fn new(name: &str) -> Self {
        VarId(name.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for VarId {
    fn from(s: &str) -> Self {
        VarId::new(s)
    }
}

/// Built-in variable identifiers grouped by source domain. Only a subset is
/// ever computed by the simulator; the rest remain registered identifiers.
pub fn builtin_variables() -> Vec<(VarId, ContextDomain)> {
    use ContextDomain::*;
    let mut out = Vec::new();
    let mut add = |names: &[&str], d: ContextDomain| {
        out.extend(names.iter().map(|n| (VarId::new(n), d)));
    };
    add(&["UPref", "UPrio", "UProf", "UHist"], User);
    add(
        &[
            // link quality
            "RSS", "SNR", "SIR", "SNIR", "BER", "BLER", "CCI", "CIR",
            // power management
            "BT", "BL", "ECR", "TPC", "TPT", "PB",
            // geographic mobility
            "Vel", "Dist", "Loc", "MDir", "GCA",
        ],
        Terminal,
    );
    add(
        &["LP", "DP", "CP", "DuP", "DTR", "PJ", "OOD", "AppT"],
        Application,
    );
    add(&["NBW", "NL", "ND", "NJ", "NT", "NMTU"], Network);
    add(&["price", "PPref", "PPrio"], Provider);
    add(
        &[
            "CB", "CD", "HOB", "HOR", "HOL", "DLat", "ExLat", "EvLat", "HOType", "ETSLH", "IR",
            "IL", "DR", "DL", "DI", "UF", "SO", "SSO", "ImpR", "AppImpR", "UsrImpR", "TermImpR",
            "SHOR", "IHOR", "OHOR", "DTIB", "AL", "DAR", "OUIR", "THOR", "PHOR",
        ],
        HandoffPerformance,
    );
    out
}

/// Tolerance range `[lower, upper]` for one variable, in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceRange {
    pub lower: f64,
    pub upper: f64,
}

impl ToleranceRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower < upper) {
            return Err(HandoffError::Input(format!(
                "tolerance range requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(ToleranceRange { lower, upper })
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Registry of known variables: domain membership plus optional tolerance
/// range. Every identifier belongs to exactly one domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableRegistry {
    domains: BTreeMap<VarId, ContextDomain>,
    ranges: BTreeMap<VarId, ToleranceRange>,
}

impl VariableRegistry {
    /// Registry preloaded with the built-in identifier list, no ranges.
    pub fn with_builtins() -> Self {
        let mut r = VariableRegistry::default();
        for (id, d) in builtin_variables() {
            r.domains.insert(id, d);
        }
        r
    }

    pub fn register(&mut self, id: VarId, domain: ContextDomain) -> Result<()> {
        if let Some(existing) = self.domains.get(&id) {
            if *existing != domain {
                return Err(HandoffError::Config(format!(
                    "variable {id} already registered in domain {existing:?}"
                )));
            }
        }
        self.domains.insert(id, domain);
        Ok(())
    }

    pub fn set_range(&mut self, id: &VarId, range: ToleranceRange) -> Result<()> {
        if !self.domains.contains_key(id) {
            return Err(HandoffError::Config(format!("unknown variable id {id}")));
        }
        self.ranges.insert(id.clone(), range);
        Ok(())
    }

    pub fn domain(&self, id: &VarId) -> Option<ContextDomain> {
        self.domains.get(id).copied()
    }

    pub fn range(&self, id: &VarId) -> Option<ToleranceRange> {
        self.ranges.get(id).copied()
    }

    pub fn contains(&self, id: &VarId) -> bool {
        self.domains.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &VarId> {
        self.domains.keys()
    }

    pub fn ranged_ids(&self) -> impl Iterator<Item = &VarId> {
        self.ranges.keys()
    }
}

/// Timestamped map of context-variable values, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    /// Seconds since scenario start.
    pub time: f64,
    pub values: BTreeMap<VarId, f64>,
}

impl ContextSnapshot {
    pub fn new(time: f64) -> Self {
        assert!(time >= 0.0, "snapshot time must be >= 0");
        ContextSnapshot {
            time,
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &VarId) -> Option<f64> {
        self.values.get(id).copied()
    }

    pub fn require(&self, id: &VarId) -> Result<f64> {
        self.get(id)
            .ok_or_else(|| HandoffError::MissingContext(id.clone()))
    }

    pub fn set(&mut self, id: VarId, value: f64) {
        self.values.insert(id, value);
    }

    /// Copy of this snapshot keeping only the listed variables.
    pub fn restricted_to(&self, keep: &[VarId]) -> ContextSnapshot {
        ContextSnapshot {
            time: self.time,
            values: self
                .values
                .iter()
                .filter(|(k, _)| keep.contains(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

/// Min-max normalization against the tolerance range, clamped to
/// `[NORMALIZE_EPSILON, 1]` so the result is a valid log argument.
pub fn normalize_variable(value: f64, range: ToleranceRange) -> Result<f64> {
    if !value.is_finite() {
        return Err(HandoffError::NonFiniteInput(value));
    }
    let t = (value - range.lower) / (range.upper - range.lower);
    Ok(t.clamp(NORMALIZE_EPSILON, 1.0))
}

/// Application class a constraint applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AppClass {
    RealTime,
    NonRealTime,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintSense {
    MaxAllowed,
    MinRequired,
}

/// A bound on one variable that must hold for a given application class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffConstraint {
    pub variable: VarId,
    pub bound: f64,
    pub sense: ConstraintSense,
    pub applies_to: AppClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintVerdict {
    Satisfied,
    Violated,
    Inapplicable,
}

/// Evaluate one constraint against a snapshot for the given application class.
pub fn check_constraint(
    c: &HandoffConstraint,
    s: &ContextSnapshot,
    app_class: AppClass,
) -> Result<ConstraintVerdict> {
    let applicable = match (c.applies_to, app_class) {
        (AppClass::Any, _) | (_, AppClass::Any) => true,
        (a, b) => a == b,
    };
    if !applicable {
        return Ok(ConstraintVerdict::Inapplicable);
    }
    let value = s.require(&c.variable)?;
    let violated = match c.sense {
        ConstraintSense::MaxAllowed => value > c.bound,
        ConstraintSense::MinRequired => value < c.bound,
    };
    Ok(if violated {
        ConstraintVerdict::Violated
    } else {
        ConstraintVerdict::Satisfied
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyOwner {
    User,
    Provider,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directive {
    ForbidTarget,
    PreferTarget,
    RequireImperativeOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
}

impl CompareOp {
    pub fn eval(&self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Eq => lhs == rhs,
        }
    }
}

/// Condition a policy rule matches against: a threshold on a variable in the
/// candidate's snapshot, a specific target network, or always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Condition {
    Threshold {
        variable: VarId,
        op: CompareOp,
        value: f64,
    },
    TargetIs {
        network: String,
    },
    Always,
}

impl Condition {
    pub fn matches(&self, s: &ContextSnapshot, target: &str) -> bool {
        match self {
            Condition::Threshold {
                variable,
                op,
                value,
            } => s.get(variable).is_some_and(|v| op.eval(v, *value)),
            Condition::TargetIs { network } => network == target,
            Condition::Always => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub when: Condition,
    pub directive: Directive,
}

/// Ordered rule list owned by the user or a provider. Rules are evaluated in
/// listed order; first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoffPolicy {
    pub owner: PolicyOwner,
    pub rules: Vec<PolicyRule>,
}

/// First matching rule's directive, scanning user policies before provider
/// policies (or the reverse when `user_first` is false).
pub fn apply_policies_ordered(
    policies: &[HandoffPolicy],
    s: &ContextSnapshot,
    target: &str,
    user_first: bool,
) -> Option<Directive> {
    let pass = |owner: PolicyOwner| {
        policies
            .iter()
            .filter(move |p| p.owner == owner)
            .flat_map(|p| p.rules.iter())
            .find(|r| r.when.matches(s, target))
            .map(|r| r.directive)
    };
    let (first, second) = if user_first {
        (PolicyOwner::User, PolicyOwner::Provider)
    } else {
        (PolicyOwner::Provider, PolicyOwner::User)
    };
    pass(first).or_else(|| pass(second))
}

/// User policies take precedence over provider policies by default.
pub fn apply_policies(
    policies: &[HandoffPolicy],
    s: &ContextSnapshot,
    target: &str,
) -> Option<Directive> {
    apply_policies_ordered(policies, s, target, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionStrategy {
    BreakBeforeMake,
    MakeBeforeBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    TerminalControlled,
    NetworkControlled,
}

/// Tunable knobs of the handoff algorithm. Fields omitted from a scenario
/// file fall back to [`Default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HandoffConfiguration {
    /// Score margin a candidate must exceed over the current network
    /// (objective-score units).
    pub hysteresis: f64,
    /// Wall-clock budget for one decision, seconds.
    pub decision_budget: f64,
    /// Degradation thresholds in raw units; breaching one makes the handoff
    /// imperative.
    pub thresholds: BTreeMap<VarId, f64>,
    /// Scalarization weights over features, summing to 1.
    pub feature_weights: BTreeMap<crate::objective::FeatureId, f64>,
    /// Consecutive snapshots a candidate must stay sufficiently better.
    pub dwell: u32,
    /// Snapshot age delivered by the context manager, in steps.
    pub staleness: u32,
    /// Simulated evaluation cost per candidate, seconds.
    pub decision_cost_per_candidate: f64,
    /// Steps to wait after execution before taking the post snapshot.
    pub settle_steps: u32,
    /// Radar boundary-circle radius.
    pub boundary: f64,
    /// Signaling cost per delivered variable per snapshot, bytes.
    pub bytes_per_variable: f64,
    /// User policies override provider policies when true.
    pub user_policy_precedence: bool,
    /// Deliver only the first N variables of the priority order (None = all).
    pub context_size: Option<usize>,
    pub control_mode: ControlMode,
    pub seed: u64,
}

impl Default for HandoffConfiguration {
    fn default() -> Self {
        HandoffConfiguration {
            hysteresis: 0.0,
            decision_budget: 1.0,
            thresholds: BTreeMap::new(),
            feature_weights: BTreeMap::new(),
            dwell: 3,
            staleness: 0,
            decision_cost_per_candidate: 0.005,
            settle_steps: 1,
            boundary: 0.6,
            bytes_per_variable: 8.0,
            user_policy_precedence: true,
            context_size: None,
            control_mode: ControlMode::TerminalControlled,
            seed: 1,
        }
    }
}

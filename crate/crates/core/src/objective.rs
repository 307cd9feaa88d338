//! Per-feature log-utility objectives, Pareto dominance, and scalarization.
//!
//! Each desirable feature gets an objective value built from the normalized
//! context variables correlated with it: positively correlated variables add
//! `(K + W_i) * ln(v)`, negatively correlated ones subtract it. Candidates are
//! compared by component-wise dominance and, for a single pick, by a weighted
//! scalarization of the objective vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::context::{normalize_variable, ContextSnapshot, VarId, VariableRegistry};
use crate::error::{HandoffError, Result};

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// The five desirable handoff features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureId {
    Seamlessness,
    Autonomy,
    Security,
    Correctness,
    Adaptability,
}

impl FeatureId {
    pub const ALL: [FeatureId; 5] = [
        FeatureId::Seamlessness,
        FeatureId::Autonomy,
        FeatureId::Security,
        FeatureId::Correctness,
        FeatureId::Adaptability,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FeatureId::Seamlessness => "seamlessness",
            FeatureId::Autonomy => "autonomy",
            FeatureId::Security => "security",
            FeatureId::Correctness => "correctness",
            FeatureId::Adaptability => "adaptability",
        }
    }
}

/// One correlated variable with its priority weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedVariable {
    pub variable: VarId,
    pub weight: f64,
}

/// A feature's correlation sets: positively and negatively correlated
/// variables with weights, plus the scaling factor K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub feature: FeatureId,
    pub positives: Vec<WeightedVariable>,
    pub negatives: Vec<WeightedVariable>,
    pub k: f64,
}

impl CorrelationSpec {
    /// Check disjointness of the correlation sets, weight bounds, and the
    /// per-feature weight sum.
    pub fn validate(&self) -> Result<()> {
        if self.k <= 0.0 {
            return Err(HandoffError::Config(format!(
                "{}: scaling factor K must be > 0, got {}",
                self.feature.name(),
                self.k
            )));
        }
        let mut sum = 0.0;
        let mut seen = std::collections::BTreeSet::new();
        for wv in self.positives.iter().chain(&self.negatives) {
            if !(0.0..=1.0).contains(&wv.weight) {
                return Err(HandoffError::Config(format!(
                    "{}: weight {} for {} outside [0,1]",
                    self.feature.name(),
                    wv.weight,
                    wv.variable
                )));
            }
            if !seen.insert(&wv.variable) {
                return Err(HandoffError::Config(format!(
                    "{}: variable {} appears in both correlation sets",
                    self.feature.name(),
                    wv.variable
                )));
            }
            sum += wv.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(HandoffError::Config(format!(
                "{}: weights sum to {sum}, expected 1",
                self.feature.name()
            )));
        }
        Ok(())
    }

    pub fn variables(&self) -> impl Iterator<Item = &VarId> {
        self.positives
            .iter()
            .chain(&self.negatives)
            .map(|wv| &wv.variable)
    }
}

/// One objective value per feature, in the maximization sense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub values: BTreeMap<FeatureId, f64>,
}

impl ObjectiveVector {
    pub fn get(&self, f: FeatureId) -> Option<f64> {
        self.values.get(&f).copied()
    }
}

/// One candidate network's evaluation at a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvaluation {
    pub network_id: String,
    pub snapshot_time: f64,
    pub objectives: ObjectiveVector,
    pub feasible: bool,
    pub score: f64,
}

/// Objective value of one feature at a snapshot:
/// sum over positives of `(K+W_i) ln(norm(v_i))` minus the same sum over
/// negatives, with min-max normalization against the registered ranges.
pub fn objective_value(
    spec: &CorrelationSpec,
    s: &ContextSnapshot,
    registry: &VariableRegistry,
) -> Result<f64> {
    let term = |wv: &WeightedVariable| -> Result<f64> {
        let raw = s.require(&wv.variable)?;
        let range = registry
            .range(&wv.variable)
            .ok_or_else(|| HandoffError::MissingContext(wv.variable.clone()))?;
        let norm = normalize_variable(raw, range)?;
        Ok((spec.k + wv.weight) * norm.ln())
    };
    let mut f = 0.0;
    for wv in &spec.positives {
        f += term(wv)?;
    }
    for wv in &spec.negatives {
        f -= term(wv)?;
    }
    Ok(f)
}

/// Component-wise application of [`objective_value`] over a list of specs,
/// one per feature.
pub fn objective_vector(
    specs: &[CorrelationSpec],
    s: &ContextSnapshot,
    registry: &VariableRegistry,
) -> Result<ObjectiveVector> {
    let mut values = BTreeMap::new();
    for spec in specs {
        if values
            .insert(spec.feature, objective_value(spec, s, registry)?)
            .is_some()
        {
            return Err(HandoffError::Input(format!(
                "duplicate correlation spec for {}",
                spec.feature.name()
            )));
        }
    }
    Ok(ObjectiveVector { values })
}

/// True iff every variable in the snapshot with a registered tolerance range
/// lies within it, bounds inclusive.
pub fn feasible(s: &ContextSnapshot, registry: &VariableRegistry) -> bool {
    s.values.iter().all(|(id, v)| match registry.range(id) {
        Some(range) => range.contains(*v),
        None => true,
    })
}

/// Pareto dominance in the maximization sense: `a` is at least as good in
/// every component and strictly better in at least one.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> Result<bool> {
    if a.values.len() != b.values.len()
        || !a.values.keys().eq(b.values.keys())
    {
        return Err(HandoffError::Input(
            "dominance requires identical feature sets".to_string(),
        ));
    }
    let mut strictly_better = false;
    for (f, av) in &a.values {
        let bv = b.values[f];
        if *av < bv {
            return Ok(false);
        }
        if *av > bv {
            strictly_better = true;
        }
    }
    Ok(strictly_better)
}

/// The non-dominated subset of the candidates, input order preserved.
/// Candidates with equal vectors are all retained.
pub fn pareto_front(cands: &[CandidateEvaluation]) -> Result<Vec<CandidateEvaluation>> {
    let mut front = Vec::new();
    for (i, c) in cands.iter().enumerate() {
        let mut dominated = false;
        for (j, other) in cands.iter().enumerate() {
            if i != j && dominates(&other.objectives, &c.objectives)? {
                dominated = true;
                break;
            }
        }
        if !dominated {
            front.push(c.clone());
        }
    }
    Ok(front)
}

/// Weighted sum of the objective vector. Weights must be non-negative and
/// sum to 1.
pub fn scalarize(v: &ObjectiveVector, weights: &BTreeMap<FeatureId, f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut total = 0.0;
    for (f, w) in weights {
        if *w < 0.0 {
            return Err(HandoffError::Config(format!(
                "negative scalarization weight for {}",
                f.name()
            )));
        }
        total += w;
        if *w > 0.0 {
            let value = v.get(*f).ok_or_else(|| {
                HandoffError::Input(format!("objective vector lacks feature {}", f.name()))
            })?;
            sum += w * value;
        }
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(HandoffError::Config(format!(
            "scalarization weights sum to {total}, expected 1"
        )));
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{ContextDomain, ToleranceRange};
    use approx::assert_relative_eq;

    fn registry_with(vars: &[(&str, f64, f64)]) -> VariableRegistry {
        let mut r = VariableRegistry::with_builtins();
        for (name, lo, hi) in vars {
            let id = VarId::new(name);
            if !r.contains(&id) {
                r.register(id.clone(), ContextDomain::Network).unwrap();
            }
            r.set_range(&id, ToleranceRange::new(*lo, *hi).unwrap())
                .unwrap();
        }
        r
    }

    fn snapshot_with(pairs: &[(&str, f64)]) -> ContextSnapshot {
        let mut s = ContextSnapshot::new(0.0);
        for (k, v) in pairs {
            s.set(VarId::new(k), *v);
        }
        s
    }

    fn wv(name: &str, w: f64) -> WeightedVariable {
        WeightedVariable {
            variable: VarId::new(name),
            weight: w,
        }
    }

    fn vec_of(pairs: &[(FeatureId, f64)]) -> ObjectiveVector {
        ObjectiveVector {
            values: pairs.iter().cloned().collect(),
        }
    }

    #[test]
    fn all_ones_normalized_gives_zero() {
        let spec = CorrelationSpec {
            feature: FeatureId::Seamlessness,
            positives: vec![wv("RSS", 0.5)],
            negatives: vec![wv("NL", 0.5)],
            k: 1.0,
        };
        // values at range upper => normalized 1 => ln 1 = 0
        let r = registry_with(&[("RSS", -100.0, -40.0), ("NL", 0.0, 1.0)]);
        let s = snapshot_with(&[("RSS", -40.0), ("NL", 1.0)]);
        assert_relative_eq!(objective_value(&spec, &s, &r).unwrap(), 0.0);
    }

    #[test]
    fn hand_evaluated_two_variable_case() {
        // positives {A: W=0.6}, negatives {B: W=0.4}, K=1, norm(A)=0.5,
        // norm(B)=1 => f = 1.6 ln 0.5
        let spec = CorrelationSpec {
            feature: FeatureId::Correctness,
            positives: vec![wv("A", 0.6)],
            negatives: vec![wv("B", 0.4)],
            k: 1.0,
        };
        let mut r = VariableRegistry::with_builtins();
        for name in ["A", "B"] {
            r.register(VarId::new(name), ContextDomain::Network).unwrap();
            r.set_range(&VarId::new(name), ToleranceRange::new(0.0, 1.0).unwrap())
                .unwrap();
        }
        let s = snapshot_with(&[("A", 0.5), ("B", 1.0)]);
        let f = objective_value(&spec, &s, &r).unwrap();
        assert_relative_eq!(f, 1.6 * 0.5f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f, -1.1090, epsilon = 5e-5);

        let s2 = snapshot_with(&[("A", 0.9), ("B", 1.0)]);
        let f2 = objective_value(&spec, &s2, &r).unwrap();
        assert_relative_eq!(f2, 1.6 * 0.9f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(f2, -0.1686, epsilon = 5e-5);
        assert!(f2 > f);
    }

    #[test]
    fn missing_variable_names_the_variable() {
        let spec = CorrelationSpec {
            feature: FeatureId::Security,
            positives: vec![wv("AL", 1.0)],
            negatives: vec![],
            k: 1.0,
        };
        let r = registry_with(&[]);
        let s = snapshot_with(&[]);
        match objective_value(&spec, &s, &r) {
            Err(HandoffError::MissingContext(id)) => assert_eq!(id.as_str(), "AL"),
            other => panic!("expected missing-context error, got {other:?}"),
        }
    }

    #[test]
    fn vector_is_componentwise_and_local() {
        let specs = vec![
            CorrelationSpec {
                feature: FeatureId::Seamlessness,
                positives: vec![wv("RSS", 1.0)],
                negatives: vec![],
                k: 1.0,
            },
            CorrelationSpec {
                feature: FeatureId::Security,
                positives: vec![wv("NL", 1.0)],
                negatives: vec![],
                k: 1.0,
            },
        ];
        let r = registry_with(&[("RSS", -100.0, -40.0), ("NL", 0.0, 1.0)]);
        let s1 = snapshot_with(&[("RSS", -70.0), ("NL", 0.5)]);
        let s2 = snapshot_with(&[("RSS", -50.0), ("NL", 0.5)]);
        let v1 = objective_vector(&specs, &s1, &r).unwrap();
        let v2 = objective_vector(&specs, &s2, &r).unwrap();
        assert_ne!(v1.get(FeatureId::Seamlessness), v2.get(FeatureId::Seamlessness));
        assert_eq!(v1.get(FeatureId::Security), v2.get(FeatureId::Security));
    }

    #[test]
    fn feasibility_is_inclusive_at_bounds() {
        let r = registry_with(&[("NL", 0.0, 1.0)]);
        assert!(feasible(&snapshot_with(&[("NL", 0.5)]), &r));
        assert!(feasible(&snapshot_with(&[("NL", 0.0)]), &r));
        assert!(feasible(&snapshot_with(&[("NL", 1.0)]), &r));
        assert!(!feasible(&snapshot_with(&[("NL", 1.1)]), &r));
    }

    #[test]
    fn dominance_definition() {
        use FeatureId::*;
        let a = vec_of(&[(Seamlessness, 2.0), (Security, 3.0)]);
        let b = vec_of(&[(Seamlessness, 1.0), (Security, 3.0)]);
        assert!(dominates(&a, &b).unwrap());
        assert!(!dominates(&b, &a).unwrap());

        let c = vec_of(&[(Seamlessness, 1.0), (Security, 2.0)]);
        let d = vec_of(&[(Seamlessness, 2.0), (Security, 1.0)]);
        assert!(!dominates(&c, &d).unwrap());
        assert!(!dominates(&d, &c).unwrap());

        assert!(!dominates(&a, &a).unwrap());
    }

    #[test]
    fn dominance_rejects_mismatched_features() {
        use FeatureId::*;
        let a = vec_of(&[(Seamlessness, 1.0)]);
        let b = vec_of(&[(Security, 1.0)]);
        assert!(dominates(&a, &b).is_err());
    }

    fn cand(id: &str, pairs: &[(FeatureId, f64)]) -> CandidateEvaluation {
        CandidateEvaluation {
            network_id: id.to_string(),
            snapshot_time: 0.0,
            objectives: vec_of(pairs),
            feasible: true,
            score: 0.0,
        }
    }

    #[test]
    fn front_drops_dominated_keeps_order_and_duplicates() {
        use FeatureId::*;
        let cands = vec![
            cand("a", &[(Seamlessness, 1.0), (Security, 2.0)]),
            cand("b", &[(Seamlessness, 2.0), (Security, 1.0)]),
            cand("c", &[(Seamlessness, 0.0), (Security, 0.0)]),
            cand("d", &[(Seamlessness, 1.0), (Security, 2.0)]),
        ];
        let front = pareto_front(&cands).unwrap();
        let ids: Vec<_> = front.iter().map(|c| c.network_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "d"]);
    }

    #[test]
    fn front_of_single_candidate_is_itself() {
        use FeatureId::*;
        let cands = vec![cand("a", &[(Seamlessness, 1.0)])];
        assert_eq!(pareto_front(&cands).unwrap().len(), 1);
        assert!(pareto_front(&[]).unwrap().is_empty());
    }

    #[test]
    fn scalarize_weighted_sum() {
        use FeatureId::*;
        let v = vec_of(&[(Seamlessness, -1.0), (Security, 2.0)]);
        let w: BTreeMap<_, _> = [(Seamlessness, 0.6), (Security, 0.4)].into();
        assert_relative_eq!(scalarize(&v, &w).unwrap(), 0.2, epsilon = 1e-12);

        let one_hot: BTreeMap<_, _> = [(Seamlessness, 1.0), (Security, 0.0)].into();
        assert_eq!(scalarize(&v, &one_hot).unwrap(), -1.0);

        let equal: BTreeMap<_, _> = [(Seamlessness, 0.5), (Security, 0.5)].into();
        assert_relative_eq!(scalarize(&v, &equal).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn scalarize_rejects_bad_weight_sum() {
        use FeatureId::*;
        let v = vec_of(&[(Seamlessness, 1.0)]);
        let w: BTreeMap<_, _> = [(Seamlessness, 0.9)].into();
        assert!(matches!(scalarize(&v, &w), Err(HandoffError::Config(_))));
    }

    #[test]
    fn correlation_spec_validation() {
        let good = CorrelationSpec {
            feature: FeatureId::Seamlessness,
            positives: vec![wv("RSS", 0.7)],
            negatives: vec![wv("NL", 0.3)],
            k: 1.0,
        };
        assert!(good.validate().is_ok());

        let overlapping = CorrelationSpec {
            positives: vec![wv("RSS", 0.5)],
            negatives: vec![wv("RSS", 0.5)],
            ..good.clone()
        };
        assert!(overlapping.validate().is_err());

        let bad_sum = CorrelationSpec {
            positives: vec![wv("RSS", 0.7)],
            negatives: vec![wv("NL", 0.2)],
            ..good.clone()
        };
        assert!(bad_sum.validate().is_err());

        let bad_k = CorrelationSpec { k: 0.0, ..good };
        assert!(bad_k.validate().is_err());
    }
}

//! Property tests for the numeric and ordering invariants the rest of the
//! system leans on.

use std::collections::BTreeMap;

use proptest::prelude::*;

use handoff_core::context::{
    check_constraint, normalize_variable, AppClass, ConstraintSense, ConstraintVerdict,
    ContextSnapshot, HandoffConstraint, ToleranceRange, VarId, NORMALIZE_EPSILON,
};
use handoff_core::environment::{sample_load, LoadProcess, NetworkSpec};
use handoff_core::objective::{
    dominates, pareto_front, scalarize, CandidateEvaluation, FeatureId, ObjectiveVector,
};
use handoff_core::runner::round_sig;

fn range_strategy() -> impl Strategy<Value = ToleranceRange> {
    (-1e6..1e6f64, 1e-3..1e6f64)
        .prop_map(|(lo, width)| ToleranceRange::new(lo, lo + width).unwrap())
}

fn vector_strategy(n: usize) -> impl Strategy<Value = ObjectiveVector> {
    prop::collection::vec(-10.0..10.0f64, n).prop_map(|vals| ObjectiveVector {
        values: FeatureId::ALL.iter().copied().zip(vals).collect(),
    })
}

fn candidates_strategy() -> impl Strategy<Value = Vec<CandidateEvaluation>> {
    (1usize..=5, 1usize..=8).prop_flat_map(|(nf, nc)| {
        prop::collection::vec(vector_strategy(nf), nc).prop_map(|vecs| {
            vecs.into_iter()
                .enumerate()
                .map(|(i, objectives)| CandidateEvaluation {
                    network_id: format!("n{i}"),
                    snapshot_time: 0.0,
                    objectives,
                    feasible: true,
                    score: 0.0,
                })
                .collect()
        })
    })
}

proptest! {
    /// Normalization always lands in the clamped unit interval and is
    /// non-decreasing in the raw value.
    #[test]
    fn normalization_bounded_and_monotone(
        range in range_strategy(),
        a in -2e6..2e6f64,
        b in -2e6..2e6f64,
    ) {
        let na = normalize_variable(a, range).unwrap();
        let nb = normalize_variable(b, range).unwrap();
        prop_assert!((NORMALIZE_EPSILON..=1.0).contains(&na));
        if a <= b {
            prop_assert!(na <= nb);
        }
    }

    /// Dominance is irreflexive and asymmetric.
    #[test]
    fn dominance_irreflexive_and_asymmetric(
        a in vector_strategy(5),
        b in vector_strategy(5),
    ) {
        prop_assert!(!dominates(&a, &a).unwrap());
        if dominates(&a, &b).unwrap() {
            prop_assert!(!dominates(&b, &a).unwrap());
        }
    }

    /// The front of a non-empty candidate set is non-empty and its members
    /// are mutually non-dominated.
    #[test]
    fn front_nonempty_and_mutually_nondominated(cands in candidates_strategy()) {
        let front = pareto_front(&cands).unwrap();
        prop_assert!(!front.is_empty());
        for a in &front {
            for b in &front {
                prop_assert!(!dominates(&a.objectives, &b.objectives).unwrap()
                    || a.objectives == b.objectives);
            }
        }
    }

    /// A weighted sum with weights summing to one stays inside the value
    /// envelope of the vector.
    #[test]
    fn scalarization_within_envelope(v in vector_strategy(5), raw in prop::collection::vec(0.01..1.0f64, 5)) {
        let total: f64 = raw.iter().sum();
        let weights: BTreeMap<FeatureId, f64> = FeatureId::ALL
            .iter()
            .copied()
            .zip(raw.iter().map(|w| w / total))
            .collect();
        let s = scalarize(&v, &weights).unwrap();
        let lo = v.values.values().fold(f64::INFINITY, |a, b| a.min(*b));
        let hi = v.values.values().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
    }

    /// Network load stays in [0,1] and is a pure function of time for both
    /// load processes.
    #[test]
    fn load_bounded_and_deterministic(
        mean in -0.5..1.5f64,
        amplitude in 0.0..2.0f64,
        period in 0.1..500.0f64,
        seed in any::<u64>(),
        t in 0.0..1e4f64,
        sinusoid in any::<bool>(),
    ) {
        let load = if sinusoid {
            LoadProcess::Sinusoid { mean, amplitude, period }
        } else {
            LoadProcess::Random { mean, amplitude, period, seed }
        };
        let net = NetworkSpec {
            id: "n".to_string(),
            provider_id: "p".to_string(),
            technology: "wifi".to_string(),
            coverage_center: [0.0, 0.0],
            coverage_radius: 1.0,
            ref_power: -40.0,
            ref_distance: 1.0,
            path_loss_exponent: 2.0,
            base_bandwidth: 1.0,
            base_delay: 0.01,
            load,
            price: 0.0,
            authorized_terminals: Default::default(),
            extra: Default::default(),
        };
        let l = sample_load(&net, t);
        prop_assert!((0.0..=1.0).contains(&l));
        prop_assert_eq!(l, sample_load(&net, t));
    }

    /// Nine-significant-digit rounding is idempotent.
    #[test]
    fn rounding_idempotent(x in -1e12..1e12f64) {
        let once = round_sig(x);
        prop_assert_eq!(once, round_sig(once));
    }

    /// Constraint bounds are inclusive: the bound value itself never
    /// violates.
    #[test]
    fn constraint_bounds_inclusive(bound in -1e6..1e6f64, max_allowed in any::<bool>()) {
        let c = HandoffConstraint {
            variable: VarId::new("IL"),
            bound,
            sense: if max_allowed {
                ConstraintSense::MaxAllowed
            } else {
                ConstraintSense::MinRequired
            },
            applies_to: AppClass::Any,
        };
        let mut s = ContextSnapshot::new(0.0);
        s.set(VarId::new("IL"), bound);
        prop_assert_eq!(
            check_constraint(&c, &s, AppClass::Any).unwrap(),
            ConstraintVerdict::Satisfied
        );
    }
}

//! Acceptance suite: each test checks one release criterion end to end and
//! prints a single PASS line (visible with `--nocapture`).

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use handoff_core::context::{
    AppClass, ConstraintSense, ExecutionStrategy, HandoffConstraint, ToleranceRange, VarId,
    VariableRegistry,
};
use handoff_core::metrics::{accumulate, radar, run_feature_scores, tradeoff_sweep, SweepParameter};
use handoff_core::objective::{
    dominates, objective_value, pareto_front, CandidateEvaluation, CorrelationSpec, FeatureId,
    ObjectiveVector, WeightedVariable,
};
use handoff_core::pipeline::{computable_features, delivery_order, run_scenario};
use handoff_core::runner::cmd_run;
use handoff_core::scenario::{parse_scenario, ScenarioBundle};

fn reference_bundle() -> ScenarioBundle {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.json");
    parse_scenario(&path).expect("reference scenario loads")
}

fn pass(name: &str, detail: &str) {
    println!("acceptance [{name}]: PASS ({detail})");
}

/// Variables drawn on in the randomized utility checks, with their ranges.
fn utility_registry() -> (VariableRegistry, Vec<VarId>) {
    let mut registry = VariableRegistry::with_builtins();
    let vars: Vec<(&str, f64, f64)> = vec![
        ("NBW", 0.0, 120.0),
        ("RSS", -110.0, -30.0),
        ("BL", 0.0, 1.0),
        ("ND", 0.0, 0.5),
        ("NL", 0.0, 1.0),
        ("AL", 0.0, 2.0),
    ];
    let mut ids = Vec::new();
    for (name, lo, hi) in vars {
        let id = VarId::new(name);
        registry
            .set_range(&id, ToleranceRange::new(lo, hi).unwrap())
            .unwrap();
        ids.push(id);
    }
    (registry, ids)
}

fn random_spec(rng: &mut StdRng, ids: &[VarId]) -> CorrelationSpec {
    // split the six variables into a positive and a negative group and give
    // them random weights summing to one
    let split = rng.gen_range(1..ids.len());
    let raw: Vec<f64> = (0..ids.len()).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let wv = WeightedVariable {
            variable: id.clone(),
            weight: raw[i] / total,
        };
        if i < split {
            positives.push(wv);
        } else {
            negatives.push(wv);
        }
    }
    CorrelationSpec {
        feature: FeatureId::Seamlessness,
        positives,
        negatives,
        k: rng.gen_range(0.5..2.0),
    }
}

fn random_snapshot(
    rng: &mut StdRng,
    registry: &VariableRegistry,
    ids: &[VarId],
) -> handoff_core::context::ContextSnapshot {
    let mut s = handoff_core::context::ContextSnapshot::new(0.0);
    for id in ids {
        let r = registry.range(id).unwrap();
        s.set(id.clone(), rng.gen_range(r.lower..r.upper));
    }
    s
}

/// Raising a positively correlated variable never lowers the utility, and
/// raising a negatively correlated one never raises it (1000 random cases).
#[test]
fn utility_is_monotone_in_each_variable() {
    let (registry, ids) = utility_registry();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let spec = random_spec(&mut rng, &ids);
        let snapshot = random_snapshot(&mut rng, &registry, &ids);
        let base = objective_value(&spec, &snapshot, &registry).unwrap();

        let (wv, positive) = if rng.gen_bool(0.5) || spec.negatives.is_empty() {
            (&spec.positives[rng.gen_range(0..spec.positives.len())], true)
        } else {
            (&spec.negatives[rng.gen_range(0..spec.negatives.len())], false)
        };
        let id = &wv.variable;
        let r = registry.range(id).unwrap();
        let v = snapshot.get(id).unwrap();
        let bumped_value = v + rng.gen_range(0.0..=(r.upper - v));
        let mut bumped = snapshot.clone();
        bumped.set(id.clone(), bumped_value);
        let after = objective_value(&spec, &bumped, &registry).unwrap();

        if positive {
            assert!(
                after >= base - 1e-12,
                "raising positive variable {id} lowered utility: {base} -> {after}"
            );
        } else {
            assert!(
                after <= base + 1e-12,
                "raising negative variable {id} raised utility: {base} -> {after}"
            );
        }
    }
    pass("utility-monotonicity", "1000 randomized single-variable bumps");
}

/// The Pareto front matches an independent O(n^2) oracle on 1000 random
/// candidate sets (up to 8 candidates, up to 5 shared features).
#[test]
fn pareto_front_matches_brute_force_oracle() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..1000 {
        let n_features = rng.gen_range(1..=5usize);
        let features: Vec<FeatureId> = FeatureId::ALL[..n_features].to_vec();
        let n = rng.gen_range(1..=8usize);
        let cands: Vec<CandidateEvaluation> = (0..n)
            .map(|i| {
                let values: BTreeMap<FeatureId, f64> = features
                    .iter()
                    // small integer grid keeps ties and duplicates frequent
                    .map(|f| (*f, rng.gen_range(0..4) as f64))
                    .collect();
                CandidateEvaluation {
                    network_id: format!("n{i}"),
                    snapshot_time: 0.0,
                    objectives: ObjectiveVector { values },
                    feasible: true,
                    score: 0.0,
                }
            })
            .collect();

        let front = pareto_front(&cands).unwrap();

        // oracle: direct pairwise scan with the textbook definition
        let oracle: Vec<&CandidateEvaluation> = cands
            .iter()
            .enumerate()
            .filter(|(i, c)| {
                !cands.iter().enumerate().any(|(j, other)| {
                    *i != j && dominates(&other.objectives, &c.objectives).unwrap()
                })
            })
            .map(|(_, c)| c)
            .collect();

        let got: Vec<&str> = front.iter().map(|c| c.network_id.as_str()).collect();
        let want: Vec<&str> = oracle.iter().map(|c| c.network_id.as_str()).collect();
        assert_eq!(got, want, "front mismatch on {cands:?}");
    }
    pass("pareto-oracle", "1000 random candidate sets, order preserved");
}

/// With zero hysteresis, fresh context, single-step dwell, instant settling,
/// and seamless execution, the terminal tracks the best network to within one
/// time step over the whole run.
#[test]
fn always_best_connected_limit() {
    let mut bundle = reference_bundle();
    bundle.config.hysteresis = 0.0;
    bundle.config.staleness = 0;
    bundle.config.dwell = 1;
    bundle.config.settle_steps = 0;
    bundle.config.decision_budget = 1.0;
    bundle.execution.strategy = ExecutionStrategy::MakeBeforeBreak;

    let trace = run_scenario(&bundle).unwrap();
    let counters = accumulate(&trace);
    assert!(
        counters.dtib >= trace.duration - trace.dt - 1e-9,
        "dtib {} misses duration {} by more than one dt",
        counters.dtib,
        trace.duration
    );
    pass(
        "always-best-connected",
        &format!("dtib {} of {} s", counters.dtib, trace.duration),
    );
}

/// Sweeping hysteresis trades best-network dwell time against handoff rate:
/// the rate never increases with hysteresis, zero hysteresis maximizes dwell
/// time, and the frontier keeps at least three distinct non-dominated points.
#[test]
fn hysteresis_sweep_tradeoff() {
    let bundle = reference_bundle();
    let values = [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5];
    let result = tradeoff_sweep(&bundle, SweepParameter::Hysteresis, &values).unwrap();

    let dtib: Vec<f64> = result.points.iter().map(|p| p.metric_a).collect();
    let hor: Vec<f64> = result.points.iter().map(|p| -p.metric_b).collect();
    for w in hor.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "handoff rate increased with hysteresis: {hor:?}");
    }
    let max_dtib = dtib.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    assert!(
        dtib[0] >= max_dtib - 1e-9,
        "zero hysteresis does not maximize dwell time: {dtib:?}"
    );
    let mut frontier: Vec<(f64, f64)> = result
        .points
        .iter()
        .filter(|p| p.non_dominated)
        .map(|p| (p.metric_a, p.metric_b))
        .collect();
    frontier.dedup();
    assert!(
        frontier.len() >= 3,
        "fewer than three distinct non-dominated points: {frontier:?}"
    );
    pass(
        "hysteresis-tradeoff",
        &format!("{} distinct frontier points", frontier.len()),
    );
}

/// Signaling overhead is exactly linear in the delivered variable count and
/// in the per-variable byte cost, and the computable feature set only grows
/// with the context size.
#[test]
fn signaling_overhead_linearity() {
    let bundle = reference_bundle();
    let order = delivery_order(&bundle);

    let so_for = |size: Option<usize>, bytes: f64| {
        let mut b = bundle.clone();
        b.config.context_size = size;
        b.config.bytes_per_variable = bytes;
        accumulate(&run_scenario(&b).unwrap()).so
    };
    let half = so_for(Some(5), 8.0);
    let full = so_for(Some(10), 8.0);
    assert_eq!(full, 2.0 * half, "doubling the context size must double SO exactly");
    let doubled_bytes = so_for(Some(5), 16.0);
    assert_eq!(
        doubled_bytes,
        2.0 * half,
        "doubling bytes per variable must double SO exactly"
    );

    let mut previous: Vec<FeatureId> = Vec::new();
    for size in 1..=order.len() {
        let delivered: Vec<VarId> = order.iter().take(size).cloned().collect();
        let computable = computable_features(&bundle, &delivered);
        assert!(
            previous.iter().all(|f| computable.contains(f)),
            "computable features shrank when the context grew at size {size}"
        );
        previous = computable;
    }
    pass(
        "signaling-linearity",
        &format!("SO {half} -> {full} bytes/min, features monotone"),
    );
}

/// Counter bookkeeping: dwell time plus time off the best network covers the
/// run, the imperative and opportunist rates sum to the total rate, and the
/// radar verdict equals the min-score-vs-boundary rule at every boundary.
#[test]
fn accounting_invariants() {
    let bundle = reference_bundle();
    let trace = run_scenario(&bundle).unwrap();
    let counters = accumulate(&trace);

    let off_best = trace.steps.iter().filter(|s| !s.in_best).count() as f64 * trace.dt;
    assert!(
        (counters.dtib + off_best - trace.duration).abs() < 1e-9,
        "dtib {} + off-best {} != duration {}",
        counters.dtib,
        off_best,
        trace.duration
    );
    assert!(
        (counters.ihor + counters.ohor - counters.hor).abs() < 1e-12,
        "imperative {} + opportunist {} != total {}",
        counters.ihor,
        counters.ohor,
        counters.hor
    );
    assert_eq!(counters.handoff_count as usize, trace.events.len());

    let scores = run_feature_scores(&trace);
    let min = scores.values().fold(f64::INFINITY, |a, b| a.min(*b));
    for boundary in [0.0, 0.2, 0.4, 0.6, 0.8, 0.85, 0.9, 1.0] {
        let report = radar(&scores, boundary).unwrap();
        assert_eq!(report.successful, min >= boundary, "boundary {boundary}");
        assert_eq!(report.outliers.is_empty(), report.successful);
    }
    pass(
        "accounting-invariants",
        &format!("dtib {} + {} = {}", counters.dtib, off_best, trace.duration),
    );
}

/// A 120 ms break-before-make interruption violates a 100 ms real-time bound
/// on every event; an 80 ms interruption violates nothing.
#[test]
fn interruption_constraint_flagging() {
    let run_with_base = |base: f64| {
        let mut bundle = reference_bundle();
        bundle.execution.strategy = ExecutionStrategy::BreakBeforeMake;
        bundle.execution.base_latency = base;
        bundle.execution.technology_latency.clear();
        bundle.constraints = vec![HandoffConstraint {
            variable: VarId::new("IL"),
            bound: 0.1,
            sense: ConstraintSense::MaxAllowed,
            applies_to: AppClass::RealTime,
        }];
        run_scenario(&bundle).unwrap()
    };

    let slow = run_with_base(0.120);
    assert!(!slow.events.is_empty(), "scenario must produce handoffs");
    for e in &slow.events {
        assert!(
            e.violated_constraints.contains(&VarId::new("IL")),
            "120 ms interruption not flagged on event at t={}",
            e.start
        );
    }
    let fast = run_with_base(0.080);
    assert!(!fast.events.is_empty(), "scenario must produce handoffs");
    for e in &fast.events {
        assert!(
            e.violated_constraints.is_empty(),
            "80 ms interruption wrongly flagged on event at t={}",
            e.start
        );
    }
    pass(
        "interruption-flagging",
        &format!("{} slow and {} fast events checked", slow.events.len(), fast.events.len()),
    );
}

/// Two runs of the same scenario produce byte-identical output files.
#[test]
fn run_outputs_are_deterministic() {
    let bundle = reference_bundle();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let (out_a, _) = cmd_run(&bundle, dir_a.path()).unwrap();
    let (out_b, _) = cmd_run(&bundle, dir_b.path()).unwrap();

    for (a, b) in [
        (&out_a.events_path, &out_b.events_path),
        (&out_a.snapshots_path, &out_b.snapshots_path),
        (&out_a.report_path, &out_b.report_path),
        (&out_a.radar_path, &out_b.radar_path),
    ] {
        let bytes_a = std::fs::read(a).unwrap();
        let bytes_b = std::fs::read(b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{} differs between runs", a.display());
    }
    pass("determinism", "events, snapshots, report, radar byte-identical");
}

/// Rescaling a variable and its tolerance range by the same positive factor
/// leaves every candidate ranking unchanged (200 random sets, factors 1/2
/// and 2).
#[test]
fn ranking_invariant_under_unit_rescaling() {
    let (registry, ids) = utility_registry();
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..200 {
        let spec = random_spec(&mut rng, &ids);
        let snapshots: Vec<_> = (0..rng.gen_range(2..=6))
            .map(|_| random_snapshot(&mut rng, &registry, &ids))
            .collect();
        let argmax = |reg: &VariableRegistry, snaps: &[handoff_core::context::ContextSnapshot]| {
            snaps
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| {
                    objective_value(&spec, a, reg)
                        .unwrap()
                        .total_cmp(&objective_value(&spec, b, reg).unwrap())
                })
                .map(|(i, _)| i)
                .unwrap()
        };
        let before = argmax(&registry, &snapshots);

        let scaled_id = &ids[rng.gen_range(0..ids.len())];
        let c = if rng.gen_bool(0.5) { 0.5 } else { 2.0 };
        let mut scaled_registry = registry.clone();
        let r = registry.range(scaled_id).unwrap();
        scaled_registry
            .set_range(
                scaled_id,
                ToleranceRange::new(r.lower * c, r.upper * c).unwrap(),
            )
            .unwrap();
        let scaled_snaps: Vec<_> = snapshots
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.set(scaled_id.clone(), s.get(scaled_id).unwrap() * c);
                t
            })
            .collect();
        let after = argmax(&scaled_registry, &scaled_snaps);
        assert_eq!(before, after, "rescaling {scaled_id} by {c} changed the ranking");
    }
    pass("rescaling-invariance", "200 random sets, factors 0.5 and 2");
}

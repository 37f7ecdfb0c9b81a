use phasta_core::modulation::resolve_bias;
use phasta_core::scenario::*;

fn ev(t: f64, cue: Cue) -> CueEvent {
    CueEvent { t, cue }
}

fn commit_time(trace: &ScenarioTrace) -> Option<f64> {
    trace
        .records
        .iter()
        .find(|r| r.observation.state_activation(REACH_LEFT).max(r.observation.state_activation(REACH_RIGHT)) > 0.5)
        .map(|r| r.observation.t)
}

/// Max activation of `state` before the first retract visit.
fn first_cycle_max(trace: &ScenarioTrace, state: usize) -> f64 {
    let end = trace
        .records
        .iter()
        .position(|r| r.observation.state_activation(RETRACT) > VISIT_THRESHOLD)
        .unwrap_or(trace.records.len());
    trace.records[..end]
        .iter()
        .map(|r| r.observation.state_activation(state))
        .fold(0.0, f64::max)
}

#[test]
fn left_cue_reaches_left_only() {
    let trace = run_handover(&[ev(1.0, Cue::LeftExtended)], 5.0, 0).unwrap();
    assert!(trace.visits(REACH_LEFT), "{:?}", trace.visited_names());
    assert!(!trace.visits(REACH_RIGHT));
    assert!(trace.max_activation(REACH_RIGHT) < 0.01);
}

#[test]
fn right_cue_mirrors_left() {
    let trace = run_handover(&[ev(1.0, Cue::RightExtended)], 5.0, 0).unwrap();
    assert!(trace.visits(REACH_RIGHT));
    assert!(!trace.visits(REACH_LEFT));
}

#[test]
fn both_hands_commit_earlier_than_no_cue() {
    for seed in 0..3 {
        let both = run_handover(&[ev(1.0, Cue::BothExtended)], 5.0, seed).unwrap();
        let none = run_handover(&[], 5.0, seed).unwrap();
        let left = first_cycle_max(&both, REACH_LEFT);
        let right = first_cycle_max(&both, REACH_RIGHT);
        assert!((left > COMMIT_THRESHOLD) != (right > COMMIT_THRESHOLD), "seed {seed}: {left} {right}");
        let t_both = commit_time(&both).unwrap();
        let t_none = commit_time(&none).unwrap();
        assert!(t_both < t_none, "seed {seed}: {t_both} vs {t_none}");
    }
}

#[test]
fn no_cue_lingers_at_the_fork() {
    let trace = run_handover(&[], 5.0, 0).unwrap();
    let entry = trace.first_time_above(LIFT, 0.5).unwrap();
    assert!(commit_time(&trace).unwrap() - entry > 1.0);
}

#[test]
fn disengaging_mid_reach_aborts_to_retract() {
    let trace = run_handover(&[ev(1.0, Cue::LeftExtended), ev(2.0, Cue::Disengaged)], 5.0, 0).unwrap();
    let phase = |t: f64| {
        let r = &trace.records[(t / 1e-3).round() as usize - 1];
        phase_of(&r.observation.phi, LIFT, REACH_LEFT).unwrap()
    };
    let at_cue = phase(2.0);
    assert!(at_cue > 0.25 && at_cue < 0.95, "not mid-reach: {at_cue}");
    assert!(phase(2.3) < at_cue - 0.3, "phase did not reverse");
    assert!(trace.visits(RETRACT));
    assert!(!trace.visits(RELEASE));
    assert!(trace.max_activation_after(RELEASE, 2.0) < 0.1);
}

#[test]
fn abort_is_safe_before_release() {
    for t in [1.5, 2.5, 3.0, 3.3] {
        let trace = run_handover(&[ev(1.0, Cue::LeftExtended), ev(t, Cue::Disengaged)], 6.0, 1).unwrap();
        assert!(trace.max_activation_after(RELEASE, t) < 0.1, "disengaged at {t}");
        assert!(trace.max_activation_after(RETRACT, t) > VISIT_THRESHOLD);
    }
}

#[test]
fn completed_runs_use_exactly_one_reach() {
    let scripts = [
        vec![ev(1.0, Cue::LeftExtended)],
        vec![ev(1.0, Cue::RightExtended)],
        vec![ev(1.0, Cue::BothExtended)],
        vec![ev(0.5, Cue::RightExtended), ev(1.2, Cue::LeftExtended)],
    ];
    for (k, script) in scripts.iter().enumerate() {
        for seed in 0..3 {
            let trace = run_handover(script, 5.0, seed).unwrap();
            assert!(trace.completed(), "script {k}");
            let left = first_cycle_max(&trace, REACH_LEFT) > COMMIT_THRESHOLD;
            let right = first_cycle_max(&trace, REACH_RIGHT) > COMMIT_THRESHOLD;
            assert!(left != right, "script {k} seed {seed}");
        }
    }
}

#[test]
fn cue_takes_effect_on_the_next_tick() {
    let setup = HandoverSetup::default();
    let cue_t = 1.7;
    let trace = setup.run(&[ev(cue_t, Cue::RightExtended)], 2.0, 4).unwrap();
    let k = trace.records.iter().position(|r| r.cue_event.is_some()).unwrap();
    let rec = &trace.records[k];
    assert!(rec.observation.t - cue_t <= setup.dt + 1e-9);
    assert_eq!(rec.active_cue, Cue::RightExtended);
    assert_eq!(rec.greediness[REACH_RIGHT], setup.policy.preferred_greediness);
    assert_eq!(rec.greediness[REACH_LEFT], setup.policy.avoided_greediness);

    let base = setup.policy.base_inputs(&setup.graph).unwrap();
    let cued = apply_cue(&setup.policy, &setup.graph, Cue::RightExtended, &base).unwrap();
    let o = &rec.observation;
    let expected = resolve_bias(&o.lambda, &cued.bias, &o.x);
    for (a, b) in o.delta_dot.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    assert!(trace.records[..k].iter().all(|r| r.active_cue == Cue::None));
}

#[test]
fn negotiation_latency_is_bounded() {
    let fork = run_handover(&[], 2.0, 0).unwrap().first_time_above(LIFT, 0.5).unwrap();
    for seed in 0..5 {
        let trace = run_handover(&[ev(fork, Cue::LeftExtended)], 3.5, seed).unwrap();
        let latency = trace.first_time_above(REACH_LEFT, 0.5).unwrap() - fork;
        assert!(latency < NEGOTIATION_LATENCY_BOUND, "seed {seed}: {latency}");
    }
}

#[test]
fn blended_command_is_continuous() {
    let scripts = [
        vec![ev(1.0, Cue::LeftExtended), ev(4.0, Cue::Disengaged)],
        vec![
            ev(0.5, Cue::RightExtended),
            ev(1.5, Cue::LeftExtended),
            ev(2.5, Cue::Disengaged),
            ev(5.0, Cue::BothExtended),
        ],
    ];
    for script in &scripts {
        let trace = run_handover(script, 8.0, 4).unwrap();
        assert!(trace.max_command_step() <= COMMAND_STEP_BOUND, "{}", trace.max_command_step());
        for r in &trace.records {
            let total: f64 = r.command.weights.iter().map(|w| w.1).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let script = [ev(1.0, Cue::BothExtended)];
    let a = run_handover(&script, 3.0, 9).unwrap();
    let b = run_handover(&script, 3.0, 9).unwrap();
    assert_eq!(a.visited, b.visited);
    assert!(a.records.iter().zip(&b.records).all(|(p, q)| p.observation == q.observation));
}

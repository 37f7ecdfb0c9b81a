use phasta_core::scenario::{run_handover, Cue, CueEvent, REACH_LEFT};
use phasta_service::config::{parse, Model};
use phasta_service::control::{Command, Entry, GreedinessSpec};
use phasta_service::figures;
use phasta_service::presets::{HANDOVER, THREE_CYCLE};
use phasta_service::session::{collect, run_batch, RunError, Session};
use phasta_service::trace::{read_trace, Decimator, TraceRecord, TraceWriter};
use std::sync::Arc;

fn model(base: &str, overrides: &[&str]) -> Arc<Model> {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Arc::new(parse(base, &o).unwrap())
}

#[test]
fn handover_session_matches_the_scenario_runner() {
    let m = model(HANDOVER, &["output.decimation=1", "run.duration=3.0"]);
    let ours = collect(&m, 0).unwrap();
    let reference = run_handover(&[CueEvent { t: 1.0, cue: Cue::LeftExtended }], 3.0, 0).unwrap();
    assert_eq!(ours.len(), reference.records.len() + 1);
    for (r, s) in ours[1..].iter().zip(&reference.records) {
        assert_eq!(r.x, s.observation.x, "t={}", r.t);
        assert_eq!(r.command.as_ref().unwrap().mean, s.command.mean);
        assert_eq!(r.g, s.greediness);
        assert_eq!(r.cue, Some(s.active_cue));
    }
    let cue_tick = ours.iter().find(|r| r.events == ["cue"]).unwrap();
    assert!((cue_tick.t - 1.001).abs() < 1e-9, "the cue applies before the tick ending at {}", cue_tick.t);
}

#[test]
fn batch_trace_keeps_endpoints_and_strictly_increasing_time() {
    let m = model(THREE_CYCLE, &["run.duration=3.0", "output.decimation=37"]);
    let recs = collect(&m, 0).unwrap();
    assert_eq!(recs[0].tick, 0);
    assert_eq!(recs.last().unwrap().tick, 3000);
    assert!(recs.windows(2).all(|w| w[1].t > w[0].t && w[1].tick > w[0].tick));
}

#[test]
fn decimation_keeps_every_dominant_change() {
    let full = collect(&model(THREE_CYCLE, &["run.duration=6.0", "output.decimation=1"]), 0).unwrap();
    let thin = collect(&model(THREE_CYCLE, &["run.duration=6.0", "output.decimation=250"]), 0).unwrap();
    assert_eq!(figures::dominant_sequence(&full), figures::dominant_sequence(&thin));
    let ticks: Vec<u64> = thin.iter().map(|r| r.tick).collect();
    for w in full.windows(2).filter(|w| w[0].dominant != w[1].dominant) {
        assert!(ticks.contains(&w[1].tick), "switch at tick {} dropped", w[1].tick);
    }
    for r in &thin {
        let same = &full[r.tick as usize];
        assert_eq!(r, same);
    }
}

#[test]
fn decimator_rule() {
    let mut d = Decimator::new(3);
    let rec = |tick, dominant, events: &[&str]| TraceRecord {
        tick,
        t: tick as f64,
        x: vec![],
        dominant,
        lambda: vec![],
        phi: vec![],
        eta: 1.0,
        delta_dot: vec![],
        g: vec![],
        command: None,
        cue: None,
        events: events.iter().map(|s| s.to_string()).collect(),
    };
    let kept: Vec<bool> = [rec(0, 0, &[]), rec(1, 0, &[]), rec(2, 1, &[]), rec(3, 1, &[]), rec(4, 1, &["cue"]), rec(5, 1, &[])]
        .iter()
        .map(|r| d.keep(r))
        .collect();
    assert_eq!(kept, [true, false, true, true, true, false]);
}

#[test]
fn trace_file_round_trips() {
    let m = model(HANDOVER, &["run.duration=1.5"]);
    let mut writer = TraceWriter::new(Vec::new());
    let summary = run_batch(&m, 0, |r| writer.write(r)).unwrap();
    assert_eq!(writer.written(), summary.records);
    let bytes = writer.finish().unwrap();
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), summary.records);
    let back = read_trace(&text).unwrap();
    assert_eq!(back, collect(&m, 0).unwrap());
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["tick", "t", "x", "dominant", "lambda", "phi", "eta", "delta_dot", "g", "command", "cue"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn sparse_lambda_still_sums_to_one() {
    let recs = collect(&model(THREE_CYCLE, &["run.duration=4.0"]), 0).unwrap();
    for r in &recs {
        let s: f64 = r.lambda.iter().map(|w| w.value).sum();
        // At most n² entries were cut, each below the cutoff.
        assert!((s - 1.0).abs() <= 9.0 * 1e-4, "t={} sum={s}", r.t);
    }
}

#[test]
fn bias_commands_upsert() {
    let m = model(THREE_CYCLE, &[]);
    let mut s = Session::new(m, 0).unwrap();
    let entry = |from: &str, to: &str, value| Entry { from: from.into(), to: to.into(), value };
    s.apply(&Command::SetBias { bias: vec![entry("s1", "s2", 1e-3)] }).unwrap();
    s.apply(&Command::SetBias { bias: vec![entry("s2", "s3", 2e-3)] }).unwrap();
    let b = &s.simulator().inputs().bias;
    assert_eq!(b[(1, 0)], 1e-3);
    assert_eq!(b[(2, 1)], 2e-3);
    s.apply(&Command::SetSpeed { speed: vec![entry("s1", "s1", 2.0)] }).unwrap();
    assert_eq!(s.simulator().inputs().speed[(0, 0)], 2.0);
}

#[test]
fn rejected_commands_leave_inputs_unchanged() {
    let mut s = Session::new(model(THREE_CYCLE, &[]), 0).unwrap();
    let before = s.simulator().inputs().clone();
    let e = s.apply(&Command::SetGreediness { g: GreedinessSpec::Full(vec![1.0]) }).unwrap_err();
    assert_eq!(e.code, "invalid");
    let e = s
        .apply(&Command::SetSpeed { speed: vec![Entry { from: "s1".into(), to: "s2".into(), value: 40.0 }] })
        .unwrap_err();
    assert_eq!(e.code, "invalid");
    let e = s.apply(&Command::Cue { value: Cue::LeftExtended }).unwrap_err();
    assert_eq!(e.code, "no_scenario");
    assert_eq!(s.simulator().inputs(), &before);
}

#[test]
fn greediness_by_name_patches() {
    let mut s = Session::new(model(THREE_CYCLE, &[]), 0).unwrap();
    let g = GreedinessSpec::ByName([("s2".to_string(), 3.0)].into());
    s.apply(&Command::SetGreediness { g }).unwrap();
    assert_eq!(s.simulator().inputs().greediness, vec![1.0, 3.0, 1.0]);
}

#[test]
fn reset_replays_the_same_trajectory() {
    let m = model(HANDOVER, &[]);
    let mut s = Session::new(m, 5).unwrap();
    let first: Vec<Vec<f64>> = (0..1500).map(|_| s.step().unwrap().x.clone()).collect();
    s.apply(&Command::Reset { seed: Some(5) }).unwrap();
    assert_eq!(s.record().tick, 0);
    assert_eq!(s.active_cue(), Some(Cue::None));
    let again: Vec<Vec<f64>> = (0..1500).map(|_| s.step().unwrap().x.clone()).collect();
    assert_eq!(first, again);
}

#[test]
fn commands_show_up_on_the_next_record() {
    let mut s = Session::new(model(HANDOVER, &["scenario.events=[]"]), 0).unwrap();
    for _ in 0..10 {
        s.step().unwrap();
    }
    s.apply(&Command::Cue { value: Cue::LeftExtended }).unwrap();
    let r = s.step().unwrap();
    assert_eq!(r.events, ["cue"]);
    assert_eq!(r.cue, Some(Cue::LeftExtended));
    assert!(s.step().unwrap().events.is_empty());
}

#[test]
fn refresh_reflects_paused_changes_without_ticking() {
    let mut s = Session::new(model(THREE_CYCLE, &[]), 0).unwrap();
    s.step().unwrap();
    s.apply(&Command::Pause).unwrap();
    s.apply(&Command::SetGreediness { g: GreedinessSpec::Full(vec![2.0, 2.0, 2.0]) }).unwrap();
    let r = s.refresh().unwrap();
    assert_eq!(r.tick, 1);
    assert_eq!(r.g, vec![2.0; 3]);
    assert!(s.is_paused());
}

#[test]
fn phase_triggered_event_fires_once() {
    let m = model(
        THREE_CYCLE,
        &[
            "run.duration=8.0",
            "output.decimation=1",
            r#"scenario.events=[{"at": {"phase": {"from": "s1", "to": "s2", "above": 0.5}}, "command": {"type": "set_greediness", "g": [1, 1, 2]}}]"#,
        ],
    );
    let recs = collect(&m, 0).unwrap();
    let fired: Vec<&TraceRecord> = recs.iter().filter(|r| !r.events.is_empty()).collect();
    assert_eq!(fired.len(), 1);
    let k = fired[0].tick as usize;
    assert!(recs[k - 1].phase(0, 1).unwrap() >= 0.5);
    assert!(recs[k - 2].phase(0, 1).unwrap() < 0.5);
}

#[test]
fn divergence_is_reported_as_a_sim_error() {
    let m = model(THREE_CYCLE, &["system.dt=2.0", "run.duration=200.0"]);
    match collect(&m, 0) {
        Err(RunError::Sim(e)) => assert!(e.t.is_finite()),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.len())),
    }
}

#[test]
fn left_cue_in_config_reaches_left() {
    let recs = collect(&model(HANDOVER, &[]), 0).unwrap();
    assert!(figures::max_activation(&recs, REACH_LEFT) > 0.9);
}

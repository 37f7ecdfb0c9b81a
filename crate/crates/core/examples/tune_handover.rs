//! Prints timing summaries of the scripted handover runs for the current
//! cue policy. Used to pick the `CuePolicy` defaults.
//!
//! cargo run -p phasta-core --release --example tune_handover

use phasta_core::scenario::*;

fn summary(name: &str, setup: &HandoverSetup, script: &[CueEvent]) {
    let trace = setup.run(script, 8.0, 0).expect("run");
    let phase = |t: f64| {
        let r = &trace.records[(t / setup.dt) as usize];
        phase_of(&r.observation.phi, LIFT, REACH_LEFT).unwrap_or(f64::NAN)
    };
    println!("{name:<18} phi(lift->left) @1.9 {:.3} @2.0 {:.3} @2.1 {:.3} @2.3 {:.3}", phase(1.9), phase(2.0), phase(2.1), phase(2.3));
    let first = |s| trace.first_time_above(s, 0.5).map_or("-".into(), |t| format!("{t:.3}"));
    println!(
        "{name:<18} visited={:?}\n{:<18} lift>0.5 @{} left @{} right @{} release @{} retract @{} | max release after 2s {:.3} | max L {:.3} R {:.3}",
        trace.visited_names(),
        "",
        first(LIFT),
        first(REACH_LEFT),
        first(REACH_RIGHT),
        first(RELEASE),
        first(RETRACT),
        trace.max_activation_after(RELEASE, 2.0),
        trace.max_activation(REACH_LEFT),
        trace.max_activation(REACH_RIGHT),
    );
}

fn main() {
    let mut setup = HandoverSetup::default();
    for arg in std::env::args().skip(1) {
        let (key, val) = arg.split_once('=').expect("KEY=VAL");
        let v: f64 = val.parse().expect("number");
        let p = &mut setup.policy;
        match key {
            "nominal" => p.nominal_bias = v,
            "release" => p.release_bias = v,
            "suppress" => p.suppress_bias = v,
            "fork" => p.fork_bias = v,
            "preferred" => p.preferred_bias = v,
            "avoided" => p.avoided_bias = v,
            "tie" => p.tie_break_bias = v,
            "abort" => p.abort_bias = v,
            "g_pref" => p.preferred_greediness = v,
            "eps" => setup.epsilon = v,
            _ => panic!("unknown key {key}"),
        }
    }
    let ev = |t, cue| CueEvent { t, cue };
    summary("none", &setup, &[]);
    summary("left@1", &setup, &[ev(1.0, Cue::LeftExtended)]);
    summary("right@1", &setup, &[ev(1.0, Cue::RightExtended)]);
    summary("both@1", &setup, &[ev(1.0, Cue::BothExtended)]);
    summary("left@1,dis@2", &setup, &[ev(1.0, Cue::LeftExtended), ev(2.0, Cue::Disengaged)]);
    summary("dis@1", &setup, &[ev(1.0, Cue::Disengaged)]);
}

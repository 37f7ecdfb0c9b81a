//! Object handover: a seven-state graph steered by human cues.
//!
//! The robot picks up an object and offers it to the left or right hand of a
//! person. Cues (extended hands, turning away) map onto bias and greediness
//! changes, so the robot can start reaching speculatively and still halt,
//! redirect or abort the motion. Perception is simulated: [`Cue`] is the seam
//! where a real perception stack would plug in.

use crate::blending::{BlendedCommand, Knot, MotionGoal, MotionLibrary, TransitionPrimitive};
use crate::dynamics::{transitions_from_edges, StateVector, SystemConfig, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::modulation::ModulationInputs;
use crate::observables::Phases;
use crate::sim::{Observation, Simulator};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const HOME: usize = 0;
pub const GRASP: usize = 1;
pub const LIFT: usize = 2;
pub const REACH_LEFT: usize = 3;
pub const REACH_RIGHT: usize = 4;
pub const RELEASE: usize = 5;
pub const RETRACT: usize = 6;

pub const STATE_NAMES: [&str; 7] = ["home", "grasp", "lift", "reach_left", "reach_right", "release", "retract"];

/// State activation above which a state counts as visited.
pub const VISIT_THRESHOLD: f64 = 0.5;

/// Reach activation above which a reach counts as performed.
pub const COMMIT_THRESHOLD: f64 = 0.9;

/// Upper bound on the time from a side cue at fork entry until the matching
/// reach activation exceeds 0.5, s. Measured worst case 0.94 s with the
/// default policy.
pub const NEGOTIATION_LATENCY_BOUND: f64 = 1.2;

/// Upper bound on the Euclidean change of the blended mean between two
/// consecutive ticks at the default `dt`. Measured worst case 0.0087, during
/// fast reversals after repeated disengage/engage cues.
pub const COMMAND_STEP_BOUND: f64 = 0.01;

/// State graph of the handover task.
#[derive(Clone, Debug, PartialEq)]
pub struct HandoverGraph {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    /// Edge added when the person disengages. It is never removed again, since
    /// dropping an edge mid-transition would make the activations jump;
    /// engaged cues suppress it with negative bias instead.
    pub abort_edge: (usize, usize),
}

impl Default for HandoverGraph {
    fn default() -> Self {
        Self {
            names: STATE_NAMES.iter().map(|s| s.to_string()).collect(),
            edges: vec![
                (HOME, GRASP),
                (GRASP, LIFT),
                (LIFT, REACH_LEFT),
                (LIFT, REACH_RIGHT),
                (REACH_LEFT, RELEASE),
                (REACH_RIGHT, RELEASE),
                (RELEASE, RETRACT),
                (RETRACT, HOME),
                (REACH_LEFT, RETRACT),
                (REACH_RIGHT, RETRACT),
            ],
            abort_edge: (LIFT, RETRACT),
        }
    }
}

impl HandoverGraph {
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn transitions(&self) -> Result<Matrix<f64>> {
        transitions_from_edges(self.n(), &self.edges)
    }

    /// Transition matrix with the abort edge enabled.
    pub fn abort_transitions(&self) -> Result<Matrix<f64>> {
        let mut edges = self.edges.clone();
        edges.push(self.abort_edge);
        transitions_from_edges(self.n(), &edges)
    }

    /// States reachable from `start` following the edges.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![start];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            stack.extend(self.edges.iter().filter(|e| e.0 == s).map(|e| e.1));
        }
        seen
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cue {
    #[default]
    None,
    LeftExtended,
    RightExtended,
    BothExtended,
    Disengaged,
}

impl Cue {
    pub const ALL: [Cue; 5] = [Cue::None, Cue::LeftExtended, Cue::RightExtended, Cue::BothExtended, Cue::Disengaged];

    pub fn as_str(self) -> &'static str {
        match self {
            Cue::None => "none",
            Cue::LeftExtended => "left_extended",
            Cue::RightExtended => "right_extended",
            Cue::BothExtended => "both_extended",
            Cue::Disengaged => "disengaged",
        }
    }
}

impl fmt::Display for Cue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Cue::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown cue `{s}`"))
    }
}

/// A cue arriving at simulation time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CueEvent {
    pub t: f64,
    pub cue: Cue,
}

/// Mapping from cues to bias and greediness. Constants were tuned with
/// `examples/tune_handover.rs` and are frozen by the scenario tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuePolicy {
    /// Bias on every edge of the nominal sequence (timeouts), 1/s.
    pub nominal_bias: f64,
    /// Bias from a reach to release while the person is engaged.
    pub release_bias: f64,
    /// Bias on the reach and lift to retract edges while the person is engaged.
    pub suppress_bias: f64,
    /// Bias on both reach edges when no preference is shown.
    pub fork_bias: f64,
    /// Bias towards the requested side.
    pub preferred_bias: f64,
    /// Bias towards the side that was not requested (negative avoids it).
    pub avoided_bias: f64,
    /// Robot's own tie-breaker towards the right hand when both are offered.
    pub tie_break_bias: f64,
    /// Reach greediness without a cue: hesitant, mixes both reaches.
    pub hesitant_greediness: f64,
    /// Greediness of the requested reach.
    pub preferred_greediness: f64,
    /// Greediness of the reach that was not requested.
    pub avoided_greediness: f64,
    /// Reach greediness when both hands are offered.
    pub decisive_greediness: f64,
    /// Greediness of reach and release states after disengagement.
    pub abort_greediness: f64,
    /// Bias towards retract after disengagement.
    pub abort_bias: f64,
}

impl Default for CuePolicy {
    fn default() -> Self {
        Self {
            nominal_bias: 3.0,
            release_bias: 0.0,
            suppress_bias: -2.0,
            fork_bias: 0.5,
            preferred_bias: 2.0,
            avoided_bias: -5.0,
            tie_break_bias: 0.5,
            hesitant_greediness: 0.5,
            preferred_greediness: 4.0,
            avoided_greediness: 0.0,
            decisive_greediness: 8.0,
            abort_greediness: -2.0,
            abort_bias: 5.0,
        }
    }
}

impl CuePolicy {
    /// Inputs before any cue: nominal timeouts plus the `none` cue.
    pub fn base_inputs(&self, graph: &HandoverGraph) -> Result<ModulationInputs<f64>> {
        let mut inputs = ModulationInputs::neutral(graph.n());
        for (from, to) in [(HOME, GRASP), (GRASP, LIFT), (RELEASE, RETRACT), (RETRACT, HOME)] {
            inputs.bias[(to, from)] = self.nominal_bias;
        }
        apply_cue(self, graph, Cue::None, &inputs)
    }
}

/// Updates `inputs` for `cue`. Only the fork, release and abort entries are
/// touched and they are overwritten, so repeating a cue changes nothing.
/// `disengaged` also requests the transition edit that adds the abort edge.
pub fn apply_cue(
    policy: &CuePolicy,
    graph: &HandoverGraph,
    cue: Cue,
    inputs: &ModulationInputs<f64>,
) -> Result<ModulationInputs<f64>> {
    let mut next = inputs.clone();
    next.transition_edit = None;
    let set_fork = |m: &mut ModulationInputs<f64>, left_b: f64, right_b: f64, left_g: f64, right_g: f64| {
        m.bias[(REACH_LEFT, LIFT)] = left_b;
        m.bias[(REACH_RIGHT, LIFT)] = right_b;
        m.greediness[REACH_LEFT] = left_g;
        m.greediness[REACH_RIGHT] = right_g;
    };
    let engaged = |m: &mut ModulationInputs<f64>| {
        m.greediness[RELEASE] = 1.0;
        m.bias[(RELEASE, REACH_LEFT)] = policy.release_bias;
        m.bias[(RELEASE, REACH_RIGHT)] = policy.release_bias;
        m.bias[(RETRACT, REACH_LEFT)] = policy.suppress_bias;
        m.bias[(RETRACT, REACH_RIGHT)] = policy.suppress_bias;
        m.bias[(RETRACT, LIFT)] = policy.suppress_bias;
    };
    let p = policy;
    match cue {
        Cue::None => {
            set_fork(&mut next, p.fork_bias, p.fork_bias, p.hesitant_greediness, p.hesitant_greediness);
            engaged(&mut next);
        }
        Cue::LeftExtended => {
            set_fork(&mut next, p.preferred_bias, p.avoided_bias, p.preferred_greediness, p.avoided_greediness);
            engaged(&mut next);
        }
        Cue::RightExtended => {
            set_fork(&mut next, p.avoided_bias, p.preferred_bias, p.avoided_greediness, p.preferred_greediness);
            engaged(&mut next);
        }
        Cue::BothExtended => {
            set_fork(
                &mut next,
                p.fork_bias,
                p.fork_bias + p.tie_break_bias,
                p.decisive_greediness,
                p.decisive_greediness,
            );
            engaged(&mut next);
        }
        Cue::Disengaged => {
            set_fork(&mut next, 0.0, 0.0, p.abort_greediness, p.abort_greediness);
            next.greediness[RELEASE] = p.abort_greediness;
            next.bias[(RELEASE, REACH_LEFT)] = 0.0;
            next.bias[(RELEASE, REACH_RIGHT)] = 0.0;
            next.bias[(RETRACT, REACH_LEFT)] = p.abort_bias;
            next.bias[(RETRACT, REACH_RIGHT)] = p.abort_bias;
            next.bias[(RETRACT, LIFT)] = p.abort_bias;
            next.transition_edit = Some(graph.abort_transitions()?);
        }
    }
    Ok(next)
}

/// Named 3D point per state; the blended command lives in (position, velocity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub points: Vec<[f64; 3]>,
    pub position_variance: f64,
    pub velocity_variance: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            points: vec![
                [0.30, 0.00, 0.30],  // home
                [0.55, 0.00, 0.05],  // grasp
                [0.55, 0.00, 0.35],  // lift
                [0.75, 0.30, 0.40],  // reach_left
                [0.75, -0.30, 0.40], // reach_right
                [0.80, 0.00, 0.40],  // release
                [0.45, 0.00, 0.45],  // retract
            ],
            position_variance: 1e-4,
            velocity_variance: 1e-2,
        }
    }
}

impl Workspace {
    pub fn goal(&self, state: usize) -> Result<MotionGoal<f64>> {
        let p = self.points[state];
        let mean = vec![p[0], p[1], p[2], 0.0, 0.0, 0.0];
        let var = [
            self.position_variance,
            self.position_variance,
            self.position_variance,
            self.velocity_variance,
            self.velocity_variance,
            self.velocity_variance,
        ];
        MotionGoal::new(mean, Matrix::from_diagonal(&var))
    }

    /// Goals per state; reach primitives rise through a via point, the rest
    /// are straight lines. Covers the abort edge as well.
    pub fn library(&self, graph: &HandoverGraph) -> Result<MotionLibrary<f64>> {
        let mut lib = MotionLibrary::new(graph.n(), 6);
        for s in 0..graph.n() {
            lib.set_goal(s, self.goal(s)?)?;
        }
        for reach in [REACH_LEFT, REACH_RIGHT] {
            let (a, b) = (self.points[LIFT], self.points[reach]);
            let via = [
                0.5 * (a[0] + b[0]),
                0.5 * (a[1] + b[1]),
                0.5 * (a[2] + b[2]) + 0.05,
            ];
            let mut via_goal = self.goal(LIFT)?;
            via_goal = MotionGoal::new(
                vec![via[0], via[1], via[2], b[0] - a[0], b[1] - a[1], b[2] - a[2]],
                via_goal.covariance().scale(2.0),
            )?;
            lib.add_primitive(TransitionPrimitive::new(
                LIFT,
                reach,
                vec![
                    Knot { phase: 0.0, goal: self.goal(LIFT)? },
                    Knot { phase: 0.5, goal: via_goal },
                    Knot { phase: 1.0, goal: self.goal(reach)? },
                ],
            )?)?;
        }
        lib.fill_linear_primitives(&graph.abort_transitions()?)?;
        Ok(lib)
    }
}

/// Complete description of a handover run.
#[derive(Clone, Debug)]
pub struct HandoverSetup {
    pub graph: HandoverGraph,
    pub policy: CuePolicy,
    pub workspace: Workspace,
    pub alpha0: f64,
    pub dt: f64,
    /// Noise level; breaks the tie of the hesitant fork.
    pub epsilon: f64,
}

impl Default for HandoverSetup {
    fn default() -> Self {
        Self {
            graph: HandoverGraph::default(),
            policy: CuePolicy::default(),
            workspace: Workspace::default(),
            alpha0: 10.0,
            dt: DEFAULT_DT,
            epsilon: 1e-6,
        }
    }
}

/// One integration tick of a handover run.
#[derive(Clone, Debug)]
pub struct ScenarioRecord {
    pub observation: Observation<f64>,
    pub command: BlendedCommand<f64>,
    /// Cue that arrived on this tick, if any.
    pub cue_event: Option<Cue>,
    pub active_cue: Cue,
    pub greediness: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScenarioTrace {
    pub records: Vec<ScenarioRecord>,
    /// States in the order their activation first rose above [`VISIT_THRESHOLD`].
    pub visited: Vec<usize>,
    pub names: Vec<String>,
}

impl ScenarioTrace {
    pub fn visited_names(&self) -> Vec<&str> {
        self.visited.iter().map(|&s| self.names[s].as_str()).collect()
    }

    /// Largest change of the blended mean between consecutive records.
    pub fn max_command_step(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| crate::linalg::l2_norm(&w[0].command.mean.iter().zip(&w[1].command.mean).map(|(a, b)| b - a).collect::<Vec<_>>()))
            .fold(0.0, f64::max)
    }

    /// True if release was visited, i.e. the object was handed over.
    pub fn completed(&self) -> bool {
        self.visits(RELEASE)
    }

    pub fn visits(&self, state: usize) -> bool {
        self.visited.contains(&state)
    }

    pub fn max_activation(&self, state: usize) -> f64 {
        self.max_activation_after(state, f64::NEG_INFINITY)
    }

    pub fn max_activation_after(&self, state: usize, t: f64) -> f64 {
        self.records
            .iter()
            .filter(|r| r.observation.t >= t)
            .map(|r| r.observation.state_activation(state))
            .fold(0.0, f64::max)
    }

    /// First time the activation of `state` exceeds `level`.
    pub fn first_time_above(&self, state: usize, level: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.observation.state_activation(state) > level)
            .map(|r| r.observation.t)
    }
}

impl HandoverSetup {
    pub fn system(&self) -> Result<SystemConfig<f64>> {
        SystemConfig::canonical(self.alpha0, self.graph.transitions()?, self.dt)
    }

    pub fn simulator(&self, seed: u64) -> Result<Simulator<f64>> {
        let mut inputs = self.policy.base_inputs(&self.graph)?;
        inputs.epsilon = self.epsilon;
        Simulator::new(self.system()?, inputs, StateVector::at_saddle(self.graph.n(), HOME), seed)
    }

    /// Runs the scripted interaction. Cues take effect before the first tick
    /// at or after their timestamp.
    pub fn run(&self, script: &[CueEvent], duration: f64, seed: u64) -> Result<ScenarioTrace> {
        if script.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::ParameterDomain("cue script times must be sorted".into()));
        }
        let library = self.workspace.library(&self.graph)?;
        let mut sim = self.simulator(seed)?;
        let mut active = Cue::None;
        let mut pending = script.iter().peekable();
        let mut records = Vec::new();
        let mut visited: Vec<usize> = Vec::new();
        let steps = (duration / self.dt).round() as usize;
        for _ in 0..steps {
            let mut arrived = None;
            while let Some(ev) = pending.next_if(|ev| ev.t <= sim.time() + 0.5 * self.dt) {
                let inputs = apply_cue(&self.policy, &self.graph, ev.cue, sim.inputs())?;
                sim.set_inputs(inputs)?;
                active = ev.cue;
                arrived = Some(ev.cue);
            }
            sim.tick()?;
            let observation = sim.observe()?;
            for s in 0..self.graph.n() {
                if observation.state_activation(s) > VISIT_THRESHOLD && visited.last() != Some(&s) {
                    visited.push(s);
                }
            }
            let command = library.blend(&observation.lambda, &observation.phi)?;
            records.push(ScenarioRecord {
                command,
                cue_event: arrived,
                active_cue: active,
                greediness: sim.inputs().greediness.clone(),
                observation,
            });
        }
        Ok(ScenarioTrace {
            records,
            visited,
            names: self.graph.names.clone(),
        })
    }
}

/// Runs the default handover setup.
pub fn run_handover(script: &[CueEvent], duration: f64, seed: u64) -> Result<ScenarioTrace> {
    HandoverSetup::default().run(script, duration, seed)
}

/// Phase of transition `from -> to`, if it is meaningful.
pub fn phase_of(phi: &Phases<f64>, from: usize, to: usize) -> Option<f64> {
    phi.is_valid(to, from).then(|| phi.get(to, from))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_is_well_formed() {
        let g = HandoverGraph::default();
        let t = g.transitions().unwrap();
        assert!((0..7).all(|i| t[(i, i)] == 0.0));
        assert!(g.reachable_from(HOME).iter().all(|&r| r));
        assert_eq!(t[(REACH_LEFT, LIFT)], 1.0);
        assert_eq!(t[(RETRACT, REACH_RIGHT)], 1.0);
        assert_eq!(t[(RETRACT, LIFT)], 0.0);
        assert_eq!(g.abort_transitions().unwrap()[(RETRACT, LIFT)], 1.0);
    }

    #[test]
    fn cue_names_round_trip() {
        for c in Cue::ALL {
            assert_eq!(c.as_str().parse::<Cue>().unwrap(), c);
        }
        assert!("wave".parse::<Cue>().is_err());
    }

    #[test]
    fn policy_is_total_and_idempotent() {
        let setup = HandoverSetup::default();
        let base = setup.policy.base_inputs(&setup.graph).unwrap();
        for cue in Cue::ALL {
            let once = apply_cue(&setup.policy, &setup.graph, cue, &base).unwrap();
            let twice = apply_cue(&setup.policy, &setup.graph, cue, &once).unwrap();
            assert_eq!(once, twice, "{cue}");
            assert!(once.validate().is_ok());
            assert!(once.greediness.iter().chain(once.bias.as_slice()).all(|v| v.is_finite()));
        }
    }

    #[test]
    fn cue_defaults() {
        let setup = HandoverSetup::default();
        let base = setup.policy.base_inputs(&setup.graph).unwrap();
        let none = apply_cue(&setup.policy, &setup.graph, Cue::None, &base).unwrap();
        assert_eq!(none.greediness[REACH_LEFT], 0.5);
        assert_eq!(none.greediness[REACH_RIGHT], 0.5);
        assert_eq!(none.bias[(REACH_LEFT, LIFT)], none.bias[(REACH_RIGHT, LIFT)]);
        let both = apply_cue(&setup.policy, &setup.graph, Cue::BothExtended, &base).unwrap();
        assert_eq!(both.greediness[REACH_LEFT], 8.0);
        assert_eq!(both.greediness[REACH_RIGHT], 8.0);
        let gone = apply_cue(&setup.policy, &setup.graph, Cue::Disengaged, &base).unwrap();
        assert_eq!(gone.greediness[REACH_LEFT], -2.0);
        assert_eq!(gone.greediness[REACH_RIGHT], -2.0);
        assert_eq!(gone.transition_edit.as_ref().unwrap()[(RETRACT, LIFT)], 1.0);
        let back = apply_cue(&setup.policy, &setup.graph, Cue::LeftExtended, &gone).unwrap();
        assert!(back.transition_edit.is_none());
        assert_eq!(back.bias[(RETRACT, LIFT)], setup.policy.suppress_bias);
    }

    #[test]
    fn workspace_library_is_boundary_consistent() {
        let setup = HandoverSetup::default();
        let lib = setup.workspace.library(&setup.graph).unwrap();
        let t = setup.graph.abort_transitions().unwrap();
        for j in 0..7 {
            for i in 0..7 {
                if t[(j, i)] == 1.0 {
                    assert!(lib.primitive(i, j).is_some(), "{i}->{j}");
                }
            }
        }
    }

    #[test]
    fn unsorted_script_is_rejected() {
        let script = [
            CueEvent { t: 2.0, cue: Cue::LeftExtended },
            CueEvent { t: 1.0, cue: Cue::None },
        ];
        assert!(run_handover(&script, 0.01, 0).is_err());
    }
}

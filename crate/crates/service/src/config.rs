//! Run configuration.
//!
//! A single JSON document. States are named; edges and sparse matrices refer
//! to them by name. Every section except `system` is optional, and the
//! defaults are listed in `docs/config.md`.

use crate::control::{resolve_command, Command, Entry, GreedinessSpec};
use phasta_core::blending::{BlendMode, Knot, MotionGoal, MotionLibrary, TransitionPrimitive};
use phasta_core::dynamics::{transitions_from_edges, StateVector, SystemConfig, DEFAULT_DT};
use phasta_core::modulation::ModulationInputs;
use phasta_core::scenario::{CuePolicy, HandoverGraph, Workspace, STATE_NAMES};
use phasta_core::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    /// The document does not match the schema. `line` is 0 when the error
    /// was found after overrides were applied.
    #[error("{field}: {detail}")]
    Schema { field: String, detail: String, line: usize },
    #[error("{field}: {detail}")]
    Invalid { field: String, detail: String },
    #[error("override `{0}`: expected KEY=VAL with a dotted key")]
    Override(String),
}

fn invalid(field: impl Into<String>, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), detail: detail.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    #[serde(default)]
    pub modulation: ModulationSection,
    #[serde(default)]
    pub motion: Option<MotionSection>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub serve: ServeSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Number of states; optional when `states` is given.
    #[serde(default)]
    pub n: Option<usize>,
    /// State names; defaults to `s1..sn`.
    #[serde(default)]
    pub states: Option<Vec<String>>,
    /// Uniform growth rate of the canonical system. Mutually exclusive with `alpha`.
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub nu: Option<Vec<f64>>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// `[from, to]` pairs.
    pub edges: Vec<[String; 2]>,
    /// Initial condition: a state name (start on its saddle) or a full vector.
    #[serde(default)]
    pub initial: Option<Initial>,
}

fn default_gamma() -> f64 {
    2.0
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    State(String),
    Vector(Vec<f64>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    #[serde(default)]
    pub bias: Vec<Entry>,
    #[serde(default)]
    pub speed: Vec<Entry>,
    #[serde(default)]
    pub greediness: Option<GreedinessSpec>,
    #[serde(default)]
    pub constant_bias: Option<ConstantBias>,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantBias {
    Uniform(f64),
    PerState(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionSection {
    pub dim: usize,
    #[serde(default)]
    pub mode: BlendMode,
    #[serde(default)]
    pub goals: BTreeMap<String, GoalSpec>,
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    /// Straight-line primitives for every edge without an explicit one.
    #[serde(default = "yes")]
    pub fill_linear: bool,
}

fn yes() -> bool {
    true
}

/// Gaussian with either a full covariance or an isotropic variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub mean: Vec<f64>,
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnotSpec {
    pub phase: f64,
    pub mean: Vec<f64>,
    #[serde(default)]
    pub covariance: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub from: String,
    pub to: String,
    /// Interior knots; the end points are the state goals.
    #[serde(default)]
    pub via: Vec<KnotSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub handover: Option<HandoverSection>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverSection {
    #[serde(default)]
    pub policy: CuePolicy,
    #[serde(default = "default_abort_edge")]
    pub abort_edge: [String; 2],
    /// Named 3D points; missing states use the built-in layout.
    #[serde(default)]
    pub points: BTreeMap<String, [f64; 3]>,
    #[serde(default)]
    pub position_variance: Option<f64>,
    #[serde(default)]
    pub velocity_variance: Option<f64>,
}

fn default_abort_edge() -> [String; 2] {
    ["lift".into(), "retract".into()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub at: TriggerSpec,
    pub command: Command,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TriggerSpec {
    /// Before the first tick at or after this simulated time.
    Time(f64),
    /// Before the first tick after the phase of `from -> to` reaches `above`.
    Phase { from: String, to: String, above: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_duration")]
    pub duration: f64,
}

fn default_duration() -> f64 {
    10.0
}

impl Default for RunSection {
    fn default() -> Self {
        Self { duration: default_duration() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Keep every k-th tick (plus event and dominant-change ticks).
    #[serde(default = "one")]
    pub decimation: u64,
}

fn one() -> u64 {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { path: None, decimation: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    #[serde(default = "default_publish_hz")]
    pub publish_hz: f64,
    /// Simulated seconds per wall-clock second.
    #[serde(default = "default_realtime")]
    pub realtime_factor: f64,
}

fn default_publish_hz() -> f64 {
    50.0
}

fn default_realtime() -> f64 {
    1.0
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { publish_hz: default_publish_hz(), realtime_factor: default_realtime() }
    }
}

/// A time- or phase-triggered command with names resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledEvent {
    pub trigger: Trigger,
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Trigger {
    Time(f64),
    Phase { from: usize, to: usize, above: f64 },
}

#[derive(Clone, Debug)]
pub struct Handover {
    pub graph: HandoverGraph,
    pub policy: CuePolicy,
}

/// Validated configuration, resolved into core types.
#[derive(Clone, Debug)]
pub struct Model {
    pub names: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub system: SystemConfig<f64>,
    pub inputs: ModulationInputs<f64>,
    pub initial: StateVector<f64>,
    pub seed: u64,
    pub library: Option<MotionLibrary<f64>>,
    pub handover: Option<Handover>,
    pub events: Vec<ScheduledEvent>,
    pub duration: f64,
    pub decimation: u64,
    pub output: Option<PathBuf>,
    pub serve: ServeSection,
}

impl Model {
    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Reads, overrides and validates a config file.
pub fn load(path: &Path, overrides: &[String]) -> Result<Model, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse(&text, overrides)
}

/// Parses config text. Schema errors in the text carry its line number;
/// overrides are applied afterwards and re-checked.
pub fn parse(text: &str, overrides: &[String]) -> Result<Model, ConfigError> {
    let cfg = parse_document(text, overrides)?;
    cfg.resolve()
}

pub fn parse_document(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| schema_error(e, true))?;
    if overrides.is_empty() {
        return Ok(cfg);
    }
    let mut doc: Value = serde_json::from_str(text).expect("document already parsed");
    for ov in overrides {
        apply_override(&mut doc, ov)?;
    }
    serde_path_to_error::deserialize(doc).map_err(|e| schema_error(e, false))
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>, with_line: bool) -> ConfigError {
    let path = e.path().to_string();
    let inner = e.into_inner();
    ConfigError::Schema {
        field: if path == "." { "<root>".into() } else { path },
        line: if with_line { inner.line() } else { 0 },
        detail: inner.to_string(),
    }
}

/// Sets `KEY=VAL` in `doc`. Keys are dotted paths; numeric segments index
/// arrays. `VAL` is read as JSON, falling back to a plain string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    if key.split('.').any(str::is_empty) {
        return Err(ConfigError::Override(spec.into()));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    for seg in key.split('.') {
        node = match node {
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| invalid(key, format!("`{seg}` is not an array index")))?;
                items.get_mut(idx).ok_or_else(|| invalid(key, format!("index {idx} out of range")))?
            }
            Value::Object(map) => map.entry(seg).or_insert(Value::Null),
            Value::Null => {
                *node = Value::Object(Default::default());
                node.as_object_mut().unwrap().entry(seg).or_insert(Value::Null)
            }
            _ => return Err(invalid(key, format!("cannot descend into `{seg}`"))),
        };
    }
    *node = value;
    Ok(())
}

impl RunConfig {
    pub fn resolve(&self) -> Result<Model, ConfigError> {
        let sys = &self.system;
        let names = state_names(sys)?;
        let n = names.len();
        let index = |field: &str, name: &str| {
            names
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| invalid(field, format!("unknown state `{name}`")))
        };

        let mut edges = Vec::with_capacity(sys.edges.len());
        for (k, [from, to]) in sys.edges.iter().enumerate() {
            let field = format!("system.edges[{k}]");
            let e = (index(&field, from)?, index(&field, to)?);
            if e.0 == e.1 {
                return Err(invalid(field, format!("self-loop on `{from}`")));
            }
            if edges.contains(&e) {
                return Err(invalid(field, format!("duplicate edge {from} -> {to}")));
            }
            edges.push(e);
        }
        if !(sys.dt > 0.0 && sys.dt.is_finite()) {
            return Err(invalid("system.dt", format!("must be positive, got {}", sys.dt)));
        }
        let transitions = transitions_from_edges(n, &edges).map_err(|e| invalid("system.edges", e.to_string()))?;
        let system = build_system(sys, n, transitions)?;

        let initial = match &sys.initial {
            None => StateVector::at_saddle(n, 0),
            Some(Initial::State(s)) => StateVector::at_saddle(n, index("system.initial", s)?),
            Some(Initial::Vector(x)) => {
                if x.len() != n || x.iter().any(|v| !v.is_finite() || *v < 0.0) || x.iter().all(|&v| v == 0.0) {
                    return Err(invalid("system.initial", format!("expected {n} non-negative components, not all zero")));
                }
                StateVector::new(x.clone())
            }
        };

        let handover = match &self.scenario.handover {
            None => None,
            Some(h) => Some(resolve_handover(h, &names, &edges)?),
        };

        let m = &self.modulation;
        let mut inputs = match &handover {
            Some(h) => h.policy.base_inputs(&h.graph).map_err(|e| invalid("scenario.handover.policy", e.to_string()))?,
            None => ModulationInputs::neutral(n),
        };
        for (field, entries, target) in [("modulation.bias", &m.bias, &mut inputs.bias), ("modulation.speed", &m.speed, &mut inputs.speed)] {
            for (k, e) in entries.iter().enumerate() {
                let f = format!("{field}[{k}]");
                let (from, to) = (index(&f, &e.from)?, index(&f, &e.to)?);
                target[(to, from)] = e.value;
            }
        }
        if let Some(g) = &m.greediness {
            for (i, v) in g.resolve(&names).map_err(|d| invalid("modulation.greediness", d))? {
                inputs.greediness[i] = v;
            }
        }
        match &m.constant_bias {
            None => {}
            Some(ConstantBias::Uniform(v)) => inputs.constant_bias = vec![*v; n],
            Some(ConstantBias::PerState(v)) if v.len() == n => inputs.constant_bias = v.clone(),
            Some(ConstantBias::PerState(v)) => {
                return Err(invalid("modulation.constant_bias", format!("expected {n} values, got {}", v.len())))
            }
        }
        if !(m.epsilon >= 0.0 && m.epsilon.is_finite()) {
            return Err(invalid("modulation.epsilon", "must be finite and non-negative"));
        }
        inputs.epsilon = m.epsilon;
        inputs.validate().map_err(|e| invalid("modulation", e.to_string()))?;

        let library = match (&self.motion, &handover) {
            (Some(motion), _) => Some(build_library(motion, &names, &system)?),
            (None, Some(h)) => {
                let ws = workspace(self.scenario.handover.as_ref().unwrap(), &names)?;
                Some(ws.library(&h.graph).map_err(|e| invalid("scenario.handover.points", e.to_string()))?)
            }
            (None, None) => None,
        };

        let mut events = Vec::with_capacity(self.scenario.events.len());
        let mut last_time = f64::NEG_INFINITY;
        for (k, ev) in self.scenario.events.iter().enumerate() {
            let field = format!("scenario.events[{k}]");
            let trigger = match &ev.at {
                TriggerSpec::Time(t) => {
                    if !t.is_finite() || *t < last_time {
                        return Err(invalid(field, "event times must be finite and sorted"));
                    }
                    last_time = *t;
                    Trigger::Time(*t)
                }
                TriggerSpec::Phase { from, to, above } => {
                    let (f, t) = (index(&field, from)?, index(&field, to)?);
                    if !edges.contains(&(f, t)) {
                        return Err(invalid(field, format!("no edge {from} -> {to}")));
                    }
                    Trigger::Phase { from: f, to: t, above: *above }
                }
            };
            if !ev.command.is_scriptable() {
                return Err(invalid(field, format!("`{}` cannot be scripted", ev.command.name())));
            }
            resolve_command(&ev.command, &names, handover.is_some()).map_err(|e| invalid(&field, e.detail))?;
            events.push(ScheduledEvent { trigger, command: ev.command.clone() });
        }

        if !(self.run.duration > 0.0 && self.run.duration.is_finite()) {
            return Err(invalid("run.duration", "must be positive"));
        }
        if self.output.decimation == 0 {
            return Err(invalid("output.decimation", "must be at least 1"));
        }
        let serve = self.serve.clone();
        if !(serve.publish_hz > 0.0 && serve.publish_hz <= 1000.0) {
            return Err(invalid("serve.publish_hz", "must be in (0, 1000]"));
        }
        if !(serve.realtime_factor > 0.0 && serve.realtime_factor.is_finite()) {
            return Err(invalid("serve.realtime_factor", "must be positive"));
        }

        Ok(Model {
            names,
            edges,
            system,
            inputs,
            initial,
            seed: m.seed,
            library,
            handover,
            events,
            duration: self.run.duration,
            decimation: self.output.decimation,
            output: self.output.path.clone(),
            serve,
        })
    }
}

fn state_names(sys: &SystemSection) -> Result<Vec<String>, ConfigError> {
    let names = match (&sys.states, sys.n) {
        (Some(s), Some(n)) if s.len() != n => {
            return Err(invalid("system.n", format!("{n} states declared but {} named", s.len())))
        }
        (Some(s), _) => s.clone(),
        (None, Some(n)) => (1..=n).map(|i| format!("s{i}")).collect(),
        (None, None) => return Err(invalid("system", "either `n` or `states` is required")),
    };
    if names.is_empty() {
        return Err(invalid("system.states", "at least one state is required"));
    }
    for (k, name) in names.iter().enumerate() {
        if name.is_empty() || names[..k].contains(name) {
            return Err(invalid(format!("system.states[{k}]"), format!("empty or duplicate name `{name}`")));
        }
    }
    Ok(names)
}

fn build_system(sys: &SystemSection, n: usize, t: Matrix<f64>) -> Result<SystemConfig<f64>, ConfigError> {
    let per_state = |field: &str, v: &Option<Vec<f64>>, default: Option<f64>| -> Result<Vec<f64>, ConfigError> {
        match (v, default) {
            (Some(v), _) if v.len() == n => Ok(v.clone()),
            (Some(v), _) => Err(invalid(field, format!("expected {n} values, got {}", v.len()))),
            (None, Some(d)) => Ok(vec![d; n]),
            (None, None) => Err(invalid(field, "required when `alpha0` is not given")),
        }
    };
    let alpha = match (sys.alpha0, &sys.alpha) {
        (Some(_), Some(_)) => return Err(invalid("system.alpha", "give either `alpha0` or `alpha`, not both")),
        (Some(a), None) => vec![a; n],
        (None, a) => per_state("system.alpha", a, None)?,
    };
    let beta = per_state("system.beta", &sys.beta, Some(1.0))?;
    let nu = per_state("system.nu", &sys.nu, Some(1.0))?;
    SystemConfig::new(alpha, beta, nu, sys.gamma, t, sys.dt).map_err(|e| invalid("system", e.to_string()))
}

fn resolve_handover(h: &HandoverSection, names: &[String], edges: &[(usize, usize)]) -> Result<Handover, ConfigError> {
    if names.len() != STATE_NAMES.len() || names.iter().zip(STATE_NAMES).any(|(a, b)| a != b) {
        return Err(invalid("system.states", format!("the handover scenario needs exactly {:?}", STATE_NAMES)));
    }
    let idx = |name: &str| {
        names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| invalid("scenario.handover.abort_edge", format!("unknown state `{name}`")))
    };
    let abort = (idx(&h.abort_edge[0])?, idx(&h.abort_edge[1])?);
    if abort.0 == abort.1 || edges.contains(&abort) {
        return Err(invalid("scenario.handover.abort_edge", "must be a new, non-looping edge"));
    }
    let graph = HandoverGraph { names: names.to_vec(), edges: edges.to_vec(), abort_edge: abort };
    Ok(Handover { graph, policy: h.policy.clone() })
}

fn workspace(h: &HandoverSection, names: &[String]) -> Result<Workspace, ConfigError> {
    let mut ws = Workspace::default();
    for (name, p) in &h.points {
        let i = names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| invalid(format!("scenario.handover.points.{name}"), "unknown state"))?;
        ws.points[i] = *p;
    }
    if let Some(v) = h.position_variance {
        ws.position_variance = v;
    }
    if let Some(v) = h.velocity_variance {
        ws.velocity_variance = v;
    }
    Ok(ws)
}

fn goal(field: &str, spec: &GoalSpec, dim: usize) -> Result<MotionGoal<f64>, ConfigError> {
    if spec.mean.len() != dim {
        return Err(invalid(field, format!("mean has {} entries, motion.dim is {dim}", spec.mean.len())));
    }
    let res = match (&spec.covariance, spec.variance) {
        (Some(c), None) => {
            if c.len() != dim || c.iter().any(|r| r.len() != dim) {
                return Err(invalid(field, format!("covariance must be {dim}x{dim}")));
            }
            MotionGoal::new(spec.mean.clone(), Matrix::from_rows(c))
        }
        (None, Some(v)) => MotionGoal::isotropic(spec.mean.clone(), v),
        _ => return Err(invalid(field, "give exactly one of `covariance` or `variance`")),
    };
    res.map_err(|e| invalid(field, e.to_string()))
}

fn build_library(m: &MotionSection, names: &[String], system: &SystemConfig<f64>) -> Result<MotionLibrary<f64>, ConfigError> {
    if m.dim == 0 {
        return Err(invalid("motion.dim", "must be positive"));
    }
    let idx = |field: &str, name: &str| {
        names.iter().position(|s| s == name).ok_or_else(|| invalid(field, format!("unknown state `{name}`")))
    };
    let mut lib = MotionLibrary::new(names.len(), m.dim).with_mode(m.mode);
    let mut goals = vec![None; names.len()];
    for (name, spec) in &m.goals {
        let field = format!("motion.goals.{name}");
        let i = idx(&field, name)?;
        let g = goal(&field, spec, m.dim)?;
        lib.set_goal(i, g.clone()).map_err(|e| invalid(&field, e.to_string()))?;
        goals[i] = Some(g);
    }
    if let Some(i) = goals.iter().position(Option::is_none) {
        return Err(invalid("motion.goals", format!("no goal for state `{}`", names[i])));
    }
    for (k, p) in m.primitives.iter().enumerate() {
        let field = format!("motion.primitives[{k}]");
        let (from, to) = (idx(&field, &p.from)?, idx(&field, &p.to)?);
        let mut knots = vec![Knot { phase: 0.0, goal: goals[from].clone().unwrap() }];
        for (v, kn) in p.via.iter().enumerate() {
            let kf = format!("{field}.via[{v}]");
            let spec = GoalSpec { mean: kn.mean.clone(), covariance: kn.covariance.clone(), variance: kn.variance };
            knots.push(Knot { phase: kn.phase, goal: goal(&kf, &spec, m.dim)? });
        }
        knots.push(Knot { phase: 1.0, goal: goals[to].clone().unwrap() });
        let prim = TransitionPrimitive::new(from, to, knots).map_err(|e| invalid(&field, e.to_string()))?;
        lib.add_primitive(prim).map_err(|e| invalid(&field, e.to_string()))?;
    }
    if m.fill_linear {
        lib.fill_linear_primitives(system.transitions()).map_err(|e| invalid("motion", e.to_string()))?;
    }
    Ok(lib)
}

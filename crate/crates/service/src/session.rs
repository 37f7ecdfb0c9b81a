//! The stepping owner of one simulation: applies commands at tick
//! boundaries, fires scripted events and produces trace records.

use crate::config::{Model, Trigger};
use crate::control::{resolve_command, Command, CommandError, Control};
use crate::trace::{Decimator, TraceRecord};
use phasta_core::observables::phases;
use phasta_core::scenario::{apply_cue, Cue};
use phasta_core::sim::Simulator;
use std::io;
use std::sync::Arc;
use thiserror::Error;

/// The integrator or the observables failed. `t` is the last time with a
/// finite, observable state.
#[derive(Debug, Error)]
#[error("numerical failure after t={t}: {source}")]
pub struct SimError {
    pub t: f64,
    #[source]
    pub source: phasta_core::Error,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scripted command rejected: {0}")]
    Command(#[from] CommandError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub struct Session {
    model: Arc<Model>,
    sim: Simulator<f64>,
    seed: u64,
    cue: Option<Cue>,
    fired: Vec<bool>,
    paused: bool,
    applied: Vec<String>,
    last: TraceRecord,
}

impl Session {
    pub fn new(model: Arc<Model>, seed: u64) -> Result<Self, SimError> {
        let sim = Self::fresh_sim(&model, seed)?;
        let mut s = Self {
            cue: model.handover.as_ref().map(|_| Cue::None),
            fired: vec![false; model.events.len()],
            paused: false,
            applied: Vec::new(),
            last: placeholder(),
            seed,
            sim,
            model,
        };
        s.last = s.observe()?;
        Ok(s)
    }

    fn fresh_sim(model: &Model, seed: u64) -> Result<Simulator<f64>, SimError> {
        Simulator::new(model.system.clone(), model.inputs.clone(), model.initial.clone(), seed)
            .map_err(|source| SimError { t: model.initial.t, source })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn simulator(&self) -> &Simulator<f64> {
        &self.sim
    }

    /// Latest record; tick 0 right after construction or reset.
    pub fn record(&self) -> &TraceRecord {
        &self.last
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn active_cue(&self) -> Option<Cue> {
        self.cue
    }

    /// Applies `cmd` now; it takes effect on the next tick.
    pub fn apply(&mut self, cmd: &Command) -> Result<(), CommandError> {
        let control = resolve_command(cmd, &self.model.names, self.model.handover.is_some())?;
        self.apply_control(control, cmd.name())
    }

    fn apply_control(&mut self, control: Control, label: &str) -> Result<(), CommandError> {
        let invalid = |e: phasta_core::Error| CommandError::new("invalid", e.to_string());
        let mut inputs = self.sim.inputs().clone();
        match control {
            Control::Greediness(pairs) => {
                for (i, v) in pairs {
                    inputs.greediness[i] = v;
                }
            }
            Control::Bias(entries) => {
                for (to, from, v) in entries {
                    inputs.bias[(to, from)] = v;
                }
            }
            Control::Speed(entries) => {
                for (to, from, v) in entries {
                    inputs.speed[(to, from)] = v;
                }
            }
            Control::Cue(cue) => {
                let h = self.model.handover.as_ref().ok_or_else(|| CommandError::new("no_scenario", "no handover scenario"))?;
                inputs = apply_cue(&h.policy, &h.graph, cue, &inputs).map_err(invalid)?;
                self.sim.set_inputs(inputs).map_err(invalid)?;
                self.cue = Some(cue);
                self.applied.push(label.to_string());
                return Ok(());
            }
            Control::Pause => {
                self.paused = true;
                return Ok(());
            }
            Control::Resume => {
                self.paused = false;
                return Ok(());
            }
            Control::Reset(seed) => {
                let seed = seed.unwrap_or(self.model.seed);
                self.sim = Self::fresh_sim(&self.model, seed).map_err(|e| CommandError::new("invalid", e.to_string()))?;
                self.seed = seed;
                self.cue = self.model.handover.as_ref().map(|_| Cue::None);
                self.fired.iter_mut().for_each(|f| *f = false);
                self.applied.clear();
                self.last = self.observe().map_err(|e| CommandError::new("divergence", e.to_string()))?;
                return Ok(());
            }
        }
        self.sim.set_inputs(inputs).map_err(invalid)?;
        self.applied.push(label.to_string());
        Ok(())
    }

    /// Fires scripted events that are due before the next tick.
    fn fire_due_events(&mut self) -> Result<(), CommandError> {
        let dt = self.sim.config().dt();
        let now = self.sim.time();
        for k in 0..self.model.events.len() {
            if self.fired[k] {
                continue;
            }
            let ev = &self.model.events[k];
            let due = match ev.trigger {
                // Same rule as the scenario runner: fire before the first
                // tick that starts at or after `t`.
                Trigger::Time(t) => t <= now + 0.5 * dt,
                Trigger::Phase { from, to, above } => {
                    let phi = phases(&self.sim.state().x);
                    phi.is_valid(to, from) && phi.get(to, from) >= above
                }
            };
            if due {
                self.fired[k] = true;
                let cmd = ev.command.clone();
                self.apply(&cmd)?;
            }
        }
        Ok(())
    }

    /// Advances one tick, regardless of pause (pausing is the caller's job).
    pub fn step(&mut self) -> Result<&TraceRecord, RunError> {
        self.fire_due_events()?;
        let before = self.sim.time();
        self.sim.tick().map_err(|source| SimError { t: before, source })?;
        self.last = self.observe()?;
        Ok(&self.last)
    }

    /// Re-observes the current state without ticking, so commands applied
    /// while paused show up in the next record.
    pub fn refresh(&mut self) -> Result<&TraceRecord, SimError> {
        self.last = self.observe()?;
        Ok(&self.last)
    }

    fn observe(&mut self) -> Result<TraceRecord, SimError> {
        let obs = self.sim.observe().map_err(|source| SimError { t: self.last.t, source })?;
        let command = match &self.model.library {
            Some(lib) => Some(lib.blend(&obs.lambda, &obs.phi).map_err(|source| SimError { t: obs.t, source })?),
            None => None,
        };
        Ok(TraceRecord::new(
            self.sim.ticks(),
            &obs,
            self.sim.config().transitions(),
            &self.sim.inputs().greediness,
            command.as_ref(),
            self.cue,
            std::mem::take(&mut self.applied),
        ))
    }
}

fn placeholder() -> TraceRecord {
    TraceRecord {
        tick: 0,
        t: 0.0,
        x: Vec::new(),
        dominant: 0,
        lambda: Vec::new(),
        phi: Vec::new(),
        eta: 1.0,
        delta_dot: Vec::new(),
        g: Vec::new(),
        command: None,
        cue: None,
        events: Vec::new(),
    }
}

/// Totals of a batch run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub ticks: u64,
    pub t_end: f64,
    pub records: usize,
    pub visited: Vec<usize>,
}

/// Runs `model` headless for its configured duration, passing every kept
/// record to `sink`. The first and the last tick are always kept.
pub fn run_batch(
    model: &Arc<Model>,
    seed: u64,
    mut sink: impl FnMut(&TraceRecord) -> io::Result<()>,
) -> Result<RunSummary, RunError> {
    let mut session = Session::new(model.clone(), seed)?;
    let mut decimator = Decimator::new(model.decimation);
    let steps = (model.duration / model.system.dt()).round() as u64;
    let mut records = 0;
    let mut visited: Vec<usize> = Vec::new();
    let mut visit = |r: &TraceRecord| {
        for w in r.lambda.iter().filter(|w| w.from == w.to && w.value > 0.5) {
            if visited.last() != Some(&w.from) {
                visited.push(w.from);
            }
        }
    };
    decimator.keep(session.record());
    visit(session.record());
    sink(session.record())?;
    records += 1;
    for k in 1..=steps {
        let r = session.step()?;
        visit(r);
        if decimator.keep(r) || k == steps {
            sink(r)?;
            records += 1;
        }
    }
    let r = session.record();
    Ok(RunSummary { ticks: r.tick, t_end: r.t, records, visited })
}

/// [`run_batch`] into memory.
pub fn collect(model: &Arc<Model>, seed: u64) -> Result<Vec<TraceRecord>, RunError> {
    let mut out = Vec::new();
    run_batch(model, seed, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

//! Trace records: one JSON object per kept tick, used verbatim for trace
//! files (newline-delimited) and live snapshots.

use phasta_core::blending::BlendedCommand;
use phasta_core::scenario::Cue;
use phasta_core::sim::Observation;
use phasta_core::Matrix;
use serde::{Deserialize, Serialize};
use std::io::{self, Write};

/// Λ entries at or below this are left out of a record.
pub const LAMBDA_CUTOFF: f64 = 1e-4;

/// Entry `(from -> to)` of an activation or phase matrix. `from == to` is a
/// state activation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub from: usize,
    pub to: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

impl From<&BlendedCommand<f64>> for CommandRecord {
    fn from(c: &BlendedCommand<f64>) -> Self {
        Self { mean: c.mean.clone(), covariance: c.covariance.to_rows() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    pub t: f64,
    pub x: Vec<f64>,
    /// Index of the largest component of `x`.
    pub dominant: usize,
    /// Sparse Λ: entries above [`LAMBDA_CUTOFF`].
    pub lambda: Vec<Weight>,
    /// Φ on existing transitions where it is defined.
    pub phi: Vec<Weight>,
    pub eta: f64,
    pub delta_dot: Vec<f64>,
    pub g: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cue: Option<Cue>,
    /// Commands applied right before this tick.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<String>,
}

impl TraceRecord {
    pub fn new(
        tick: u64,
        obs: &Observation<f64>,
        transitions: &Matrix<f64>,
        g: &[f64],
        command: Option<&BlendedCommand<f64>>,
        cue: Option<Cue>,
        events: Vec<String>,
    ) -> Self {
        let n = obs.x.len();
        let mut lambda = Vec::new();
        let mut phi = Vec::new();
        // Row-major over (from, to) so records are stable across runs.
        for from in 0..n {
            for to in 0..n {
                let v = obs.lambda[(to, from)];
                if v > LAMBDA_CUTOFF {
                    lambda.push(Weight { from, to, value: v });
                }
                if from != to && transitions[(to, from)] != 0.0 && obs.phi.is_valid(to, from) {
                    phi.push(Weight { from, to, value: obs.phi.get(to, from) });
                }
            }
        }
        Self {
            tick,
            t: obs.t,
            x: obs.x.clone(),
            dominant: obs.dominant_state(),
            lambda,
            phi,
            eta: obs.eta,
            delta_dot: obs.delta_dot.clone(),
            g: g.to_vec(),
            command: command.map(CommandRecord::from),
            cue,
            events,
        }
    }

    /// Λ entry `from -> to`, zero when it was cut off.
    pub fn lambda(&self, from: usize, to: usize) -> f64 {
        self.lambda.iter().find(|w| w.from == from && w.to == to).map_or(0.0, |w| w.value)
    }

    pub fn state_activation(&self, i: usize) -> f64 {
        self.lambda(i, i)
    }

    pub fn phase(&self, from: usize, to: usize) -> Option<f64> {
        self.phi.iter().find(|w| w.from == from && w.to == to).map(|w| w.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace records always serialize")
    }
}

/// Decides which ticks reach the trace.
#[derive(Clone, Debug)]
pub struct Decimator {
    every: u64,
    dominant: Option<usize>,
}

impl Decimator {
    pub fn new(every: u64) -> Self {
        Self { every: every.max(1), dominant: None }
    }

    /// Keeps every `every`-th tick, every tick with an applied command and
    /// every tick where the dominant state changed.
    pub fn keep(&mut self, r: &TraceRecord) -> bool {
        let changed = self.dominant.is_some_and(|d| d != r.dominant);
        self.dominant = Some(r.dominant);
        r.tick.is_multiple_of(self.every) || !r.events.is_empty() || changed
    }
}

/// Newline-delimited JSON writer.
pub struct TraceWriter<W: Write> {
    out: W,
    written: usize,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out, written: 0 }
    }

    pub fn write(&mut self, r: &TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, r)?;
        self.out.write_all(b"\n")?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Reads a newline-delimited trace.
pub fn read_trace(text: &str) -> serde_json::Result<Vec<TraceRecord>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

//! Measurements on trace records, shared by `reproduce` summaries and the
//! acceptance checks.

use crate::trace::TraceRecord;
use phasta_core::metrics::{collapse_runs, falling_crossing, rising_crossing, sweep_time};

/// Dominant state per record with repeats removed.
pub fn dominant_sequence(records: &[TraceRecord]) -> Vec<usize> {
    collapse_runs(records.iter().map(|r| r.dominant))
}

/// A maximal run of records sharing the same dominant state.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    pub state: usize,
    pub start: f64,
    pub end: f64,
    /// Largest state activation during the run.
    pub peak: f64,
    /// False for the runs cut by the start or the end of the trace.
    pub complete: bool,
}

pub fn pulses(records: &[TraceRecord]) -> Vec<Pulse> {
    let mut out: Vec<Pulse> = Vec::new();
    for r in records {
        let a = r.state_activation(r.dominant);
        match out.last_mut() {
            Some(p) if p.state == r.dominant => {
                p.end = r.t;
                p.peak = p.peak.max(a);
            }
            _ => out.push(Pulse { state: r.dominant, start: r.t, end: r.t, peak: a, complete: true }),
        }
    }
    if let Some(p) = out.first_mut() {
        p.complete = false;
    }
    if let Some(p) = out.last_mut() {
        p.complete = false;
    }
    out
}

/// Contiguous windows where Λ(from -> to) exceeds `level`, as record ranges.
pub fn activation_windows(records: &[TraceRecord], from: usize, to: usize, level: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, r) in records.iter().enumerate() {
        match (r.lambda(from, to) > level, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push(s..k);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..records.len());
    }
    out
}

/// Phase range and largest backwards step of `from -> to` within `window`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub min: f64,
    pub max: f64,
    pub largest_drop: f64,
    pub peak_activation: f64,
}

pub fn sweep(records: &[TraceRecord], from: usize, to: usize, window: std::ops::Range<usize>) -> Sweep {
    let mut s = Sweep { min: f64::INFINITY, max: f64::NEG_INFINITY, largest_drop: 0.0, peak_activation: 0.0 };
    let mut prev: Option<f64> = None;
    for r in &records[window] {
        s.peak_activation = s.peak_activation.max(r.lambda(from, to));
        if let Some(p) = r.phase(from, to) {
            s.min = s.min.min(p);
            s.max = s.max.max(p);
            if let Some(q) = prev {
                s.largest_drop = s.largest_drop.max(q - p);
            }
            prev = Some(p);
        }
    }
    s
}

fn phase_series(records: &[TraceRecord], from: usize, to: usize) -> Vec<(f64, f64)> {
    records.iter().filter_map(|r| r.phase(from, to).map(|p| (r.t, p))).collect()
}

/// Time for the phase of `from -> to` to rise from `lo` to `hi`.
pub fn traversal_time(records: &[TraceRecord], from: usize, to: usize, lo: f64, hi: f64) -> Option<f64> {
    sweep_time(&phase_series(records, from, to), lo, hi)
}

/// When a fork `pred -> {a, b}` is decided: the losing branch's activation
/// falls below 0.1 after its peak, or, if it never exceeded 0.1, the winner
/// rises above 0.1. Returns `(winner, time)`.
pub fn decision_time(records: &[TraceRecord], pred: usize, a: usize, b: usize) -> Option<(usize, f64)> {
    let last = records.last()?;
    let (winner, loser) = if last.x[a] > last.x[b] { (a, b) } else { (b, a) };
    let loser_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.lambda(pred, loser))).collect();
    let peak = (0..loser_series.len()).max_by(|&i, &j| loser_series[i].1.total_cmp(&loser_series[j].1))?;
    if loser_series[peak].1 <= 0.1 {
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.lambda(pred, winner))).collect();
        return rising_crossing(&series, 0.1).map(|t| (winner, t));
    }
    falling_crossing(&loser_series[peak..], 0.1).map(|t| (winner, t))
}

/// First record carrying an applied command.
pub fn first_event(records: &[TraceRecord]) -> Option<usize> {
    records.iter().position(|r| !r.events.is_empty())
}

/// Most negative phase rate of `from -> to` within `span` seconds after
/// record `start` (1/s).
pub fn steepest_phase_drop(records: &[TraceRecord], from: usize, to: usize, start: usize, span: f64) -> f64 {
    let t0 = records[start].t;
    let series: Vec<(f64, f64)> = records[start..]
        .iter()
        .take_while(|r| r.t <= t0 + span)
        .filter_map(|r| r.phase(from, to).map(|p| (r.t, p)))
        .collect();
    series.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).fold(0.0, f64::min)
}

/// Final dominant state and its activation.
pub fn final_state(records: &[TraceRecord]) -> Option<(usize, f64)> {
    records.last().map(|r| (r.dominant, r.state_activation(r.dominant)))
}

/// Largest state activation of `state` over the records.
pub fn max_activation(records: &[TraceRecord], state: usize) -> f64 {
    records.iter().map(|r| r.state_activation(state)).fold(0.0, f64::max)
}

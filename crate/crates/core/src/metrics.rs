//! Measurements on sampled time series.

/// First time `values` crosses `level` upwards (from below to at-or-above),
/// linearly interpolated between samples. `samples` are `(t, value)` pairs in
/// increasing time.
pub fn rising_crossing(samples: &[(f64, f64)], level: f64) -> Option<f64> {
    crossing(samples, level, |a, b| a < level && b >= level)
}

/// First downward crossing of `level`, linearly interpolated.
pub fn falling_crossing(samples: &[(f64, f64)], level: f64) -> Option<f64> {
    crossing(samples, level, |a, b| a > level && b <= level)
}

fn crossing(samples: &[(f64, f64)], level: f64, hit: impl Fn(f64, f64) -> bool) -> Option<f64> {
    samples.windows(2).find(|w| hit(w[0].1, w[1].1)).map(|w| {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        t0 + (level - v0) / (v1 - v0) * (t1 - t0)
    })
}

/// Time taken for `values` to rise from `from` to `to`.
pub fn sweep_time(samples: &[(f64, f64)], from: f64, to: f64) -> Option<f64> {
    let start = rising_crossing(samples, from)?;
    let rest: Vec<_> = samples.iter().copied().filter(|s| s.0 >= start).collect();
    Some(rising_crossing(&rest, to)? - start)
}

/// Sequence of dominant indices with consecutive repeats removed.
pub fn collapse_runs(indices: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in indices {
        if out.last() != Some(&i) {
            out.push(i);
        }
    }
    out
}

/// Sequence of states whose activation exceeds `threshold`, in the order they
/// do so, consecutive repeats removed. `activations` yields one state
/// activation vector per sample.
pub fn visit_sequence<'a>(activations: impl IntoIterator<Item = &'a [f64]>, threshold: f64) -> Vec<usize> {
    collapse_runs(
        activations
            .into_iter()
            .filter_map(|lam| lam.iter().position(|&v| v > threshold)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_interpolates() {
        let s = [(0.0, 0.0), (1.0, 0.4), (2.0, 0.8), (3.0, 0.2)];
        assert!((rising_crossing(&s, 0.5).unwrap() - 1.25).abs() < 1e-12);
        assert!((falling_crossing(&s, 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!(rising_crossing(&s, 0.9).is_none());
        assert!((sweep_time(&s, 0.2, 0.6).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn runs_collapse() {
        assert_eq!(collapse_runs([0, 0, 1, 1, 2, 0, 0]), vec![0, 1, 2, 0]);
        let a = [vec![0.9, 0.0], vec![0.3, 0.3], vec![0.0, 0.95], vec![0.0, 0.97]];
        assert_eq!(visit_sequence(a.iter().map(|v| v.as_slice()), 0.5), vec![0, 1]);
    }
}

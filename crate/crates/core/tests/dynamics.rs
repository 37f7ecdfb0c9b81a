use phasta_core::dynamics::{
    cycle_transitions, derivative, jacobian_at_saddle, rk4_step, transitions_from_edges, StateVector, SystemConfig,
};
use phasta_core::metrics::{collapse_runs, rising_crossing};
use phasta_core::modulation::ModulationInputs;
use phasta_core::sim::{Observation, Simulator};
use phasta_core::Matrix;
use proptest::prelude::*;

fn cycle_run(alpha0: f64, bias: f64, dt: f64, duration: f64) -> Vec<Observation<f64>> {
    let cfg = SystemConfig::<f64>::canonical(alpha0, cycle_transitions(3), dt).unwrap();
    let mut inputs = ModulationInputs::neutral(3);
    inputs.constant_bias = vec![bias; 3];
    let mut sim = Simulator::new(cfg, inputs, StateVector::at_saddle(3, 0), 0).unwrap();
    let steps = (duration / dt).round() as usize;
    (0..steps)
        .map(|_| {
            sim.tick().unwrap();
            sim.observe().unwrap()
        })
        .collect()
}

fn phase_series(run: &[Observation<f64>], j: usize, i: usize) -> Vec<(f64, f64)> {
    run.iter().map(|o| (o.t, o.phi.get(j, i))).collect()
}

#[test]
fn three_state_cycle_visits_states_in_order() {
    let run = cycle_run(10.0, 5e-5, 1e-3, 20.0);
    let seq = collapse_runs(run.iter().map(|o| o.dominant_state()));
    assert!(seq.len() >= 9, "{seq:?}");
    for (k, s) in seq.iter().enumerate() {
        assert_eq!(*s, k % 3, "{seq:?}");
    }
}

#[test]
fn step_halving_preserves_transition_midpoint() {
    let coarse = rising_crossing(&phase_series(&cycle_run(10.0, 5e-5, 1e-3, 2.0), 1, 0), 0.5).unwrap();
    let fine = rising_crossing(&phase_series(&cycle_run(10.0, 5e-5, 1e-4, 2.0), 1, 0), 0.5).unwrap();
    assert!((coarse - fine).abs() / fine < 0.01, "{coarse} vs {fine}");
}

/// Time at which the phase of 0 -> 1 reaches 0.5. The bracketing step is
/// re-integrated with tiny steps so the estimate carries only the error of
/// the coarse integration, not of interpolating between samples.
fn located_midpoint(dt: f64) -> f64 {
    let cfg = SystemConfig::<f64>::canonical(10.0, cycle_transitions(3), dt).unwrap();
    let zero = Matrix::zeros(3, 3);
    let bias = [5e-5; 3];
    let f = |x: &[f64]| derivative(x, &cfg, &zero, 1.0, &bias);
    let phase = |x: &[f64]| x[1] / (x[0] + x[1]);
    let mut x = StateVector::<f64>::at_saddle(3, 0).x;
    let mut k = 0u64;
    loop {
        let next = rk4_step(&x, dt, f);
        if phase(&next) >= 0.5 {
            break;
        }
        x = next;
        k += 1;
    }
    let fine = dt / 1000.0;
    let mut t = k as f64 * dt;
    loop {
        let next = rk4_step(&x, fine, f);
        if phase(&next) >= 0.5 {
            let (p0, p1) = (phase(&x), phase(&next));
            return t + fine * (0.5 - p0) / (p1 - p0);
        }
        x = next;
        t += fine;
    }
}

#[test]
fn halving_dt_shrinks_error_at_least_fourfold() {
    let reference = located_midpoint(1.25e-4);
    let errors: Vec<f64> = [4e-3, 2e-3, 1e-3].iter().map(|&dt| (located_midpoint(dt) - reference).abs()).collect();
    assert!(errors[0] / errors[1] >= 4.0, "{errors:?}");
    assert!(errors[1] / errors[2] >= 4.0, "{errors:?}");
}

#[test]
fn norm_stays_confined_for_100_seconds() {
    for bias in [0.0, 1e-4, 1e-2] {
        let cfg = SystemConfig::<f64>::canonical(10.0, cycle_transitions(3), 1e-3).unwrap();
        let mut inputs = ModulationInputs::neutral(3);
        inputs.constant_bias = vec![bias, bias * 0.5, bias];
        let mut sim = Simulator::new(cfg, inputs, StateVector::at_saddle(3, 0), 0).unwrap();
        for _ in 0..100_000 {
            let n = sim.tick().unwrap().norm();
            assert!((0.5..=1.5).contains(&n), "bias {bias}: norm {n} at {}", sim.time());
        }
    }
}

#[test]
fn finite_difference_jacobian_matches() {
    let cfg = SystemConfig::<f64>::canonical(10.0, cycle_transitions(3), 1e-3).unwrap();
    let zero = Matrix::zeros(3, 3);
    for i in 0..3 {
        let analytic = jacobian_at_saddle(&cfg, i);
        let mut x = vec![0.0; 3];
        x[i] = 1.0;
        let h = 1e-6;
        for c in 0..3 {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let fp = derivative(&xp, &cfg, &zero, 1.0, &[0.0; 3]);
            let fm = derivative(&xm, &cfg, &zero, 1.0, &[0.0; 3]);
            for r in 0..3 {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                assert!((fd - analytic[(r, c)]).abs() < 1e-6, "saddle {i} entry ({r},{c})");
            }
        }
    }
}

fn random_transitions(n: usize, seed: u64) -> Matrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, n, |j, i| if i != j && rng.random_bool(0.4) { 1.0 } else { 0.0 })
}

#[test]
fn canonical_saddles_are_fixed_points() {
    for n in [3, 5] {
        for (k, t) in [cycle_transitions(n), random_transitions(n, 11), Matrix::zeros(n, n)].into_iter().enumerate() {
            let cfg = SystemConfig::<f64>::canonical(10.0, t, 1e-3).unwrap();
            for i in 0..n {
                let mut x = vec![0.0; n];
                x[i] = 1.0;
                let f = derivative(&x, &cfg, &Matrix::zeros(n, n), 1.0, &vec![0.0; n]);
                assert!(f.iter().all(|v| v.abs() < 1e-12), "n={n} T#{k} saddle {i}: {f:?}");
            }
        }
    }
}

#[test]
fn saddle_growth_rates_follow_transitions() {
    let alpha0 = 7.5;
    for seed in 0..5 {
        let t = random_transitions(5, seed);
        let cfg = SystemConfig::<f64>::canonical(alpha0, t.clone(), 1e-3).unwrap();
        for i in 0..5 {
            let jac = jacobian_at_saddle(&cfg, i);
            for j in (0..5).filter(|&j| j != i) {
                if t[(j, i)] == 1.0 {
                    assert!((jac[(j, j)] - alpha0).abs() < 1e-12);
                } else {
                    assert!(jac[(j, j)] < 0.0);
                }
            }
        }
    }
}

#[test]
fn removing_all_exits_parks_the_state() {
    let t = transitions_from_edges(3, &[(1, 2), (2, 0)]).unwrap();
    let cfg = SystemConfig::<f64>::canonical(10.0, t, 1e-3).unwrap();
    let mut sim = Simulator::new(cfg, ModulationInputs::neutral(3), StateVector::at_saddle(3, 0), 0).unwrap();
    for _ in 0..20_000 {
        sim.tick().unwrap();
    }
    let o = sim.observe().unwrap();
    assert!(o.state_activation(0) > 1.0 - 1e-9);
}

#[test]
fn deterministic_runs_are_bit_identical() {
    let run = || {
        let cfg = SystemConfig::<f64>::canonical(10.0, cycle_transitions(4), 1e-3).unwrap();
        let mut inputs = ModulationInputs::neutral(4);
        inputs.bias[(1, 0)] = 0.3;
        inputs.speed[(2, 1)] = 1.5;
        let mut sim = Simulator::new(cfg, inputs, StateVector::at_saddle(4, 0), 0).unwrap();
        let mut out = Vec::new();
        for k in 0..6000 {
            if k == 2500 {
                sim.set_greediness(vec![1.0, 2.0, 0.5, 1.0]).unwrap();
            }
            sim.tick().unwrap();
            out.push(sim.observe().unwrap());
        }
        out
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(p, q)| p.x.iter().zip(&q.x).all(|(u, v)| u.to_bits() == v.to_bits())));
    assert_eq!(a, b);
}

#[test]
fn phases_advance_monotonically_along_active_transitions() {
    let run = cycle_run(10.0, 5e-5, 1e-3, 10.0);
    for w in run.windows(2) {
        for i in 0..3 {
            let j = (i + 1) % 3;
            if w[0].lambda[(j, i)] > 0.1 && w[1].lambda[(j, i)] > 0.1 {
                let d = w[1].phi.get(j, i) - w[0].phi.get(j, i);
                assert!(d >= -1e-6, "phase {i}->{j} fell by {d} at {}", w[1].t);
            }
        }
    }
}

#[test]
fn activation_peaks_at_half_phase() {
    // On the exact channel (unit circle in the (i, j) plane) the peak is 1 at phase 0.5.
    let t = cycle_transitions::<f64>(3);
    let mut best = (0.0, 0.0);
    for k in 0..=20_000 {
        let theta = std::f64::consts::FRAC_PI_2 * k as f64 / 20_000.0;
        let x = [theta.cos(), theta.sin(), 0.0];
        let lam = phasta_core::observables::transition_activations(&x, &t).unwrap()[(1, 0)];
        if lam > best.0 {
            best = (lam, phasta_core::observables::phases(&x).get(1, 0));
        }
    }
    assert!((best.0 - 1.0).abs() < 1e-6);
    assert!((best.1 - 0.5).abs() < 1e-4);

    // Along a simulated run the sampled peak sits within one tick of phase 0.5.
    let run = cycle_run(10.0, 0.0, 1e-3, 4.0);
    let k = (0..run.len()).max_by(|&a, &b| run[a].lambda[(1, 0)].total_cmp(&run[b].lambda[(1, 0)])).unwrap();
    let step = (run[k + 1].phi.get(1, 0) - run[k - 1].phi.get(1, 0)).abs();
    assert!((run[k].phi.get(1, 0) - 0.5).abs() <= step);
    assert!(run[k].lambda[(1, 0)] > 1.0 - 1e-4);
}

#[test]
fn partition_of_unity_along_trajectory() {
    let run = cycle_run(10.0, 5e-5, 1e-3, 6.0);
    for o in &run {
        assert!((o.lambda.sum() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn saddles_are_mutually_exclusive() {
    let run = cycle_run(10.0, 0.0, 1e-3, 10.0);
    let mut checked = 0;
    for o in &run {
        if let Some(i) = (0..3).find(|&i| o.state_activation(i) > 0.99) {
            checked += 1;
            for r in 0..3 {
                for c in 0..3 {
                    if (r, c) != (i, i) {
                        assert!(o.lambda[(r, c)] < 0.01);
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_point_holds_for_any_rate(alpha0 in 0.1f64..50.0, n in 2usize..7, i in 0usize..7) {
        let i = i % n;
        let cfg = SystemConfig::<f64>::canonical(alpha0, cycle_transitions(n), 1e-3).unwrap();
        let mut x = vec![0.0; n];
        x[i] = 1.0;
        let f = derivative(&x, &cfg, &Matrix::zeros(n, n), 1.0, &vec![0.0; n]);
        prop_assert!(f.iter().all(|v| v.abs() <= 1e-12 * alpha0));
    }

    #[test]
    fn rebuilt_rho_is_bit_identical(a in proptest::collection::vec(0.1f64..20.0, 4), b in proptest::collection::vec(0.1f64..3.0, 4)) {
        let t = cycle_transitions(4);
        let c1 = SystemConfig::<f64>::new(a.clone(), b.clone(), vec![1.0; 4], 2.0, t.clone(), 1e-3).unwrap();
        let c2 = SystemConfig::<f64>::new(a, b, vec![1.0; 4], 2.0, t, 1e-3).unwrap();
        prop_assert_eq!(c1.rho_o(), c2.rho_o());
        prop_assert_eq!(c1.rho_delta(), c2.rho_delta());
    }

    #[test]
    fn floor_is_never_crossed(eps in 0.0f64..1e-2, seed in 0u64..1000) {
        let cfg = SystemConfig::<f64>::canonical(10.0, cycle_transitions(3), 1e-3).unwrap();
        let mut inputs = ModulationInputs::neutral(3);
        inputs.epsilon = eps;
        let mut sim = Simulator::new(cfg, inputs, StateVector::at_saddle(3, 0), seed).unwrap();
        for _ in 0..500 {
            let s = sim.tick().unwrap();
            prop_assert!(s.x.iter().all(|&v| v >= 1e-10 && v.is_finite()));
        }
    }
}

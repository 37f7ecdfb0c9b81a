//! Single-owner stepping of a modulated system.
//!
//! Within a step the speed factor and resolved bias are re-evaluated at every
//! Runge-Kutta stage, so `η(x)` and `δ̇(x)` are treated as the state feedback
//! they are rather than held over the step.

use crate::dynamics::{advance, NoiseSource, StateVector, SystemConfig, VectorField};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::modulation::{build_greediness, resolve_bias, speed_factor, GreedinessMatrices, ModulationInputs};
use crate::observables::{activations, phases, Phases};
use crate::scalar::Scalar;

/// Everything observable at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation<S> {
    pub t: f64,
    pub x: Vec<S>,
    pub lambda: Matrix<S>,
    pub phi: Phases<S>,
    pub eta: S,
    pub delta_dot: Vec<S>,
}

impl<S: Scalar> Observation<S> {
    pub fn state_activation(&self, i: usize) -> S {
        self.lambda[(i, i)]
    }

    /// Index of the largest state component. Unlike the state activations,
    /// which all vanish mid-transition, this is never ambiguous.
    pub fn dominant_state(&self) -> usize {
        (0..self.x.len()).fold(0, |best, i| if self.x[i] > self.x[best] { i } else { best })
    }
}

#[derive(Clone, Debug)]
pub struct Simulator<S> {
    cfg: SystemConfig<S>,
    inputs: ModulationInputs<S>,
    greediness: GreedinessMatrices<S>,
    field: VectorField<S>,
    initial: StateVector<S>,
    state: StateVector<S>,
    noise: NoiseSource<S>,
    ticks: u64,
}

impl<S: Scalar> Simulator<S> {
    pub fn new(cfg: SystemConfig<S>, inputs: ModulationInputs<S>, initial: StateVector<S>, seed: u64) -> Result<Self> {
        if initial.x.len() != cfg.n() {
            return Err(Error::ShapeMismatch(format!(
                "initial state has {} components, system has {}",
                initial.x.len(),
                cfg.n()
            )));
        }
        let n = cfg.n();
        let greediness = build_greediness(&vec![S::one(); n], cfg.transitions());
        let field = VectorField::new(&cfg, &greediness.combined);
        let mut sim = Self {
            noise: NoiseSource::new(inputs.epsilon, seed),
            cfg,
            inputs: ModulationInputs::neutral(n),
            greediness,
            field,
            state: initial.clone(),
            initial,
            ticks: 0,
        };
        sim.set_inputs(inputs)?;
        Ok(sim)
    }

    pub fn config(&self) -> &SystemConfig<S> {
        &self.cfg
    }

    pub fn inputs(&self) -> &ModulationInputs<S> {
        &self.inputs
    }

    pub fn greediness(&self) -> &GreedinessMatrices<S> {
        &self.greediness
    }

    pub fn state(&self) -> &StateVector<S> {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    /// Ticks since construction or the last reset.
    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn noise(&self) -> &NoiseSource<S> {
        &self.noise
    }

    /// Replaces all inputs at once. A pending transition edit is applied and consumed.
    pub fn set_inputs(&mut self, mut inputs: ModulationInputs<S>) -> Result<()> {
        if inputs.n() != self.cfg.n() {
            return Err(Error::ShapeMismatch(format!(
                "inputs sized for {} states, system has {}",
                inputs.n(),
                self.cfg.n()
            )));
        }
        inputs.validate()?;
        if let Some(t) = inputs.transition_edit.take() {
            self.cfg = crate::modulation::apply_transition_edit(&self.cfg, t)?;
        }
        self.noise.set_epsilon(inputs.epsilon);
        self.inputs = inputs;
        self.rebuild_field();
        Ok(())
    }

    pub fn set_greediness(&mut self, g: Vec<S>) -> Result<()> {
        let mut next = self.inputs.clone();
        next.greediness = g;
        self.set_inputs(next)
    }

    pub fn set_bias(&mut self, bias: Matrix<S>) -> Result<()> {
        let mut next = self.inputs.clone();
        next.bias = bias;
        self.set_inputs(next)
    }

    pub fn set_speed(&mut self, speed: Matrix<S>) -> Result<()> {
        let mut next = self.inputs.clone();
        next.speed = speed;
        self.set_inputs(next)
    }

    pub fn set_constant_bias(&mut self, v: Vec<S>) -> Result<()> {
        let mut next = self.inputs.clone();
        next.constant_bias = v;
        self.set_inputs(next)
    }

    pub fn edit_transitions(&mut self, t: Matrix<S>) -> Result<()> {
        let mut next = self.inputs.clone();
        next.transition_edit = Some(t);
        self.set_inputs(next)
    }

    /// Back to the initial state and time zero with a fresh noise seed.
    pub fn reset(&mut self, seed: u64) {
        self.state = self.initial.clone();
        self.ticks = 0;
        self.noise = NoiseSource::new(self.inputs.epsilon, seed);
    }

    fn rebuild_field(&mut self) {
        self.greediness = build_greediness(&self.inputs.greediness, self.cfg.transitions());
        self.field = VectorField::new(&self.cfg, &self.greediness.combined);
    }

    pub fn tick(&mut self) -> Result<&StateVector<S>> {
        let dt = self.cfg.dt();
        let Self { cfg, inputs, field, state, noise, initial, ticks, .. } = self;
        let transitions = cfg.transitions();
        let mut next = advance(state, dt, noise, |x| {
            let (eta, bias) = modulation_at(transitions, inputs, x);
            field.eval(x, eta, &bias)
        })?;
        // Time from the tick count so long runs do not accumulate rounding.
        *ticks += 1;
        next.t = initial.t + *ticks as f64 * dt.as_f64();
        *state = next;
        Ok(&self.state)
    }

    pub fn observe(&self) -> Result<Observation<S>> {
        let x = self.state.x.clone();
        let lambda = activations(&x, self.cfg.transitions())?;
        let (eta, delta_dot) = modulation_at(self.cfg.transitions(), &self.inputs, &x);
        Ok(Observation {
            t: self.state.t,
            phi: phases(&x),
            lambda,
            eta,
            delta_dot,
            x,
        })
    }
}

fn is_nonzero<S: Scalar>(m: &Matrix<S>) -> bool {
    m.as_slice().iter().any(|&v| v != S::zero())
}

/// `η` and resolved `δ̇` (constant part included) at `x`.
fn modulation_at<S: Scalar>(transitions: &Matrix<S>, inputs: &ModulationInputs<S>, x: &[S]) -> (S, Vec<S>) {
    let mut bias = inputs.constant_bias.clone();
    if !is_nonzero(&inputs.bias) && !is_nonzero(&inputs.speed) {
        return (S::one(), bias);
    }
    match activations(x, transitions) {
        Ok(lambda) => {
            for (b, r) in bias.iter_mut().zip(resolve_bias(&lambda, &inputs.bias, x)) {
                *b += r;
            }
            (speed_factor(&lambda, &inputs.speed), bias)
        }
        Err(_) => (S::one(), bias),
    }
}

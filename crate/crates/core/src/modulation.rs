//! Turning user-facing inputs (bias `B`, speed exponents `A`, greediness `g`,
//! transition edits) into the `δ̇`, `η` and `G` consumed by the dynamics.

use crate::dynamics::{validate_transitions, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Sanity bound on the magnitude of any speed exponent in `A`.
pub const SPEED_EXPONENT_BOUND: f64 = 10.0;

/// Saturation of the forward greediness `G⃗`. `0` leaves a transition
/// untouched, `-0.5` halts it and `-1` fully reverses it.
pub const FORWARD_GREEDINESS_FLOOR: f64 = -1.0;

/// Inputs that can be changed while the system runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationInputs<S> {
    /// `B[(j, i)]`: bias of transition `i -> j` (1/s). Negative values avoid it.
    pub bias: Matrix<S>,
    /// `A[(j, i)]`: log2 speed factor for the region of transition `i -> j`
    /// (diagonal: state regions).
    pub speed: Matrix<S>,
    /// Greediness per successor state; 1 is nominal.
    pub greediness: Vec<S>,
    pub epsilon: S,
    /// Constant bias vector added to the resolved `δ̇`.
    pub constant_bias: Vec<S>,
    /// Replacement transition matrix, applied once by the stepping owner.
    pub transition_edit: Option<Matrix<S>>,
}

impl<S: Scalar> ModulationInputs<S> {
    /// Unmodified behavior: `B = 0`, `A = 0`, `g = 1`, `ε = 0`.
    pub fn neutral(n: usize) -> Self {
        Self {
            bias: Matrix::zeros(n, n),
            speed: Matrix::zeros(n, n),
            greediness: vec![S::one(); n],
            epsilon: S::zero(),
            constant_bias: vec![S::zero(); n],
            transition_edit: None,
        }
    }

    pub fn n(&self) -> usize {
        self.greediness.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        for (name, m) in [("bias", &self.bias), ("speed", &self.speed)] {
            if m.rows() != n || m.cols() != n {
                return Err(Error::ShapeMismatch(format!(
                    "{name} matrix is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        if self.constant_bias.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "constant bias has {} entries, expected {n}",
                self.constant_bias.len()
            )));
        }
        if self.bias.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("bias entries must be finite".into()));
        }
        let bound = S::of(SPEED_EXPONENT_BOUND);
        if let Some(bad) = self
            .speed
            .as_slice()
            .iter()
            .find(|v| !v.is_finite() || v.abs() > bound)
        {
            return Err(Error::ParameterDomain(format!(
                "speed exponent {bad} outside [-{SPEED_EXPONENT_BOUND}, {SPEED_EXPONENT_BOUND}]"
            )));
        }
        if self.greediness.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("greediness must be finite".into()));
        }
        if !(self.epsilon >= S::zero()) || !self.epsilon.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "noise amplitude {} must be non-negative",
                self.epsilon
            )));
        }
        if let Some(t) = &self.transition_edit {
            validate_transitions(t, n)?;
        }
        Ok(())
    }
}

/// `δ̇ = (Λ ∘ B) · x`.
pub fn resolve_bias<S: Scalar>(lambda: &Matrix<S>, bias: &Matrix<S>, x: &[S]) -> Vec<S> {
    lambda.hadamard(bias).mat_vec(x)
}

/// `η = 2^(Σ Λ∘A)`.
pub fn speed_factor<S: Scalar>(lambda: &Matrix<S>, speed: &Matrix<S>) -> S {
    S::of(2.0).powf(lambda.hadamard(speed).sum())
}

/// Forward, competitive and combined greediness matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedinessMatrices<S> {
    /// `G⃗[j][i] = clamp((g_j − 1)/2, FORWARD_GREEDINESS_FLOOR, 0)`.
    pub forward: Matrix<S>,
    /// `G↔[j][i] = 1.5·(g_j − 1)/2 − 0.5·(g_i − 1)/2`.
    pub competitive: Matrix<S>,
    pub combined: Matrix<S>,
}

/// Builds `G` from a greediness vector.
///
/// ```text
/// G = [T∘G⃗ − G⃗ᵀ∘Tᵀ] − [TTᵀ∘(1−I)] ∘ G↔ᵀ
/// ```
///
/// The competitive term enters transposed: entry `(j, i)` of the coupling
/// matrix is the effect of `x_i` on `ẋ_j`, and a greedy successor `j` must
/// suppress its competitor `i`, so it is `G↔[i][j]` that lands at `(j, i)`.
pub fn build_greediness<S: Scalar>(g: &[S], transitions: &Matrix<S>) -> GreedinessMatrices<S> {
    let n = g.len();
    let half = S::of(0.5);
    let excess: Vec<S> = g.iter().map(|&v| (v - S::one()) * half).collect();
    let floor = S::of(FORWARD_GREEDINESS_FLOOR);
    let forward = Matrix::from_fn(n, n, |j, _| excess[j].max(floor).min(S::zero()));
    let competitive = Matrix::from_fn(n, n, |j, i| S::of(1.5) * excess[j] - half * excess[i]);

    let t = transitions;
    let tt = t.transpose();
    let directed = t.hadamard(&forward).sub(&forward.transpose().hadamard(&tt));
    let siblings = t.mat_mul(&tt);
    let combined = Matrix::from_fn(n, n, |j, i| {
        let shared = if j == i { S::zero() } else { siblings[(j, i)] };
        directed[(j, i)] - shared * competitive[(i, j)]
    });
    GreedinessMatrices {
        forward,
        competitive,
        combined,
    }
}

/// Replaces `T`; `ρ₀` and `ρΔ` are unaffected.
pub fn apply_transition_edit<S: Scalar>(cfg: &SystemConfig<S>, transitions: Matrix<S>) -> Result<SystemConfig<S>> {
    let mut next = cfg.clone();
    next.replace_transitions(transitions)?;
    Ok(next)
}

//! Activations and phases: an algebraic partition of the state space into
//! per-state and per-transition regions.
//!
//! Norm conventions: `|x|` is the L1 norm and `|x²|` the sum of squares.
//! All formulas take absolute values of the coordinates first, so small
//! negative excursions cannot produce negative weights.

use crate::error::{Error, Result};
use crate::linalg::{l1_norm, l2_norm, Matrix};
use crate::scalar::Scalar;

/// Below this raw total the combined activation matrix is rejected.
pub const MIN_ACTIVATION_SUM: f64 = 1e-6;

/// Phases with `|x_i| + |x_j|` below this are reported invalid.
pub const PHASE_SUPPORT_EPS: f64 = 1e-12;

/// Per-transition activation `Λ^trans`, masked by `T`.
///
/// `Λ[j][i] = 16·|x_j|·|x_i|·Σx_k² / ((|x_i|+|x_j|)⁴ + (Σ|x_k|)⁴)`. The value is
/// invariant to positive scaling of `x` and reaches exactly 1 at the channel
/// midpoint `x_i = x_j` when no other coordinate is active.
pub fn transition_activations<S: Scalar>(x: &[S], transitions: &Matrix<S>) -> Result<Matrix<S>> {
    let n = x.len();
    if transitions.rows() != n || transitions.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has {n} components, transition matrix is {}x{}",
            transitions.rows(),
            transitions.cols()
        )));
    }
    let ax: Vec<S> = x.iter().map(|v| v.abs()).collect();
    let l1 = l1_norm(&ax);
    if !(l1 > S::zero()) {
        return Err(Error::UndefinedActivation);
    }
    let sq: S = ax.iter().map(|&v| v * v).sum();
    let l1_4 = l1.powi(4);
    let sixteen = S::of(16.0);
    Ok(Matrix::from_fn(n, n, |j, i| {
        if transitions[(j, i)] == S::zero() {
            return S::zero();
        }
        let num = sixteen * ax[j] * ax[i] * sq;
        let den = (ax[i] + ax[j]).powi(4) + l1_4;
        num / den * transitions[(j, i)]
    }))
}

/// State activations from the residual of the transition activations.
///
/// `λ_i = x̂_i² · (1 − ΣΛ^trans)` with `x̂` the state normalized to unit L2
/// norm; negative residuals clamp to 0.
pub fn state_activations<S: Scalar>(x: &[S], transition_act: &Matrix<S>) -> Result<Vec<S>> {
    let norm = l2_norm(x);
    if !(norm > S::zero()) {
        return Err(Error::UndefinedActivation);
    }
    let residual = S::one() - transition_act.sum();
    Ok(x
        .iter()
        .map(|&v| {
            let h = v.abs() / norm;
            (h * h * residual).max(S::zero())
        })
        .collect())
}

/// Merges transition activations (off-diagonal) and state activations
/// (diagonal) into one matrix summing to 1.
pub fn combine<S: Scalar>(transition_act: &Matrix<S>, state_act: &[S]) -> Result<Matrix<S>> {
    let n = state_act.len();
    if transition_act.rows() != n || transition_act.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} state activations vs {}x{} transition activations",
            n,
            transition_act.rows(),
            transition_act.cols()
        )));
    }
    let mut lambda = Matrix::from_fn(n, n, |j, i| if j == i { state_act[i] } else { transition_act[(j, i)] });
    let raw = lambda.sum();
    if !(raw >= S::of(MIN_ACTIVATION_SUM)) {
        return Err(Error::DegenerateActivation(raw.as_f64()));
    }
    if raw != S::one() {
        lambda = lambda.map(|v| v / raw);
    }
    Ok(lambda)
}

/// Full activation matrix `Λ` for state `x`.
pub fn activations<S: Scalar>(x: &[S], transitions: &Matrix<S>) -> Result<Matrix<S>> {
    let trans = transition_activations(x, transitions)?;
    let states = state_activations(x, &trans)?;
    combine(&trans, &states)
}

/// Phase matrix `Φ[j][i] = |x_j| / (|x_i| + |x_j|)` with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Phases<S> {
    values: Matrix<S>,
    valid: Vec<bool>,
}

impl<S: Scalar> Phases<S> {
    pub fn values(&self) -> &Matrix<S> {
        &self.values
    }

    pub fn get(&self, j: usize, i: usize) -> S {
        self.values[(j, i)]
    }

    /// False when `|x_i| + |x_j|` is too small for the phase to carry meaning.
    pub fn is_valid(&self, j: usize, i: usize) -> bool {
        self.valid[j * self.values.cols() + i]
    }
}

pub fn phases<S: Scalar>(x: &[S]) -> Phases<S> {
    let n = x.len();
    let ax: Vec<S> = x.iter().map(|v| v.abs()).collect();
    let eps = S::of(PHASE_SUPPORT_EPS);
    let mut valid = vec![false; n * n];
    let values = Matrix::from_fn(n, n, |j, i| {
        let support = ax[i] + ax[j];
        if support < eps {
            S::zero()
        } else {
            valid[j * n + i] = true;
            ax[j] / support
        }
    });
    Phases { values, valid }
}

/// Activations and phases at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSnapshot<S> {
    pub lambda: Matrix<S>,
    pub phi: Phases<S>,
    pub t: f64,
}

impl<S: Scalar> ActivationSnapshot<S> {
    pub fn observe(x: &[S], transitions: &Matrix<S>, t: f64) -> Result<Self> {
        Ok(Self {
            lambda: activations(x, transitions)?,
            phi: phases(x),
            t,
        })
    }

    pub fn state_activation(&self, i: usize) -> S {
        self.lambda[(i, i)]
    }

    /// State with the largest diagonal activation.
    pub fn dominant_state(&self) -> usize {
        let d = self.lambda.diagonal();
        (0..d.len()).fold(0, |best, i| if d[i] > d[best] { i } else { best })
    }
}

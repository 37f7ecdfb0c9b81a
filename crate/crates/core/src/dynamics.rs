//! Stable heteroclinic channel network: construction and time integration.
//!
//! The state `x` evolves as
//!
//! ```text
//! ẋ = x ∘ (α + (ρ₀ + ρΔ ∘ (T + G)) · x^γ) · η + δ̇ + ε·W(t)
//! ```
//!
//! with one saddle point per coordinate axis. `T[(j, i)] = 1` iff the
//! transition `i -> j` exists.

use crate::error::{Error, Result};
use crate::linalg::{l2_norm, Matrix};
use crate::scalar::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lower bound applied to every state component after each step.
pub const X_MIN: f64 = 1e-10;

/// Default integration step for `α₀ = 10`.
pub const DEFAULT_DT: f64 = 1e-3;

/// Parameters of an SHC network plus the matrices derived from them.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemConfig<S> {
    alpha: Vec<S>,
    beta: Vec<S>,
    nu: Vec<S>,
    gamma: S,
    transitions: Matrix<S>,
    rho_o: Matrix<S>,
    rho_delta: Matrix<S>,
    dt: S,
}

impl<S: Scalar> SystemConfig<S> {
    pub fn new(
        alpha: Vec<S>,
        beta: Vec<S>,
        nu: Vec<S>,
        gamma: S,
        transitions: Matrix<S>,
        dt: S,
    ) -> Result<Self> {
        let (rho_o, rho_delta) = build_rho(&alpha, &beta, &nu)?;
        if !(gamma > S::zero()) || !gamma.is_finite() {
            return Err(Error::ParameterDomain(format!("gamma must be positive, got {gamma}")));
        }
        if !(dt > S::zero()) || !dt.is_finite() {
            return Err(Error::ParameterDomain(format!("dt must be positive, got {dt}")));
        }
        validate_transitions(&transitions, alpha.len())?;
        Ok(Self {
            alpha,
            beta,
            nu,
            gamma,
            transitions,
            rho_o,
            rho_delta,
            dt,
        })
    }

    /// Canonical system: `α = α₀`, `β = 1`, `ν = 1`, `γ = 2`.
    pub fn canonical(alpha0: S, transitions: Matrix<S>, dt: S) -> Result<Self> {
        let n = transitions.rows();
        Self::new(
            vec![alpha0; n],
            vec![S::one(); n],
            vec![S::one(); n],
            S::of(2.0),
            transitions,
            dt,
        )
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[S] {
        &self.alpha
    }

    pub fn beta(&self) -> &[S] {
        &self.beta
    }

    pub fn nu(&self) -> &[S] {
        &self.nu
    }

    pub fn gamma(&self) -> S {
        self.gamma
    }

    pub fn transitions(&self) -> &Matrix<S> {
        &self.transitions
    }

    pub fn rho_o(&self) -> &Matrix<S> {
        &self.rho_o
    }

    pub fn rho_delta(&self) -> &Matrix<S> {
        &self.rho_delta
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn with_dt(mut self, dt: S) -> Result<Self> {
        if !(dt > S::zero()) || !dt.is_finite() {
            return Err(Error::ParameterDomain(format!("dt must be positive, got {dt}")));
        }
        self.dt = dt;
        Ok(self)
    }

    /// Swaps the transition matrix. `ρ₀` and `ρΔ` are independent of `T` and stay as they are.
    pub(crate) fn replace_transitions(&mut self, transitions: Matrix<S>) -> Result<()> {
        validate_transitions(&transitions, self.n())?;
        self.transitions = transitions;
        Ok(())
    }

    /// Successor states of `i`.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| self.transitions[(j, i)] != S::zero())
    }
}

/// Checks that `t` is an `n×n` 0/1 matrix with a zero diagonal.
pub fn validate_transitions<S: Scalar>(t: &Matrix<S>, n: usize) -> Result<()> {
    if t.rows() != n || t.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "transition matrix is {}x{}, expected {n}x{n}",
            t.rows(),
            t.cols()
        )));
    }
    for j in 0..n {
        for i in 0..n {
            let v = t[(j, i)];
            if v != S::zero() && v != S::one() {
                return Err(Error::InvalidTransitionMatrix(format!(
                    "entry ({j}, {i}) = {v} is not binary"
                )));
            }
        }
        if t[(j, j)] != S::zero() {
            return Err(Error::InvalidTransitionMatrix(format!(
                "self-transition on state {j}"
            )));
        }
    }
    Ok(())
}

/// Builds `ρ₀ = [α⊗β⁻¹] ∘ [I − 1 − α⊗α⁻¹]` and `ρΔ = (α∘(1+ν⁻¹)) ⊗ β⁻¹`.
pub fn build_rho<S: Scalar>(alpha: &[S], beta: &[S], nu: &[S]) -> Result<(Matrix<S>, Matrix<S>)> {
    let n = alpha.len();
    if n == 0 || beta.len() != n || nu.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "alpha/beta/nu lengths {}/{}/{}",
            n,
            beta.len(),
            nu.len()
        )));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta), ("nu", nu)] {
        if let Some((k, bad)) = v
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x > S::zero()) || !x.is_finite())
        {
            return Err(Error::ParameterDomain(format!(
                "{name}[{k}] = {bad} must be strictly positive"
            )));
        }
    }
    let beta_inv: Vec<S> = beta.iter().map(|&b| S::one() / b).collect();
    let alpha_inv: Vec<S> = alpha.iter().map(|&a| S::one() / a).collect();
    let scale = Matrix::outer(alpha, &beta_inv);
    let ratio = Matrix::outer(alpha, &alpha_inv);
    let shape = Matrix::from_fn(n, n, |r, c| {
        let eye = if r == c { S::one() } else { S::zero() };
        eye - S::one() - ratio[(r, c)]
    });
    let rho_o = scale.hadamard(&shape);
    let growth: Vec<S> = alpha
        .iter()
        .zip(nu)
        .map(|(&a, &v)| a * (S::one() + S::one() / v))
        .collect();
    let rho_delta = Matrix::outer(&growth, &beta_inv);
    Ok((rho_o, rho_delta))
}

/// `ρ₀ + ρΔ ∘ (T + G)`: the coupling matrix for a fixed greediness matrix.
pub fn interaction_matrix<S: Scalar>(cfg: &SystemConfig<S>, g: &Matrix<S>) -> Matrix<S> {
    cfg.rho_o
        .add(&cfg.rho_delta.hadamard(&cfg.transitions.add(g)))
}

fn pow_gamma<S: Scalar>(v: S, gamma: S) -> S {
    if gamma == S::of(2.0) {
        v * v
    } else if gamma == S::one() {
        v
    } else {
        // off the positive orthant only the magnitude is meaningful
        v.abs().powf(gamma)
    }
}

/// The deterministic vector field with a frozen coupling matrix.
#[derive(Clone, Debug)]
pub struct VectorField<S> {
    alpha: Vec<S>,
    gamma: S,
    coupling: Matrix<S>,
}

impl<S: Scalar> VectorField<S> {
    pub fn new(cfg: &SystemConfig<S>, g: &Matrix<S>) -> Self {
        Self {
            alpha: cfg.alpha.clone(),
            gamma: cfg.gamma,
            coupling: interaction_matrix(cfg, g),
        }
    }

    pub fn coupling(&self) -> &Matrix<S> {
        &self.coupling
    }

    /// Lotka-Volterra term `x ∘ (α + M·x^γ)` without speed factor or bias.
    pub fn lotka_volterra(&self, x: &[S]) -> Vec<S> {
        let powered: Vec<S> = x.iter().map(|&v| pow_gamma(v, self.gamma)).collect();
        let inner = self.coupling.mat_vec(&powered);
        x.iter()
            .zip(&self.alpha)
            .zip(inner)
            .map(|((&xi, &a), m)| xi * (a + m))
            .collect()
    }

    pub fn eval(&self, x: &[S], eta: S, delta_dot: &[S]) -> Vec<S> {
        self.lotka_volterra(x)
            .into_iter()
            .zip(delta_dot)
            .map(|(lv, &d)| lv * eta + d)
            .collect()
    }
}

/// Deterministic right-hand side. Noise is added by the integrator.
pub fn derivative<S: Scalar>(
    x: &[S],
    cfg: &SystemConfig<S>,
    g: &Matrix<S>,
    eta: S,
    delta_dot: &[S],
) -> Vec<S> {
    VectorField::new(cfg, g).eval(x, eta, delta_dot)
}

/// Analytic Jacobian of the deterministic field at `x`.
pub fn jacobian<S: Scalar>(cfg: &SystemConfig<S>, g: &Matrix<S>, x: &[S], eta: S) -> Matrix<S> {
    let n = cfg.n();
    let gamma = cfg.gamma;
    let coupling = interaction_matrix(cfg, g);
    let powered: Vec<S> = x.iter().map(|&v| pow_gamma(v, gamma)).collect();
    let inner = coupling.mat_vec(&powered);
    let dpow: Vec<S> = x
        .iter()
        .map(|&v| {
            if gamma == S::one() {
                S::one()
            } else {
                gamma * v.abs().powf(gamma - S::one()) * v.signum()
            }
        })
        .collect();
    Matrix::from_fn(n, n, |j, k| {
        let diag = if j == k { cfg.alpha[j] + inner[j] } else { S::zero() };
        (diag + x[j] * coupling[(j, k)] * dpow[k]) * eta
    })
}

/// Jacobian at the saddle on axis `i` with `G = 0`, `η = 1`.
///
/// Diagonal entry `(j, j)` for `j != i` is the linear growth rate away from
/// state `i` towards state `j`: `+α₀` for successors in a canonical system.
pub fn jacobian_at_saddle<S: Scalar>(cfg: &SystemConfig<S>, i: usize) -> Matrix<S> {
    let n = cfg.n();
    let mut x = vec![S::zero(); n];
    x[i] = cfg.beta[i];
    jacobian(cfg, &Matrix::zeros(n, n), &x, S::one())
}

/// Continuous state plus simulation time.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<S> {
    pub x: Vec<S>,
    pub t: f64,
}

impl<S: Scalar> StateVector<S> {
    pub fn new(x: Vec<S>) -> Self {
        Self { x, t: 0.0 }
    }

    /// State sitting on saddle `i`, all other components at the floor.
    pub fn at_saddle(n: usize, i: usize) -> Self {
        let floor = S::of(X_MIN);
        let mut x = vec![floor; n];
        x[i] = S::one();
        Self::new(x)
    }

    pub fn norm(&self) -> S {
        l2_norm(&self.x)
    }

    /// Index of the largest component.
    pub fn dominant(&self) -> usize {
        self.x
            .iter()
            .enumerate()
            .fold((0, S::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
            .0
    }
}

/// Seeded Gaussian noise source for the `ε·W(t)` term.
#[derive(Clone, Debug)]
pub struct NoiseSource<S> {
    epsilon: S,
    seed: u64,
    rng: ChaCha8Rng,
}

impl<S: Scalar> NoiseSource<S> {
    pub fn new(epsilon: S, seed: u64) -> Self {
        Self {
            epsilon,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn silent() -> Self {
        Self::new(S::zero(), 0)
    }

    pub fn epsilon(&self) -> S {
        self.epsilon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_epsilon(&mut self, epsilon: S) {
        self.epsilon = epsilon;
    }

    pub fn is_active(&self) -> bool {
        self.epsilon > S::zero()
    }

    fn sample(&mut self, n: usize) -> Vec<S> {
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                S::of(z)
            })
            .collect()
    }
}

/// One classical Runge-Kutta step of `ẋ = f(x)`.
pub fn rk4_step<S: Scalar>(x: &[S], dt: S, mut f: impl FnMut(&[S]) -> Vec<S>) -> Vec<S> {
    let half = dt / S::of(2.0);
    let axpy = |a: &[S], k: &[S], h: S| -> Vec<S> { a.iter().zip(k).map(|(&a, &k)| a + h * k).collect() };
    let k1 = f(x);
    let k2 = f(&axpy(x, &k1, half));
    let k3 = f(&axpy(x, &k2, half));
    let k4 = f(&axpy(x, &k3, dt));
    let sixth = dt / S::of(6.0);
    let two = S::of(2.0);
    (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

/// One Euler-Maruyama step; the noise increment is scaled by `sqrt(dt)`.
pub fn euler_maruyama_step<S: Scalar>(
    x: &[S],
    dt: S,
    noise: &mut NoiseSource<S>,
    mut f: impl FnMut(&[S]) -> Vec<S>,
) -> Vec<S> {
    let drift = f(x);
    let kick = noise.epsilon * dt.sqrt();
    let w = noise.sample(x.len());
    (0..x.len())
        .map(|i| x[i] + dt * drift[i] + kick * w[i])
        .collect()
}

/// Advances `state` by one step of the field `f`: RK4 when the noise source
/// is silent, Euler-Maruyama otherwise. Components are floored at [`X_MIN`].
pub fn advance<S: Scalar>(
    state: &StateVector<S>,
    dt: S,
    noise: &mut NoiseSource<S>,
    f: impl FnMut(&[S]) -> Vec<S>,
) -> Result<StateVector<S>> {
    let next = if noise.is_active() {
        euler_maruyama_step(&state.x, dt, noise, f)
    } else {
        rk4_step(&state.x, dt, f)
    };
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            t: state.t,
            last_state: state.x.iter().map(|v| v.as_f64()).collect(),
        });
    }
    let floor = S::of(X_MIN);
    Ok(StateVector {
        x: next.into_iter().map(|v| v.max(floor)).collect(),
        t: state.t + dt.as_f64(),
    })
}

/// Advances by one `dt` with `η` and `δ̇` held fixed over the step.
pub fn step<S: Scalar>(
    state: &StateVector<S>,
    cfg: &SystemConfig<S>,
    g: &Matrix<S>,
    eta: S,
    delta_dot: &[S],
    noise: &mut NoiseSource<S>,
) -> Result<StateVector<S>> {
    if state.x.len() != cfg.n() || delta_dot.len() != cfg.n() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} components, bias {}, system {}",
            state.x.len(),
            delta_dot.len(),
            cfg.n()
        )));
    }
    let field = VectorField::new(cfg, g);
    advance(state, cfg.dt, noise, |x| field.eval(x, eta, delta_dot))
}

/// `T` for the cycle `0 -> 1 -> ... -> n-1 -> 0`.
pub fn cycle_transitions<S: Scalar>(n: usize) -> Matrix<S> {
    Matrix::from_fn(n, n, |j, i| if j == (i + 1) % n { S::one() } else { S::zero() })
}

/// `T` from an edge list of `(from, to)` pairs.
pub fn transitions_from_edges<S: Scalar>(n: usize, edges: &[(usize, usize)]) -> Result<Matrix<S>> {
    let mut t = Matrix::zeros(n, n);
    for &(from, to) in edges {
        if from >= n || to >= n {
            return Err(Error::ShapeMismatch(format!(
                "edge {from}->{to} out of range for {n} states"
            )));
        }
        if from == to {
            return Err(Error::InvalidTransitionMatrix(format!("self-loop on state {from}")));
        }
        t[(to, from)] = S::one();
    }
    Ok(t)
}

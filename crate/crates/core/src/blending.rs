//! Composing a control command as the activation-weighted mixture of state
//! goals and phase-indexed transition primitives.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::observables::Phases;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Slots with weight at or below this are left out of the blend.
pub const ACTIVE_WEIGHT: f64 = 1e-6;

/// Tolerance for primitive endpoints matching the adjacent state goals.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Gaussian over (position, velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct MotionGoal<S> {
    mean: Vec<S>,
    covariance: Matrix<S>,
}

impl<S: Scalar> MotionGoal<S> {
    pub fn new(mean: Vec<S>, covariance: Matrix<S>) -> Result<Self> {
        let d = mean.len();
        if covariance.rows() != d || covariance.cols() != d {
            return Err(Error::ShapeMismatch(format!(
                "mean has {d} entries, covariance is {}x{}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        if !covariance.is_symmetric(S::of(1e-12)) {
            return Err(Error::NotPositiveDefinite);
        }
        covariance.cholesky()?;
        Ok(Self { mean, covariance })
    }

    /// Isotropic goal `N(mean, variance·I)`.
    pub fn isotropic(mean: Vec<S>, variance: S) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, Matrix::identity(d).scale(variance))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[S] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<S> {
        &self.covariance
    }

    fn distance(&self, other: &Self) -> S {
        let dm = self
            .mean
            .iter()
            .zip(&other.mean)
            .fold(S::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        dm.max(self.covariance.sub(&other.covariance).max_abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Knot<S> {
    pub phase: S,
    pub goal: MotionGoal<S>,
}

/// Phase-indexed trajectory distribution for a transition `from -> to`,
/// piecewise-linear in mean and covariance between knots.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPrimitive<S> {
    from: usize,
    to: usize,
    knots: Vec<Knot<S>>,
}

impl<S: Scalar> TransitionPrimitive<S> {
    pub fn new(from: usize, to: usize, knots: Vec<Knot<S>>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidPrimitive(format!(
                "{from}->{to}: needs at least two knots"
            )));
        }
        if knots[0].phase != S::zero() || knots[knots.len() - 1].phase != S::one() {
            return Err(Error::InvalidPrimitive(format!(
                "{from}->{to}: knots must span phases 0 to 1"
            )));
        }
        if knots.windows(2).any(|w| !(w[0].phase < w[1].phase)) {
            return Err(Error::InvalidPrimitive(format!(
                "{from}->{to}: knot phases must be strictly increasing"
            )));
        }
        let d = knots[0].goal.dim();
        if knots.iter().any(|k| k.goal.dim() != d) {
            return Err(Error::ShapeMismatch(format!("{from}->{to}: knot dimensions differ")));
        }
        Ok(Self { from, to, knots })
    }

    /// Straight two-knot primitive between two goals.
    pub fn linear(from: usize, to: usize, start: MotionGoal<S>, end: MotionGoal<S>) -> Result<Self> {
        Self::new(
            from,
            to,
            vec![
                Knot { phase: S::zero(), goal: start },
                Knot { phase: S::one(), goal: end },
            ],
        )
    }

    pub fn from(&self) -> usize {
        self.from
    }

    pub fn to(&self) -> usize {
        self.to
    }

    pub fn dim(&self) -> usize {
        self.knots[0].goal.dim()
    }

    pub fn knots(&self) -> &[Knot<S>] {
        &self.knots
    }

    /// Checks that the endpoints coincide with the adjacent state goals.
    pub fn check_boundary(&self, predecessor: &MotionGoal<S>, successor: &MotionGoal<S>) -> Result<()> {
        let tol = S::of(BOUNDARY_TOLERANCE);
        let first = &self.knots[0].goal;
        let last = &self.knots[self.knots.len() - 1].goal;
        if first.distance(predecessor) > tol || last.distance(successor) > tol {
            return Err(Error::InvalidPrimitive(format!(
                "{}->{}: endpoints do not match the state goals",
                self.from, self.to
            )));
        }
        Ok(())
    }
}

/// Mean and covariance of a primitive at some phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimitiveSample<S> {
    pub mean: Vec<S>,
    pub covariance: Matrix<S>,
    /// Set when the requested phase was outside `[0, 1]` and got clamped.
    pub clamped: bool,
}

pub fn evaluate_primitive<S: Scalar>(p: &TransitionPrimitive<S>, phase: S) -> PrimitiveSample<S> {
    let clamped = !(phase >= S::zero() && phase <= S::one());
    let phase = if phase.is_nan() {
        S::zero()
    } else {
        phase.max(S::zero()).min(S::one())
    };
    let knots = &p.knots;
    let seg = knots
        .windows(2)
        .position(|w| phase <= w[1].phase)
        .unwrap_or(knots.len() - 2);
    let (a, b) = (&knots[seg], &knots[seg + 1]);
    if phase == a.phase {
        return PrimitiveSample { mean: a.goal.mean.clone(), covariance: a.goal.covariance.clone(), clamped };
    }
    if phase == b.phase {
        return PrimitiveSample { mean: b.goal.mean.clone(), covariance: b.goal.covariance.clone(), clamped };
    }
    let u = (phase - a.phase) / (b.phase - a.phase);
    let lerp = |x: S, y: S| x + (y - x) * u;
    PrimitiveSample {
        mean: a.goal.mean.iter().zip(&b.goal.mean).map(|(&x, &y)| lerp(x, y)).collect(),
        covariance: a.goal.covariance.zip_map(&b.goal.covariance, lerp),
        clamped,
    }
}

/// A mixture component: a state or a transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlendSlot {
    State { state: usize },
    Transition { from: usize, to: usize },
}

impl fmt::Display for BlendSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlendSlot::State { state } => write!(f, "state {state}"),
            BlendSlot::Transition { from, to } => write!(f, "transition {from}->{to}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendMode {
    /// Moment-matched mixture (weighted averaging).
    #[default]
    Mixture,
    /// Precision-weighted product of the weighted components.
    Product,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlendedCommand<S> {
    pub mean: Vec<S>,
    pub covariance: Matrix<S>,
    pub weights: Vec<(BlendSlot, S)>,
}

/// State goals and transition primitives for one system.
#[derive(Clone, Debug)]
pub struct MotionLibrary<S> {
    dim: usize,
    goals: Vec<Option<MotionGoal<S>>>,
    primitives: BTreeMap<(usize, usize), TransitionPrimitive<S>>,
    mode: BlendMode,
}

impl<S: Scalar> MotionLibrary<S> {
    pub fn new(n: usize, dim: usize) -> Self {
        Self {
            dim,
            goals: vec![None; n],
            primitives: BTreeMap::new(),
            mode: BlendMode::Mixture,
        }
    }

    pub fn with_mode(mut self, mode: BlendMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> BlendMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_goal(&mut self, state: usize, goal: MotionGoal<S>) -> Result<()> {
        if goal.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "goal for state {state} has dimension {}, expected {}",
                goal.dim(),
                self.dim
            )));
        }
        let slot = self
            .goals
            .get_mut(state)
            .ok_or_else(|| Error::ShapeMismatch(format!("state {state} out of range")))?;
        *slot = Some(goal);
        Ok(())
    }

    pub fn goal(&self, state: usize) -> Option<&MotionGoal<S>> {
        self.goals.get(state).and_then(Option::as_ref)
    }

    /// Adds a primitive after checking its endpoints against the state goals.
    pub fn add_primitive(&mut self, p: TransitionPrimitive<S>) -> Result<()> {
        if p.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "primitive {}->{} has dimension {}, expected {}",
                p.from,
                p.to,
                p.dim(),
                self.dim
            )));
        }
        let pred = self.goal(p.from).ok_or_else(|| Error::MissingGoal(BlendSlot::State { state: p.from }.to_string()))?;
        let succ = self.goal(p.to).ok_or_else(|| Error::MissingGoal(BlendSlot::State { state: p.to }.to_string()))?;
        p.check_boundary(pred, succ)?;
        self.primitives.insert((p.from, p.to), p);
        Ok(())
    }

    /// Adds straight-line primitives for every edge of `T` that has none yet.
    pub fn fill_linear_primitives(&mut self, transitions: &Matrix<S>) -> Result<()> {
        for j in 0..transitions.rows() {
            for i in 0..transitions.cols() {
                if transitions[(j, i)] != S::zero() && !self.primitives.contains_key(&(i, j)) {
                    let start = self.goal(i).cloned().ok_or_else(|| Error::MissingGoal(format!("state {i}")))?;
                    let end = self.goal(j).cloned().ok_or_else(|| Error::MissingGoal(format!("state {j}")))?;
                    self.add_primitive(TransitionPrimitive::linear(i, j, start, end)?)?;
                }
            }
        }
        Ok(())
    }

    pub fn primitive(&self, from: usize, to: usize) -> Option<&TransitionPrimitive<S>> {
        self.primitives.get(&(from, to))
    }

    pub fn blend(&self, lambda: &Matrix<S>, phi: &Phases<S>) -> Result<BlendedCommand<S>> {
        blend(lambda, phi, &self.goals, &self.primitives, self.mode)
    }
}

/// Weighted combination of all active slots.
pub fn blend<S: Scalar>(
    lambda: &Matrix<S>,
    phi: &Phases<S>,
    goals: &[Option<MotionGoal<S>>],
    primitives: &BTreeMap<(usize, usize), TransitionPrimitive<S>>,
    mode: BlendMode,
) -> Result<BlendedCommand<S>> {
    let n = lambda.rows();
    let threshold = S::of(ACTIVE_WEIGHT);
    let mut components: Vec<(BlendSlot, S, Vec<S>, Matrix<S>)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let w = lambda[(j, i)];
            if !(w > threshold) {
                continue;
            }
            if i == j {
                let slot = BlendSlot::State { state: i };
                let goal = goals
                    .get(i)
                    .and_then(Option::as_ref)
                    .ok_or_else(|| Error::MissingGoal(slot.to_string()))?;
                components.push((slot, w, goal.mean.clone(), goal.covariance.clone()));
            } else {
                let slot = BlendSlot::Transition { from: i, to: j };
                let p = primitives
                    .get(&(i, j))
                    .ok_or_else(|| Error::MissingGoal(slot.to_string()))?;
                let s = evaluate_primitive(p, phi.get(j, i));
                components.push((slot, w, s.mean, s.covariance));
            }
        }
    }
    if components.is_empty() {
        return Err(Error::DegenerateActivation(lambda.sum().as_f64()));
    }
    let total: S = components.iter().map(|c| c.1).sum();
    for c in &mut components {
        c.1 /= total;
    }
    let d = components[0].2.len();

    let (mean, covariance) = match mode {
        BlendMode::Mixture => {
            let mut mean = vec![S::zero(); d];
            for (_, w, m, _) in &components {
                for k in 0..d {
                    mean[k] += *w * m[k];
                }
            }
            // Σ w (Σ_s + m_s m_sᵀ) − m mᵀ, written around the mixture mean
            let mut cov = Matrix::zeros(d, d);
            for (_, w, m, c) in &components {
                let dev: Vec<S> = m.iter().zip(&mean).map(|(&a, &b)| a - b).collect();
                cov = cov.add(&c.add(&Matrix::outer(&dev, &dev)).scale(*w));
            }
            (mean, cov)
        }
        BlendMode::Product => {
            let mut precision = Matrix::zeros(d, d);
            let mut info = vec![S::zero(); d];
            for (_, w, m, c) in &components {
                let p = c.spd_inverse()?.scale(*w);
                for (k, v) in p.mat_vec(m).into_iter().enumerate() {
                    info[k] += v;
                }
                precision = precision.add(&p);
            }
            let cov = precision.spd_inverse()?;
            (cov.mat_vec(&info), cov)
        }
    };
    Ok(BlendedCommand {
        mean,
        covariance,
        weights: components.into_iter().map(|(s, w, _, _)| (s, w)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::phases;
    use approx::assert_abs_diff_eq;

    fn goal(m: &[f64], v: f64) -> MotionGoal<f64> {
        MotionGoal::isotropic(m.to_vec(), v).unwrap()
    }

    fn library() -> MotionLibrary<f64> {
        let mut lib = MotionLibrary::new(3, 2);
        lib.set_goal(0, goal(&[0.0, 0.0], 0.01)).unwrap();
        lib.set_goal(1, goal(&[1.0, 0.0], 0.02)).unwrap();
        lib.set_goal(2, goal(&[0.0, 1.0], 0.03)).unwrap();
        lib.add_primitive(
            TransitionPrimitive::new(
                0,
                1,
                vec![
                    Knot { phase: 0.0, goal: goal(&[0.0, 0.0], 0.01) },
                    Knot { phase: 0.5, goal: goal(&[0.5, 0.5], 0.05) },
                    Knot { phase: 1.0, goal: goal(&[1.0, 0.0], 0.02) },
                ],
            )
            .unwrap(),
        )
        .unwrap();
        lib.add_primitive(TransitionPrimitive::linear(0, 2, goal(&[0.0, 0.0], 0.01), goal(&[0.0, 1.0], 0.03)).unwrap())
            .unwrap();
        lib
    }

    #[test]
    fn primitive_knots_are_exact() {
        let lib = library();
        let p = lib.primitive(0, 1).unwrap();
        assert_eq!(evaluate_primitive(p, 0.0).mean, vec![0.0, 0.0]);
        assert_eq!(evaluate_primitive(p, 1.0).mean, vec![1.0, 0.0]);
        assert_eq!(evaluate_primitive(p, 0.5).mean, vec![0.5, 0.5]);
        let q = lib.primitive(0, 2).unwrap();
        let mid = evaluate_primitive(q, 0.5);
        assert_eq!(mid.mean, vec![0.0, 0.5]);
        assert_abs_diff_eq!(mid.covariance[(0, 0)], 0.02, epsilon = 1e-15);
        assert!(!mid.clamped);
    }

    #[test]
    fn out_of_range_phase_is_clamped_and_flagged() {
        let lib = library();
        let p = lib.primitive(0, 1).unwrap();
        let s = evaluate_primitive(p, 1.3);
        assert!(s.clamped);
        assert_eq!(s.mean, vec![1.0, 0.0]);
        assert!(evaluate_primitive(p, -0.1).clamped);
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let mut lib = library();
        let bad = TransitionPrimitive::linear(1, 2, goal(&[1.0, 0.1], 0.02), goal(&[0.0, 1.0], 0.03)).unwrap();
        assert!(matches!(lib.add_primitive(bad), Err(Error::InvalidPrimitive(_))));
    }

    #[test]
    fn single_state_blend_is_verbatim() {
        let lib = library();
        let l = Matrix::from_diagonal(&[0.0, 1.0, 0.0]);
        let c = lib.blend(&l, &phases(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(c.mean, vec![1.0, 0.0]);
        assert_eq!(&c.covariance, lib.goal(1).unwrap().covariance());
        assert_eq!(c.weights, vec![(BlendSlot::State { state: 1 }, 1.0)]);
    }

    #[test]
    fn midpoint_transition_blend() {
        let lib = library();
        let mut l = Matrix::zeros(3, 3);
        l[(1, 0)] = 1.0;
        let x = [0.5f64.sqrt(), 0.5f64.sqrt(), 0.0];
        let c = lib.blend(&l, &phases(&x)).unwrap();
        assert_abs_diff_eq!(c.mean[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.mean[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn missing_goal_names_the_slot() {
        let lib = library();
        let mut l = Matrix::zeros(3, 3);
        l[(2, 1)] = 1.0;
        let err = lib.blend(&l, &phases(&[0.0, 0.7, 0.7])).unwrap_err();
        assert_eq!(err, Error::MissingGoal("transition 1->2".into()));
    }

    #[test]
    fn product_mode_of_identical_components_is_identity() {
        let lib = library().with_mode(BlendMode::Product);
        let l = Matrix::from_diagonal(&[0.0, 1.0, 0.0]);
        let c = lib.blend(&l, &phases(&[0.0, 1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(c.mean[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.covariance[(0, 0)], 0.02, epsilon = 1e-12);
    }

    #[test]
    fn product_mode_weights_by_precision() {
        // equal weights, variances 0.01 and 0.03: mean pulled to the tighter goal
        let lib = library().with_mode(BlendMode::Product);
        let l = Matrix::from_diagonal(&[0.5, 0.0, 0.5]);
        let c = lib.blend(&l, &phases(&[1.0, 0.0, 1.0])).unwrap();
        // precisions 0.5/0.01 = 50 and 0.5/0.03: mean_y = (0.5/0.03)/(50 + 0.5/0.03)
        let p2 = 0.5 / 0.03;
        assert_abs_diff_eq!(c.mean[1], p2 / (50.0 + p2), epsilon = 1e-12);
        assert_abs_diff_eq!(c.covariance[(1, 1)], 1.0 / (50.0 + p2), epsilon = 1e-12);
    }

    #[test]
    fn mixture_covariance_is_psd() {
        let lib = library();
        let l = Matrix::from_diagonal(&[0.3, 0.3, 0.4]);
        let c = lib.blend(&l, &phases(&[1.0, 1.0, 1.0])).unwrap();
        let jittered = c.covariance.add(&Matrix::identity(2).scale(1e-9));
        assert!(jittered.cholesky().is_ok());
        let s: f64 = c.weights.iter().map(|w| w.1).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }
}

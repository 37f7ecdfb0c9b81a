//! Phase-state machine: a stable heteroclinic channel network that behaves
//! like a discrete state machine while evolving continuously.
//!
//! The numeric core is generic over [`Scalar`] (`f32`/`f64`); the aliases at
//! the crate root fix it to `f64`, which is what the scenario and the service
//! use.

// `!(x > 0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blending;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod modulation;
pub mod observables;
pub mod scalar;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type Real = f64;
pub type SystemConfig = dynamics::SystemConfig<Real>;
pub type StateVector = dynamics::StateVector<Real>;
pub type NoiseSource = dynamics::NoiseSource<Real>;
pub type ModulationInputs = modulation::ModulationInputs<Real>;
pub type GreedinessMatrices = modulation::GreedinessMatrices<Real>;
pub type ActivationSnapshot = observables::ActivationSnapshot<Real>;
pub type Phases = observables::Phases<Real>;
pub type MotionGoal = blending::MotionGoal<Real>;
pub type TransitionPrimitive = blending::TransitionPrimitive<Real>;
pub type BlendedCommand = blending::BlendedCommand<Real>;
pub type MotionLibrary = blending::MotionLibrary<Real>;
pub type Simulator = sim::Simulator<Real>;
pub type Observation = sim::Observation<Real>;
pub type RealMatrix = Matrix<Real>;

//! Continuous-time learning flows, fixed-step integrators, and exact
//! solutions on quadratic losses and the rotation field.

mod continuous;
mod ode;
mod quadratic;
mod rotation;

pub use continuous::{flow_velocity, integrate, FlowKind, FlowSpec, FlowTrajectory};
pub use ode::{solve, step, Integrator};
pub use quadratic::{quadratic_exact, QuadraticModel, QuadraticSystem, DEMO_MATRIX};
pub use rotation::{rotation_demo, rotation_paths, RotationPaths, RotationRadii};

//! Translation, scale and rescale symmetry groups and the geometric
//! identities they impose on gradients and Hessians.

mod checks;
mod descriptor;
mod enumerate;

pub use checks::{
    equivariance_check, geometry_residuals, gradient_residual, hessian_residual, noise_lowrank_check,
    theorem_condition, EquivarianceGap, GeometryResiduals, NoiseCheck, RESIDUAL_DELTA,
};
pub use descriptor::{act, conserved_quantity, generator, quantity_magnitude, SymmetryDescriptor, SymmetryKind};
pub use enumerate::{enumerate_groups, enumerate_groups_with, EnumerateOptions};

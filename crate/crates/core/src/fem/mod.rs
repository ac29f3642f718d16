//! P1 finite elements for `∫(∇u·∇v + uv) = ∫_∂Ω g(u) v dσ`.

mod assembly;
mod boundary;
mod eval;
mod field;

pub use assembly::{assemble_boundary_mass, assemble_volume, element_mass, element_stiffness, LinearSystem};
pub use boundary::{
    boundary_integral, boundary_load, boundary_residual, boundary_terms, edge_at, trace_at, BoundaryQuadrature,
    BoundaryTerms,
};
pub use eval::{
    energy, interpolate, probe, probe_boundary, recovered_gradient, solve_linear_neumann, EnergyRecord, FieldErrors, Probe,
};
pub use field::NodalField;

/// Floor applied to boundary values before raising them to the power `p`.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

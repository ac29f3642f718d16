//! Finite-element laboratory for positive solutions of
//!
//! ```text
//!   Δu = u  in Ω,    ∂u/∂ν = u^p  on ∂Ω
//! ```
//!
//! on smooth planar domains, together with the tools needed to study their
//! boundary concentration as `p` grows: boundary peak detection, rescaling
//! onto the half-plane Liouville bubble, Neumann Green and Robin functions,
//! the `φ_m` concentration functional and local Pohozaev balances.
//!
//! Meshes graded around a boundary point keep the vertices of that region
//! as offsets from an anchor ([`geometry::Frame`]), which lets the solver
//! resolve peaks far narrower than the absolute `f64` spacing near `|x| ≈ 1`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod extrapolate;
pub mod fem;
pub mod geometry;
pub mod green;
pub mod io;
pub mod liouville;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

/// `√e`, the limiting peak height.
pub const SQRT_E: f64 = 1.648_721_270_700_128_2;

/// `2πe`, one energy quantum per boundary peak.
pub const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

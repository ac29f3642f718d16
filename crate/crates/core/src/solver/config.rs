use serde::{Deserialize, Serialize};

use crate::fem::BoundaryQuadrature;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Newton stops once `‖R‖₂` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Line-search halvings per Newton step.
    pub max_halvings: usize,
    /// Solutions with `‖u‖∞` below this are rejected as trivial.
    pub zero_guard: Option<f64>,
    /// Exponents visited by continuation, strictly increasing.
    pub schedule: Vec<f64>,
    /// Bisections of a failed continuation step.
    pub max_bisections: usize,
    /// Deflation factor `Π (shift + 1/‖u − u_k‖^power)`.
    pub deflation_shift: f64,
    pub deflation_power: f64,
    pub quadrature_degree: usize,
    pub subdivision_depth: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50,
            max_halvings: 20,
            zero_guard: Some(0.5),
            schedule: vec![10.0, 20.0, 40.0, 80.0],
            max_bisections: 5,
            deflation_shift: 1.0,
            deflation_power: 2.0,
            quadrature_degree: 8,
            subdivision_depth: 6,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if self.schedule.is_empty() {
            return Err(Error::InvalidArgument("empty continuation schedule".into()));
        }
        if self.schedule.iter().any(|&p| !(p >= 1.0 && p.is_finite())) {
            return Err(Error::InvalidArgument("exponents must be finite and >= 1".into()));
        }
        if self.schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("schedule must be strictly increasing".into()));
        }
        if !(self.deflation_power > 0.0) || self.deflation_shift < 0.0 {
            return Err(Error::InvalidArgument("bad deflation parameters".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> BoundaryQuadrature {
        BoundaryQuadrature::new(self.quadrature_degree, self.subdivision_depth)
    }
}

use serde::Serialize;

use super::peaks::PeakRecord;
use crate::geometry::{norm, sub, DomainMesh};
use crate::{Error, Result, TWO_PI_E};

/// Slack on the energy lower bound for discretization error.
pub const ENERGY_SLACK: f64 = 0.98;

/// Scale-separation properties of the detected peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyChecks {
    /// `min_{i≠j} |yᵢ − y_j| / εᵢ`; `None` with a single peak.
    pub separation_ratio: Option<f64>,
    /// `max_j dist(y_j, ∂Ω) / ε_j`.
    pub boundary_ratio: f64,
    /// `sup_x p R(x) u^{p−1}(x)` with `R(x) = min_j |x − y_j|`.
    pub p4_sup: f64,
}

impl PropertyChecks {
    /// Separation ratio with the single-peak case reported as `∞`.
    pub fn separation_or_infinity(&self) -> f64 {
        self.separation_ratio.unwrap_or(f64::INFINITY)
    }
}

pub fn property_checks(mesh: &DomainMesh, u: &[f64], p: f64, peaks: &[PeakRecord]) -> Result<PropertyChecks> {
    if peaks.is_empty() {
        return Err(Error::NoConcentration);
    }
    if u.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument("field length does not match the mesh".into()));
    }
    let mut separation: Option<f64> = None;
    for (i, a) in peaks.iter().enumerate() {
        for (j, b) in peaks.iter().enumerate() {
            if i != j {
                let r = norm(mesh.diff(a.vertex, b.vertex)) / a.epsilon;
                separation = Some(separation.map_or(r, |s| s.min(r)));
            }
        }
    }
    let curve = mesh.curve();
    let boundary_ratio = peaks
        .iter()
        .map(|pk| {
            let dist = norm(sub(pk.point, curve.point_at(&pk.param)));
            dist / pk.epsilon
        })
        .fold(0.0, f64::max);
    let mut p4_sup = 0.0f64;
    for (i, &v) in u.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let r = peaks
            .iter()
            .map(|pk| norm(mesh.diff(i, pk.vertex)))
            .fold(f64::INFINITY, f64::min);
        if r > 0.0 {
            p4_sup = p4_sup.max((p.ln() + r.ln() + (p - 1.0) * v.ln()).exp());
        }
    }
    Ok(PropertyChecks {
        separation_ratio: separation,
        boundary_ratio,
        p4_sup,
    })
}

/// Energy against the quantized value `m · 2πe` and the lower bound
/// `2π Σ u(y_j)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCheck {
    /// `p ∫(|∇u|² + u²)`.
    pub p_energy: f64,
    pub target: f64,
    /// `p_energy / target − 1`.
    pub deviation: f64,
    pub lower_bound: f64,
    /// `p_energy ≥ 0.98 · lower_bound`.
    pub lower_bound_holds: bool,
}

pub fn energy_check(dirichlet: f64, p: f64, peaks: &[PeakRecord]) -> EnergyCheck {
    let p_energy = p * dirichlet;
    let target = peaks.len() as f64 * TWO_PI_E;
    let lower_bound = 2.0 * std::f64::consts::PI * peaks.iter().map(|pk| pk.amplitude * pk.amplitude).sum::<f64>();
    EnergyCheck {
        p_energy,
        target,
        deviation: if target > 0.0 { p_energy / target - 1.0 } else { f64::NAN },
        lower_bound,
        lower_bound_holds: p_energy >= ENERGY_SLACK * lower_bound,
    }
}

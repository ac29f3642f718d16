use serde::Serialize;

use super::arc::{power_integral, Arc};
use super::peaks::PeakRecord;
use crate::geometry::{norm, sub, DomainMesh};
use crate::{Error, Result};

/// Boundary mass of one peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaRecord {
    pub radius: f64,
    /// `(p / u(y)) ∫_{D_r(y)} u^p dσ`.
    pub beta: f64,
    /// `β u(y) = p ∫_{D_r(y)} u^p dσ`.
    pub c: f64,
}

/// Euclidean distance from peak `j` to the nearest other peak.
pub(crate) fn nearest_peak_distance(peaks: &[PeakRecord], j: usize) -> f64 {
    peaks
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, q)| norm(sub(q.point, peaks[j].point)))
        .fold(f64::INFINITY, f64::min)
}

/// `β_j` over `D_r(y_j) = ∂Ω ∩ B_r(y_j)`; `r` must stay below half the
/// distance to every other peak.
pub fn beta_integral(mesh: &DomainMesh, u: &[f64], p: f64, peaks: &[PeakRecord], j: usize, r: f64) -> Result<BetaRecord> {
    let peak = peaks
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("no peak with index {j}")))?;
    if r >= 0.5 * nearest_peak_distance(peaks, j) {
        return Err(Error::OverlappingPeaks { radius: r });
    }
    let arc = Arc::ball(mesh, peak.param, r)?;
    let mass = power_integral(mesh, u, p, &arc);
    let beta = p * mass / peak.amplitude;
    Ok(BetaRecord {
        radius: r,
        beta,
        c: beta * peak.amplitude,
    })
}

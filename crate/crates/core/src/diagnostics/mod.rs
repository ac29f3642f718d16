//! Blow-up analysis of solved fields: boundary peaks, rescaled profiles,
//! boundary masses, local Pohozaev balances, energy and Green
//! representation checks, and the per-branch report.

mod arc;
mod beta;
mod checks;
mod peaks;
mod pohozaev;
mod profile;
mod report;
mod representation;

pub use beta::{beta_integral, BetaRecord};
pub use checks::{energy_check, property_checks, EnergyCheck, PropertyChecks, ENERGY_SLACK};
pub use peaks::{detect_peaks, detect_peaks_with, PeakOptions, PeakRecord};
pub use pohozaev::{pohozaev_residual, pohozaev_residual_with, PohozaevBalance};
pub use profile::{rescale_profile, ProfileGrid, ProfileSamples};
pub use report::{build_report, diagnose, BranchReport, ConcentrationReport, PeakDiagnostics, ReportConfig, TrendSummary};
pub use representation::{green_representation_check, Representation};

/// `∫_{D_r(y)} u^p dσ` over the boundary arc split at the offset `split`
/// from the peak; returns the two pieces.
pub fn split_power_integral(
    mesh: &crate::geometry::DomainMesh,
    u: &[f64],
    p: f64,
    peak: &PeakRecord,
    r: f64,
    split: f64,
) -> crate::Result<(f64, f64)> {
    let whole = arc::Arc::ball(mesh, peak.param, r)?;
    if !(split > whole.lo && split < whole.hi) {
        return Err(crate::Error::InvalidArgument(format!("split offset {split} outside the arc")));
    }
    let (a, b) = whole.split(split);
    Ok((arc::power_integral(mesh, u, p, &a), arc::power_integral(mesh, u, p, &b)))
}

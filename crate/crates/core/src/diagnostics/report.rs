use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::beta::{beta_integral, BetaRecord};
use super::checks::{energy_check, property_checks, EnergyCheck, PropertyChecks};
use super::peaks::{detect_peaks_with, PeakOptions, PeakRecord};
use super::pohozaev::{pohozaev_residual, PohozaevBalance};
use super::profile::{rescale_profile, ProfileGrid};
use super::representation::{green_representation_check, Representation};
use crate::extrapolate::{extrapolate, Extrapolation};
use crate::geometry::CurveShape;
use crate::green::{phi_gradient, solve_regular_part};
use crate::solver::{Discretization, SolutionBranch};
use crate::{Result, SQRT_E};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub peaks: PeakOptions,
    /// Radius of `D_r` for `β`; `0.1 L` when absent.
    pub beta_radius: Option<f64>,
    pub profile: ProfileGrid,
    pub pohozaev_delta: f64,
    /// Green representation terms per peak.
    pub representation: bool,
    /// `|∇φ_m|` at the detected peaks.
    pub phi_gradient: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            peaks: PeakOptions::default(),
            beta_radius: None,
            profile: ProfileGrid::default(),
            pohozaev_delta: 0.3,
            representation: true,
            phi_gradient: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakDiagnostics {
    pub record: PeakRecord,
    /// `sup |w − U|` on the profile window.
    pub profile_error: Option<f64>,
    pub beta: Option<BetaRecord>,
    pub pohozaev: Option<PohozaevBalance>,
    pub representation: Option<Representation>,
}

/// Diagnostics of one solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub p: f64,
    pub m: usize,
    pub sup_norm: f64,
    /// `‖u‖∞ / √e − 1`.
    pub sup_deviation: f64,
    pub dirichlet: f64,
    pub peaks: Vec<PeakDiagnostics>,
    pub energy: Option<EnergyCheck>,
    pub properties: Option<PropertyChecks>,
    pub phi_gradient: Option<f64>,
    /// Checks that could not be carried out.
    pub failures: Vec<String>,
}

impl ConcentrationReport {
    pub fn p_energy(&self) -> f64 {
        self.p * self.dirichlet
    }

    /// Largest Pohozaev residual over the peaks.
    pub fn pohozaev_residual(&self) -> Option<f64> {
        self.peaks
            .iter()
            .filter_map(|pk| pk.pohozaev.map(|b| b.residual))
            .reduce(f64::max)
    }
}

/// Runs every diagnostic on the field `u` at exponent `p`; failures of
/// individual checks are recorded, never propagated.
pub fn diagnose(disc: &Discretization, u: &[f64], p: f64, config: &ReportConfig) -> ConcentrationReport {
    let mesh = &disc.mesh;
    let sup_norm = u.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let dirichlet = disc.system.volume.inner(u, u);
    let mut failures = Vec::new();
    let mut report = ConcentrationReport {
        p,
        m: 0,
        sup_norm,
        sup_deviation: sup_norm / SQRT_E - 1.0,
        dirichlet,
        peaks: Vec::new(),
        energy: None,
        properties: None,
        phi_gradient: None,
        failures: Vec::new(),
    };
    let peaks = match detect_peaks_with(mesh, u, p, &config.peaks) {
        Ok(peaks) => peaks,
        Err(e) => {
            report.failures.push(format!("peaks: {e}"));
            return report;
        }
    };
    report.m = peaks.len();
    let radius = config.beta_radius.unwrap_or(0.1 * mesh.curve().length());
    for (j, record) in peaks.iter().enumerate() {
        let mut note = |what: &str, e: crate::Error| failures.push(format!("peak {j} {what}: {e}"));
        let profile_error = rescale_profile(mesh, u, p, record, &config.profile)
            .map(|s| s.error)
            .map_err(|e| note("profile", e))
            .ok();
        let beta = beta_integral(mesh, u, p, &peaks, j, radius).map_err(|e| note("beta", e)).ok();
        let pohozaev = pohozaev_residual(mesh, u, p, record.param, config.pohozaev_delta)
            .map_err(|e| note("pohozaev", e))
            .ok();
        let representation = if config.representation {
            solve_regular_part(disc, record.param)
                .and_then(|g| green_representation_check(mesh, u, p, &peaks, j, &g, radius))
                .map_err(|e| note("representation", e))
                .ok()
        } else {
            None
        };
        report.peaks.push(PeakDiagnostics {
            record: record.clone(),
            profile_error,
            beta,
            pohozaev,
            representation,
        });
    }
    report.energy = Some(energy_check(dirichlet, p, &peaks));
    match property_checks(mesh, u, p, &peaks) {
        Ok(c) => report.properties = Some(c),
        Err(e) => failures.push(format!("properties: {e}")),
    }
    if config.phi_gradient {
        let sites: Vec<f64> = peaks.iter().map(|pk| pk.s).collect();
        match phi_gradient(disc, &sites) {
            Ok(g) => report.phi_gradient = Some(g.norm()),
            Err(e) => failures.push(format!("phi gradient: {e}")),
        }
    }
    report.failures = failures;
    report
}

/// Extrapolated limits along a branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendSummary {
    pub sup_norm: Option<Extrapolation>,
    pub p_energy: Option<Extrapolation>,
    /// Per peak index, over the entries where that peak exists.
    pub beta: Vec<Option<Extrapolation>>,
    pub c: Vec<Option<Extrapolation>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchReport {
    pub shape: CurveShape,
    pub reports: Vec<ConcentrationReport>,
    pub trend: TrendSummary,
}

fn fit(points: Vec<(f64, f64)>) -> Option<Extrapolation> {
    let (ps, ys): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
    extrapolate(&ps, &ys).ok()
}

pub fn build_report(disc: &Discretization, branch: &SolutionBranch, config: &ReportConfig) -> Result<BranchReport> {
    if branch.entries.is_empty() {
        return Err(crate::Error::InvalidArgument("empty branch".into()));
    }
    let reports: Vec<ConcentrationReport> = branch
        .entries
        .iter()
        .map(|e| diagnose(disc, e.solution.values(), e.p, config))
        .collect();
    let m = reports.iter().map(|r| r.m).max().unwrap_or(0);
    let per_peak = |j: usize, f: &dyn Fn(&BetaRecord) -> f64| {
        fit(reports
            .iter()
            .filter_map(|r| r.peaks.get(j).and_then(|pk| pk.beta.as_ref()).map(|b| (r.p, f(b))))
            .collect())
    };
    let trend = TrendSummary {
        sup_norm: fit(reports.iter().map(|r| (r.p, r.sup_norm)).collect()),
        p_energy: fit(reports.iter().filter(|r| r.m > 0).map(|r| (r.p, r.p_energy())).collect()),
        beta: (0..m).map(|j| per_peak(j, &|b| b.beta)).collect(),
        c: (0..m).map(|j| per_peak(j, &|b| b.c)).collect(),
    };
    Ok(BranchReport {
        shape: branch.shape,
        reports,
        trend,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.12e}"))
}

impl BranchReport {
    /// One row per exponent: `p, m, sup_norm, p_energy, beta_1..m, c_1..m,
    /// pohozaev_res, p4_sup, phi_grad_norm`.
    pub fn to_csv(&self) -> String {
        let m = self.reports.iter().map(|r| r.m).max().unwrap_or(0);
        let mut out = String::from("p,m,sup_norm,p_energy");
        for j in 1..=m {
            let _ = write!(out, ",beta_{j}");
        }
        for j in 1..=m {
            let _ = write!(out, ",c_{j}");
        }
        out.push_str(",pohozaev_res,p4_sup,phi_grad_norm\n");
        for r in &self.reports {
            let _ = write!(out, "{},{},{},{}", r.p, r.m, cell(Some(r.sup_norm)), cell(Some(r.p_energy())));
            for j in 0..m {
                let _ = write!(out, ",{}", cell(r.peaks.get(j).and_then(|pk| pk.beta).map(|b| b.beta)));
            }
            for j in 0..m {
                let _ = write!(out, ",{}", cell(r.peaks.get(j).and_then(|pk| pk.beta).map(|b| b.c)));
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                cell(r.pohozaev_residual()),
                cell(r.properties.map(|c| c.p4_sup)),
                cell(r.phi_gradient)
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

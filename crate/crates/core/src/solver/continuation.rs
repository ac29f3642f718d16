use serde::Serialize;

use super::ansatz::{anchor_at, chart_coordinates, far_field_corrected, site_values_from_coords, AnsatzSite};
use super::config::SolveConfig;
use super::newton::{newton_solve_with, BoundarySolution, Deflation, Discretization, NeumannData};
use crate::diagnostics::detect_peaks;
use crate::fem::{energy, trace_at, EnergyRecord, NodalField};
use crate::geometry::{ArcParam, CurveShape, DomainMesh, MeshSpec};
use crate::{Error, Result, SQRT_E};

/// Amplitudes scanned when calibrating the first ansatz.
const AMPLITUDE_SCAN: (f64, f64, usize) = (1.0, 2.0, 101);
/// Newton attempts from calibrated amplitudes before giving up.
const SEED_ATTEMPTS: usize = 6;

#[derive(Debug, Clone, Serialize)]
pub struct BranchEntry {
    pub p: f64,
    pub solution: BoundarySolution,
    pub energy: EnergyRecord,
}

/// Solutions along a continuation schedule, all on one mesh.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionBranch {
    pub shape: CurveShape,
    pub mesh: MeshSpec,
    /// Bubble centers of the initial ansatz (curve parameters).
    pub sites: Vec<f64>,
    pub provenance: String,
    pub entries: Vec<BranchEntry>,
}

impl SolutionBranch {
    pub fn exponents(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.p).collect()
    }

    pub fn entry(&self, p: f64) -> Option<&BranchEntry> {
        self.entries.iter().find(|e| e.p == p)
    }
}

fn entry(disc: &Discretization, solution: BoundarySolution) -> BranchEntry {
    let p = solution.p;
    let energy = energy(&disc.mesh, &disc.system, solution.values(), p, &disc.quadrature);
    BranchEntry { p, solution, energy }
}

/// Value of `u` at the boundary point `s`, read at the fan center when `s`
/// is an anchor.
fn peak_value(mesh: &DomainMesh, u: &[f64], s: f64) -> Result<f64> {
    if let Some(f) = anchor_at(mesh, s).and_then(|a| mesh.fan_of(a)) {
        return Ok(u[f.center]);
    }
    trace_at(mesh, u, ArcParam::new(s))
}

/// Chart coordinates of every vertex around each site, computed once.
struct SiteCharts {
    sites: Vec<f64>,
    coords: Vec<Vec<[f64; 2]>>,
}

impl SiteCharts {
    fn new(mesh: &DomainMesh, sites: &[f64]) -> Self {
        Self {
            sites: sites.to_vec(),
            coords: sites.iter().map(|&s| chart_coordinates(mesh, s).1).collect(),
        }
    }

    /// Far-field corrected maximum of bubbles with the given heights.
    fn seed(&self, disc: &Discretization, amplitudes: &[f64], p: f64) -> Result<NodalField> {
        let mut values = vec![f64::NEG_INFINITY; disc.mesh.vertex_count()];
        for ((c, &s), &amplitude) in self.coords.iter().zip(&self.sites).zip(amplitudes) {
            let b = site_values_from_coords(c, AnsatzSite { s, amplitude }, p)?;
            for (v, w) in values.iter_mut().zip(b) {
                *v = v.max(w);
            }
        }
        let heights = amplitudes.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(",");
        let field = NodalField::new(values, format!("bubbles at s={:?} with heights {heights}", self.sites))?;
        far_field_corrected(disc, &field, p)
    }
}

/// Peak heights along a branch, extrapolated with
/// `log A = 1/2 + (a + b log p)/p`. A single point fixes `b = −1`.
#[derive(Debug, Default)]
struct AmplitudeModel {
    history: Vec<(f64, Vec<f64>)>,
}

impl AmplitudeModel {
    fn push(&mut self, p: f64, amplitudes: Vec<f64>) {
        self.history.push((p, amplitudes));
    }

    fn predict(&self, p: f64) -> Vec<f64> {
        let n = self.history.len();
        let (p1, a1) = &self.history[n - 1];
        let coefficient = |p: f64, a: f64| p * (a.ln() - 0.5);
        a1.iter()
            .enumerate()
            .map(|(k, &amp1)| {
                let y1 = coefficient(*p1, amp1);
                let b = if n >= 2 {
                    let (p0, a0) = &self.history[n - 2];
                    let y0 = coefficient(*p0, a0[k]);
                    ((y1 - y0) / (p1.ln() - p0.ln())).clamp(-3.0, 1.0)
                } else {
                    -1.0
                };
                let a = y1 - b * p1.ln();
                (0.5 + (a + b * p.ln()) / p).exp()
            })
            .collect()
    }
}

fn peak_heights(mesh: &DomainMesh, u: &[f64], sites: &[f64]) -> Result<Vec<f64>> {
    sites.iter().map(|&s| peak_value(mesh, u, s)).collect()
}

/// Newton from bubble ansätze at `sites`. The first attempt uses height
/// `√e`; later ones use heights ordered by the dual-norm residual of the
/// ansatz.
pub fn solve_from_ansatz(
    disc: &Discretization,
    sites: &[f64],
    p: f64,
    config: &SolveConfig,
    deflation: &Deflation,
) -> Result<BoundarySolution> {
    let charts = SiteCharts::new(&disc.mesh, sites);
    solve_calibrated(disc, &charts, p, config, deflation)
}

fn solve_calibrated(
    disc: &Discretization,
    charts: &SiteCharts,
    p: f64,
    config: &SolveConfig,
    deflation: &Deflation,
) -> Result<BoundarySolution> {
    let m = charts.sites.len();
    let (lo, hi, count) = AMPLITUDE_SCAN;
    let mut scored = Vec::with_capacity(count);
    for i in 0..count {
        let a = lo + (hi - lo) * i as f64 / (count - 1) as f64;
        let seed = charts.seed(disc, &vec![a; m], p)?;
        let r = disc.residual(&seed.values, p)?;
        scored.push((disc.dual_norm(&r), a));
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut candidates = vec![SQRT_E];
    for &(_, a) in &scored {
        if candidates.len() >= SEED_ATTEMPTS {
            break;
        }
        if candidates.iter().all(|c| (c - a).abs() > 0.015) {
            candidates.push(a);
        }
    }
    let data = NeumannData::power(p);
    let mut last = None;
    for a in candidates {
        let seed = charts.seed(disc, &vec![a; m], p)?;
        match newton_solve_with(disc, &seed, &data, config, deflation) {
            Ok(sol) => {
                log::info!("p = {p}: converged from height {a:.3} in {} iterations", sol.iterations);
                return Ok(sol);
            }
            Err(e) => {
                log::debug!("p = {p}: height {a:.3} failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Follows a solution along `schedule` (which must start at the seed's
/// exponent), predicting peak heights from the previous steps. A failed
/// step is bisected up to `config.max_bisections` times; only schedule
/// points are returned.
pub fn continue_in_p(
    disc: &Discretization,
    seed: BoundarySolution,
    sites: &[f64],
    schedule: &[f64],
    config: &SolveConfig,
) -> Result<Vec<BranchEntry>> {
    continue_with(disc, seed, sites, schedule, config, &Deflation::none())
}

fn continue_with(
    disc: &Discretization,
    seed: BoundarySolution,
    sites: &[f64],
    schedule: &[f64],
    config: &SolveConfig,
    deflation: &Deflation,
) -> Result<Vec<BranchEntry>> {
    config.validate()?;
    let Some(&first) = schedule.first() else {
        return Err(Error::InvalidArgument("empty continuation schedule".into()));
    };
    if (seed.p - first).abs() > 1e-12 * first {
        return Err(Error::InvalidArgument(format!(
            "seed solved at p = {} but schedule starts at {first}",
            seed.p
        )));
    }
    if schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("schedule must be strictly increasing".into()));
    }
    let charts = SiteCharts::new(&disc.mesh, sites);
    let mut model = AmplitudeModel::default();
    model.push(seed.p, peak_heights(&disc.mesh, seed.values(), sites)?);
    let mut entries = vec![entry(disc, seed)];
    for &target in &schedule[1..] {
        let mut current = entries.last().expect("seeded").solution.clone();
        let mut step = target - current.p;
        let mut bisections = 0;
        while current.p < target {
            let p_new = (current.p + step).min(target);
            let guess = charts.seed(disc, &model.predict(p_new), p_new)?;
            match newton_solve_with(disc, &guess, &NeumannData::power(p_new), config, deflation) {
                Ok(sol) => {
                    log::info!("p = {p_new}: {} Newton iterations", sol.iterations);
                    model.push(p_new, peak_heights(&disc.mesh, sol.values(), sites)?);
                    current = sol;
                }
                Err(e) if bisections < config.max_bisections => {
                    log::info!("step to p = {p_new} failed ({e}), bisecting");
                    bisections += 1;
                    step *= 0.5;
                }
                Err(e) => {
                    return Err(Error::Continuation {
                        p: p_new,
                        source: Box::new(e),
                    })
                }
            }
        }
        entries.push(entry(disc, current));
    }
    Ok(entries)
}

/// Solves at the first exponent of the schedule from bubble ansätze, then
/// continues through the rest.
pub fn solve_branch(disc: &Discretization, sites: &[f64], config: &SolveConfig) -> Result<SolutionBranch> {
    config.validate()?;
    if sites.is_empty() {
        return Err(Error::InvalidArgument("no bubble sites".into()));
    }
    let p0 = config.schedule[0];
    let seed = solve_from_ansatz(disc, sites, p0, config, &Deflation::none()).map_err(|e| Error::Continuation {
        p: p0,
        source: Box::new(e),
    })?;
    let provenance = format!("bubble ansatz at s = {sites:?}, p = {p0}; {}", seed.field.label);
    let entries = continue_in_p(disc, seed, sites, &config.schedule, config)?;
    Ok(SolutionBranch {
        shape: disc.mesh.curve().shape(),
        mesh: disc.mesh.spec().clone(),
        sites: sites.to_vec(),
        provenance,
        entries,
    })
}

/// Solves for `sites.len()` peaks at exponent `p`. When the direct solve
/// fails, the ansatz is solved at the first schedule exponent and continued
/// to `p`. The result must show one peak within `5h` of each site.
pub fn multi_peak_solve(
    disc: &Discretization,
    sites: &[f64],
    p: f64,
    config: &SolveConfig,
    deflation: &Deflation,
) -> Result<BoundarySolution> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("no peak locations".into()));
    }
    let curve = disc.mesh.curve();
    for (i, &a) in sites.iter().enumerate() {
        for &b in &sites[i + 1..] {
            if curve.arc_distance(a, b) < 1e-9 * curve.length() {
                return Err(Error::InvalidArgument(format!("peak locations {a} and {b} coincide")));
            }
        }
    }
    let charts = SiteCharts::new(&disc.mesh, sites);
    let solution = match solve_calibrated(disc, &charts, p, config, deflation) {
        Ok(s) => s,
        Err(e) => {
            let p0 = config.schedule[0];
            if p0 >= p {
                return Err(e);
            }
            log::info!("direct solve at p = {p} failed ({e}), continuing from p = {p0}");
            let seed = solve_calibrated(disc, &charts, p0, config, deflation)?;
            let entries = continue_with(disc, seed, sites, &[p0, p], config, deflation)?;
            entries.into_iter().last().expect("non-empty").solution
        }
    };
    check_peaks(&disc.mesh, &solution, sites)?;
    Ok(solution)
}

fn check_peaks(mesh: &DomainMesh, solution: &BoundarySolution, sites: &[f64]) -> Result<()> {
    let curve = mesh.curve();
    let m = sites.len();
    let separation = if m > 1 {
        let mut sorted: Vec<f64> = sites.iter().map(|&s| curve.wrap(s)).collect();
        sorted.sort_by(f64::total_cmp);
        let mut min = curve.length() - sorted[m - 1] + sorted[0];
        for w in sorted.windows(2) {
            min = min.min(w[1] - w[0]);
        }
        Some(0.5 * min)
    } else {
        None
    };
    let peaks = match detect_peaks(mesh, solution.values(), solution.p, separation) {
        Ok(peaks) => peaks,
        Err(Error::NoConcentration) => Vec::new(),
        Err(e) => return Err(e),
    };
    let limit = 5.0 * mesh.h();
    let matched = sites
        .iter()
        .filter(|&&s| peaks.iter().any(|pk| curve.arc_distance(pk.s, s) <= limit))
        .count();
    if peaks.len() != m || matched != m {
        return Err(Error::PeakCollapse {
            expected: m,
            found: matched.min(peaks.len()),
        });
    }
    Ok(())
}

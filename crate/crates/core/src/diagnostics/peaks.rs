use serde::{Deserialize, Serialize};

use crate::geometry::{ArcParam, DomainMesh};
use crate::solver::bubble_epsilon;
use crate::{Error, Result};

/// Settings for boundary peak detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakOptions {
    /// Minimum of `p u^{p−1}` at a peak.
    pub threshold: f64,
    /// Minimum arc separation; `0.2 L / max_peaks` when absent.
    pub separation: Option<f64>,
    pub max_peaks: usize,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            threshold: 10.0,
            separation: None,
            max_peaks: 4,
        }
    }
}

/// Boundary local maximum of a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub index: usize,
    pub vertex: usize,
    /// Curve parameter in `[0, L)`.
    pub s: f64,
    /// Exact curve parameter of the peak vertex.
    pub param: ArcParam,
    pub point: [f64; 2],
    pub amplitude: f64,
    /// `(p u^{p−1})^{−1}`.
    pub epsilon: f64,
}

impl PeakRecord {
    pub fn recompute_epsilon(&self, p: f64) -> f64 {
        bubble_epsilon(p, self.amplitude)
    }
}

pub fn detect_peaks(mesh: &DomainMesh, u: &[f64], p: f64, separation: Option<f64>) -> Result<Vec<PeakRecord>> {
    let options = PeakOptions {
        separation,
        ..Default::default()
    };
    detect_peaks_with(mesh, u, p, &options)
}

/// Boundary local maxima with `p u^{p−1}` above the threshold, accepted
/// greedily by height subject to the arc separation, sorted by `s`.
pub fn detect_peaks_with(mesh: &DomainMesh, u: &[f64], p: f64, options: &PeakOptions) -> Result<Vec<PeakRecord>> {
    if u.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} vertices",
            u.len(),
            mesh.vertex_count()
        )));
    }
    let curve = mesh.curve();
    let ring = mesh.boundary_vertices();
    let n = ring.len();
    let log_threshold = options.threshold.ln();
    let mut candidates: Vec<(f64, f64, usize)> = Vec::new();
    for k in 0..n {
        let v = ring[k];
        let (prev, next) = (u[ring[(k + n - 1) % n]], u[ring[(k + 1) % n]]);
        let x = u[v];
        if !(x > prev && x >= next) || x <= 0.0 {
            continue;
        }
        if p.ln() + (p - 1.0) * x.ln() <= log_threshold {
            continue;
        }
        let s = curve.wrap(mesh.boundary_param(v).expect("boundary vertex").value());
        candidates.push((x, s, v));
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let separation = options
        .separation
        .unwrap_or(0.2 * curve.length() / options.max_peaks.max(1) as f64);
    let mut accepted: Vec<(f64, f64, usize)> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|a| curve.arc_distance(a.1, c.1) >= separation) {
            accepted.push(c);
        }
    }
    if accepted.is_empty() {
        return Err(Error::NoConcentration);
    }
    accepted.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(index, (amplitude, s, vertex))| PeakRecord {
            index,
            vertex,
            s,
            param: mesh.boundary_param(vertex).expect("boundary vertex"),
            point: mesh.position(vertex),
            amplitude,
            epsilon: bubble_epsilon(p, amplitude),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, BoundaryCurve};

    #[test]
    fn small_constant_has_no_peak() {
        let m = generate_mesh(&BoundaryCurve::unit_disk(), 0.2, None).unwrap();
        let u = vec![0.5; m.vertex_count()];
        assert!(matches!(detect_peaks(&m, &u, 10.0, None), Err(Error::NoConcentration)));
    }

    #[test]
    fn finds_separated_maxima() {
        let m = generate_mesh(&BoundaryCurve::unit_disk(), 0.1, None).unwrap();
        let u: Vec<f64> = (0..m.vertex_count())
            .map(|i| {
                let x = m.position(i);
                1.0 + 0.5 * (2.0 * x[1].atan2(x[0])).cos() * (x[0] * x[0] + x[1] * x[1])
            })
            .collect();
        let peaks = detect_peaks(&m, &u, 20.0, None).unwrap();
        assert_eq!(peaks.len(), 2);
        assert!((peaks[1].s - peaks[0].s - std::f64::consts::PI).abs() < 0.1);
        for pk in &peaks {
            assert_eq!(pk.epsilon, pk.recompute_epsilon(20.0));
        }
    }
}

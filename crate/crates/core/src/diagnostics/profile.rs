use serde::{Deserialize, Serialize};

use super::peaks::PeakRecord;
use crate::fem::probe;
use crate::geometry::{DomainMesh, FlatChart};
use crate::green::{anchor_frame, source_in};
use crate::liouville::BubbleProfile;
use crate::{Error, Result};

/// Polar sampling grid on the half-disk `{|t| ≤ R, t² ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileGrid {
    pub window: f64,
    pub radial: usize,
    pub angular: usize,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self {
            window: 4.0,
            radial: 32,
            angular: 25,
        }
    }
}

impl ProfileGrid {
    /// Origin first, then rings of increasing radius from angle 0 to π.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0, 0.0]];
        for i in 1..=self.radial {
            let r = self.window * i as f64 / self.radial as f64;
            for k in 0..self.angular {
                let th = std::f64::consts::PI * k as f64 / (self.angular - 1) as f64;
                out.push([r * th.cos(), (r * th.sin()).max(0.0)]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSamples {
    pub t: Vec<[f64; 2]>,
    /// `(p / u(y)) (u(Ψ⁻¹(ε t)) − u(y))`.
    pub w: Vec<f64>,
    /// `sup |w − U|` over the grid.
    pub error: f64,
    pub max_w: f64,
}

/// Smallest diameter of the triangles touching vertex `v`.
pub(crate) fn local_size(mesh: &DomainMesh, v: usize) -> f64 {
    mesh.triangles()
        .iter()
        .enumerate()
        .filter(|(_, tri)| tri.contains(&v))
        .map(|(t, _)| mesh.triangle_diameter(t))
        .fold(f64::INFINITY, f64::min)
}

/// Rescaled field around a peak, sampled through the boundary chart.
pub fn rescale_profile(mesh: &DomainMesh, u: &[f64], p: f64, peak: &PeakRecord, grid: &ProfileGrid) -> Result<ProfileSamples> {
    if grid.radial == 0 || grid.angular < 2 || !(grid.window > 0.0) {
        return Err(Error::InvalidArgument("degenerate profile grid".into()));
    }
    let eps = peak.epsilon;
    let size = local_size(mesh, peak.vertex);
    if eps < 0.25 * size {
        return Err(Error::UnresolvedPeak {
            epsilon: eps,
            local_size: size,
        });
    }
    let chart = FlatChart::new(mesh.curve(), peak.param);
    let frame = anchor_frame(mesh, peak.s);
    let shift = source_in(mesh, peak.param, frame);
    let a = peak.amplitude;
    let bubble = BubbleProfile::canonical();
    let t = grid.points();
    let mut w = Vec::with_capacity(t.len());
    let (mut error, mut max_w) = (0.0f64, f64::NEG_INFINITY);
    for &ti in &t {
        let d = chart.pullback([eps * ti[0], eps * ti[1]])?;
        let x = [shift[0] + d[0], shift[1] + d[1]];
        let v = probe(mesh, u, frame, x)?.value;
        let wi = p / a * (v - a);
        error = error.max((wi - bubble.value(ti)).abs());
        max_w = max_w.max(wi);
        w.push(wi);
    }
    Ok(ProfileSamples { t, w, error, max_w })
}

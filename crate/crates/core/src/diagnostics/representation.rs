use serde::Serialize;

use super::arc::{power_integral, Arc};
use super::beta::nearest_peak_distance;
use super::peaks::PeakRecord;
use crate::fem::BoundaryQuadrature;
use crate::geometry::{norm, DomainMesh};
use crate::green::{GreenField, LOG_COEFFICIENT};
use crate::{Error, Result};

/// Levels of dyadic refinement toward the peak for the `log|x − y|` term.
const LOG_GRADING: usize = 30;

/// Splitting of `u(y) = ∫_∂Ω G(x, y) u^p(x) dσ(x)` near one peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Representation {
    pub radius: f64,
    pub amplitude: f64,
    /// `∫_{D_r} H(x, y) u^p dσ`.
    pub a: f64,
    /// `−(1/π) ∫_{D_r} log(|x − y|/ε) u^p dσ`.
    pub b: f64,
    /// `−(log ε / π) ∫_{D_r} u^p dσ`.
    pub c: f64,
    /// `∫_{∂Ω ∖ D_r} G(x, y) u^p dσ`.
    pub outside: f64,
    /// `|u(y) − (A + B + C)| / u(y)`.
    pub reconstruction_error: f64,
    /// `log m̂` solving `u(y) − A − B = 2 u(y) ((p−1)/p log m̂ + log p / p)`.
    pub implied_log_m: f64,
}

/// Gauss nodes on `[d0, d1]` refined dyadically toward whichever endpoint
/// sits at the peak (offset 0).
fn graded_nodes(quad: &BoundaryQuadrature, d0: f64, d1: f64, mut visit: impl FnMut(f64, f64)) {
    let rule = quad.rule();
    let mut panel = |a: f64, b: f64| {
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            visit(a + (b - a) * t, w * (b - a));
        }
    };
    let tiny = 1e-12 * (d1 - d0);
    let (near, far) = if d0.abs() <= tiny { (d0, d1) } else { (d1, d0) };
    let mut edge = far;
    for _ in 0..LOG_GRADING {
        let mid = near + 0.5 * (edge - near);
        panel(mid.min(edge), mid.max(edge));
        edge = mid;
    }
    panel(near.min(edge), near.max(edge));
}

/// Green representation terms of `u(y_j)` over `D_r(y_j)`; `green` must
/// have its source at the peak.
pub fn green_representation_check(
    mesh: &DomainMesh,
    u: &[f64],
    p: f64,
    peaks: &[PeakRecord],
    j: usize,
    green: &GreenField,
    r: f64,
) -> Result<Representation> {
    let peak = peaks
        .get(j)
        .ok_or_else(|| Error::InvalidArgument(format!("no peak with index {j}")))?;
    let curve = mesh.curve();
    if curve.arc_distance(green.source.value(), peak.s) > 1e-12 * curve.length() {
        return Err(Error::InvalidArgument("Green source is not at the peak".into()));
    }
    if r >= 0.5 * nearest_peak_distance(peaks, j) {
        return Err(Error::OverlappingPeaks { radius: r });
    }
    let quad = BoundaryQuadrature::default();
    let amp = peak.amplitude;
    let eps = peak.epsilon;
    let center = peak.param;
    let arc = Arc::ball(mesh, center, r)?;
    let regular = &green.regular.values;

    let mass = power_integral(mesh, u, p, &arc);
    let (mut a, mut b) = (0.0, 0.0);
    for piece in arc.pieces(mesh) {
        let (ua, ub) = piece.trace(mesh, u);
        let (ha, hb) = piece.trace(mesh, regular);
        let len = piece.d1 - piece.d0;
        quad.for_each_node(ua, ub, p, |t, w| {
            let f = (ua + (ub - ua) * t).max(0.0).powf(p);
            a += w * len * (ha + (hb - ha) * t) * f;
        });
        let mut log_term = |d: f64, w: f64| {
            let t = (d - piece.d0) / len;
            let f = (ua + (ub - ua) * t).max(0.0).powf(p);
            let dist = norm(curve.displacement(center.value(), d));
            b -= LOG_COEFFICIENT * w * (dist.ln() - eps.ln()) * f;
        };
        let tiny = 1e-12 * len;
        if piece.d0.abs() <= tiny || piece.d1.abs() <= tiny {
            graded_nodes(&quad, piece.d0, piece.d1, log_term);
        } else {
            quad.for_each_node(ua, ub, p, |t, w| log_term(piece.d0 + len * t, w * len));
        }
    }
    let c = -LOG_COEFFICIENT * eps.ln() * mass;

    let rest = Arc {
        center,
        lo: arc.hi,
        hi: arc.lo + curve.length(),
    };
    let mut outside = 0.0;
    for piece in rest.pieces(mesh) {
        let (ua, ub) = piece.trace(mesh, u);
        let (ha, hb) = piece.trace(mesh, regular);
        let len = piece.d1 - piece.d0;
        quad.for_each_node(ua, ub, p, |t, w| {
            let d = piece.d0 + len * t;
            let f = (ua + (ub - ua) * t).max(0.0).powf(p);
            let dist = norm(curve.displacement(center.value(), d));
            let g = -LOG_COEFFICIENT * dist.ln() + ha + (hb - ha) * t;
            outside += w * len * g * f;
        });
    }

    let implied_log_m = p / (p - 1.0) * ((amp - a - b) / (2.0 * amp) - p.ln() / p);
    Ok(Representation {
        radius: r,
        amplitude: amp,
        a,
        b,
        c,
        outside,
        reconstruction_error: (amp - (a + b + c)).abs() / amp,
        implied_log_m,
    })
}

use serde::Serialize;

use super::arc::Arc;
use crate::fem::{probe, recovered_gradient, BoundaryQuadrature};
use crate::geometry::{dot, norm, sub, ArcParam, DomainMesh, FlatChart};
use crate::green::{anchor_frame, closest_point_on_triangle, source_in};
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

/// Subdivision depth of triangles cut by the circle.
const CLIP_DEPTH: usize = 7;

/// Both sides of the local Pohozaev identity on `B_δ(x̄) ∩ Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PohozaevBalance {
    pub delta: f64,
    /// `∫_{B_δ ∩ Ω} u²`.
    pub lhs: f64,
    /// Contribution of `∂Ω ∩ B_δ`.
    pub boundary: f64,
    /// Contribution of `∂B_δ ∩ Ω`.
    pub circle: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs|)`, zero when both vanish.
    pub residual: f64,
}

impl PohozaevBalance {
    pub fn rhs(&self) -> f64 {
        self.boundary + self.circle
    }
}

/// `∫ (P1 field)²` over a triangle with vertex values `u`.
fn p1_square(area: f64, u: [f64; 3]) -> f64 {
    area / 6.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[0] * u[1] + u[1] * u[2] + u[2] * u[0])
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// `∫_{T ∩ B_δ(c)} (P1 field)²` by recursive splitting of cut triangles.
fn clipped_square(v: [[f64; 2]; 3], u: [f64; 3], c: [f64; 2], delta: f64, depth: usize) -> f64 {
    let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[1][1] - v[0][1]) * (v[2][0] - v[0][0])).abs();
    let inside = v.iter().filter(|x| norm(sub(**x, c)) <= delta).count();
    if inside == 3 {
        return p1_square(area, u);
    }
    if norm(sub(closest_point_on_triangle(v, c), c)) >= delta {
        return 0.0;
    }
    if depth == 0 {
        let g = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        return if norm(sub(g, c)) <= delta { p1_square(area, u) } else { 0.0 };
    }
    let m = [midpoint(v[0], v[1]), midpoint(v[1], v[2]), midpoint(v[2], v[0])];
    let um = [0.5 * (u[0] + u[1]), 0.5 * (u[1] + u[2]), 0.5 * (u[2] + u[0])];
    [
        ([v[0], m[0], m[2]], [u[0], um[0], um[2]]),
        ([m[0], v[1], m[1]], [um[0], u[1], um[1]]),
        ([m[2], m[1], v[2]], [um[2], um[1], u[2]]),
        ([m[0], m[1], m[2]], [um[0], um[1], um[2]]),
    ]
    .iter()
    .map(|&(sv, su)| clipped_square(sv, su, c, delta, depth - 1))
    .sum()
}

/// Signed angle from `a` to `b`.
fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).atan2(dot(a, b))
}

/// Local Pohozaev balance for a solution of `Δu = u` with `∂u/∂ν = u^p`.
pub fn pohozaev_residual(mesh: &DomainMesh, u: &[f64], p: f64, center: ArcParam, delta: f64) -> Result<PohozaevBalance> {
    pohozaev_residual_with(mesh, u, center, delta, |_, v| if v > 0.0 { v.powf(p) } else { 0.0 })
}

/// Local Pohozaev balance with the Neumann data `flux(s, u)` on `∂Ω`.
pub fn pohozaev_residual_with(
    mesh: &DomainMesh,
    u: &[f64],
    center: ArcParam,
    delta: f64,
    flux: impl Fn(ArcParam, f64) -> f64,
) -> Result<PohozaevBalance> {
    if u.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} vertices",
            u.len(),
            mesh.vertex_count()
        )));
    }
    let curve = mesh.curve();
    let chart = FlatChart::new(curve, center);
    if !(delta > 0.0) || delta >= chart.radius() {
        return Err(Error::OutsideChart { radius: chart.radius() });
    }
    let frame = anchor_frame(mesh, center.value());
    let c = source_in(mesh, center, frame);

    let mut lhs = 0.0;
    for tri in mesh.triangles() {
        let v = tri.map(|i| mesh.coords_in(frame, i));
        lhs += clipped_square(v, tri.map(|i| u[i]), c, delta, CLIP_DEPTH);
    }

    // ∂Ω ∩ B_δ with ∂_ν u from the data and ∂_τ u from the trace.
    let arc = Arc::ball(mesh, center, delta)?;
    let quad = BoundaryQuadrature::default();
    let mut boundary = 0.0;
    for piece in arc.pieces(mesh) {
        let (ua, ub) = piece.trace(mesh, u);
        let ut = piece.slope(mesh, u);
        let len = piece.d1 - piece.d0;
        let mut acc = 0.0;
        quad.for_each_node(ua, ub, 1.0, |t, w| {
            let d = piece.d0 + len * t;
            let s = center.shifted(d);
            let x = curve.displacement(center.value(), d);
            let nu = curve.normal(s.value());
            let tau = curve.tangent(s.value());
            let v = ua + (ub - ua) * t;
            let un = flux(s, v);
            let (xn, xt) = (dot(x, nu), dot(x, tau));
            acc += w * (0.5 * xn * (ut * ut + un * un + v * v) - (xt * ut + xn * un) * un);
        });
        boundary += acc * len;
    }

    // ∂B_δ ∩ Ω, swept through the inward normal, with recovered gradients.
    let nodal = recovered_gradient(mesh, u);
    let gx: Vec<f64> = nodal.iter().map(|g| g[0]).collect();
    let gy: Vec<f64> = nodal.iter().map(|g| g[1]).collect();
    let inward = chart.inward_normal();
    let e_hi = curve.displacement(center.value(), arc.hi);
    let e_lo = curve.displacement(center.value(), arc.lo);
    let a1 = angle_between(inward, e_hi);
    let a2 = angle_between(inward, e_lo);
    let (from, to) = (a1.min(a2), a1.max(a2));
    let panels = ((delta * (to - from)) / (0.25 * mesh.h())).ceil().max(16.0) as usize;
    let rule = GaussLegendre::new(4);
    let base = inward[1].atan2(inward[0]);
    let mut circle = 0.0;
    for k in 0..panels {
        let (p0, p1) = (
            from + (to - from) * k as f64 / panels as f64,
            from + (to - from) * (k + 1) as f64 / panels as f64,
        );
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let th = base + p0 + (p1 - p0) * x;
            let dir = [th.cos(), th.sin()];
            let x = [c[0] + delta * dir[0], c[1] + delta * dir[1]];
            let v = probe(mesh, u, frame, x)?.value;
            let g = [probe(mesh, &gx, frame, x)?.value, probe(mesh, &gy, frame, x)?.value];
            let ur = dot(g, dir);
            let f = 0.5 * (dot(g, g) + v * v) - ur * ur;
            circle += w * (p1 - p0) * delta * delta * f;
        }
    }

    let rhs = boundary + circle;
    let scale = lhs.abs() + rhs.abs();
    Ok(PohozaevBalance {
        delta,
        lhs,
        boundary,
        circle,
        residual: if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale },
    })
}

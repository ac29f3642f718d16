//! Neumann Green function of `Δ − 1` with boundary sources, split as
//! `G(x, y) = (1/π) log(1/|x − y|) + H(x, y)`, the Robin function
//! `R(y) = H(y, y)` and the concentration functional `φ_m`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::fem::{boundary_load, probe, trace_at, NodalField};
use crate::geometry::{cross, dot, norm, sub, ArcParam, BoundaryCurve, CurveShape, DomainMesh, Frame};
use crate::quadrature::{duffy_triangle, TriangleRule};
use crate::solver::Discretization;
use crate::{Error, Result};

/// Coefficient of the logarithmic singularity at a boundary source.
pub const LOG_COEFFICIENT: f64 = 1.0 / PI;

/// Below this source distance the boundary datum uses its curvature limit.
const KERNEL_LIMIT_DISTANCE: f64 = 1e-6;
/// Gauss points per direction in the Duffy rule near the source.
const DUFFY_POINTS: usize = 12;

/// `G(·, y)` for a boundary source `y = γ(s_y)`.
#[derive(Debug, Clone)]
pub struct GreenField {
    pub source: ArcParam,
    pub point: [f64; 2],
    /// `H(·, y)` at the mesh vertices.
    pub regular: NodalField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GreenValue {
    pub value: f64,
    pub gradient: [f64; 2],
}

/// `s − s_y` reduced to `(−L/2, L/2]`, exact when both share a base.
pub(crate) fn signed_arc(curve: &BoundaryCurve, s: ArcParam, s_y: ArcParam) -> f64 {
    let len = curve.length();
    let d = s.minus(&s_y);
    d - len * (d / len).round()
}

/// Anchor frame sitting at `s`, or the global frame.
pub(crate) fn anchor_frame(mesh: &DomainMesh, s: f64) -> Frame {
    let curve = mesh.curve();
    mesh.anchors()
        .iter()
        .position(|a| curve.arc_distance(a.param.value(), s) < 1e-12 * curve.length())
        .map_or(Frame::Global, Frame::Anchor)
}

/// `y` relative to the origin of `frame`.
pub(crate) fn source_in(mesh: &DomainMesh, source: ArcParam, frame: Frame) -> [f64; 2] {
    let curve = mesh.curve();
    match frame {
        Frame::Global => curve.point_at(&source),
        Frame::Anchor(k) => {
            let a = &mesh.anchors()[k];
            curve.displacement(a.param.value(), signed_arc(curve, source, a.param))
        }
    }
}

/// `⟨x − y, ν(x)⟩ / |x − y|²` for `x = γ(s)`, `y = γ(s_y)`.
pub fn boundary_kernel(curve: &BoundaryCurve, s_y: ArcParam, s: ArcParam) -> f64 {
    let ds = signed_arc(curve, s, s_y);
    if ds.abs() < KERNEL_LIMIT_DISTANCE {
        return 0.5 * curve.curvature(s_y.value());
    }
    let d = curve.displacement(s_y.value(), ds);
    dot(d, curve.normal(s.value())) / dot(d, d)
}

fn closest_point_on_segment(a: [f64; 2], b: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let e = sub(b, a);
    let t = (dot(sub(y, a), e) / dot(e, e)).clamp(0.0, 1.0);
    [a[0] + t * e[0], a[1] + t * e[1]]
}

pub(crate) fn closest_point_on_triangle(v: [[f64; 2]; 3], y: [f64; 2]) -> [f64; 2] {
    let area2 = cross(sub(v[1], v[0]), sub(v[2], v[0]));
    let inside = (0..3).all(|k| cross(sub(v[(k + 1) % 3], v[k]), sub(y, v[k])) * area2.signum() >= 0.0);
    if inside {
        return y;
    }
    (0..3)
        .map(|k| closest_point_on_segment(v[k], v[(k + 1) % 3], y))
        .min_by(|a, b| norm(sub(*a, y)).total_cmp(&norm(sub(*b, y))))
        .expect("three edges")
}

/// `∫_T log(1/|x − y|) λ_k(x) dx` for the three barycentric functions.
fn log_moments(v: [[f64; 2]; 3], y: [f64; 2]) -> [f64; 3] {
    let area2 = cross(sub(v[1], v[0]), sub(v[2], v[0]));
    let bary = |x: [f64; 2]| {
        let l1 = cross(sub(v[2], v[1]), sub(x, v[1])) / area2;
        let l2 = cross(sub(v[0], v[2]), sub(x, v[2])) / area2;
        [l1, l2, 1.0 - l1 - l2]
    };
    let kernel = |x: [f64; 2]| -norm(sub(x, y)).ln();
    let diam = norm(sub(v[1], v[0])).max(norm(sub(v[2], v[1]))).max(norm(sub(v[0], v[2])));
    let q = closest_point_on_triangle(v, y);
    let mut out = [0.0; 3];
    if norm(sub(q, y)) > 2.0 * diam {
        let rule = TriangleRule::degree5();
        let area = 0.5 * area2.abs();
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            let x = [
                b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
            ];
            let k = kernel(x);
            for j in 0..3 {
                out[j] += w * area * k * b[j];
            }
        }
        return out;
    }
    for e in 0..3 {
        let sub_tri = [q, v[e], v[(e + 1) % 3]];
        let a2 = cross(sub(sub_tri[1], q), sub(sub_tri[2], q)).abs();
        if a2 <= 1e-14 * diam * diam {
            continue;
        }
        for j in 0..3 {
            out[j] += duffy_triangle(sub_tri, DUFFY_POINTS, |x| kernel(x) * bary(x)[j]);
        }
    }
    out
}

/// Solves for `H(·, y)`: `ΔH = H + (1/π) log(1/|x − y|)` in `Ω` with
/// `∂H/∂ν = (1/π)⟨x − y, ν⟩/|x − y|²` on `∂Ω`.
pub fn solve_regular_part(disc: &Discretization, source: ArcParam) -> Result<GreenField> {
    let mesh = &disc.mesh;
    let curve = mesh.curve();
    let source = ArcParam::with_offset(source.base, source.offset);
    let mut load = boundary_load(mesh, &disc.quadrature, |s| LOG_COEFFICIENT * boundary_kernel(curve, source, s));
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let frame = mesh.triangle_frame(t);
        let v = tri.map(|i| mesh.coords_in(frame, i));
        let y = source_in(mesh, source, frame);
        let m = log_moments(v, y);
        for k in 0..3 {
            load[tri[k]] -= LOG_COEFFICIENT * m[k];
        }
    }
    if load.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature(format!(
            "non-finite load for source s = {}; refine the mesh near the source",
            source.value()
        )));
    }
    let values = disc.solve_volume(&load);
    Ok(GreenField {
        source,
        point: curve.point_at(&source),
        regular: NodalField::new(values, format!("regular part, source s={}", source.value()))?,
    })
}

impl GreenField {
    /// `G(x, y)` and `∇ₓG` for `x` given relative to `frame`.
    pub fn eval_in(&self, mesh: &DomainMesh, frame: Frame, x: [f64; 2]) -> Result<GreenValue> {
        let d = sub(x, source_in(mesh, self.source, frame));
        let r2 = dot(d, d);
        if r2 == 0.0 || !r2.is_finite() {
            return Err(Error::SingularPoint);
        }
        let h = probe(mesh, &self.regular.values, frame, x)?;
        Ok(GreenValue {
            value: -0.5 * LOG_COEFFICIENT * r2.ln() + h.value,
            gradient: [
                h.gradient[0] - LOG_COEFFICIENT * d[0] / r2,
                h.gradient[1] - LOG_COEFFICIENT * d[1] / r2,
            ],
        })
    }

    /// `G(γ(s), y)`.
    pub fn eval_boundary(&self, mesh: &DomainMesh, s: ArcParam) -> Result<f64> {
        let curve = mesh.curve();
        let ds = signed_arc(curve, s, self.source);
        let r = norm(curve.displacement(self.source.value(), ds));
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        Ok(-LOG_COEFFICIENT * r.ln() + trace_at(mesh, &self.regular.values, s)?)
    }

    /// `H(y, y)`.
    pub fn robin(&self, mesh: &DomainMesh) -> Result<f64> {
        trace_at(mesh, &self.regular.values, self.source)
    }

    /// Least-squares slope of `G` against `log(1/r)` along the inward
    /// normal at the given distances.
    pub fn log_coefficient_fit(&self, mesh: &DomainMesh, radii: &[f64]) -> Result<f64> {
        let curve = mesh.curve();
        let n = curve.normal(self.source.value());
        let frame = anchor_frame(mesh, self.source.value());
        let y = source_in(mesh, self.source, frame);
        let mut pts = Vec::with_capacity(radii.len());
        for &r in radii {
            let x = [y[0] - r * n[0], y[1] - r * n[1]];
            pts.push((-r.ln(), self.eval_in(mesh, frame, x)?.value));
        }
        let k = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / k, sy / k);
        let (num, den) = pts
            .iter()
            .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
        Ok(num / den)
    }
}

/// `G(x, y)` at absolute `x`.
pub fn eval_green(field: &GreenField, mesh: &DomainMesh, x: [f64; 2]) -> Result<GreenValue> {
    field.eval_in(mesh, Frame::Global, x)
}

/// `R(γ(s)) = H(γ(s), γ(s))`.
pub fn robin(disc: &Discretization, s: f64) -> Result<f64> {
    solve_regular_part(disc, ArcParam::new(s))?.robin(&disc.mesh)
}

/// Boundary points with the cached ingredients of `φ_m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiConfiguration {
    pub points: Vec<f64>,
    pub robin: Vec<f64>,
    /// Symmetrized `(G(xᵢ, x_h) + G(x_h, xᵢ))/2`, zero on the diagonal.
    pub pair_green: Vec<Vec<f64>>,
    pub value: f64,
}

fn check_points(curve: &BoundaryCurve, points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("φ needs at least one point".into()));
    }
    let min = 1e-6 * curve.length();
    for (i, &a) in points.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite point {a}")));
        }
        for &b in &points[i + 1..] {
            if curve.arc_distance(a, b) <= min {
                return Err(Error::InvalidArgument(format!("coincident points {a} and {b}")));
            }
        }
    }
    Ok(())
}

/// `φ_m = Σ H(xᵢ, xᵢ) + Σ_{i≠h} G(xᵢ, x_h)`.
pub fn phi_value(disc: &Discretization, points: &[f64]) -> Result<PhiConfiguration> {
    let curve = disc.mesh.curve();
    check_points(curve, points)?;
    let points: Vec<f64> = points.iter().map(|&s| curve.wrap(s)).collect();
    let fields = points
        .iter()
        .map(|&s| solve_regular_part(disc, ArcParam::new(s)))
        .collect::<Result<Vec<_>>>()?;
    let m = points.len();
    let robin = fields.iter().map(|f| f.robin(&disc.mesh)).collect::<Result<Vec<_>>>()?;
    let mut raw = vec![vec![0.0; m]; m];
    for i in 0..m {
        for h in 0..m {
            if i != h {
                raw[i][h] = fields[h].eval_boundary(&disc.mesh, ArcParam::new(points[i]))?;
            }
        }
    }
    let mut pair_green = vec![vec![0.0; m]; m];
    let mut value: f64 = robin.iter().sum();
    for i in 0..m {
        for h in 0..m {
            if i != h {
                pair_green[i][h] = 0.5 * (raw[i][h] + raw[h][i]);
                value += pair_green[i][h];
            }
        }
    }
    Ok(PhiConfiguration {
        points,
        robin,
        pair_green,
        value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiGradient {
    /// `∂φ/∂sᵢ`.
    pub components: Vec<f64>,
    pub step: f64,
}

impl PhiGradient {
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Finite-difference step `max(10⁻³ L, 2h)`.
pub fn phi_step(disc: &Discretization) -> f64 {
    (1e-3 * disc.mesh.curve().length()).max(2.0 * disc.mesh.h())
}

/// Central differences of `φ_m` in each `sᵢ`.
pub fn phi_gradient(disc: &Discretization, points: &[f64]) -> Result<PhiGradient> {
    phi_gradient_with_step(disc, points, phi_step(disc))
}

pub fn phi_gradient_with_step(disc: &Discretization, points: &[f64], step: f64) -> Result<PhiGradient> {
    let curve = disc.mesh.curve();
    check_points(curve, points)?;
    let mut step = step;
    let clearance = |st: f64| {
        points.iter().enumerate().all(|(i, &a)| {
            points
                .iter()
                .enumerate()
                .all(|(h, &b)| i == h || curve.arc_distance(a, b) > 2.0 * st)
        })
    };
    if !clearance(step) {
        step *= 0.5;
        if !clearance(step) {
            return Err(Error::InvalidArgument(format!(
                "difference step {step} collides with a neighbouring point"
            )));
        }
    }
    let mut components = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let mut plus = points.to_vec();
        let mut minus = points.to_vec();
        plus[i] += step;
        minus[i] -= step;
        let fp = phi_value(disc, &plus)?.value;
        let fm = phi_value(disc, &minus)?.value;
        components.push((fp - fm) / (2.0 * step));
    }
    Ok(PhiGradient { components, step })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    /// Stop once `|∇φ|` falls below this.
    pub tolerance: f64,
    pub max_steps: usize,
    /// First trial step, as a fraction of the boundary length.
    pub initial_step: f64,
    /// Critical points closer than this fraction of `L` are merged.
    pub dedup_fraction: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_steps: 100,
            initial_step: 0.05,
            dedup_fraction: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub configuration: PhiConfiguration,
    pub gradient: PhiGradient,
    pub iterations: usize,
    pub converged: bool,
    /// The line search found no descent before reaching the tolerance,
    /// typically at the discretization noise floor of `∇φ`.
    pub stalled: bool,
}

/// Gradient descent on `φ_m` from each start (backtracking on the value),
/// with results merged when they coincide, up to rotation on the disk.
pub fn phi_critical_search(
    disc: &Discretization,
    m: usize,
    starts: &[Vec<f64>],
    options: &SearchOptions,
) -> Result<Vec<CriticalPoint>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let curve = disc.mesh.curve();
    let len = curve.length();
    let mut found: Vec<CriticalPoint> = Vec::new();
    for start in starts {
        if start.len() != m {
            return Err(Error::InvalidArgument(format!("start {start:?} does not have {m} points")));
        }
        let mut config = phi_value(disc, start)?;
        let mut grad = phi_gradient(disc, &config.points)?;
        let mut alpha = options.initial_step * len;
        let mut iterations = 0;
        let mut converged = grad.norm() < options.tolerance;
        let mut stalled = false;
        while !converged && iterations < options.max_steps {
            iterations += 1;
            let g = grad.norm();
            let mut accepted = None;
            let mut trial_alpha = alpha;
            for _ in 0..20 {
                let trial: Vec<f64> = config
                    .points
                    .iter()
                    .zip(&grad.components)
                    .map(|(s, gi)| curve.wrap(s - trial_alpha * gi / g))
                    .collect();
                if let Ok(c) = phi_value(disc, &trial) {
                    if c.value < config.value - 1e-4 * trial_alpha * g {
                        accepted = Some(c);
                        break;
                    }
                }
                trial_alpha *= 0.5;
            }
            let Some(c) = accepted else {
                stalled = true;
                break;
            };
            alpha = (2.0 * trial_alpha).min(options.initial_step * len);
            config = c;
            grad = phi_gradient(disc, &config.points)?;
            converged = grad.norm() < options.tolerance;
        }
        let candidate = CriticalPoint {
            configuration: config,
            gradient: grad,
            iterations,
            converged,
            stalled,
        };
        let duplicate = found.iter().any(|f| {
            same_configuration(
                curve,
                &f.configuration.points,
                &candidate.configuration.points,
                options.dedup_fraction * len,
            )
        });
        if !duplicate {
            found.push(candidate);
        }
    }
    Ok(found)
}

/// Point sets equal within `tol`; on the disk, compared by their gaps.
fn same_configuration(curve: &BoundaryCurve, a: &[f64], b: &[f64], tol: f64) -> bool {
    let sorted = |x: &[f64]| {
        let mut v: Vec<f64> = x.iter().map(|&s| curve.wrap(s)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let m = a.len();
    if matches!(curve.shape(), CurveShape::Disk { .. }) {
        let gaps = |v: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|i| {
                    let next = if i + 1 < m { v[i + 1] } else { v[0] + curve.length() };
                    next - v[i]
                })
                .collect()
        };
        let (ga, gb) = (gaps(&a), gaps(&b));
        (0..m).any(|shift| (0..m).all(|i| (ga[i] - gb[(i + shift) % m]).abs() <= tol))
    } else {
        (0..m).any(|shift| (0..m).all(|i| curve.arc_distance(a[i], b[(i + shift) % m]) <= tol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, Grading};
    use crate::quadrature::adaptive_integrate;
    use crate::solver::SolveConfig;

    #[test]
    fn kernel_limit_is_half_curvature() {
        let c = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        let s_y = ArcParam::new(0.7);
        let near = boundary_kernel(&c, s_y, s_y.shifted(2e-6));
        let limit = boundary_kernel(&c, s_y, s_y.shifted(1e-9));
        assert!((near - limit).abs() < 1e-5, "{near} {limit}");
        let disk = BoundaryCurve::unit_disk();
        let k = boundary_kernel(&disk, ArcParam::new(0.3), ArcParam::new(2.0));
        assert!((k - 0.5).abs() < 1e-14);
    }

    #[test]
    fn log_moments_match_adaptive_quadrature() {
        let v = [[0.0, 0.0], [0.3, 0.05], [0.1, 0.25]];
        for y in [[0.0, 0.0], [0.15, 0.1], [0.15, 0.02], [0.5, -0.1]] {
            let m = log_moments(v, y);
            let total: f64 = m.iter().sum();
            // Polar integration about y over the signed triangles (y, a, b).
            let mut reference = 0.0;
            for e in 0..3 {
                let (a, b) = (sub(v[e], y), sub(v[(e + 1) % 3], y));
                if cross(a, b).abs() < 1e-15 {
                    continue;
                }
                let n = sub(b, a);
                let ta = a[1].atan2(a[0]);
                let mut dt = b[1].atan2(b[0]) - ta;
                if dt > PI {
                    dt -= 2.0 * PI;
                } else if dt < -PI {
                    dt += 2.0 * PI;
                }
                let mut f = |t: f64| {
                    let th = ta + t * dt;
                    let rho = cross(a, n) / cross([th.cos(), th.sin()], n);
                    -rho * rho * (2.0 * rho.ln() - 1.0) / 4.0
                };
                reference += dt * adaptive_integrate(&mut f, 0.0, 1.0, 1e-13).unwrap();
            }
            let reference = reference.abs();
            assert!((total - reference).abs() < 1e-6 * reference, "{total} vs {reference}");
        }
    }

    fn disk(h: f64) -> Discretization {
        let c = BoundaryCurve::unit_disk();
        let g = Grading::new(vec![0.0], 8.0);
        Discretization::new(generate_mesh(&c, h, Some(&g)).unwrap(), &SolveConfig::default()).unwrap()
    }

    #[test]
    fn green_positive_and_log_coefficient() {
        let d = disk(0.1);
        let g = solve_regular_part(&d, ArcParam::new(0.0)).unwrap();
        for i in 0..d.mesh.vertex_count() {
            let x = d.mesh.position(i);
            if norm(sub(x, g.point)) > 1e-3 {
                assert!(eval_green(&g, &d.mesh, x).unwrap().value > 0.0);
            }
        }
        let radii: Vec<f64> = (0..8).map(|k| 1e-3 * 1.8f64.powi(k)).collect();
        let a = g.log_coefficient_fit(&d.mesh, &radii).unwrap();
        assert!((a * PI - 1.0).abs() < 0.05, "{}", a * PI);
    }

    #[test]
    fn evaluation_at_source_is_singular() {
        let d = disk(0.2);
        let g = solve_regular_part(&d, ArcParam::new(0.0)).unwrap();
        assert!(matches!(eval_green(&g, &d.mesh, [1.0, 0.0]), Err(Error::SingularPoint)));
    }

    #[test]
    fn phi_rejects_coincident_points() {
        let d = disk(0.2);
        assert!(phi_value(&d, &[1.0, 1.0]).is_err());
    }
}

use serde::Serialize;

use super::assembly::{barycentric_gradients, LinearSystem};
use super::boundary::{boundary_integral, pow, trace_at, BoundaryQuadrature};
use crate::geometry::{cross, dot, sub, ArcParam, DomainMesh, Frame};
use crate::quadrature::TriangleRule;
use crate::sparse::CholeskySolver;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub gradient: [f64; 2],
    pub triangle: usize,
}

fn triangle_gradient(mesh: &DomainMesh, u: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangles()[t];
    let frame = mesh.triangle_frame(t);
    let v = tri.map(|i| mesh.coords_in(frame, i));
    let area2 = cross(sub(v[1], v[0]), sub(v[2], v[0]));
    let g = barycentric_gradients(v, area2);
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += u[tri[k]] * g[k][0];
        out[1] += u[tri[k]] * g[k][1];
    }
    out
}

/// P1 value and (piecewise constant) gradient at `x`, given in `frame`.
pub fn probe(mesh: &DomainMesh, u: &[f64], frame: Frame, x: [f64; 2]) -> Result<Probe> {
    let hit = match mesh.locate(frame, x) {
        Some(hit) => hit,
        None => {
            let o = mesh.frame_origin(frame);
            let abs = [o[0] + x[0], o[1] + x[1]];
            let curve = mesh.curve();
            let s = curve.closest_param(abs);
            let outside = dot(sub(abs, curve.point(s)), curve.normal(s));
            let found = if outside <= 1e-12 { mesh.locate_nearest(frame, x) } else { None };
            found.ok_or(Error::OutsideDomain { x: abs[0], y: abs[1] })?
        }
    };
    let (t, l) = hit;
    let tri = mesh.triangles()[t];
    Ok(Probe {
        value: l[0] * u[tri[0]] + l[1] * u[tri[1]] + l[2] * u[tri[2]],
        gradient: triangle_gradient(mesh, u, t),
        triangle: t,
    })
}

/// Nodal gradients recovered by area-weighted averaging of the element
/// gradients around each vertex.
pub fn recovered_gradient(mesh: &DomainMesh, u: &[f64]) -> Vec<[f64; 2]> {
    let n = mesh.vertex_count();
    let mut g = vec![[0.0; 2]; n];
    let mut w = vec![0.0; n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let a = mesh.triangle_area(t).abs();
        let gt = triangle_gradient(mesh, u, t);
        for &i in tri {
            g[i][0] += a * gt[0];
            g[i][1] += a * gt[1];
            w[i] += a;
        }
    }
    for (gi, wi) in g.iter_mut().zip(&w) {
        if *wi > 0.0 {
            gi[0] /= wi;
            gi[1] /= wi;
        }
    }
    g
}

/// Trace value at the curve parameter `s`.
pub fn probe_boundary(mesh: &DomainMesh, u: &[f64], s: ArcParam) -> Result<f64> {
    trace_at(mesh, u, s)
}

/// Nodal interpolant of `f` (absolute coordinates).
pub fn interpolate(mesh: &DomainMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    (0..mesh.vertex_count()).map(|i| f(mesh.position(i))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    /// `∫(|∇u|² + u²)`.
    pub dirichlet: f64,
    /// `∫_∂Ω u^{p+1}`.
    pub boundary_lp: f64,
    /// `½ dirichlet − boundary_lp / (p + 1)`.
    pub free_energy: f64,
}

pub fn energy(
    mesh: &DomainMesh,
    system: &LinearSystem,
    u: &[f64],
    p: f64,
    quad: &BoundaryQuadrature,
) -> EnergyRecord {
    let dirichlet = system.volume.inner(u, u);
    let boundary_lp = boundary_integral(mesh, u, p + 1.0, quad, |v| pow(v, p + 1.0));
    EnergyRecord {
        dirichlet,
        boundary_lp,
        free_energy: 0.5 * dirichlet - boundary_lp / (p + 1.0),
    }
}

/// Errors of a P1 field against an exact solution on the meshed polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldErrors {
    pub l2: f64,
    pub h1_semi: f64,
}

impl FieldErrors {
    pub fn compute(mesh: &DomainMesh, u: &[f64], exact: impl Fn([f64; 2]) -> (f64, [f64; 2])) -> Self {
        let rule = TriangleRule::degree5();
        let (mut l2, mut h1) = (0.0, 0.0);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let x = tri.map(|i| mesh.position(i));
            let area = mesh.triangle_area(t);
            let g = triangle_gradient(mesh, u, t);
            for (b, w) in rule.points.iter().zip(&rule.weights) {
                let p = [
                    b[0] * x[0][0] + b[1] * x[1][0] + b[2] * x[2][0],
                    b[0] * x[0][1] + b[1] * x[1][1] + b[2] * x[2][1],
                ];
                let uh = b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]];
                let (ue, ge) = exact(p);
                l2 += w * area * (uh - ue).powi(2);
                h1 += w * area * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
            }
        }
        Self {
            l2: l2.sqrt(),
            h1_semi: h1.sqrt(),
        }
    }
}

/// Solves `(K + M) u = load`.
pub fn solve_linear_neumann(system: &LinearSystem, load: &[f64]) -> Result<Vec<f64>> {
    Ok(CholeskySolver::new(&system.volume)?.solve(load))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_volume, boundary_load};
    use crate::geometry::{generate_mesh, BoundaryCurve, Grading};
    use crate::quadrature::adaptive_integrate;
    use std::f64::consts::PI;

    #[test]
    fn constant_energy() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.1, None).unwrap();
        let sys = assemble_volume(&m).unwrap();
        let q = BoundaryQuadrature::default();
        let n = m.vertex_count();
        let e = energy(&m, &sys, &vec![1.0; n], 5.0, &q);
        // The polygon area converges to π at O(h²).
        assert!((e.dirichlet - PI).abs() < 0.02);
        assert!((e.boundary_lp - 2.0 * PI).abs() < 1e-12);
        assert!((e.free_energy - (0.5 * e.dirichlet - 2.0 * PI / 6.0)).abs() < 1e-12);
        let z = energy(&m, &sys, &vec![0.0; n], 5.0, &q);
        assert_eq!((z.dirichlet, z.boundary_lp, z.free_energy), (0.0, 0.0, 0.0));
    }

    #[test]
    fn cosh_dirichlet_energy() {
        // ∫_disk sinh² + cosh² = ∫_disk cosh(2x) = 2 ∫_{-1}^{1} cosh(2x) √(1−x²) dx.
        let mut f = |x: f64| 2.0 * (2.0 * x).cosh() * (1.0 - x * x).max(0.0).sqrt();
        let exact = adaptive_integrate(&mut f, -1.0, 1.0, 1e-13).unwrap();
        let c = BoundaryCurve::unit_disk();
        let mut prev = f64::INFINITY;
        for h in [0.1, 0.05, 0.025] {
            let m = generate_mesh(&c, h, None).unwrap();
            let sys = assemble_volume(&m).unwrap();
            let u = interpolate(&m, |x| x[0].cosh());
            let err = (sys.volume.inner(&u, &u) - exact).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 2e-3, "{prev}");
    }

    #[test]
    fn probe_affine_exact() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.2, Some(&Grading::new(vec![1.0], 8.0).with_core(1e-9))).unwrap();
        let u = interpolate(&m, |x| 0.5 + 2.0 * x[0] - 3.0 * x[1]);
        for t in 0..m.triangles().len() {
            let g = triangle_gradient(&m, &u, t);
            let tol = if m.triangle_frame(t) == Frame::Global { 1e-9 } else { 1e-4 };
            assert!((g[0] - 2.0).abs() < tol && (g[1] + 3.0).abs() < tol, "t={t} {g:?}");
        }
        let i = m.triangles()[7][1];
        let pr = probe(&m, &u, Frame::Global, m.position(i)).unwrap();
        assert!((pr.value - u[i]).abs() < 1e-14);
        let ones = vec![1.0; m.vertex_count()];
        let tri = m.triangles()[3].map(|k| m.position(k));
        let cen = [(tri[0][0] + tri[1][0] + tri[2][0]) / 3.0, (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0];
        assert!((probe(&m, &ones, Frame::Global, cen).unwrap().value - 1.0).abs() < 1e-14);
        assert!(probe(&m, &u, Frame::Global, [1.5, 0.0]).is_err());
        // A point on the curve between two boundary nodes.
        let on = c.point(2.0 + 0.5 * 0.2);
        assert!(probe(&m, &u, Frame::Global, on).is_ok());
    }

    #[test]
    fn linear_neumann_load_is_consistent() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.1, None).unwrap();
        let sys = assemble_volume(&m).unwrap();
        let q = BoundaryQuadrature::default();
        let load = boundary_load(&m, &q, |s| {
            let x = c.point_at(&s);
            x[0].sinh() * c.normal(s.value())[0]
        });
        let u = solve_linear_neumann(&sys, &load).unwrap();
        let e = FieldErrors::compute(&m, &u, |x| (x[0].cosh(), [x[0].sinh(), 0.0]));
        assert!(e.l2 < 1e-2 && e.h1_semi < 0.1, "{e:?}");
    }
}

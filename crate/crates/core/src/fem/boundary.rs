use crate::geometry::{ArcParam, DomainMesh};
use crate::quadrature::GaussLegendre;
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Gauss rule on boundary edges with dyadic subdivision where `u^p`
/// varies strongly along the edge.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    rule: GaussLegendre,
    pub degree: usize,
    pub max_depth: usize,
    /// Subdivide while `(max u / min u)^p` exceeds this ratio.
    pub ratio: f64,
}

impl Default for BoundaryQuadrature {
    fn default() -> Self {
        Self::new(8, 6)
    }
}

impl BoundaryQuadrature {
    pub fn new(degree: usize, max_depth: usize) -> Self {
        Self {
            rule: GaussLegendre::with_degree(degree),
            degree,
            max_depth,
            ratio: 10.0,
        }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Calls `visit(t, w)` with nodes `t ∈ [0, 1]` and weights summing to 1
    /// for a linear trace from `ua` to `ub` raised to the power `p`.
    pub fn for_each_node(&self, ua: f64, ub: f64, p: f64, mut visit: impl FnMut(f64, f64)) {
        self.split(ua, ub, p, 0.0, 1.0, 0, &mut visit);
    }

    #[allow(clippy::too_many_arguments)]
    fn split(&self, ua: f64, ub: f64, p: f64, t0: f64, t1: f64, depth: usize, visit: &mut impl FnMut(f64, f64)) {
        let u0 = ua + (ub - ua) * t0;
        let u1 = ua + (ub - ua) * t1;
        let (lo, hi) = (u0.abs().min(u1.abs()), u0.abs().max(u1.abs()));
        let steep = hi > 0.0 && (lo <= 0.0 || p * (hi / lo).ln() > self.ratio.ln());
        if steep && depth < self.max_depth {
            let mid = 0.5 * (t0 + t1);
            self.split(ua, ub, p, t0, mid, depth + 1, visit);
            self.split(ua, ub, p, mid, t1, depth + 1, visit);
            return;
        }
        let len = t1 - t0;
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            visit(t0 + len * x, w * len);
        }
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() < 1e9
}

pub(crate) fn pow(u: f64, p: f64) -> f64 {
    if u >= 0.0 {
        u.powf(p)
    } else {
        u.powi(p as i32)
    }
}

fn check_trace(mesh: &DomainMesh, u: &[f64], p: f64) -> Result<()> {
    if u.len() != mesh.vertex_count() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} vertices",
            u.len(),
            mesh.vertex_count()
        )));
    }
    if !is_integer(p) {
        for e in mesh.boundary_edges() {
            for &v in &e.v {
                if u[v] < 0.0 {
                    return Err(Error::NegativeTrace { vertex: v, value: u[v], p });
                }
            }
        }
    }
    Ok(())
}

/// Nonlinear boundary vector `∫ g(u) φᵢ` and optionally the matrix
/// `∫ g'(u) φᵢ φⱼ`, for `g(u) = u^p`.
#[derive(Debug, Clone)]
pub struct BoundaryTerms {
    pub residual: Vec<f64>,
    pub jacobian: Option<CsrMatrix>,
}

pub fn boundary_terms(
    mesh: &DomainMesh,
    u: &[f64],
    p: f64,
    quad: &BoundaryQuadrature,
    with_jacobian: bool,
) -> Result<BoundaryTerms> {
    check_trace(mesh, u, p)?;
    let n = mesh.vertex_count();
    let mut r = vec![0.0; n];
    let mut trip = Vec::with_capacity(if with_jacobian { 4 * mesh.boundary_edges().len() } else { 0 });
    for e in mesh.boundary_edges() {
        let [a, b] = e.v;
        let len = e.arc_length();
        let (ua, ub) = (u[a], u[b]);
        let (mut ra, mut rb) = (0.0, 0.0);
        let (mut jaa, mut jab, mut jbb) = (0.0, 0.0, 0.0);
        quad.for_each_node(ua, ub, p, |t, w| {
            let v = ua + (ub - ua) * t;
            let f = pow(v, p);
            ra += w * f * (1.0 - t);
            rb += w * f * t;
            if with_jacobian {
                let d = p * pow(v, p - 1.0);
                jaa += w * d * (1.0 - t) * (1.0 - t);
                jab += w * d * (1.0 - t) * t;
                jbb += w * d * t * t;
            }
        });
        r[a] += ra * len;
        r[b] += rb * len;
        if with_jacobian {
            trip.push((a, a, jaa * len));
            trip.push((a, b, jab * len));
            trip.push((b, a, jab * len));
            trip.push((b, b, jbb * len));
        }
    }
    Ok(BoundaryTerms {
        residual: r,
        jacobian: with_jacobian.then(|| CsrMatrix::from_triplets(n, &trip)),
    })
}

/// `∫_∂Ω u^p φᵢ dσ`.
pub fn boundary_residual(mesh: &DomainMesh, u: &[f64], p: f64, quad: &BoundaryQuadrature) -> Result<Vec<f64>> {
    Ok(boundary_terms(mesh, u, p, quad, false)?.residual)
}

/// `∫_∂Ω f(u) dσ`, subdividing as for `u^p`.
pub fn boundary_integral(
    mesh: &DomainMesh,
    u: &[f64],
    p: f64,
    quad: &BoundaryQuadrature,
    f: impl Fn(f64) -> f64,
) -> f64 {
    let mut total = 0.0;
    for e in mesh.boundary_edges() {
        let [a, b] = e.v;
        let (ua, ub) = (u[a], u[b]);
        let mut s = 0.0;
        quad.for_each_node(ua, ub, p, |t, w| s += w * f(ua + (ub - ua) * t));
        total += s * e.arc_length();
    }
    total
}

/// `∫_∂Ω g(s) φᵢ dσ` for data given on the curve.
pub fn boundary_load(mesh: &DomainMesh, quad: &BoundaryQuadrature, g: impl Fn(ArcParam) -> f64) -> Vec<f64> {
    let mut r = vec![0.0; mesh.vertex_count()];
    for e in mesh.boundary_edges() {
        let len = e.arc_length();
        let (mut ra, mut rb) = (0.0, 0.0);
        for (&t, &w) in quad.rule().nodes.iter().zip(&quad.rule().weights) {
            let v = g(e.s[0].shifted(t * len));
            ra += w * v * (1.0 - t);
            rb += w * v * t;
        }
        r[e.v[0]] += ra * len;
        r[e.v[1]] += rb * len;
    }
    r
}

/// Boundary edge containing the curve parameter `s`, with the local
/// coordinate `t ∈ [0, 1]` along it.
pub fn edge_at(mesh: &DomainMesh, s: ArcParam) -> Option<(usize, f64)> {
    let len = mesh.curve().length();
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        let el = e.arc_length();
        let mut d = s.minus(&e.s[0]);
        if s.base != e.s[0].base {
            d = d.rem_euclid(len);
            if d > len - 1e-12 * len {
                d -= len;
            }
        }
        let excess = if d < 0.0 {
            -d / el
        } else if d > el {
            (d - el) / el
        } else {
            0.0
        };
        if excess == 0.0 {
            return Some((k, d / el));
        }
        if best.is_none_or(|b| excess < b.2) {
            best = Some((k, (d / el).clamp(0.0, 1.0), excess));
        }
    }
    best.filter(|b| b.2 < 1e-9).map(|b| (b.0, b.1))
}

/// P1 trace of `u` at the curve parameter `s`.
pub fn trace_at(mesh: &DomainMesh, u: &[f64], s: ArcParam) -> Result<f64> {
    let (k, t) = edge_at(mesh, s).ok_or(Error::InvalidArgument(format!("parameter {} not on any edge", s.value())))?;
    let e = mesh.boundary_edges()[k];
    Ok(u[e.v[0]] * (1.0 - t) + u[e.v[1]] * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_boundary_mass;
    use crate::geometry::{generate_mesh, BoundaryCurve, Grading};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn disk_mesh() -> DomainMesh {
        let c = BoundaryCurve::unit_disk();
        generate_mesh(&c, 0.25, Some(&Grading::new(vec![0.5], 8.0))).unwrap()
    }

    #[test]
    fn constant_fields() {
        let m = disk_mesh();
        let q = BoundaryQuadrature::default();
        let n = m.vertex_count();
        let r1 = boundary_residual(&m, &vec![1.0; n], 7.3, &q).unwrap();
        assert!((r1.iter().sum::<f64>() - 2.0 * PI).abs() < 1e-12);
        let r2 = boundary_residual(&m, &vec![2.0; n], 3.0, &q).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert!((8.0 * a - b).abs() < 1e-12);
        }
        for i in 0..n {
            if !m.is_boundary(i) {
                assert_eq!(r1[i], 0.0);
            }
        }
        let bm = assemble_boundary_mass(&m).unwrap();
        let j = boundary_terms(&m, &vec![1.0; n], 5.0, &q, true).unwrap().jacobian.unwrap();
        let j1 = boundary_terms(&m, &vec![0.3; n], 1.0, &q, true).unwrap().jacobian.unwrap();
        for (i, k, v) in bm.triplets() {
            assert!((j.get(i, k) - 5.0 * v).abs() < 1e-13);
            assert!((j1.get(i, k) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = disk_mesh();
        let q = BoundaryQuadrature::default();
        let n = m.vertex_count();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..20 {
            let p = [2.0, 4.5, 10.0, 30.0][trial % 4];
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t = 1e-6;
            let bt = boundary_terms(&m, &u, p, &q, true).unwrap();
            let up: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let rp = boundary_residual(&m, &up, p, &q).unwrap();
            let jd = bt.jacobian.unwrap().mul_vec(&d);
            let num: f64 = (0..n).map(|i| ((rp[i] - bt.residual[i]) / t - jd[i]).powi(2)).sum::<f64>().sqrt();
            let den: f64 = jd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(num / den < 1e-5, "p={p}: {}", num / den);
        }
    }

    #[test]
    fn negative_trace_rejected_for_fractional_power() {
        let m = disk_mesh();
        let q = BoundaryQuadrature::default();
        let b = m.boundary_edges()[0].v[0];
        let mut u = vec![1.0; m.vertex_count()];
        u[b] = -0.1;
        assert!(matches!(boundary_residual(&m, &u, 2.5, &q), Err(Error::NegativeTrace { .. })));
        assert!(boundary_residual(&m, &u, 3.0, &q).is_ok());
    }

    #[test]
    fn trace_lookup() {
        let m = disk_mesh();
        let u: Vec<f64> = (0..m.vertex_count()).map(|i| m.position(i)[0]).collect();
        for s in [0.0, 0.5, 0.5 + 1e-14, 1.0, 3.0, 6.2] {
            let v = trace_at(&m, &u, ArcParam::new(s)).unwrap();
            assert!((v - s.cos()).abs() < 0.02, "s={s}");
        }
        let v = trace_at(&m, &u, ArcParam::with_offset(0.5, -1e-18)).unwrap();
        assert!((v - 0.5f64.cos()).abs() < 1e-12);
    }
}

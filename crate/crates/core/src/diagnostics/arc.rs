//! Integration of P1 traces over boundary arcs around a center point.

use crate::geometry::{norm, ArcParam, DomainMesh};
use crate::green::signed_arc;
use crate::{Error, Result};

/// Arc `{γ(c + d) : lo ≤ d ≤ hi}` given by offsets from the center `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Arc {
    pub center: ArcParam,
    pub lo: f64,
    pub hi: f64,
}

/// Clipped piece of a boundary edge: offsets `d0 < d1` from the arc
/// center, with the local edge coordinates `t0, t1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Piece {
    pub edge: usize,
    pub d0: f64,
    pub d1: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Piece {
    pub fn trace(&self, mesh: &DomainMesh, u: &[f64]) -> (f64, f64) {
        let [a, b] = mesh.boundary_edges()[self.edge].v;
        (
            u[a] + (u[b] - u[a]) * self.t0,
            u[a] + (u[b] - u[a]) * self.t1,
        )
    }

    /// Derivative of the trace along the arc.
    pub fn slope(&self, mesh: &DomainMesh, u: &[f64]) -> f64 {
        let e = mesh.boundary_edges()[self.edge];
        (u[e.v[1]] - u[e.v[0]]) / e.arc_length()
    }
}

/// Offset `d > 0` along `dir = ±1` at which the chord `|γ(c + d) − γ(c)|`
/// first reaches `r`.
fn chord_offset(mesh: &DomainMesh, center: ArcParam, r: f64, dir: f64) -> Result<f64> {
    let curve = mesh.curve();
    let half = 0.5 * curve.length();
    let chord = |d: f64| norm(curve.displacement(center.value(), dir * d));
    // March outwards to bracket the first crossing, then bisect.
    let step = (r / 8.0).min(half / 64.0);
    let mut lo = 0.0;
    let mut hi = step;
    while chord(hi) < r {
        lo = hi;
        hi += step;
        if hi > half {
            return Err(Error::InvalidArgument(format!("radius {r} exceeds the domain")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chord(mid) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl Arc {
    /// `∂Ω ∩ B_r(γ(c))`, taken as the connected arc through the center.
    pub fn ball(mesh: &DomainMesh, center: ArcParam, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
        }
        Ok(Self {
            center,
            lo: -chord_offset(mesh, center, r, -1.0)?,
            hi: chord_offset(mesh, center, r, 1.0)?,
        })
    }

    #[cfg(test)]
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Splits at the offset `d`.
    pub fn split(&self, d: f64) -> (Self, Self) {
        (Self { hi: d, ..*self }, Self { lo: d, ..*self })
    }

    /// Clipped edge pieces in order of increasing offset.
    pub fn pieces(&self, mesh: &DomainMesh) -> Vec<Piece> {
        let curve = mesh.curve();
        let len = curve.length();
        let mut out = Vec::new();
        for (k, e) in mesh.boundary_edges().iter().enumerate() {
            let el = e.arc_length();
            let start = signed_arc(curve, e.s[0], self.center);
            for shift in [-len, 0.0, len] {
                let d0 = start + shift;
                let (a, b) = (d0.max(self.lo), (d0 + el).min(self.hi));
                if b > a {
                    out.push(Piece {
                        edge: k,
                        d0: a,
                        d1: b,
                        t0: (a - d0) / el,
                        t1: (b - d0) / el,
                    });
                }
            }
        }
        out.sort_by(|a, b| a.d0.total_cmp(&b.d0));
        out
    }
}

/// `∫₀¹ (a + (b − a)t)^p dt` for `a, b ≥ 0`, in closed form.
pub(crate) fn power_mean(a: f64, b: f64, p: f64) -> f64 {
    let (lo, hi) = (a.min(b).max(0.0), a.max(b).max(0.0));
    if hi == 0.0 {
        return 0.0;
    }
    if lo == 0.0 {
        return hi.powf(p) / (p + 1.0);
    }
    // hi^p (1 − r^{p+1}) / ((p + 1)(1 − r)) with r = lo / hi.
    let l = (lo / hi).ln();
    if l == 0.0 {
        return hi.powf(p);
    }
    hi.powf(p) * ((p + 1.0) * l).exp_m1() / ((p + 1.0) * l.exp_m1())
}

/// `∫_arc u^p dσ` for the P1 trace, exact per piece.
pub(crate) fn power_integral(mesh: &DomainMesh, u: &[f64], p: f64, arc: &Arc) -> f64 {
    arc.pieces(mesh)
        .iter()
        .map(|pc| {
            let (a, b) = pc.trace(mesh, u);
            (pc.d1 - pc.d0) * power_mean(a, b, p)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, BoundaryCurve};
    use crate::quadrature::adaptive_integrate;

    #[test]
    fn power_mean_matches_quadrature() {
        for &(a, b, p) in &[(1.0, 2.0, 7.0), (1.5, 1.5, 40.0), (1.6, 1.6000001, 80.0), (0.0, 1.2, 3.5), (2.0, 0.3, 50.0)] {
            let mut f = |t: f64| (a + (b - a) * t).powf(p);
            let exact = adaptive_integrate(&mut f, 0.0, 1.0, 1e-14).unwrap();
            let got = power_mean(a, b, p);
            assert!((got - exact).abs() <= 1e-12 * exact, "{a} {b} {p}: {got} vs {exact}");
        }
    }

    #[test]
    fn disk_ball_arc_is_chord_arc() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.1, None).unwrap();
        let arc = Arc::ball(&m, ArcParam::new(1.0), 0.5).unwrap();
        let expect = 2.0 * (0.25f64).asin();
        assert!((arc.hi - expect).abs() < 1e-12 && (arc.lo + expect).abs() < 1e-12);
        let pieces = arc.pieces(&m);
        let total: f64 = pieces.iter().map(|p| p.d1 - p.d0).sum();
        assert!((total - arc.length()).abs() < 1e-12);
        // Arc across the parameter seam.
        let seam = Arc::ball(&m, ArcParam::new(0.01), 0.5).unwrap();
        let total: f64 = seam.pieces(&m).iter().map(|p| p.d1 - p.d0).sum();
        assert!((total - seam.length()).abs() < 1e-12);
        let ones = vec![1.0; m.vertex_count()];
        assert!((power_integral(&m, &ones, 5.0, &seam) - seam.length()).abs() < 1e-12);
    }
}

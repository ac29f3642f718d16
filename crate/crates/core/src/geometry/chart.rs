//! Local charts that straighten the boundary near a base point.
//!
//! With `Q = γ(s₀)` moved to the origin, `τ(s₀)` to `e¹` and the inward
//! normal to `e²`, the boundary near `Q` is the graph `y² = ρ(y¹)` with
//! `ρ(0) = ρ'(0) = 0`, and `Ψ(y) = (y¹, y² − ρ(y¹))` maps the domain side
//! into the upper half-plane.
//!
//! All points are handled as offsets from `Q`, so the chart stays accurate
//! at scales far below the spacing of `f64` near `|Q|`.

use super::curve::{ArcParam, BoundaryCurve};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct FlatChart {
    curve: BoundaryCurve,
    base: ArcParam,
    origin: [f64; 2],
    tangent: [f64; 2],
    inward: [f64; 2],
    curvature: f64,
    radius: f64,
}

impl FlatChart {
    /// Chart at `s₀`; the validity radius is the largest radius up to `L/8`
    /// on which the boundary remains a graph over the tangent line.
    pub fn new(curve: &BoundaryCurve, s0: ArcParam) -> Self {
        let s = s0.value();
        let tangent = curve.tangent(s);
        let nu = curve.normal(s);
        let mut chart = Self {
            curve: curve.clone(),
            base: s0,
            origin: curve.point_at(&s0),
            tangent,
            inward: [-nu[0], -nu[1]],
            curvature: curve.curvature(s),
            radius: 0.0,
        };
        chart.radius = chart.compute_radius();
        chart
    }

    fn compute_radius(&self) -> f64 {
        let len = self.curve.length();
        let cap = len / 8.0;
        let steps = 1024;
        let ds = 0.5 * len / steps as f64;
        // Walk both ways until the tangent turns too far from τ(s₀).
        let mut limit = cap;
        let mut graph_end = [0.5 * len, -0.5 * len];
        for (dir, end) in [1.0f64, -1.0].iter().zip(graph_end.iter_mut()) {
            for k in 1..=steps {
                let d = dir * ds * k as f64;
                let t = self.curve.tangent(self.base.value() + d);
                if t[0] * self.tangent[0] + t[1] * self.tangent[1] < 0.2 {
                    let y = self.to_local(self.offset_of(d));
                    limit = limit.min(y[0].abs());
                    *end = d;
                    break;
                }
            }
        }
        // The rest of the boundary must stay outside the ball.
        let outside = len - (graph_end[0] - graph_end[1]);
        let n = 512;
        for k in 0..=n {
            let d = graph_end[0] + outside * k as f64 / n as f64;
            let off = self.offset_of(d);
            limit = limit.min(off[0].hypot(off[1]));
        }
        limit
    }

    fn offset_of(&self, ds: f64) -> [f64; 2] {
        self.boundary_offset(ds)
    }

    pub fn base(&self) -> ArcParam {
        self.base
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn tangent(&self) -> [f64; 2] {
        self.tangent
    }

    pub fn inward_normal(&self) -> [f64; 2] {
        self.inward
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// Validity radius `R_Q`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    /// Rotated coordinates of an offset `x − Q`.
    pub fn to_local(&self, d: [f64; 2]) -> [f64; 2] {
        [
            d[0] * self.tangent[0] + d[1] * self.tangent[1],
            d[0] * self.inward[0] + d[1] * self.inward[1],
        ]
    }

    /// Offset `x − Q` from rotated coordinates.
    pub fn from_local(&self, y: [f64; 2]) -> [f64; 2] {
        [
            y[0] * self.tangent[0] + y[1] * self.inward[0],
            y[0] * self.tangent[1] + y[1] * self.inward[1],
        ]
    }

    /// Offset of the curve point `γ(s₀ + ds)` from `Q`.
    pub fn boundary_offset(&self, ds: f64) -> [f64; 2] {
        let p = self.curve.displacement(self.base.base, self.base.offset + ds);
        let q = self.curve.displacement(self.base.base, self.base.offset);
        if self.base.offset == 0.0 {
            p
        } else {
            [p[0] - q[0], p[1] - q[1]]
        }
    }

    /// Parameter offset `ds` of the boundary point whose tangential
    /// coordinate is `y1`.
    pub fn boundary_ds(&self, y1: f64) -> f64 {
        if y1 == 0.0 {
            return 0.0;
        }
        let mut ds = y1;
        for _ in 0..60 {
            let y = self.to_local(self.boundary_offset(ds));
            let t = self.curve.tangent(self.base.value() + ds);
            let slope = t[0] * self.tangent[0] + t[1] * self.tangent[1];
            let step = (y[0] - y1) / slope.max(0.05);
            ds -= step;
            if step.abs() <= 1e-15 * ds.abs() {
                break;
            }
        }
        ds
    }

    /// `ρ(y¹)`.
    pub fn rho(&self, y1: f64) -> f64 {
        self.to_local(self.boundary_offset(self.boundary_ds(y1)))[1]
    }

    /// `(ρ, ρ', ρ'')` at `y¹`.
    pub fn rho_derivatives(&self, y1: f64) -> (f64, f64, f64) {
        let ds = self.boundary_ds(y1);
        let rho = self.to_local(self.boundary_offset(ds))[1];
        let s = self.base.value() + ds;
        let t = self.curve.tangent(s);
        let tl = self.to_local(t);
        let d1 = tl[1] / tl[0];
        let d2 = self.curve.curvature(s) * (1.0 + d1 * d1).powf(1.5);
        (rho, d1, d2)
    }

    /// `Ψ` applied to an offset `x − Q`.
    pub fn psi(&self, d: [f64; 2]) -> [f64; 2] {
        let y = self.to_local(d);
        [y[0], y[1] - self.rho(y[0])]
    }

    /// `Ψ⁻¹(y)` as an offset from `Q`; rejects points beyond the validity radius.
    pub fn pullback(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        if y[0].abs() > self.radius || y[0].hypot(y[1]) > 2.0 * self.radius {
            return Err(Error::OutsideChart {
                radius: self.radius,
            });
        }
        Ok(self.from_local([y[0], y[1] + self.rho(y[0])]))
    }

    /// Absolute position of an offset.
    pub fn absolute(&self, d: [f64; 2]) -> [f64; 2] {
        [self.origin[0] + d[0], self.origin[1] + d[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curve::ellipse_curvature;
    use rand::{Rng, SeedableRng};

    #[test]
    fn disk_chart_matches_circle() {
        let c = BoundaryCurve::unit_disk();
        let chart = FlatChart::new(&c, ArcParam::new(0.0));
        assert!((chart.origin()[0] - 1.0).abs() < 1e-15);
        for x1 in [-0.5f64, -0.1, 0.0, 0.05, 0.3, 0.6] {
            let exact = 1.0 - (1.0f64 - x1 * x1).sqrt();
            assert!((chart.rho(x1) - exact).abs() < 1e-13, "x1={x1}");
        }
        let (r, d1, d2) = chart.rho_derivatives(0.0);
        assert!(r.abs() < 1e-15 && d1.abs() < 1e-15);
        assert!((d2 - 1.0).abs() < 1e-6);
        assert!((chart.radius() - c.length() / 8.0).abs() < 1e-12);
    }

    #[test]
    fn disk_chart_rotation_invariant() {
        let c = BoundaryCurve::unit_disk();
        for i in 0..12 {
            let chart = FlatChart::new(&c, ArcParam::new(0.5 * i as f64));
            let (_, _, d2) = chart.rho_derivatives(0.0);
            assert!((d2 - 1.0).abs() < 1e-6);
            assert!((chart.rho(0.2) - (1.0 - (1.0f64 - 0.04).sqrt())).abs() < 1e-12);
        }
    }

    #[test]
    fn ellipse_chart_curvature_matches_formula() {
        let c = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        // (2, 0) is s = 0; the curvature there is a / b² = 2.
        let chart = FlatChart::new(&c, ArcParam::new(0.0));
        let (_, _, d2) = chart.rho_derivatives(0.0);
        assert!((d2 - ellipse_curvature(2.0, 1.0, 0.0)).abs() < 1e-6);
        assert!((d2 - 2.0).abs() < 1e-6);
        let s = 1.1;
        let chart = FlatChart::new(&c, ArcParam::new(s));
        let (_, _, d2) = chart.rho_derivatives(0.0);
        assert!((d2 - ellipse_curvature(2.0, 1.0, c.theta(s))).abs() < 1e-6);
    }

    #[test]
    fn pullback_inverts_psi() {
        let c = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        let chart = FlatChart::new(&c, ArcParam::new(0.7));
        let q = chart.pullback([0.0, 0.0]).unwrap();
        assert_eq!(q, [0.0, 0.0]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = chart.radius();
        for _ in 0..200 {
            let y = [rng.gen_range(-0.5 * r..0.5 * r), rng.gen_range(0.0..0.5 * r)];
            let x = chart.pullback(y).unwrap();
            let back = chart.psi(x);
            assert!((back[0] - y[0]).abs() < 1e-12 && (back[1] - y[1]).abs() < 1e-12);
        }
        assert!(chart.pullback([2.0 * r, 0.0]).is_err());
    }

    #[test]
    fn disk_normal_ray() {
        let c = BoundaryCurve::unit_disk();
        let chart = FlatChart::new(&c, ArcParam::new(0.0));
        let d = 1e-3;
        let x = chart.absolute(chart.pullback([0.0, d]).unwrap());
        assert!((x[0] - (1.0 - d)).abs() < 1e-15 && x[1].abs() < 1e-15);
    }

    #[test]
    fn boundary_samples_flatten() {
        let c = BoundaryCurve::preset("star", &[("amplitude", 0.1), ("lobes", 3.0)]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s0 = rng.gen_range(0.0..c.length());
            let chart = FlatChart::new(&c, ArcParam::new(s0));
            for k in 1..5 {
                let ds = 0.2 * chart.radius() * k as f64 / 5.0;
                for sign in [-1.0, 1.0] {
                    let y = chart.psi(chart.boundary_offset(sign * ds));
                    assert!(y[1].abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn tiny_offsets_survive() {
        let c = BoundaryCurve::unit_disk();
        let chart = FlatChart::new(&c, ArcParam::new(2.0));
        let y = [3e-19, 1e-19];
        let x = chart.pullback(y).unwrap();
        let back = chart.psi(x);
        assert!(((back[0] - y[0]) / y[0]).abs() < 1e-9);
        assert!(((back[1] - y[1]) / y[1]).abs() < 1e-9);
    }
}

//! Closed boundary curves parametrized by arc length.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quadrature::{adaptive_integrate, GaussLegendre};
use crate::{Error, Result};

/// Curve parameter stored as `base + offset`.
///
/// Points inside a graded region share the base of their anchor, so
/// differences between nearby parameters keep full relative precision even
/// when they are far below `ulp(base)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArcParam {
    pub base: f64,
    pub offset: f64,
}

impl ArcParam {
    pub const fn new(s: f64) -> Self {
        Self { base: s, offset: 0.0 }
    }

    pub const fn with_offset(base: f64, offset: f64) -> Self {
        Self { base, offset }
    }

    pub fn value(&self) -> f64 {
        self.base + self.offset
    }

    /// `self − other`, exact in the offsets when the bases agree.
    pub fn minus(&self, other: &ArcParam) -> f64 {
        if self.base == other.base {
            self.offset - other.offset
        } else {
            (self.base - other.base) + (self.offset - other.offset)
        }
    }

    pub fn shifted(&self, ds: f64) -> ArcParam {
        ArcParam {
            base: self.base,
            offset: self.offset + ds,
        }
    }
}

impl From<f64> for ArcParam {
    fn from(s: f64) -> Self {
        ArcParam::new(s)
    }
}

/// Supported boundary shapes, in their native angular parameter `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum CurveShape {
    /// Circle of the given radius centred at the origin.
    Disk { radius: f64 },
    /// Axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
    Ellipse { a: f64, b: f64 },
    /// Polar curve `r(θ) = radius · (1 + amplitude · cos(lobes · θ))`.
    Star { radius: f64, amplitude: f64, lobes: u32 },
}

impl CurveShape {
    fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            CurveShape::Disk { radius } => [radius * t.cos(), radius * t.sin()],
            CurveShape::Ellipse { a, b } => [a * t.cos(), b * t.sin()],
            CurveShape::Star { .. } => {
                let (r, _, _) = self.star_radius(t);
                [r * t.cos(), r * t.sin()]
            }
        }
    }

    fn star_radius(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            CurveShape::Star {
                radius,
                amplitude,
                lobes,
            } => {
                let k = lobes as f64;
                (
                    radius * (1.0 + amplitude * (k * t).cos()),
                    -radius * amplitude * k * (k * t).sin(),
                    -radius * amplitude * k * k * (k * t).cos(),
                )
            }
            _ => unreachable!(),
        }
    }

    /// First and second derivatives in `θ`.
    fn derivatives(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (c, s) = (t.cos(), t.sin());
        match *self {
            CurveShape::Disk { radius } => ([-radius * s, radius * c], [-radius * c, -radius * s]),
            CurveShape::Ellipse { a, b } => ([-a * s, b * c], [-a * c, -b * s]),
            CurveShape::Star { .. } => {
                let (r, dr, ddr) = self.star_radius(t);
                (
                    [dr * c - r * s, dr * s + r * c],
                    [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s],
                )
            }
        }
    }

    fn speed(&self, t: f64) -> f64 {
        let (d, _) = self.derivatives(t);
        d[0].hypot(d[1])
    }

    /// `γ(θ₀ + dθ) − γ(θ₀)` without cancellation for small `dθ`.
    fn displacement(&self, t0: f64, dt: f64) -> [f64; 2] {
        // cos(t0+dt) − cos t0 = −2 sin(dt/2) sin(t0 + dt/2), etc.
        let dcos = |a: f64, d: f64| -2.0 * (0.5 * d).sin() * (a + 0.5 * d).sin();
        let dsin = |a: f64, d: f64| 2.0 * (0.5 * d).sin() * (a + 0.5 * d).cos();
        match *self {
            CurveShape::Disk { radius } => [radius * dcos(t0, dt), radius * dsin(t0, dt)],
            CurveShape::Ellipse { a, b } => [a * dcos(t0, dt), b * dsin(t0, dt)],
            CurveShape::Star {
                radius,
                amplitude,
                lobes,
            } => {
                let k = lobes as f64;
                let r0 = radius * (1.0 + amplitude * (k * t0).cos());
                let dr = radius * amplitude * dcos(k * t0, k * dt);
                let t1 = t0 + dt;
                [dr * t1.cos() + r0 * dcos(t0, dt), dr * t1.sin() + r0 * dsin(t0, dt)]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CurveShape::Disk { radius } => radius > 0.0 && radius.is_finite(),
            CurveShape::Ellipse { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            CurveShape::Star {
                radius,
                amplitude,
                lobes,
            } => radius > 0.0 && amplitude.abs() < 1.0 && lobes >= 1,
        };
        if !ok {
            return Err(Error::InvalidCurve(format!("{self:?}")));
        }
        Ok(())
    }
}

const PANELS: usize = 64;

#[derive(Debug)]
struct CurveData {
    shape: CurveShape,
    length: f64,
    /// Cumulative arc length at `θ_k = 2πk / PANELS`.
    table: Vec<f64>,
    rule: GaussLegendre,
}

/// Closed, counterclockwise, arc-length parametrized boundary curve.
///
/// Cheap to clone; the arc-length table is shared.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    inner: Arc<CurveData>,
}

impl BoundaryCurve {
    /// Builds a curve from a named preset: `disk`, `ellipse` (`a`, `b`) or
    /// `star` (`amplitude`, `lobes`).
    pub fn preset(name: &str, params: &[(&str, f64)]) -> Result<Self> {
        let get = |key: &str, default: f64| {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .unwrap_or(default)
        };
        let shape = match name {
            "disk" => CurveShape::Disk { radius: 1.0 },
            "ellipse" => CurveShape::Ellipse {
                a: get("a", 2.0),
                b: get("b", 1.0),
            },
            "star" => {
                let lobes = get("lobes", 5.0);
                if lobes.fract() != 0.0 || lobes < 1.0 {
                    return Err(Error::InvalidCurve(format!("lobes must be a positive integer, got {lobes}")));
                }
                CurveShape::Star {
                    radius: get("radius", 1.0),
                    amplitude: get("amplitude", 0.1),
                    lobes: lobes as u32,
                }
            }
            other => return Err(Error::InvalidCurve(format!("unknown preset `{other}`"))),
        };
        Self::new(shape)
    }

    pub fn unit_disk() -> Self {
        Self::new(CurveShape::Disk { radius: 1.0 }).expect("unit disk is valid")
    }

    pub fn new(shape: CurveShape) -> Result<Self> {
        shape.validate()?;
        let rule = GaussLegendre::new(20);
        let mut table = vec![0.0; PANELS + 1];
        for k in 0..PANELS {
            let a = TAU * k as f64 / PANELS as f64;
            let b = TAU * (k + 1) as f64 / PANELS as f64;
            let mut speed = |t: f64| shape.speed(t);
            let seg = adaptive_integrate(&mut speed, a, b, 1e-14)?;
            table[k + 1] = table[k] + seg;
        }
        let length = table[PANELS];
        let curve = Self {
            inner: Arc::new(CurveData {
                shape,
                length,
                table,
                rule,
            }),
        };
        curve.check_simple()?;
        Ok(curve)
    }

    fn check_simple(&self) -> Result<()> {
        let n = 256;
        let pts: Vec<[f64; 2]> = (0..n).map(|i| self.inner.shape.point(TAU * i as f64 / n as f64)).collect();
        let mut area = 0.0;
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            area += a[0] * b[1] - a[1] * b[0];
        }
        if area <= 0.0 {
            return Err(Error::InvalidCurve("curve is not counterclockwise".into()));
        }
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                    let p = pts[i];
                    return Err(Error::InvalidCurve(format!(
                        "self-intersection near ({:.3}, {:.3})",
                        p[0], p[1]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> CurveShape {
        self.inner.shape
    }

    /// Total arc length `L`.
    pub fn length(&self) -> f64 {
        self.inner.length
    }

    /// Reduces `s` to `[0, L)`.
    pub fn wrap(&self, s: f64) -> f64 {
        s.rem_euclid(self.inner.length)
    }

    /// Shortest periodic distance between two parameters.
    pub fn arc_distance(&self, a: f64, b: f64) -> f64 {
        let d = self.wrap(a - b);
        d.min(self.inner.length - d)
    }

    fn arc_of_theta(&self, t: f64) -> f64 {
        let d = &self.inner;
        let turns = (t / TAU).floor();
        let tt = t - turns * TAU;
        let k = ((tt / TAU * PANELS as f64).floor() as usize).min(PANELS - 1);
        let a = TAU * k as f64 / PANELS as f64;
        let shape = d.shape;
        turns * d.length + d.table[k] + d.rule.integrate(a, tt, |x| shape.speed(x))
    }

    /// Native angle `θ(s)`.
    pub fn theta(&self, s: f64) -> f64 {
        let d = &self.inner;
        if let CurveShape::Disk { radius } = d.shape {
            return s / radius;
        }
        let turns = (s / d.length).floor();
        let ss = s - turns * d.length;
        let k = match d.table.binary_search_by(|v| v.partial_cmp(&ss).unwrap()) {
            Ok(k) => k.min(PANELS - 1),
            Err(k) => k.saturating_sub(1).min(PANELS - 1),
        };
        let a = TAU * k as f64 / PANELS as f64;
        let mut t = a + (ss - d.table[k]) / d.shape.speed(a);
        for _ in 0..30 {
            let f = self.arc_of_theta(t) - ss;
            let dt = f / d.shape.speed(t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        t + turns * TAU
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        self.inner.shape.point(self.theta(s))
    }

    pub fn point_at(&self, s: &ArcParam) -> [f64; 2] {
        let p = self.point(s.base);
        let d = self.displacement(s.base, s.offset);
        [p[0] + d[0], p[1] + d[1]]
    }

    /// Unit tangent (direction of increasing `s`).
    pub fn tangent(&self, s: f64) -> [f64; 2] {
        let (d, _) = self.inner.shape.derivatives(self.theta(s));
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    }

    /// Outward unit normal.
    pub fn normal(&self, s: f64) -> [f64; 2] {
        let t = self.tangent(s);
        [t[1], -t[0]]
    }

    /// Signed curvature, positive where the domain is locally convex.
    pub fn curvature(&self, s: f64) -> f64 {
        let (d, dd) = self.inner.shape.derivatives(self.theta(s));
        let sp = d[0].hypot(d[1]);
        (d[0] * dd[1] - d[1] * dd[0]) / (sp * sp * sp)
    }

    /// `γ(s₀ + ds) − γ(s₀)`, accurate to full relative precision for tiny `ds`.
    pub fn displacement(&self, s0: f64, ds: f64) -> [f64; 2] {
        let d = &self.inner;
        if ds == 0.0 {
            return [0.0, 0.0];
        }
        let t0 = self.theta(s0);
        let dt = if let CurveShape::Disk { radius } = d.shape {
            ds / radius
        } else if ds.abs() > d.length / 16.0 {
            self.theta(s0 + ds) - t0
        } else {
            // Newton on ∫_{t0}^{t0+dt} |γ'| = ds; relative accuracy is kept
            // because the integral is taken over the short interval directly.
            let shape = d.shape;
            let mut dt = ds / shape.speed(t0);
            for _ in 0..30 {
                let arc = d.rule.integrate(0.0, dt, |x| shape.speed(t0 + x));
                let step = (arc - ds) / shape.speed(t0 + dt);
                dt -= step;
                if step.abs() <= 1e-15 * dt.abs() {
                    break;
                }
            }
            dt
        };
        d.shape.displacement(t0, dt)
    }

    /// Evenly spaced samples `(s, γ(s))`.
    pub fn samples(&self, n: usize) -> Vec<(f64, [f64; 2])> {
        (0..n)
            .map(|i| {
                let s = self.length() * i as f64 / n as f64;
                (s, self.point(s))
            })
            .collect()
    }

    /// Signed area of the inscribed polygon with `n` vertices.
    pub fn polygon_area(&self, n: usize) -> f64 {
        let pts = self.samples(n);
        (0..n)
            .map(|i| {
                let (a, b) = (pts[i].1, pts[(i + 1) % n].1);
                0.5 * (a[0] * b[1] - a[1] * b[0])
            })
            .sum()
    }

    /// Parameter of the curve point closest to `x` (coarse scan then Newton).
    pub fn closest_param(&self, x: [f64; 2]) -> f64 {
        let n = 512;
        let mut best = (f64::INFINITY, 0.0);
        for (s, p) in self.samples(n) {
            let d = (p[0] - x[0]).hypot(p[1] - x[1]);
            if d < best.0 {
                best = (d, s);
            }
        }
        let mut s = best.1;
        for _ in 0..50 {
            let p = self.point(s);
            let t = self.tangent(s);
            let k = self.curvature(s);
            let nrm = self.normal(s);
            let r = [p[0] - x[0], p[1] - x[1]];
            let g = r[0] * t[0] + r[1] * t[1];
            // d/ds ⟨γ − x, τ⟩ = 1 + ⟨γ − x, τ'⟩ with τ' = −κ ν.
            let dg = 1.0 - k * (r[0] * nrm[0] + r[1] * nrm[1]);
            let step = if dg.abs() > 1e-3 { g / dg } else { g };
            let step = step.clamp(-self.length() / 64.0, self.length() / 64.0);
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        self.wrap(s)
    }
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Curvature of the ellipse `(a cos t, b sin t)` in its native parameter.
pub fn ellipse_curvature(a: f64, b: f64, t: f64) -> f64 {
    a * b / (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).powf(1.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn unit_disk_geometry() {
        let c = BoundaryCurve::unit_disk();
        assert!((c.length() - TAU).abs() < 1e-12);
        for i in 0..32 {
            let s = 0.2 * i as f64;
            assert!((c.curvature(s) - 1.0).abs() < 1e-12);
            let p = c.point(s);
            assert!((p[0] - s.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn ellipse_one_one_matches_disk() {
        let d = BoundaryCurve::unit_disk();
        let e = BoundaryCurve::new(CurveShape::Ellipse { a: 1.0, b: 1.0 }).unwrap();
        assert!((d.length() - e.length()).abs() < 1e-10);
        for i in 0..50 {
            let s = 0.13 * i as f64;
            let (p, q) = (d.point(s), e.point(s));
            assert!((p[0] - q[0]).abs() < 1e-10 && (p[1] - q[1]).abs() < 1e-10);
            assert!((d.curvature(s) - e.curvature(s)).abs() < 1e-10);
            let (n1, n2) = (d.normal(s), e.normal(s));
            assert!((n1[0] - n2[0]).abs() < 1e-10 && (n1[1] - n2[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn arc_length_parametrization() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for curve in [
            BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap(),
            BoundaryCurve::preset("star", &[("amplitude", 0.15), ("lobes", 5.0)]).unwrap(),
        ] {
            for _ in 0..1000 {
                let s = rng.gen_range(0.0..curve.length());
                let h = 1e-5;
                let a = curve.point(s - h);
                let b = curve.point(s + h);
                let speed = (b[0] - a[0]).hypot(b[1] - a[1]) / (2.0 * h);
                assert!((speed - 1.0).abs() < 1e-8, "speed {speed}");
                let t = curve.tangent(s);
                let n = curve.normal(s);
                assert!((t[0] * n[0] + t[1] * n[1]).abs() < 1e-15);
            }
            let p0 = curve.point(0.0);
            let pl = curve.point(curve.length());
            assert!((p0[0] - pl[0]).abs() < 1e-12 && (p0[1] - pl[1]).abs() < 1e-12);
            assert!(curve.polygon_area(400) > 0.0);
        }
    }

    #[test]
    fn displacement_keeps_relative_precision() {
        let curve = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        let s0 = 1.234;
        let tau = curve.tangent(s0);
        for ds in [1e-3, 1e-8, 1e-14, 1e-20] {
            let d = curve.displacement(s0, ds);
            let along = d[0] * tau[0] + d[1] * tau[1];
            assert!(((along - ds) / ds).abs() < 1e-6, "ds={ds} along={along}");
        }
        let d = curve.displacement(s0, 0.5);
        let (a, b) = (curve.point(s0), curve.point(s0 + 0.5));
        assert!((d[0] - (b[0] - a[0])).abs() < 1e-13 && (d[1] - (b[1] - a[1])).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(BoundaryCurve::preset("ellipse", &[("a", -1.0)]).is_err());
        assert!(BoundaryCurve::preset("star", &[("amplitude", 1.2)]).is_err());
        assert!(BoundaryCurve::preset("star", &[("lobes", 2.5)]).is_err());
        assert!(BoundaryCurve::preset("triangle", &[]).is_err());
    }
}

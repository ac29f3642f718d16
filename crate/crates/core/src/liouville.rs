//! Half-plane Liouville bubbles
//!
//! ```text
//!   U(t) = log( 2η₂ / ((t¹ − η₁)² + (t² + η₂)²) ),   t² ≥ 0,
//! ```
//!
//! which solve `ΔU = 0` in the upper half-plane with `∂U/∂ν = e^U` on
//! `{t² = 0}` (outward normal `−e²`) and carry boundary mass `2π`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BubbleProfile {
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for BubbleProfile {
    fn default() -> Self {
        Self::canonical()
    }
}

impl BubbleProfile {
    /// `(η₁, η₂) = (0, 2)`, normalized by `U(0) = 0 = max U`.
    pub const fn canonical() -> Self {
        Self { eta1: 0.0, eta2: 2.0 }
    }

    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        if !(eta2 > 0.0) || !eta1.is_finite() || !eta2.is_finite() {
            return Err(Error::InvalidArgument(format!("bubble needs η₂ > 0, got ({eta1}, {eta2})")));
        }
        Ok(Self { eta1, eta2 })
    }

    fn rel(&self, t: [f64; 2]) -> ([f64; 2], f64) {
        let d = [t[0] - self.eta1, t[1] + self.eta2];
        (d, d[0] * d[0] + d[1] * d[1])
    }

    pub fn value(&self, t: [f64; 2]) -> f64 {
        let (_, r2) = self.rel(t);
        (2.0 * self.eta2 / r2).ln()
    }

    pub fn gradient(&self, t: [f64; 2]) -> [f64; 2] {
        let (d, r2) = self.rel(t);
        [-2.0 * d[0] / r2, -2.0 * d[1] / r2]
    }

    /// Value and gradient.
    pub fn eval(&self, t: [f64; 2]) -> (f64, [f64; 2]) {
        (self.value(t), self.gradient(t))
    }

    /// `e^U` on the boundary line.
    pub fn boundary_density(&self, t1: f64) -> f64 {
        let d = t1 - self.eta1;
        2.0 * self.eta2 / (d * d + self.eta2 * self.eta2)
    }

    /// Outward flux `−∂U/∂t²` on `{t² = 0}`.
    pub fn boundary_flux(&self, t1: f64) -> f64 {
        -self.gradient([t1, 0.0])[1]
    }

    /// `∫_{−R}^{R} e^{U(t, 0)} dt`; `R = ∞` gives `2π`.
    pub fn boundary_mass(&self, r: f64) -> f64 {
        if r.is_infinite() {
            return 2.0 * PI;
        }
        2.0 * (((r - self.eta1) / self.eta2).atan() + ((r + self.eta1) / self.eta2).atan())
    }

    /// Five-point Laplacian with step `step`.
    pub fn fd_laplacian(&self, t: [f64; 2], step: f64) -> f64 {
        let u = |x: f64, y: f64| self.value([x, y]);
        (u(t[0] + step, t[1]) + u(t[0] - step, t[1]) + u(t[0], t[1] + step) + u(t[0], t[1] - step)
            - 4.0 * u(t[0], t[1]))
            / (step * step)
    }
}

/// Largest residuals of the Liouville problem over a sample set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiouvilleResidual {
    /// `max |ΔU|` over samples with `t² > 0` (finite differences).
    pub interior: f64,
    /// `max |∂U/∂ν − e^U|` over samples with `t² = 0`.
    pub boundary: f64,
}

pub const FD_STEP: f64 = 1e-4;

pub fn liouville_residual(profile: &BubbleProfile, samples: &[[f64; 2]]) -> Result<LiouvilleResidual> {
    let mut res = LiouvilleResidual {
        interior: 0.0,
        boundary: 0.0,
    };
    for &t in samples {
        if t[1] < 0.0 {
            return Err(Error::InvalidArgument(format!("sample ({}, {}) below the half-plane", t[0], t[1])));
        }
        if t[1] == 0.0 {
            let r = (profile.boundary_flux(t[0]) - profile.value(t).exp()).abs();
            res.boundary = res.boundary.max(r);
        } else {
            let step = FD_STEP.min(0.5 * t[1]);
            res.interior = res.interior.max(profile.fd_laplacian(t, step).abs());
        }
    }
    Ok(res)
}

/// Result of comparing a field with `(2 − γ) log(1/|z|) + C` on an annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCheck {
    pub gamma: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Smallest `C` for which the bound holds at every sample.
    pub constant: f64,
    pub holds: bool,
}

/// Polar samples of the closed upper half-annulus `r_min ≤ |z| ≤ r_max`,
/// log-spaced in radius.
pub fn annulus_samples(r_min: f64, r_max: f64, radial: usize, angular: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(radial * (angular + 1));
    for i in 0..radial {
        let f = if radial == 1 { 0.0 } else { i as f64 / (radial - 1) as f64 };
        let r = r_min * (r_max / r_min).powf(f);
        for j in 0..=angular {
            let th = PI * j as f64 / angular as f64;
            out.push([r * th.cos(), r * th.sin().max(0.0)]);
        }
    }
    out
}

/// Smallest `C` with `f(z) ≤ (2 − γ) log(1/|z|) + C` over `samples`.
pub fn decay_constant(f: impl Fn([f64; 2]) -> f64, gamma: f64, samples: &[[f64; 2]]) -> f64 {
    samples
        .iter()
        .map(|&z| f(z) - (2.0 - gamma) * (1.0 / z[0].hypot(z[1])).ln())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Decay check for a bubble; `holds` compares against `bound` when given,
/// otherwise only requires a finite constant.
pub fn decay_bound_check(
    profile: &BubbleProfile,
    gamma: f64,
    r_min: f64,
    r_max: f64,
    bound: Option<f64>,
) -> Result<DecayCheck> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidArgument(format!("γ must lie in (0, 2), got {gamma}")));
    }
    if !(r_min > 0.0 && r_max > r_min) {
        return Err(Error::InvalidArgument(format!("bad radius range [{r_min}, {r_max}]")));
    }
    let samples = annulus_samples(r_min, r_max, 200, 64);
    let constant = decay_constant(|z| profile.value(z), gamma, &samples);
    Ok(DecayCheck {
        gamma,
        r_min,
        r_max,
        constant,
        holds: constant.is_finite() && bound.is_none_or(|b| constant <= b),
    })
}

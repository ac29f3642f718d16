use std::f64::consts::PI;

use blowup_core::geometry::{generate_mesh, ArcParam, BoundaryCurve, Grading};
use blowup_core::green::*;
use blowup_core::solver::{Discretization, SolveConfig};

fn disk(h: f64, graded: &[f64]) -> Discretization {
    let c = BoundaryCurve::unit_disk();
    let g = Grading::new(graded.to_vec(), 8.0);
    let mesh = generate_mesh(&c, h, (!graded.is_empty()).then_some(&g)).unwrap();
    Discretization::new(mesh, &SolveConfig::default()).unwrap()
}

/// `I_n(x) n! / (x/2)^n` from the power series of `I_n`.
fn bessel_i_scaled(n: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 0..200 {
        sum += term;
        term *= 0.25 * x * x / ((k + 1) as f64 * (k + 1 + n) as f64);
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Robin function of the unit disk for `Δu = u`, `∂u/∂ν = 0`, from the
/// Fourier–Bessel expansion of `G` minus the free-space logarithm:
/// `I₀/(2π I₁) + (1/π) Σ (Iₙ/Iₙ' − 1/n)` at `x = 1`.
fn disk_robin_oracle() -> f64 {
    let x = 1.0;
    let s = |n: usize| bessel_i_scaled(n, x);
    // I₀ / I₁ = (2/x) S₀ / S₁.
    let mut r = (2.0 / x) * s(0) / s(1) / (2.0 * PI);
    for n in 1..20000 {
        let nf = n as f64;
        let up = 0.5 * x / (nf + 1.0) * s(n + 1) / s(n);
        let down = 2.0 * nf / x * s(n - 1) / s(n);
        r += (2.0 / (down + up) - 1.0 / nf) / PI;
    }
    r
}

#[test]
fn robin_oracle_value() {
    let r = disk_robin_oracle();
    assert!((r - 0.273_407_439_719_421).abs() < 1e-9, "{r}");
}

#[test]
fn disk_robin_matches_bessel_series() {
    let disc = disk(0.1, &[0.0]);
    let r = robin(&disc, 0.0).unwrap();
    let oracle = disk_robin_oracle();
    assert!((r / oracle - 1.0).abs() < 5e-3, "{r} vs {oracle}");
}

#[test]
fn phi_invariant_under_relabeling() {
    let disc = disk(0.1, &[]);
    let a = phi_value(&disc, &[0.3, 2.0, 4.1]).unwrap();
    let b = phi_value(&disc, &[4.1, 0.3, 2.0]).unwrap();
    assert_eq!(a.value, b.value);
}

#[test]
fn phi_nearly_invariant_under_rotation() {
    let disc = disk(0.1, &[]);
    let base = phi_value(&disc, &[0.3, 2.0]).unwrap().value;
    for shift in [0.7, 2.9, 5.0] {
        let v = phi_value(&disc, &[0.3 + shift, 2.0 + shift]).unwrap().value;
        assert!((v - base).abs() < 2e-3 * base.abs(), "{v} vs {base}");
    }
}

#[test]
fn phi_gradient_is_consistent_at_half_step() {
    let disc = disk(0.1, &[]);
    let pts = [0.3, 1.8];
    let g = phi_gradient(&disc, &pts).unwrap();
    let half = phi_gradient_with_step(&disc, &pts, 0.5 * g.step).unwrap();
    for (a, b) in g.components.iter().zip(&half.components) {
        assert!((a - b).abs() < 0.1 * b.abs(), "{a} vs {b}");
    }
}

#[test]
fn log_coefficient_near_source() {
    let disc = disk(0.1, &[1.0]);
    let f = solve_regular_part(&disc, ArcParam::new(1.0)).unwrap();
    let radii: Vec<f64> = (0..8).map(|k| 1e-3 * 1.8f64.powi(k)).collect();
    let k = f.log_coefficient_fit(&disc.mesh, &radii).unwrap();
    assert!((k * PI - 1.0).abs() < 0.05, "{}", k * PI);
}

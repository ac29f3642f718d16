use blowup_core::fem::BoundaryQuadrature;
use blowup_core::geometry::{generate_mesh, BoundaryCurve, Grading};
use blowup_core::solver::*;
use blowup_core::Error;

fn disk(h: f64, site: f64) -> Discretization {
    let c = BoundaryCurve::unit_disk();
    let g = Grading::new(vec![site], 8.0).with_core(bubble_epsilon(40.0, 1.55) / 8.0);
    Discretization::new(generate_mesh(&c, h, Some(&g)).unwrap(), &SolveConfig::default()).unwrap()
}

fn mass_distance(disc: &Discretization, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    disc.system.mass.inner(&d, &d).sqrt()
}

#[test]
fn solutions_satisfy_the_energy_identity() {
    let disc = disk(0.1, 0.0);
    let config = SolveConfig {
        schedule: vec![10.0, 20.0, 40.0],
        ..Default::default()
    };
    let branch = solve_branch(&disc, &[0.0], &config).unwrap();
    let fine = BoundaryQuadrature::new(16, 12);
    for e in &branch.entries {
        let u = e.solution.values();
        let lp = blowup_core::fem::energy(&disc.mesh, &disc.system, u, e.p, &fine).boundary_lp;
        let rel = (e.energy.dirichlet - lp).abs() / lp;
        assert!(rel < 1e-8, "p={}: {rel:e}", e.p);
    }
}

#[test]
fn rotation_equivariance_on_the_disk() {
    let disc = disk(0.1, 0.0);
    let angle = 1.234;
    let rotated = Discretization::new(disc.mesh.rotated(angle).unwrap(), &SolveConfig::default()).unwrap();
    let config = SolveConfig::default();
    let a = solve_from_ansatz(&disc, &[0.0], 10.0, &config, &Deflation::none()).unwrap();
    let b = solve_from_ansatz(&rotated, &[angle], 10.0, &config, &Deflation::none()).unwrap();
    let worst = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn deflation_keeps_distance_from_known_solutions() {
    let disc = disk(0.1, 0.0);
    let config = SolveConfig::default();
    let first = solve_from_ansatz(&disc, &[0.0], 10.0, &config, &Deflation::none()).unwrap();
    let deflation = Deflation::new(vec![first.values().to_vec()], &config);
    match solve_from_ansatz(&disc, &[0.0], 10.0, &config, &deflation) {
        Ok(second) => {
            let d = mass_distance(&disc, first.values(), second.values());
            assert!(d >= 1e-3, "deflated solve returned a solution at distance {d:e}");
        }
        Err(e) => assert!(
            matches!(e, Error::Deflated { .. } | Error::Divergence { .. } | Error::ZeroSolution { .. }),
            "{e}"
        ),
    }
}

#[test]
fn continuation_schedule_is_validated() {
    let disc = disk(0.2, 0.0);
    let config = SolveConfig::default();
    let seed = solve_from_ansatz(&disc, &[0.0], 10.0, &config, &Deflation::none()).unwrap();
    assert!(continue_in_p(&disc, seed.clone(), &[0.0], &[20.0, 40.0], &config).is_err());
    assert!(continue_in_p(&disc, seed, &[0.0], &[10.0, 10.0], &config).is_err());
}

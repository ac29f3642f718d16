use blowup_core::diagnostics::*;
use blowup_core::fem::{interpolate, trace_at};
use blowup_core::geometry::{generate_mesh, ArcParam, BoundaryCurve, Grading};
use blowup_core::quadrature::adaptive_integrate;
use blowup_core::solver::{bubble_ansatz, bubble_epsilon, solve_branch, Discretization, SolutionBranch, SolveConfig};
use blowup_core::{Error, SQRT_E};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;

fn disk_branch(h: f64, schedule: Vec<f64>) -> (Discretization, SolutionBranch) {
    let c = BoundaryCurve::unit_disk();
    let g = Grading::new(vec![0.0], 8.0).with_core(bubble_epsilon(80.0, 1.55) / 8.0);
    let mesh = generate_mesh(&c, h, Some(&g)).unwrap();
    let cfg = SolveConfig {
        schedule,
        ..Default::default()
    };
    let disc = Discretization::new(mesh, &cfg).unwrap();
    let branch = solve_branch(&disc, &[0.0], &cfg).unwrap();
    (disc, branch)
}

proptest! {
    #[test]
    fn epsilon_is_a_function_of_stored_values(amp in 1.0f64..2.0, p in 2.0f64..120.0) {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.3, None).unwrap();
        let mut u = vec![0.5; m.vertex_count()];
        let v = m.boundary_vertices()[3];
        u[v] = amp;
        let peaks = detect_peaks_with(&m, &u, p, &PeakOptions { threshold: 1e-300, ..Default::default() }).unwrap();
        let pk = &peaks[0];
        prop_assert_eq!(pk.vertex, v);
        prop_assert!((pk.recompute_epsilon(p) - pk.epsilon).abs() <= 1e-14 * pk.epsilon);
    }
}

#[test]
fn peaks_do_not_depend_on_vertex_order() {
    let (disc, branch) = disk_branch(0.1, vec![10.0, 20.0]);
    let u = branch.entry(20.0).unwrap().solution.values();
    let mesh = &disc.mesh;
    let mut perm: Vec<usize> = (0..mesh.vertex_count()).collect();
    perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(7));
    let shuffled = mesh.permuted(&perm).unwrap();
    let mut v = vec![0.0; u.len()];
    for (i, &j) in perm.iter().enumerate() {
        v[j] = u[i];
    }
    let a = detect_peaks(mesh, u, 20.0, None).unwrap();
    let b = detect_peaks(&shuffled, &v, 20.0, None).unwrap();
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(perm[x.vertex], y.vertex);
        assert_eq!((x.s, x.amplitude, x.epsilon), (y.s, y.amplitude, y.epsilon));
    }
}

#[test]
fn beta_additivity_and_quadrature_oracle() {
    let c = BoundaryCurve::unit_disk();
    let p = 30.0;
    let eps = bubble_epsilon(p, SQRT_E);
    let mesh = generate_mesh(&c, 0.1, Some(&Grading::new(vec![1.0], 8.0).with_core(eps / 8.0))).unwrap();
    let u = bubble_ansatz(&mesh, 1.0, p, SQRT_E).unwrap().values;
    let peaks = detect_peaks(&mesh, &u, p, None).unwrap();
    assert_eq!(peaks.len(), 1);
    let r = 0.4;
    let beta = beta_integral(&mesh, &u, p, &peaks, 0, r).unwrap();
    assert_eq!(beta.c, beta.beta * peaks[0].amplitude);

    let half = 2.0 * (0.5 * r).asin();
    for split in [-0.3 * half, 1e-7, 0.5 * half] {
        let (a, b) = split_power_integral(&mesh, &u, p, &peaks[0], r, split).unwrap();
        let whole = beta.beta * peaks[0].amplitude / p;
        assert!((a + b - whole).abs() <= 1e-12 * whole, "split {split}: {} vs {whole}", a + b);
    }

    // Adaptive quadrature of the trace, one panel per side of the peak.
    let center = peaks[0].param;
    let mut f = |d: f64| trace_at(&mesh, &u, center.shifted(d)).unwrap().powf(p);
    let left = adaptive_integrate(&mut f, -half, 0.0, 1e-13).unwrap();
    let right = adaptive_integrate(&mut f, 0.0, half, 1e-13).unwrap();
    let oracle = p * (left + right) / peaks[0].amplitude;
    assert!((beta.beta - oracle).abs() <= 1e-6 * oracle, "{} vs {oracle}", beta.beta);
}

#[test]
fn beta_rejects_overlapping_radius() {
    let c = BoundaryCurve::unit_disk();
    let m = generate_mesh(&c, 0.1, None).unwrap();
    let u: Vec<f64> = (0..m.vertex_count())
        .map(|i| {
            let x = m.position(i);
            1.0 + 0.5 * (2.0 * x[1].atan2(x[0])).cos() * (x[0] * x[0] + x[1] * x[1])
        })
        .collect();
    let peaks = detect_peaks(&m, &u, 10.0, None).unwrap();
    assert_eq!(peaks.len(), 2);
    assert!(matches!(
        beta_integral(&m, &u, 10.0, &peaks, 0, 1.2),
        Err(Error::OverlappingPeaks { .. })
    ));
    assert!(beta_integral(&m, &u, 10.0, &peaks, 0, 0.5).is_ok());
}

#[test]
fn rescaled_profile_normalization_and_maximality() {
    let (disc, branch) = disk_branch(0.1, vec![10.0, 20.0, 30.0]);
    let u = branch.entry(30.0).unwrap().solution.values();
    let peaks = detect_peaks(&disc.mesh, u, 30.0, None).unwrap();
    let prof = rescale_profile(&disc.mesh, u, 30.0, &peaks[0], &ProfileGrid::default()).unwrap();
    assert_eq!(prof.t[0], [0.0, 0.0]);
    assert_eq!(prof.w[0], 0.0);
    assert!(prof.max_w <= 1e-8, "{}", prof.max_w);
    assert!(prof.error < 0.2, "{}", prof.error);
}

#[test]
fn unresolved_peak_is_reported() {
    let c = BoundaryCurve::unit_disk();
    let m = generate_mesh(&c, 0.2, None).unwrap();
    let u = bubble_ansatz(&m, 0.0, 40.0, SQRT_E).unwrap().values;
    let peaks = detect_peaks(&m, &u, 40.0, None).unwrap();
    let err = rescale_profile(&m, &u, 40.0, &peaks[0], &ProfileGrid::default()).unwrap_err();
    assert!(matches!(err, Error::UnresolvedPeak { .. }));
    assert!(err.to_string().contains("increase grading or lower p"));
}

#[test]
fn pohozaev_guards() {
    let c = BoundaryCurve::unit_disk();
    let m = generate_mesh(&c, 0.1, None).unwrap();
    let zero = vec![0.0; m.vertex_count()];
    let b = pohozaev_residual(&m, &zero, 10.0, ArcParam::new(0.0), 0.3).unwrap();
    assert_eq!(b.residual, 0.0);
    assert!(matches!(
        pohozaev_residual(&m, &zero, 10.0, ArcParam::new(0.0), 1.5),
        Err(Error::OutsideChart { .. })
    ));
}

#[test]
fn pohozaev_cosh_converges() {
    let c = BoundaryCurve::unit_disk();
    let mut prev = f64::INFINITY;
    for h in [0.2, 0.1, 0.05] {
        let m = generate_mesh(&c, h, None).unwrap();
        let u = interpolate(&m, |x| x[0].cosh());
        let b = pohozaev_residual_with(&m, &u, ArcParam::new(0.7), 0.3, |s, _| {
            let x = c.point_at(&s);
            x[0].sinh() * c.normal(s.value())[0]
        })
        .unwrap();
        assert!(b.residual < prev && b.residual < 0.04 * h, "h={h}: {}", b.residual);
        prev = b.residual;
    }
    assert!(prev < 1e-3);
}

#[test]
fn single_bubble_properties_and_energy() {
    let (disc, branch) = disk_branch(0.1, vec![10.0, 20.0, 40.0, 50.0]);
    let e = branch.entry(50.0).unwrap();
    let u = e.solution.values();
    let peaks = detect_peaks(&disc.mesh, u, 50.0, None).unwrap();
    let props = property_checks(&disc.mesh, u, 50.0, &peaks).unwrap();
    assert_eq!(props.separation_ratio, None);
    assert_eq!(props.separation_or_infinity(), f64::INFINITY);
    assert_eq!(props.boundary_ratio, 0.0);
    assert!(props.p4_sup.is_finite() && props.p4_sup > 0.0);

    let check = energy_check(e.energy.dirichlet, 50.0, &peaks);
    assert_eq!(check.target, blowup_core::TWO_PI_E);
    assert_eq!(check.p_energy, 50.0 * e.energy.dirichlet);
    let bound = 2.0 * std::f64::consts::PI * peaks[0].amplitude.powi(2);
    assert_eq!(check.lower_bound, bound);
    assert_eq!(check.lower_bound_holds, check.p_energy >= ENERGY_SLACK * bound);

    // c from D_δ for δ ∈ {r/2, r}.
    let r = 0.1 * disc.mesh.curve().length();
    let full = beta_integral(&disc.mesh, u, 50.0, &peaks, 0, r).unwrap();
    let half = beta_integral(&disc.mesh, u, 50.0, &peaks, 0, 0.5 * r).unwrap();
    assert!((half.c / full.c - 1.0).abs() < 0.05, "{} vs {}", half.c, full.c);
}

#[test]
fn report_on_trivial_field_records_no_concentration() {
    let c = BoundaryCurve::unit_disk();
    let m = generate_mesh(&c, 0.2, None).unwrap();
    let disc = Discretization::new(m, &SolveConfig::default()).unwrap();
    let u = vec![0.3; disc.mesh.vertex_count()];
    let rep = diagnose(&disc, &u, 10.0, &ReportConfig::default());
    assert_eq!(rep.m, 0);
    assert!(rep.peaks.is_empty());
    assert!(rep.failures.iter().any(|f| f.contains("no concentration detected")));
}

#[test]
fn report_csv_layout() {
    let (disc, branch) = disk_branch(0.1, vec![10.0, 20.0, 30.0]);
    let config = ReportConfig {
        representation: false,
        phi_gradient: false,
        ..Default::default()
    };
    let report = build_report(&disc, &branch, &config).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "p,m,sup_norm,p_energy,beta_1,c_1,pohozaev_res,p4_sup,phi_grad_norm"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("10,1,"));
    assert!(rows.iter().all(|r| r.split(',').count() == 9 && r.ends_with(',')));
    assert!(report.trend.sup_norm.is_some());
    assert_eq!(csv, build_report(&disc, &branch, &config).unwrap().to_csv());
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blowup_core::fem::{energy, NodalField};
use blowup_core::geometry::{generate_mesh, BoundaryCurve};
use blowup_core::io::{read_branch, write_branch};
use blowup_core::solver::{BoundarySolution, BranchEntry, Discretization, SolutionBranch, SolveConfig};

fn blowup(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup"))
        .current_dir(dir)
        .env_remove("BLOWUP_OUTPUT_ROOT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn mesh_reports_euler_characteristic() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["mesh", "--domain", "disk", "--h", "0.1", "--out", "m"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("chi = 1"));
    assert!(fs::read_to_string(tmp.path().join("m/mesh.txt")).unwrap().starts_with("vertices "));

    let o = blowup(
        tmp.path(),
        &["mesh", "--domain", "ellipse", "--a", "2", "--b", "1", "--h", "0.1", "--grade", "(2,0):8", "--out", "e"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let graded = fs::read_to_string(tmp.path().join("e/mesh.txt")).unwrap();
    let plain = blowup(tmp.path(), &["mesh", "--domain", "ellipse", "--a", "2", "--b", "1", "--h", "0.1", "--out", "p"]);
    assert!(plain.status.success());
    assert!(graded.len() > fs::read_to_string(tmp.path().join("p/mesh.txt")).unwrap().len());
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["mesh", "--h", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("h must be positive"));

    fs::write(tmp.path().join("bad.toml"), "[mesh]\nsize = 0.1\n").unwrap();
    let o = blowup(tmp.path(), &["--config", "bad.toml", "mesh"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));

    let o = blowup(tmp.path(), &["green", "--h", "0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = blowup(tmp.path(), &["solve", "--p-list", "20,10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn default_config_parses_back() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["config"]);
    assert!(o.status.success());
    fs::write(tmp.path().join("c.toml"), stdout(&o)).unwrap();
    let o = blowup(tmp.path(), &["--config", "c.toml", "mesh", "--h", "0.3"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn solve_and_diagnose_single_bubble() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["solve", "--domain", "disk", "--p-list", "10,20,40", "--peaks", "0", "--out", "b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("b");
    let (_, branch) = read_branch(&dir).unwrap();
    assert_eq!(branch.exponents(), vec![10.0, 20.0, 40.0]);

    let o = blowup(tmp.path(), &["diagnose", "b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&dir.join("report.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1] == 1.0));
    let plot = fs::read_to_string(dir.join("plot.dat")).unwrap();
    assert!(plot.starts_with("# p sup_norm p_energy sqrt_e two_pi_e"));
    for line in plot.lines().skip(1) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert!((cols[3].parse::<f64>().unwrap() / blowup_core::SQRT_E - 1.0).abs() < 1e-12);
        assert!((cols[4].parse::<f64>().unwrap() / blowup_core::TWO_PI_E - 1.0).abs() < 1e-12);
    }
    assert!(dir.join("report.json").is_file());
}

#[test]
fn constant_ansatz_converges_to_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["solve", "--p-list", "10", "--ansatz", "constant", "--out", "z"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("p = 10") && err.contains("converged to zero solution"), "{err}");
}

#[test]
fn auto_peaks_pick_antipodal_sites_and_diagnose_two_peaks() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["solve", "--p-list", "10,20", "--peaks", "auto", "--m", "2", "--out", "two"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (mesh, branch) = read_branch(&tmp.path().join("two")).unwrap();
    let gap = mesh.curve().arc_distance(branch.sites[0], branch.sites[1]);
    assert!((gap / std::f64::consts::PI - 1.0).abs() < 0.02, "{gap}");

    let o = blowup(tmp.path(), &["diagnose", "two"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&tmp.path().join("two/report.csv"));
    assert!(rows.iter().all(|r| r[1] == 2.0));
}

#[test]
fn diagnose_trivial_and_missing_branches() {
    let tmp = tempfile::tempdir().unwrap();
    let mesh = generate_mesh(&BoundaryCurve::unit_disk(), 0.2, None).unwrap();
    let disc = Discretization::new(mesh, &SolveConfig::default()).unwrap();
    let field = NodalField::constant(disc.mesh.vertex_count(), 0.3, "flat");
    let p = 10.0;
    let branch = SolutionBranch {
        shape: disc.mesh.curve().shape(),
        mesh: disc.mesh.spec().clone(),
        sites: vec![],
        provenance: "flat".into(),
        entries: vec![BranchEntry {
            p,
            energy: energy(&disc.mesh, &disc.system, &field.values, p, &disc.quadrature),
            solution: BoundarySolution {
                field,
                p,
                iterations: 0,
                residual_norm: 0.0,
                history: vec![],
            },
        }],
    };
    write_branch(&tmp.path().join("flat"), &branch).unwrap();
    let o = blowup(tmp.path(), &["diagnose", "flat", "--out", "rep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plot = fs::read_to_string(tmp.path().join("rep/plot.dat")).unwrap();
    assert!(plot.contains("no concentration detected"), "{plot}");
    let csv = fs::read_to_string(tmp.path().join("rep/report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("10,0,"));

    let o = blowup(tmp.path(), &["diagnose", "nowhere"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn disk_robin_table_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["green", "--robin-samples", "8", "--out", "g"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Vec<f64> = csv_rows(&tmp.path().join("g/robin.csv")).iter().map(|r| r[3]).collect();
    assert_eq!(r.len(), 8);
    let mean = r.iter().sum::<f64>() / 8.0;
    assert!(r.iter().all(|v| (v / mean - 1.0).abs() < 0.02), "{r:?}");
}

#[test]
fn phi_critical_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = blowup(tmp.path(), &["green", "--phi-crit", "2", "--out", "d"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&tmp.path().join("d/phi_crit.csv"));
    assert!(!rows.is_empty());
    for r in &rows {
        assert_eq!(r[0], 2.0);
        let gap = (r[2] - r[1]).abs();
        assert!((gap / std::f64::consts::PI - 1.0).abs() < 0.02, "{gap}");
    }

    // Ellipse, seed 0: the descent stops near the lower minor-axis endpoint
    // (0, −1) at arc parameter 3L/4 ≈ 7.2663.
    let o = blowup(
        tmp.path(),
        &["green", "--domain", "ellipse", "--a", "2", "--b", "1", "--phi-crit", "1", "--starts", "1", "--out", "e"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&tmp.path().join("e/phi_crit.csv"));
    assert_eq!(rows.len(), 1);
    assert!((rows[0][1] - 7.194_660_367_760).abs() < 1e-6, "{:?}", rows[0]);
    assert!((rows[0][1] - 7.266_336_165_41).abs() < 0.1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["r1", "r2"] {
        let o = blowup(tmp.path(), &["solve", "--p-list", "10,20", "--seed", "3", "--out", out]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(blowup(tmp.path(), &["diagnose", out]).status.success());
        let o = blowup(tmp.path(), &["green", "--phi-crit", "2", "--seed", "3", "--out", out]);
        assert!(o.status.success());
    }
    for f in ["report.csv", "plot.dat", "phi_crit.csv", "branch.json"] {
        let a = fs::read(tmp.path().join("r1").join(f)).unwrap();
        let b = fs::read(tmp.path().join("r2").join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_blowup"))
        .current_dir(tmp.path())
        .env("BLOWUP_OUTPUT_ROOT", &root)
        .args(["mesh", "--h", "0.3", "--out", "m"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(root.join("m/mesh.txt").is_file());
}

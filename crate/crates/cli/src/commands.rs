use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use blowup_core::diagnostics::build_report;
use blowup_core::fem::{energy, NodalField};
use blowup_core::geometry::{generate_mesh, BoundaryCurve, DomainMesh, Grading};
use blowup_core::green::{phi_critical_search, robin};
use blowup_core::io::{read_branch, write_branch};
use blowup_core::solver::{
    bubble_epsilon, newton_solve, solve_branch, BranchEntry, Discretization, SolutionBranch,
};
use blowup_core::{SQRT_E, TWO_PI_E};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{resolve_output, PeakSpec, RunConfig};
use crate::{Classify, Outcome, Status};

/// Peak height used to size the innermost grading ring.
const GRADING_HEIGHT: f64 = 1.55;

fn output_dir(config: &RunConfig) -> Outcome<PathBuf> {
    let dir = resolve_output(&config.output.dir);
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .or_status(Status::Config)?;
    Ok(dir)
}

fn write(path: &Path, text: &str, status: Status) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .or_status(status)
}

fn curve(config: &RunConfig) -> Outcome<BoundaryCurve> {
    config.mesh.validate().or_status(Status::Config)?;
    config.domain.curve().or_status(Status::Config)
}

fn build_mesh(curve: &BoundaryCurve, h: f64, grading: Option<&Grading>) -> Outcome<DomainMesh> {
    let mesh = generate_mesh(curve, h, grading).or_status(Status::Solver)?;
    mesh.validate().or_status(Status::Solver)?;
    Ok(mesh)
}

fn discretize(config: &RunConfig, mesh: DomainMesh, status: Status) -> Outcome<Discretization> {
    Discretization::new(mesh, &config.solver).or_status(status)
}

pub fn mesh(config: &RunConfig) -> Outcome {
    let curve = curve(config)?;
    let grading = config.mesh.grading(&curve).or_status(Status::Config)?;
    let mesh = build_mesh(&curve, config.mesh.h, grading.as_ref())?;
    let dir = output_dir(config)?;
    let path = dir.join("mesh.txt");
    write(&path, &mesh.to_text(), Status::Solver)?;
    let s = mesh.stats();
    println!("mesh written to {}", path.display());
    println!("V = {}  E = {}  F = {}  chi = {}", s.vertices, s.edges, s.triangles, s.euler);
    println!(
        "boundary edges = {}  length in [{:.4e}, {:.4e}]",
        s.boundary_edges, s.min_boundary_edge, s.max_boundary_edge
    );
    println!("min angle = {:.2} deg  max diameter = {:.4e}", s.min_angle_deg, s.max_diameter);
    Ok(())
}

/// Starts for the φ search: `m` points evenly spread from a random
/// offset, each perturbed by up to 15% of the spacing.
fn random_starts(curve: &BoundaryCurve, m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = curve.length();
    let spacing = len / m as f64;
    (0..count)
        .map(|_| {
            let offset = rng.gen::<f64>() * len;
            (0..m)
                .map(|k| curve.wrap(offset + k as f64 * spacing + rng.gen_range(-0.15..0.15) * spacing))
                .collect()
        })
        .collect()
}

fn critical_points(
    config: &RunConfig,
    disc: &Discretization,
    m: usize,
) -> Outcome<Vec<blowup_core::green::CriticalPoint>> {
    if m == 0 || config.green.starts == 0 {
        return Err(anyhow!("φ search needs m ≥ 1 and at least one start")).or_status(Status::Config);
    }
    let starts = random_starts(disc.mesh.curve(), m, config.green.starts, config.seed);
    phi_critical_search(disc, m, &starts, &config.green.search).or_status(Status::Diagnostics)
}

pub fn solve(config: &RunConfig) -> Outcome {
    let curve = curve(config)?;
    config.solver.validate().or_status(Status::Config)?;
    let schedule = &config.solver.schedule;
    let explicit = config.mesh.grading(&curve).or_status(Status::Config)?;
    let dir = output_dir(config)?;

    let branch = match config.solve.ansatz.as_str() {
        "constant" => {
            let mesh = build_mesh(&curve, config.mesh.h, explicit.as_ref())?;
            let disc = discretize(config, mesh, Status::Solver)?;
            let initial = NodalField::constant(disc.mesh.vertex_count(), config.solve.constant, "constant");
            let mut entries = Vec::new();
            for &p in schedule {
                let solution = newton_solve(&disc, &initial, p, &config.solver)
                    .with_context(|| format!("solve failed at p = {p}"))
                    .or_status(Status::Solver)?;
                let energy = energy(&disc.mesh, &disc.system, solution.values(), p, &disc.quadrature);
                entries.push(BranchEntry { p, solution, energy });
            }
            SolutionBranch {
                shape: curve.shape(),
                mesh: disc.mesh.spec().clone(),
                sites: Vec::new(),
                provenance: format!("constant ansatz {}", config.solve.constant),
                entries,
            }
        }
        "bubble" => {
            let sites = match config.solve.peak_spec().or_status(Status::Config)? {
                PeakSpec::Sites(s) => s,
                PeakSpec::Auto(m) => {
                    let mesh = build_mesh(&curve, config.mesh.h, explicit.as_ref())?;
                    let disc = discretize(config, mesh, Status::Solver)?;
                    let found = critical_points(config, &disc, m)?;
                    let best = found
                        .into_iter()
                        .min_by(|a, b| a.configuration.value.total_cmp(&b.configuration.value))
                        .ok_or_else(|| anyhow!("φ search found no critical point"))
                        .or_status(Status::Solver)?;
                    println!("φ_{m} critical sites: {:?}", best.configuration.points);
                    best.configuration.points
                }
            };
            let grading = match explicit {
                Some(g) => Some(g),
                None if config.mesh.auto_grade => {
                    let factor = config.mesh.auto_factor;
                    let p_max = schedule.last().copied().unwrap_or(10.0);
                    let core = config
                        .mesh
                        .core
                        .unwrap_or(bubble_epsilon(p_max, GRADING_HEIGHT) / factor);
                    Some(Grading::new(sites.clone(), factor).with_core(core))
                }
                None => None,
            };
            let mesh = build_mesh(&curve, config.mesh.h, grading.as_ref())?;
            let disc = discretize(config, mesh, Status::Solver)?;
            solve_branch(&disc, &sites, &config.solver).or_status(Status::Solver)?
        }
        other => return Err(anyhow!("unknown ansatz `{other}`")).or_status(Status::Config),
    };

    write_branch(&dir, &branch).or_status(Status::Solver)?;
    println!("branch written to {}", dir.display());
    println!("{:>8} {:>6} {:>12} {:>12} {:>12}", "p", "iters", "residual", "sup_norm", "p_energy");
    for e in &branch.entries {
        println!(
            "{:>8} {:>6} {:>12.4e} {:>12.6} {:>12.6}",
            e.p,
            e.solution.iterations,
            e.solution.residual_norm,
            e.solution.sup_norm(),
            e.p * e.energy.dirichlet
        );
    }
    Ok(())
}

pub fn diagnose(config: &RunConfig, branch_dir: &Path, out: Option<&Path>) -> Outcome {
    let (mesh, branch) = read_branch(branch_dir)
        .with_context(|| format!("reading branch {}", branch_dir.display()))
        .or_status(Status::Diagnostics)?;
    let disc = discretize(config, mesh, Status::Diagnostics)?;
    let report = build_report(&disc, &branch, &config.diagnostics).or_status(Status::Diagnostics)?;
    let dir = match out {
        Some(o) => resolve_output(o),
        None => branch_dir.to_path_buf(),
    };
    fs::create_dir_all(&dir).or_status(Status::Diagnostics)?;
    write(&dir.join("report.csv"), &report.to_csv(), Status::Diagnostics)?;
    write(
        &dir.join("report.json"),
        &(report.to_json().or_status(Status::Diagnostics)? + "\n"),
        Status::Diagnostics,
    )?;

    let mut plot = String::from("# p sup_norm p_energy sqrt_e two_pi_e m_two_pi_e status\n");
    for r in &report.reports {
        let status = if r.failures.is_empty() {
            "ok".to_string()
        } else {
            r.failures.join("; ")
        };
        let _ = writeln!(
            plot,
            "{} {:.12e} {:.12e} {:.12e} {:.12e} {:.12e} \"{}\"",
            r.p,
            r.sup_norm,
            r.p_energy(),
            SQRT_E,
            TWO_PI_E,
            r.m as f64 * TWO_PI_E,
            status.replace('"', "'")
        );
    }
    write(&dir.join("plot.dat"), &plot, Status::Diagnostics)?;

    println!("report written to {}", dir.display());
    for r in &report.reports {
        print!("p = {}: m = {}, sup = {:.6}, p·E = {:.6}", r.p, r.m, r.sup_norm, r.p_energy());
        if r.failures.is_empty() {
            println!();
        } else {
            println!("  [{}]", r.failures.join("; "));
        }
    }
    if let Some(t) = &report.trend.sup_norm {
        println!("extrapolated sup norm {:.6} (√e = {SQRT_E:.6})", t.limit);
    }
    if let Some(t) = &report.trend.p_energy {
        println!("extrapolated p·E {:.6} (2πe = {TWO_PI_E:.6})", t.limit);
    }
    Ok(())
}

pub fn green(config: &RunConfig) -> Outcome {
    let curve = curve(config)?;
    if config.green.robin_samples.is_none() && config.green.phi_crit.is_none() {
        return Err(anyhow!("nothing to do: pass --robin-samples or --phi-crit")).or_status(Status::Config);
    }
    let grading = config.mesh.grading(&curve).or_status(Status::Config)?;
    let mesh = build_mesh(&curve, config.mesh.h, grading.as_ref())?;
    let disc = discretize(config, mesh, Status::Diagnostics)?;
    let dir = output_dir(config)?;

    if let Some(k) = config.green.robin_samples {
        if k == 0 {
            return Err(anyhow!("--robin-samples must be positive")).or_status(Status::Config);
        }
        let mut csv = String::from("s,x,y,robin\n");
        let mut values = Vec::with_capacity(k);
        for i in 0..k {
            let s = curve.length() * i as f64 / k as f64;
            let r = robin(&disc, s)
                .with_context(|| format!("Robin function at s = {s}"))
                .or_status(Status::Diagnostics)?;
            let x = curve.point(s);
            let _ = writeln!(csv, "{s:.12e},{:.12e},{:.12e},{r:.12e}", x[0], x[1]);
            values.push(r);
        }
        let path = dir.join("robin.csv");
        write(&path, &csv, Status::Diagnostics)?;
        let mean = values.iter().sum::<f64>() / k as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64).sqrt();
        println!("Robin table written to {}", path.display());
        println!("mean = {mean:.8}  sd/mean = {:.3e}", sd / mean.abs());
    }

    if let Some(m) = config.green.phi_crit {
        let found = critical_points(config, &disc, m)?;
        if found.is_empty() {
            bail_diag("φ search found no critical point")?;
        }
        let mut csv = String::from("m");
        for j in 1..=m {
            let _ = write!(csv, ",s_{j}");
        }
        csv.push_str(",phi,grad_norm,iterations\n");
        for c in &found {
            let mut points = c.configuration.points.clone();
            points.sort_by(f64::total_cmp);
            let _ = write!(csv, "{m}");
            for s in &points {
                let _ = write!(csv, ",{s:.12e}");
            }
            let _ = writeln!(
                csv,
                ",{:.12e},{:.12e},{}",
                c.configuration.value,
                c.gradient.norm(),
                c.iterations
            );
        }
        let path = dir.join("phi_crit.csv");
        write(&path, &csv, Status::Diagnostics)?;
        println!("φ_{m} critical points written to {}", path.display());
        print!("{csv}");
    }
    Ok(())
}

fn bail_diag(msg: &str) -> Outcome {
    Err(anyhow!("{msg}")).or_status(Status::Diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_are_seeded() {
        let c = BoundaryCurve::unit_disk();
        let a = random_starts(&c, 2, 3, 7);
        assert_eq!(a, random_starts(&c, 2, 3, 7));
        assert_ne!(a, random_starts(&c, 2, 3, 8));
        for s in &a {
            let gap = c.arc_distance(s[0], s[1]);
            assert!(gap > 0.6 * std::f64::consts::PI, "{gap}");
        }
    }
}

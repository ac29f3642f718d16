//! WebAssembly bindings for a static demo page.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no bundler or framework.

use blowup_core::diagnostics::{beta_integral, detect_peaks};
use blowup_core::geometry::{generate_mesh, BoundaryCurve, DomainMesh, Grading, MeshStats};
use blowup_core::green::robin;
use blowup_core::solver::{bubble_epsilon, solve_branch, Discretization, SolveConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest mesh the page will build.
const MAX_VERTICES: usize = 20_000;

fn curve(preset: &str, a: f64, b: f64) -> Result<BoundaryCurve, String> {
    let params = match preset {
        "ellipse" => vec![("a", a), ("b", b)],
        "star" => vec![("amplitude", a), ("lobes", b)],
        _ => vec![],
    };
    BoundaryCurve::preset(preset, &params).map_err(|e| e.to_string())
}

fn mesh(curve: &BoundaryCurve, h: f64, grading: Option<&Grading>) -> Result<DomainMesh, String> {
    if !(0.02..=0.5).contains(&h) {
        return Err(format!("h must lie in [0.02, 0.5], got {h}"));
    }
    let m = generate_mesh(curve, h, grading).map_err(|e| e.to_string())?;
    if m.vertex_count() > MAX_VERTICES {
        return Err(format!("mesh too large ({} vertices)", m.vertex_count()));
    }
    Ok(m)
}

#[derive(Serialize)]
pub struct MeshView {
    pub stats: MeshStats,
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

pub fn mesh_view(preset: &str, a: f64, b: f64, h: f64) -> Result<MeshView, String> {
    let m = mesh(&curve(preset, a, b)?, h, None)?;
    Ok(MeshView {
        stats: m.stats(),
        points: (0..m.vertex_count()).map(|i| m.position(i)).collect(),
        triangles: m.triangles().to_vec(),
    })
}

#[derive(Serialize)]
pub struct RobinTable {
    pub s: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub robin: Vec<f64>,
}

pub fn robin_table(preset: &str, a: f64, b: f64, h: f64, samples: usize) -> Result<RobinTable, String> {
    if samples == 0 || samples > 64 {
        return Err(format!("samples must lie in 1..=64, got {samples}"));
    }
    let c = curve(preset, a, b)?;
    let disc = Discretization::new(mesh(&c, h, None)?, &SolveConfig::default()).map_err(|e| e.to_string())?;
    let s: Vec<f64> = (0..samples).map(|k| c.length() * k as f64 / samples as f64).collect();
    let robin = s
        .iter()
        .map(|&si| robin(&disc, si).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(RobinTable {
        points: s.iter().map(|&si| c.point(si)).collect(),
        s,
        robin,
    })
}

#[derive(Serialize)]
pub struct BubbleSolve {
    pub p: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub p_energy: Vec<f64>,
    pub beta: Vec<Option<f64>>,
    /// Boundary trace `(s, u)` at the largest exponent.
    pub trace: Vec<[f64; 2]>,
}

/// Single bubble at `s = 0` on the unit disk, continued up to `p_max`.
pub fn bubble_solve(p_max: f64, h: f64) -> Result<BubbleSolve, String> {
    if !(10.0..=80.0).contains(&p_max) {
        return Err(format!("p must lie in [10, 80], got {p_max}"));
    }
    let mut schedule = vec![10.0];
    while schedule.last().unwrap() + 10.0 <= p_max {
        schedule.push(schedule.last().unwrap() + 10.0);
    }
    if *schedule.last().unwrap() < p_max {
        schedule.push(p_max);
    }
    let c = BoundaryCurve::unit_disk();
    let g = Grading::new(vec![0.0], 8.0).with_core(bubble_epsilon(p_max, 1.55) / 8.0);
    let config = SolveConfig {
        schedule,
        ..Default::default()
    };
    let disc = Discretization::new(mesh(&c, h, Some(&g))?, &config).map_err(|e| e.to_string())?;
    let branch = solve_branch(&disc, &[0.0], &config).map_err(|e| e.to_string())?;
    let mut out = BubbleSolve {
        p: vec![],
        sup_norm: vec![],
        p_energy: vec![],
        beta: vec![],
        trace: vec![],
    };
    let r = 0.1 * c.length();
    for e in &branch.entries {
        let u = e.solution.values();
        out.p.push(e.p);
        out.sup_norm.push(e.solution.sup_norm());
        out.p_energy.push(e.p * e.energy.dirichlet);
        let beta = detect_peaks(&disc.mesh, u, e.p, None)
            .ok()
            .filter(|pk| !pk.is_empty())
            .and_then(|pk| beta_integral(&disc.mesh, u, e.p, &pk, 0, r).ok())
            .map(|b| b.beta);
        out.beta.push(beta);
    }
    let last = branch.entries.last().expect("non-empty branch").solution.values();
    let mut trace: Vec<[f64; 2]> = disc
        .mesh
        .boundary_vertices()
        .into_iter()
        .filter_map(|v| disc.mesh.boundary_param(v).map(|s| [c.wrap(s.value()), last[v]]))
        .collect();
    trace.sort_by(|x, y| x[0].total_cmp(&y[0]));
    out.trace = trace;
    Ok(out)
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Mesh of a preset domain: statistics, vertices and triangles.
#[wasm_bindgen(js_name = meshView)]
pub fn mesh_view_js(preset: &str, a: f64, b: f64, h: f64) -> Result<String, JsError> {
    to_js(mesh_view(preset, a, b, h))
}

/// Robin function at equally spaced boundary points.
#[wasm_bindgen(js_name = robinTable)]
pub fn robin_table_js(preset: &str, a: f64, b: f64, h: f64, samples: usize) -> Result<String, JsError> {
    to_js(robin_table(preset, a, b, h, samples))
}

/// Single-bubble branch on the unit disk.
#[wasm_bindgen(js_name = bubbleSolve)]
pub fn bubble_solve_js(p_max: f64, h: f64) -> Result<String, JsError> {
    to_js(bubble_solve(p_max, h))
}

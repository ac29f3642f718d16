//! Branch directories: one field file per exponent plus `branch.json`.
//!
//! Meshes are not stored; they are regenerated from the curve shape and
//! mesh spec, which is deterministic.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fem::{EnergyRecord, NodalField};
use crate::geometry::{generate_mesh, BoundaryCurve, CurveShape, DomainMesh, MeshSpec};
use crate::solver::{BoundarySolution, BranchEntry, SolutionBranch};
use crate::{Error, Result};

pub const BRANCH_FILE: &str = "branch.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryMeta {
    p: f64,
    file: String,
    iterations: usize,
    residual_norm: f64,
    history: Vec<f64>,
    dirichlet: f64,
    boundary_lp: f64,
    free_energy: f64,
    sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchMeta {
    shape: CurveShape,
    mesh: MeshSpec,
    vertices: usize,
    sites: Vec<f64>,
    provenance: String,
    schedule: Vec<f64>,
    entries: Vec<EntryMeta>,
}

/// File name of the field solved at `p`.
pub fn field_file_name(p: f64) -> String {
    format!("u_p{p}.field")
}

/// Regenerates the mesh a branch was solved on.
pub fn regenerate_mesh(shape: CurveShape, spec: &MeshSpec) -> Result<DomainMesh> {
    let curve = BoundaryCurve::new(shape)?;
    generate_mesh(&curve, spec.h, spec.grading.as_ref())
}

pub fn write_branch(dir: &Path, branch: &SolutionBranch) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(branch.entries.len());
    let mut vertices = 0;
    for e in &branch.entries {
        let file = field_file_name(e.p);
        fs::write(dir.join(&file), e.solution.field.to_text())?;
        vertices = e.solution.field.len();
        entries.push(EntryMeta {
            p: e.p,
            file,
            iterations: e.solution.iterations,
            residual_norm: e.solution.residual_norm,
            history: e.solution.history.clone(),
            dirichlet: e.energy.dirichlet,
            boundary_lp: e.energy.boundary_lp,
            free_energy: e.energy.free_energy,
            sup_norm: e.solution.sup_norm(),
        });
    }
    let meta = BranchMeta {
        shape: branch.shape,
        mesh: branch.mesh.clone(),
        vertices,
        sites: branch.sites.clone(),
        provenance: branch.provenance.clone(),
        schedule: branch.exponents(),
        entries,
    };
    fs::write(dir.join(BRANCH_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Reads a branch together with its regenerated mesh.
pub fn read_branch(dir: &Path) -> Result<(DomainMesh, SolutionBranch)> {
    let meta_path: PathBuf = dir.join(BRANCH_FILE);
    if !meta_path.is_file() {
        return Err(Error::Format(format!("{} not found", meta_path.display())));
    }
    let meta: BranchMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
    let mesh = regenerate_mesh(meta.shape, &meta.mesh)?;
    if mesh.vertex_count() != meta.vertices && !meta.entries.is_empty() {
        return Err(Error::Format(format!(
            "regenerated mesh has {} vertices, branch expects {}",
            mesh.vertex_count(),
            meta.vertices
        )));
    }
    let mut entries = Vec::with_capacity(meta.entries.len());
    for e in meta.entries {
        let field = NodalField::from_text(&fs::read_to_string(dir.join(&e.file))?)?;
        if field.len() != mesh.vertex_count() {
            return Err(Error::Format(format!("{} has {} values", e.file, field.len())));
        }
        entries.push(BranchEntry {
            p: e.p,
            solution: BoundarySolution {
                field,
                p: e.p,
                iterations: e.iterations,
                residual_norm: e.residual_norm,
                history: e.history,
            },
            energy: EnergyRecord {
                dirichlet: e.dirichlet,
                boundary_lp: e.boundary_lp,
                free_energy: e.free_energy,
            },
        });
    }
    Ok((
        mesh,
        SolutionBranch {
            shape: meta.shape,
            mesh: meta.mesh,
            sites: meta.sites,
            provenance: meta.provenance,
            entries,
        },
    ))
}

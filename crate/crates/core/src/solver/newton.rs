use std::sync::Arc;

use serde::Serialize;

use super::config::SolveConfig;
use crate::fem::{assemble_volume, boundary_terms, BoundaryQuadrature, LinearSystem, NodalField, POSITIVITY_FLOOR};
use crate::geometry::DomainMesh;
use crate::sparse::{norm2, norm_inf, CholeskySolver, CsrMatrix, LuSolver};
use crate::{Error, Result};

/// Mesh with its assembled operators and boundary quadrature.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: DomainMesh,
    pub system: LinearSystem,
    pub quadrature: BoundaryQuadrature,
    volume_solver: Arc<CholeskySolver>,
}

impl Discretization {
    pub fn new(mesh: DomainMesh, config: &SolveConfig) -> Result<Self> {
        let system = assemble_volume(&mesh)?;
        let volume_solver = Arc::new(CholeskySolver::new(&system.volume)?);
        Ok(Self {
            mesh,
            system,
            quadrature: config.quadrature(),
            volume_solver,
        })
    }

    /// Solves `(K + M) x = rhs`.
    pub fn solve_volume(&self, rhs: &[f64]) -> Vec<f64> {
        self.volume_solver.solve(rhs)
    }

    /// `(rᵀ (K + M)⁻¹ r)^{1/2}`, the discrete `H¹`-dual norm.
    pub fn dual_norm(&self, r: &[f64]) -> f64 {
        let z = self.solve_volume(r);
        z.iter().zip(r).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// `(K + M) u − ∫ u^p φᵢ`.
    pub fn residual(&self, u: &[f64], p: f64) -> Result<Vec<f64>> {
        let data = NeumannData::power(p);
        Ok(Problem { disc: self, data: &data }.residual(u, false)?.0)
    }
}

/// Boundary data `∂u/∂ν = u^power + load`; either part may be absent.
#[derive(Debug, Clone, Default)]
pub struct NeumannData {
    pub power: Option<f64>,
    /// Assembled load vector `∫ g φᵢ`.
    pub load: Option<Vec<f64>>,
}

impl NeumannData {
    pub fn power(p: f64) -> Self {
        Self {
            power: Some(p),
            load: None,
        }
    }
}

/// Deflation factor `η(u) = Π_k (shift + 1/‖u − u_k‖_M^power)`.
#[derive(Debug, Clone)]
pub struct Deflation {
    pub solutions: Vec<Vec<f64>>,
    pub shift: f64,
    pub power: f64,
}

impl Deflation {
    pub fn none() -> Self {
        Self {
            solutions: Vec::new(),
            shift: 1.0,
            power: 2.0,
        }
    }

    pub fn new(solutions: Vec<Vec<f64>>, config: &SolveConfig) -> Self {
        Self {
            solutions,
            shift: config.deflation_shift,
            power: config.deflation_power,
        }
    }

    /// `η` and `∇η`.
    fn factor(&self, mass: &CsrMatrix, u: &[f64]) -> (f64, Vec<f64>) {
        let mut eta = 1.0;
        let mut grad_log = vec![0.0; u.len()];
        for uk in &self.solutions {
            let d: Vec<f64> = u.iter().zip(uk).map(|(a, b)| a - b).collect();
            let md = mass.mul_vec(&d);
            let dist2: f64 = d.iter().zip(&md).map(|(a, b)| a * b).sum();
            let inv = dist2.powf(-0.5 * self.power);
            let m = self.shift + inv;
            eta *= m;
            // ∂(dist^{-q})/∂u = −q dist^{-q-2} M d.
            let c = -self.power * inv / dist2 / m;
            for (g, v) in grad_log.iter_mut().zip(&md) {
                *g += c * v;
            }
        }
        let grad = grad_log.into_iter().map(|g| g * eta).collect();
        (eta, grad)
    }

    /// Smallest `M`-norm distance to a deflated solution.
    pub fn min_distance(&self, mass: &CsrMatrix, u: &[f64]) -> f64 {
        self.solutions
            .iter()
            .map(|uk| {
                let d: Vec<f64> = u.iter().zip(uk).map(|(a, b)| a - b).collect();
                mass.inner(&d, &d).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Converged discrete solution.
#[derive(Debug, Clone, Serialize)]
pub struct BoundarySolution {
    #[serde(skip)]
    pub field: NodalField,
    pub p: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `‖R‖₂` before each Newton step and at the end.
    pub history: Vec<f64>,
}

impl BoundarySolution {
    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.field.sup_norm()
    }
}

struct Problem<'a> {
    disc: &'a Discretization,
    data: &'a NeumannData,
}

impl Problem<'_> {
    fn residual(&self, u: &[f64], jacobian: bool) -> Result<(Vec<f64>, Option<CsrMatrix>)> {
        let sys = &self.disc.system;
        let mut r = sys.volume.mul_vec(u);
        let mut jac = None;
        if let Some(p) = self.data.power {
            let bt = boundary_terms(&self.disc.mesh, u, p, &self.disc.quadrature, jacobian)?;
            for (ri, bi) in r.iter_mut().zip(&bt.residual) {
                *ri -= bi;
            }
            jac = bt.jacobian.map(|jb| sys.volume.add_scaled(&jb, -1.0));
        } else if jacobian {
            jac = Some(sys.volume.clone());
        }
        if let Some(g) = &self.data.load {
            for (ri, gi) in r.iter_mut().zip(g) {
                *ri -= gi;
            }
        }
        Ok((r, jac))
    }

    fn clip(&self, u: &mut [f64]) {
        if self.data.power.is_none() {
            return;
        }
        for e in self.disc.mesh.boundary_edges() {
            let v = e.v[0];
            if u[v] < POSITIVITY_FLOOR {
                u[v] = POSITIVITY_FLOOR;
            }
        }
    }
}

fn merit(r: &[f64]) -> f64 {
    let n = norm2(r);
    if n.is_finite() {
        n
    } else {
        f64::INFINITY
    }
}

/// Newton's method for `∂u/∂ν = u^p`.
pub fn newton_solve(
    disc: &Discretization,
    initial: &NodalField,
    p: f64,
    config: &SolveConfig,
) -> Result<BoundarySolution> {
    newton_solve_with(disc, initial, &NeumannData::power(p), config, &Deflation::none())
}

/// Damped Newton with optional deflation. Steps are halved until the
/// (deflated) residual norm decreases.
pub fn newton_solve_with(
    disc: &Discretization,
    initial: &NodalField,
    data: &NeumannData,
    config: &SolveConfig,
    deflation: &Deflation,
) -> Result<BoundarySolution> {
    config.validate()?;
    let n = disc.mesh.vertex_count();
    if initial.len() != n {
        return Err(Error::InvalidArgument(format!("initial field has {} values for {n} vertices", initial.len())));
    }
    let problem = Problem { disc, data };
    let mut u = initial.values.clone();
    problem.clip(&mut u);
    let mass = &disc.system.mass;
    let deflated = !deflation.solutions.is_empty();
    let mut history = Vec::new();
    let (mut r, _) = problem.residual(&u, false)?;
    let mut rnorm = merit(&r);
    let mut iterations = 0;
    loop {
        history.push(rnorm);
        if rnorm <= config.tolerance {
            break;
        }
        if iterations >= config.max_iterations {
            return Err(Error::Divergence {
                iterations,
                residual: rnorm,
            });
        }
        iterations += 1;
        let (_, jac) = problem.residual(&u, true)?;
        let lu = LuSolver::new(&jac.expect("Jacobian requested"))?;
        let mut step: Vec<f64> = lu.solve(&r)?.into_iter().map(|v| -v).collect();
        let eta0 = if deflated {
            let (eta, grad) = deflation.factor(mass, &u);
            let gd: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
            let scale = 1.0 / (1.0 - gd / eta);
            if scale.is_finite() {
                step.iter_mut().for_each(|v| *v *= scale);
            }
            eta
        } else {
            1.0
        };
        let current = eta0 * rnorm;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let mut trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
            problem.clip(&mut trial);
            if let Ok((rt, _)) = problem.residual(&trial, false) {
                let nt = merit(&rt);
                let eta = if deflated { deflation.factor(mass, &trial).0 } else { 1.0 };
                if eta * nt < current {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, nt)) = accepted else {
            return Err(Error::Divergence {
                iterations,
                residual: rnorm,
            });
        };
        log::debug!("newton {iterations}: |R| = {nt:.3e}, step {lambda}");
        u = trial;
        r = rt;
        rnorm = nt;
    }
    let sup = norm_inf(&u);
    if let Some(guard) = config.zero_guard {
        if sup < guard {
            return Err(Error::ZeroSolution { iterations, sup_norm: sup });
        }
    }
    if deflated {
        let d = deflation.min_distance(mass, &u);
        if d < 1e-3 {
            return Err(Error::Deflated { distance: d });
        }
    }
    let mut field = NodalField::new(u, initial.label.clone())?;
    field.p = data.power;
    Ok(BoundarySolution {
        field,
        p: data.power.unwrap_or(f64::NAN),
        iterations,
        residual_norm: rnorm,
        history,
    })
}

use crate::geometry::{cross, DomainMesh};
use crate::sparse::{norm2, CholeskySolver, CsrMatrix};
use crate::{Error, Result};

/// P1 stiffness matrix `∫ ∇φᵢ·∇φⱼ` of a triangle.
pub fn element_stiffness(v: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area2 = cross([v[1][0] - v[0][0], v[1][1] - v[0][1]], [v[2][0] - v[0][0], v[2][1] - v[0][1]]);
    let g = barycentric_gradients(v, area2);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = 0.5 * area2.abs() * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// P1 mass matrix `∫ φᵢ φⱼ` of a triangle.
pub fn element_mass(v: [[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let area = 0.5
        * cross([v[1][0] - v[0][0], v[1][1] - v[0][1]], [v[2][0] - v[0][0], v[2][1] - v[0][1]]).abs();
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

pub(crate) fn barycentric_gradients(v: [[f64; 2]; 3], area2: f64) -> [[f64; 2]; 3] {
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let a = v[(i + 1) % 3];
        let b = v[(i + 2) % 3];
        g[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    g
}

/// Assembled operators of the weak form.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// `stiffness + mass`.
    pub volume: CsrMatrix,
    pub boundary_mass: CsrMatrix,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.volume.dim()
    }

    /// Estimate of the smallest eigenvalue of the volume operator by
    /// inverse iteration.
    pub fn smallest_eigenvalue(&self, iterations: usize) -> Result<f64> {
        let chol = CholeskySolver::new(&self.volume)?;
        let n = self.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let nx = norm2(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            let y = chol.solve(&x);
            let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            lambda = 1.0 / dot;
            x = y;
        }
        Ok(lambda)
    }
}

/// Volume stiffness and mass, plus the boundary mass.
pub fn assemble_volume(mesh: &DomainMesh) -> Result<LinearSystem> {
    let n = mesh.vertex_count();
    let mut kt = Vec::with_capacity(9 * mesh.triangles().len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let frame = mesh.triangle_frame(t);
        let v = tri.map(|i| mesh.coords_in(frame, i));
        let area = mesh.triangle_area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateElement { element: t, area });
        }
        let ke = element_stiffness(v);
        let me = element_mass(v);
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], ke[i][j]));
                mt.push((tri[i], tri[j], me[i][j]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, &kt);
    let mass = CsrMatrix::from_triplets(n, &mt);
    let volume = stiffness.add_scaled(&mass, 1.0);
    Ok(LinearSystem {
        stiffness,
        mass,
        volume,
        boundary_mass: assemble_boundary_mass(mesh)?,
    })
}

/// `∫_∂Ω φᵢ φⱼ dσ` with the P1 trace taken linear in arc length.
pub fn assemble_boundary_mass(mesh: &DomainMesh) -> Result<CsrMatrix> {
    let mut t = Vec::with_capacity(4 * mesh.boundary_edges().len());
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        let len = e.arc_length();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::UnlinkedBoundaryEdge { edge: k });
        }
        let [a, b] = e.v;
        t.push((a, a, len / 3.0));
        t.push((b, b, len / 3.0));
        t.push((a, b, len / 6.0));
        t.push((b, a, len / 6.0));
    }
    Ok(CsrMatrix::from_triplets(mesh.vertex_count(), &t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_mesh, BoundaryCurve, Grading};

    #[test]
    fn reference_element() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let k = element_stiffness(v);
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-14);
            }
        }
        let m = element_mass(v);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 2.0 } else { 1.0 } * 0.5 / 12.0;
                assert!((m[i][j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn operators_symmetric_and_definite() {
        let c = BoundaryCurve::unit_disk();
        let g = Grading::new(vec![0.0], 8.0).with_core(1e-10);
        let mesh = generate_mesh(&c, 0.2, Some(&g)).unwrap();
        let sys = assemble_volume(&mesh).unwrap();
        assert!(sys.volume.asymmetry() < 1e-12);
        assert!(sys.boundary_mass.asymmetry() < 1e-12);
        let ones = vec![1.0; mesh.vertex_count()];
        let ku = sys.stiffness.mul_vec(&ones);
        assert!(ku.iter().all(|v| v.abs() < 1e-12));
        let total: f64 = sys.boundary_mass.row_sums().iter().sum();
        assert!((total - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        assert!(sys.smallest_eigenvalue(30).unwrap() > 0.0);
    }
}

//! Boundary curves, flattening charts and boundary-conforming meshes.

mod chart;
mod curve;
mod mesh;

pub use chart::FlatChart;
pub use curve::{ellipse_curvature, ArcParam, BoundaryCurve, CurveShape};
pub use mesh::{
    generate_mesh, Anchor, BoundaryEdge, DomainMesh, Fan, Frame, Grading, MeshSpec, MeshStats,
    Vertex,
};

/// Chart at the curve parameter `s0`.
pub fn local_chart(curve: &BoundaryCurve, s0: f64) -> FlatChart {
    FlatChart::new(curve, ArcParam::new(s0))
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

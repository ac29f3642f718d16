//! Boundary-conforming triangulations.
//!
//! Away from marked points the mesh is a constrained Delaunay triangulation
//! of uniform boundary nodes and a hexagonal interior lattice. Around each
//! marked boundary point a structured fan of geometrically shrinking
//! half-rings is laid out in the flattening chart, and its vertices are
//! stored as offsets from the marked point (the fan's anchor).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{cross, dot, norm, sub, ArcParam, BoundaryCurve, CurveShape, FlatChart};
use crate::{Error, Result};

/// Coordinate frame of a vertex: absolute, or an offset from an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Global,
    Anchor(usize),
}

/// Marked boundary point used as the origin of a local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub param: ArcParam,
    pub point: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub frame: Frame,
    pub local: [f64; 2],
}

/// Boundary edge `v[0] → v[1]` (counterclockwise) with its curve parameters;
/// `s[1] − s[0]` is the exact arc length of the curved segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub s: [ArcParam; 2],
}

impl BoundaryEdge {
    pub fn arc_length(&self) -> f64 {
        self.s[1].minus(&self.s[0])
    }
}

fn default_factor() -> f64 {
    8.0
}

fn default_angular() -> usize {
    16
}

/// Boundary grading around marked points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grading {
    /// Curve parameters of the marked points.
    pub points: Vec<f64>,
    /// The innermost ring has radius `h / factor` unless `core` is set.
    #[serde(default = "default_factor")]
    pub factor: f64,
    #[serde(default)]
    pub core: Option<f64>,
    /// Angular segments per half-ring (even).
    #[serde(default = "default_angular")]
    pub angular: usize,
}

impl Grading {
    pub fn new(points: Vec<f64>, factor: f64) -> Self {
        Self {
            points,
            factor,
            core: None,
            angular: default_angular(),
        }
    }

    pub fn with_core(mut self, core: f64) -> Self {
        self.core = Some(core);
        self
    }
}

/// Everything needed to regenerate a mesh for a given curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub h: f64,
    #[serde(default)]
    pub grading: Option<Grading>,
}

/// Structured fan around an anchor.
///
/// `rings[i][j]` sits at chart radius `radii[i]` and angle `πj/N`; ring
/// nodes `j = 0` and `j = N` lie on the boundary. Triangles between rings
/// `i` and `i + 1` start at `first_triangle + 2Ni`; the `N` triangles
/// touching the center come last.
#[derive(Debug, Clone)]
pub struct Fan {
    pub anchor: usize,
    pub center: usize,
    pub radii: Vec<f64>,
    pub rings: Vec<Vec<usize>>,
    pub first_triangle: usize,
    pub segments: usize,
}

impl Fan {
    pub fn triangle_count(&self) -> usize {
        2 * self.segments * (self.rings.len() - 1) + self.segments
    }

    pub fn outer_radius(&self) -> f64 {
        self.radii[0]
    }

    pub fn inner_radius(&self) -> f64 {
        *self.radii.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub euler: i64,
    pub min_angle_deg: f64,
    pub max_diameter: f64,
    pub min_boundary_edge: f64,
    pub max_boundary_edge: f64,
}

#[derive(Debug, Clone)]
struct Grid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl Grid {
    fn cell_of(&self, x: [f64; 2]) -> Option<(usize, usize)> {
        let i = ((x[0] - self.origin[0]) / self.cell).floor();
        let j = ((x[1] - self.origin[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
            return None;
        }
        Some((i as usize, j as usize))
    }
}

#[derive(Debug, Clone)]
pub struct DomainMesh {
    curve: BoundaryCurve,
    spec: MeshSpec,
    anchors: Vec<Anchor>,
    vertices: Vec<Vertex>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_param: Vec<Option<ArcParam>>,
    fans: Vec<Fan>,
    grid: OnceLock<Grid>,
}

impl DomainMesh {
    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn h(&self) -> f64 {
        self.spec.h
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary edges in counterclockwise order.
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn fans(&self) -> &[Fan] {
        &self.fans
    }

    /// Fan built around anchor `k`, if any.
    pub fn fan_of(&self, anchor: usize) -> Option<&Fan> {
        self.fans.iter().find(|f| f.anchor == anchor)
    }

    /// Curve parameter of a boundary vertex.
    pub fn boundary_param(&self, i: usize) -> Option<ArcParam> {
        self.boundary_param[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary_param[i].is_some()
    }

    /// Boundary vertices in counterclockwise order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e.v[0]).collect()
    }

    pub fn frame_origin(&self, frame: Frame) -> [f64; 2] {
        match frame {
            Frame::Global => [0.0, 0.0],
            Frame::Anchor(k) => self.anchors[k].point,
        }
    }

    /// Absolute position of vertex `i`.
    pub fn position(&self, i: usize) -> [f64; 2] {
        let v = &self.vertices[i];
        let o = self.frame_origin(v.frame);
        [o[0] + v.local[0], o[1] + v.local[1]]
    }

    /// Coordinates of vertex `i` relative to the origin of `frame`.
    pub fn coords_in(&self, frame: Frame, i: usize) -> [f64; 2] {
        let v = &self.vertices[i];
        if v.frame == frame {
            v.local
        } else {
            sub(self.position(i), self.frame_origin(frame))
        }
    }

    /// `x_i − x_j`, exact to rounding when both share a frame.
    pub fn diff(&self, i: usize, j: usize) -> [f64; 2] {
        let (a, b) = (&self.vertices[i], &self.vertices[j]);
        if a.frame == b.frame {
            sub(a.local, b.local)
        } else {
            sub(self.position(i), self.position(j))
        }
    }

    /// Frame in which triangle `t` is best represented.
    pub fn triangle_frame(&self, t: usize) -> Frame {
        let tri = self.triangles[t];
        let f = self.vertices[tri[0]].frame;
        if tri.iter().all(|&v| self.vertices[v].frame == f) {
            f
        } else {
            Frame::Global
        }
    }

    /// Signed area of triangle `t`.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.diff(b, a), self.diff(c, a))
    }

    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        norm(self.diff(b, a)).max(norm(self.diff(c, b))).max(norm(self.diff(a, c)))
    }

    /// `V − E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    pub fn edge_count(&self) -> usize {
        self.edge_triangle_counts().len()
    }

    fn edge_triangle_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Checks orientation, topology and boundary links.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.triangles.len() {
            let area = self.triangle_area(t);
            let d = self.triangle_diameter(t);
            if !(area > 1e-12 * d * d) {
                return Err(Error::DegenerateElement { element: t, area });
            }
        }
        let counts = self.edge_triangle_counts();
        for (k, e) in self.boundary_edges.iter().enumerate() {
            let key = (e.v[0].min(e.v[1]), e.v[0].max(e.v[1]));
            if counts.get(&key) != Some(&1) {
                return Err(Error::UnlinkedBoundaryEdge { edge: k });
            }
        }
        let open = counts.values().filter(|&&c| c == 1).count();
        if open != self.boundary_edges.len() || counts.values().any(|&c| c > 2) {
            let p = self.position(self.boundary_edges.first().map_or(0, |e| e.v[0]));
            return Err(Error::Meshing {
                x: p[0],
                y: p[1],
                reason: format!(
                    "{} open edges but {} boundary edges",
                    open,
                    self.boundary_edges.len()
                ),
            });
        }
        if self.euler_characteristic() != 1 {
            return Err(Error::Meshing {
                x: 0.0,
                y: 0.0,
                reason: format!("Euler characteristic {}", self.euler_characteristic()),
            });
        }
        Ok(())
    }

    /// Largest distance between a boundary vertex and the curve point at its
    /// stored parameter.
    pub fn boundary_fidelity(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, p) in self.boundary_param.iter().enumerate() {
            let Some(s) = p else { continue };
            let v = &self.vertices[i];
            let dev = match v.frame {
                Frame::Anchor(k) if self.anchors[k].param.base == s.base => {
                    let a = self.anchors[k].param;
                    let expect = sub(
                        self.curve.displacement(s.base, s.offset),
                        self.curve.displacement(a.base, a.offset),
                    );
                    norm(sub(v.local, expect))
                }
                _ => norm(sub(self.position(i), self.curve.point_at(s))),
            };
            worst = worst.max(dev);
        }
        worst
    }

    pub fn stats(&self) -> MeshStats {
        let mut min_angle = f64::INFINITY;
        let mut max_diam = 0.0f64;
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let e1 = self.diff(tri[(k + 1) % 3], a);
                let e2 = self.diff(tri[(k + 2) % 3], a);
                let ang = cross(e1, e2).abs().atan2(dot(e1, e2));
                min_angle = min_angle.min(ang);
            }
            max_diam = max_diam.max(self.triangle_diameter(t));
        }
        let lens: Vec<f64> = self.boundary_edges.iter().map(|e| e.arc_length()).collect();
        MeshStats {
            vertices: self.vertices.len(),
            edges: self.edge_count(),
            triangles: self.triangles.len(),
            boundary_edges: self.boundary_edges.len(),
            euler: self.euler_characteristic(),
            min_angle_deg: min_angle.to_degrees(),
            max_diameter: max_diam,
            min_boundary_edge: lens.iter().copied().fold(f64::INFINITY, f64::min),
            max_boundary_edge: lens.iter().copied().fold(0.0, f64::max),
        }
    }

    fn grid(&self) -> &Grid {
        self.grid.get_or_init(|| {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            let pos: Vec<[f64; 2]> = (0..self.vertices.len()).map(|i| self.position(i)).collect();
            for p in &pos {
                for d in 0..2 {
                    lo[d] = lo[d].min(p[d]);
                    hi[d] = hi[d].max(p[d]);
                }
            }
            let cell = self.spec.h.max(1e-3 * (hi[0] - lo[0]).max(hi[1] - lo[1]));
            let origin = [lo[0] - cell, lo[1] - cell];
            let nx = ((hi[0] - origin[0]) / cell).ceil() as usize + 2;
            let ny = ((hi[1] - origin[1]) / cell).ceil() as usize + 2;
            let mut grid = Grid {
                origin,
                cell,
                nx,
                ny,
                cells: vec![Vec::new(); nx * ny],
            };
            for (t, tri) in self.triangles.iter().enumerate() {
                let mut a = [f64::INFINITY; 2];
                let mut b = [f64::NEG_INFINITY; 2];
                for &v in tri {
                    for d in 0..2 {
                        a[d] = a[d].min(pos[v][d]);
                        b[d] = b[d].max(pos[v][d]);
                    }
                }
                let (i0, j0) = grid.cell_of(a).unwrap();
                let (i1, j1) = grid.cell_of(b).unwrap();
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        grid.cells[j * nx + i].push(t);
                    }
                }
            }
            grid
        })
    }

    /// Barycentric coordinates of `x` (given in `frame`) in triangle `t`.
    pub fn barycentric(&self, t: usize, frame: Frame, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.coords_in(frame, v));
        let d = cross(sub(b, a), sub(c, a));
        let la = cross(sub(b, x), sub(c, x)) / d;
        let lb = cross(sub(c, x), sub(a, x)) / d;
        [la, lb, 1.0 - la - lb]
    }

    fn candidates(&self, frame: Frame, x: [f64; 2], wide: bool) -> Vec<usize> {
        if let Frame::Anchor(k) = frame {
            if let Some(fan) = self.fan_of(k) {
                let r = norm(x);
                if r <= 1.05 * fan.outer_radius() {
                    return fan_candidates(fan, r, wide);
                }
            }
        }
        let abs = {
            let o = self.frame_origin(frame);
            [o[0] + x[0], o[1] + x[1]]
        };
        let grid = self.grid();
        let Some((i, j)) = grid.cell_of(abs) else {
            return Vec::new();
        };
        if !wide {
            return grid.cells[j * grid.nx + i].clone();
        }
        let mut out = Vec::new();
        for jj in j.saturating_sub(1)..=(j + 1).min(grid.ny - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(grid.nx - 1) {
                out.extend_from_slice(&grid.cells[jj * grid.nx + ii]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Triangle containing `x` (in `frame`) and its barycentric coordinates.
    pub fn locate(&self, frame: Frame, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = -1e-10;
        for t in self.candidates(frame, x, false) {
            let l = self.barycentric(t, frame, x);
            if l.iter().all(|&v| v >= tol) {
                return Some((t, l));
            }
        }
        None
    }

    /// Like [`locate`](Self::locate), but falls back to the nearest nearby
    /// triangle (clamped barycentrics) for points in the thin gap between a
    /// chord and the curve.
    pub fn locate_nearest(&self, frame: Frame, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        if let Some(hit) = self.locate(frame, x) {
            return Some(hit);
        }
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for t in self.candidates(frame, x, true) {
            let l = self.barycentric(t, frame, x);
            let worst = l.iter().copied().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|b| worst > b.0) {
                best = Some((worst, t, l));
            }
        }
        let (worst, t, l) = best?;
        if worst < -0.5 {
            return None;
        }
        let c = l.map(|v| v.max(0.0));
        let s: f64 = c.iter().sum();
        Some((t, c.map(|v| v / s)))
    }

    /// Copy with vertex `i` renumbered to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<DomainMesh> {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation of the vertices".into()));
        }
        let mut vertices = self.vertices.clone();
        let mut boundary_param = self.boundary_param.clone();
        for i in 0..n {
            vertices[perm[i]] = self.vertices[i];
            boundary_param[perm[i]] = self.boundary_param[i];
        }
        let mut fans = self.fans.clone();
        for f in &mut fans {
            f.center = perm[f.center];
            for ring in &mut f.rings {
                for v in ring.iter_mut() {
                    *v = perm[*v];
                }
            }
        }
        Ok(DomainMesh {
            curve: self.curve.clone(),
            spec: self.spec.clone(),
            anchors: self.anchors.clone(),
            vertices,
            triangles: self.triangles.iter().map(|t| t.map(|v| perm[v])).collect(),
            boundary_edges: self
                .boundary_edges
                .iter()
                .map(|e| BoundaryEdge {
                    v: e.v.map(|v| perm[v]),
                    s: e.s,
                })
                .collect(),
            boundary_param,
            fans,
            grid: OnceLock::new(),
        })
    }

    /// Copy rotated about the origin by `angle`; only defined for disks
    /// centered at the origin, where the rotation shifts `s` by `angle·r`.
    pub fn rotated(&self, angle: f64) -> Result<DomainMesh> {
        let CurveShape::Disk { radius } = self.curve.shape() else {
            return Err(Error::InvalidArgument("rotation requires a disk".into()));
        };
        let (sn, cs) = angle.sin_cos();
        let rot = |p: [f64; 2]| [cs * p[0] - sn * p[1], sn * p[0] + cs * p[1]];
        let ds = angle * radius;
        let shift = |s: ArcParam| ArcParam::with_offset(s.base + ds, s.offset);
        let anchors = self
            .anchors
            .iter()
            .map(|a| {
                let param = shift(a.param);
                Anchor {
                    param,
                    point: self.curve.point(param.base),
                }
            })
            .collect();
        Ok(DomainMesh {
            curve: self.curve.clone(),
            spec: MeshSpec {
                h: self.spec.h,
                grading: self.spec.grading.clone().map(|mut g| {
                    g.points.iter_mut().for_each(|s| *s = self.curve.wrap(*s + ds));
                    g
                }),
            },
            anchors,
            vertices: self
                .vertices
                .iter()
                .map(|v| Vertex {
                    frame: v.frame,
                    local: rot(v.local),
                })
                .collect(),
            triangles: self.triangles.clone(),
            boundary_edges: self
                .boundary_edges
                .iter()
                .map(|e| BoundaryEdge {
                    v: e.v,
                    s: e.s.map(shift),
                })
                .collect(),
            boundary_param: self.boundary_param.iter().map(|p| p.map(shift)).collect(),
            fans: self.fans.clone(),
            grid: OnceLock::new(),
        })
    }

    /// Text form: vertices (absolute), triangles and boundary edges, 0-based.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for i in 0..self.vertices.len() {
            let p = self.position(i);
            let _ = writeln!(out, "{:.17e} {:.17e}", p[0], p[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary_edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(
                out,
                "{} {} {:.17e} {:.17e}",
                e.v[0],
                e.v[1],
                e.s[0].value(),
                e.s[1].value()
            );
        }
        out
    }

    /// Parses the text form; all vertices are read in the global frame.
    pub fn from_text(text: &str, curve: &BoundaryCurve, h: f64) -> Result<DomainMesh> {
        let count = |line: Option<&str>, name: &str| -> Result<usize> {
            let line = line.ok_or_else(|| Error::Format(format!("missing `{name}` header")))?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(Error::Format(format!("expected `{name}`, found `{line}`")));
            }
            it.next()
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| Error::Format(format!("bad count in `{line}`")))
        };
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let nv = count(lines.next(), "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let v: Vec<f64> = fields(lines.next(), 2)?;
            vertices.push(Vertex {
                frame: Frame::Global,
                local: [v[0], v[1]],
            });
        }
        let nt = count(lines.next(), "triangles")?;
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let t: Vec<usize> = fields(lines.next(), 3)?;
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Format("triangle index out of range".into()));
            }
            triangles.push([t[0], t[1], t[2]]);
        }
        let nb = count(lines.next(), "boundary_edges")?;
        let mut boundary_edges = Vec::with_capacity(nb);
        let mut boundary_param = vec![None; nv];
        for _ in 0..nb {
            let line = lines.next().ok_or_else(|| Error::Format("unexpected end of mesh file".into()))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("expected 4 fields in `{line}`")));
            }
            let parse_u = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad index in `{line}`")));
            let parse_f = |s: &str| s.parse::<f64>().map_err(|_| Error::Format(format!("bad parameter in `{line}`")));
            let (a, b) = (parse_u(f[0])?, parse_u(f[1])?);
            if a >= nv || b >= nv {
                return Err(Error::Format("boundary index out of range".into()));
            }
            let s = [ArcParam::new(parse_f(f[2])?), ArcParam::new(parse_f(f[3])?)];
            boundary_param[a] = Some(ArcParam::new(curve.wrap(s[0].base)));
            boundary_param[b] = Some(ArcParam::new(curve.wrap(s[1].base)));
            boundary_edges.push(BoundaryEdge { v: [a, b], s });
        }
        let mesh = DomainMesh {
            curve: curve.clone(),
            spec: MeshSpec { h, grading: None },
            anchors: Vec::new(),
            vertices,
            triangles,
            boundary_edges,
            boundary_param,
            fans: Vec::new(),
            grid: OnceLock::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

fn fields<T: std::str::FromStr>(line: Option<&str>, n: usize) -> Result<Vec<T>> {
    let line = line.ok_or_else(|| Error::Format("unexpected end of mesh file".into()))?;
    let v: Vec<T> = line
        .split_whitespace()
        .map(|f| f.parse().map_err(|_| Error::Format(format!("bad field in `{line}`"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Format(format!("expected {n} fields in `{line}`")));
    }
    Ok(v)
}

fn fan_candidates(fan: &Fan, r: f64, wide: bool) -> Vec<usize> {
    let n = fan.segments;
    let bands = fan.rings.len() - 1;
    let slack = if wide { 0.6 } else { 0.3 };
    let mut out = Vec::new();
    for i in 0..bands {
        if fan.radii[i + 1] <= r * (1.0 + slack) && fan.radii[i] >= r * (1.0 - slack) {
            let start = fan.first_triangle + 2 * n * i;
            out.extend(start..start + 2 * n);
        }
    }
    if r <= fan.inner_radius() * (1.0 + slack) {
        let start = fan.first_triangle + 2 * n * bands;
        out.extend(start..start + n);
    }
    if out.is_empty() {
        out.extend(fan.first_triangle..fan.first_triangle + fan.triangle_count());
    }
    out
}

struct Builder {
    anchors: Vec<Anchor>,
    vertices: Vec<Vertex>,
    boundary_param: Vec<Option<ArcParam>>,
}

impl Builder {
    fn push(&mut self, frame: Frame, local: [f64; 2], param: Option<ArcParam>) -> usize {
        self.vertices.push(Vertex { frame, local });
        self.boundary_param.push(param);
        self.vertices.len() - 1
    }

    fn position(&self, i: usize) -> [f64; 2] {
        let v = &self.vertices[i];
        match v.frame {
            Frame::Global => v.local,
            Frame::Anchor(k) => {
                let o = self.anchors[k].point;
                [o[0] + v.local[0], o[1] + v.local[1]]
            }
        }
    }
}

struct FanPlan {
    chart: FlatChart,
    radii: Vec<f64>,
}

/// Meshes the interior of `curve` with target size `h`, optionally graded
/// around marked boundary points.
pub fn generate_mesh(curve: &BoundaryCurve, h: f64, grading: Option<&Grading>) -> Result<DomainMesh> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("mesh size must be positive, got {h}")));
    }
    let len = curve.length();
    if h > 0.25 * len {
        return Err(Error::InvalidArgument(format!("mesh size {h} too coarse for a curve of length {len}")));
    }
    let mut marks: Vec<f64> = Vec::new();
    let mut angular = default_angular();
    let mut factor = 1.0;
    let mut core = None;
    if let Some(g) = grading {
        if !(g.factor >= 1.0) {
            return Err(Error::InvalidArgument(format!("grading factor must be >= 1, got {}", g.factor)));
        }
        if g.angular < 4 || g.angular % 2 != 0 {
            return Err(Error::InvalidArgument(format!("angular segments must be even and >= 4, got {}", g.angular)));
        }
        if let Some(c) = g.core {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!("core radius must be positive, got {c}")));
            }
        }
        marks = g.points.iter().map(|&s| curve.wrap(s)).collect();
        marks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 0..marks.len() {
            for j in 0..i {
                if curve.arc_distance(marks[i], marks[j]) < 1e-6 * len {
                    return Err(Error::InvalidArgument("marked points coincide".into()));
                }
            }
        }
        angular = g.angular;
        factor = g.factor;
        core = g.core;
    }

    let mut b = Builder {
        anchors: Vec::new(),
        vertices: Vec::new(),
        boundary_param: Vec::new(),
    };

    // Plan fans.
    let n_seg = angular;
    let q = 1.0 / (1.0 - PI / n_seg as f64);
    let mut plans = Vec::new();
    for (k, &s) in marks.iter().enumerate() {
        let chart = FlatChart::new(curve, ArcParam::new(s));
        let p = curve.point(s);
        let mut rf = (n_seg as f64 * h / PI).min(0.45 * chart.radius());
        for (j, &t) in marks.iter().enumerate() {
            if j != k {
                rf = rf.min(0.3 * norm(sub(curve.point(t), p)));
            }
        }
        let rmin = core.unwrap_or(h / factor).min(rf);
        let steps = ((rf / rmin).ln() / q.ln()).ceil().max(0.0) as usize;
        let mut radii: Vec<f64> = (0..=steps).map(|i| rf * (rmin / rf).powf(i as f64 / steps.max(1) as f64)).collect();
        if steps > 0 {
            radii[steps] = rmin;
        }
        b.anchors.push(Anchor {
            param: ArcParam::new(s),
            point: p,
        });
        plans.push(FanPlan { chart, radii });
    }

    // Fan vertices.
    let mut fans = Vec::new();
    for (k, plan) in plans.iter().enumerate() {
        let frame = Frame::Anchor(k);
        let s = marks[k];
        let mut rings = Vec::with_capacity(plan.radii.len());
        for &r in &plan.radii {
            let mut ring = Vec::with_capacity(n_seg + 1);
            for j in 0..=n_seg {
                let id = if j == 0 || j == n_seg {
                    let y1 = if j == 0 { r } else { -r };
                    let ds = plan.chart.boundary_ds(y1);
                    let local = plan.chart.boundary_offset(ds);
                    b.push(frame, local, Some(ArcParam::with_offset(s, ds)))
                } else {
                    let th = PI * j as f64 / n_seg as f64;
                    let local = plan.chart.pullback([r * th.cos(), r * th.sin()])?;
                    b.push(frame, local, None)
                };
                ring.push(id);
            }
            rings.push(ring);
        }
        let center = b.push(frame, [0.0, 0.0], Some(ArcParam::new(s)));
        fans.push(Fan {
            anchor: k,
            center,
            radii: plan.radii.clone(),
            rings,
            first_triangle: 0,
            segments: n_seg,
        });
    }

    // Boundary arcs between fans, the region polygon and the edge list.
    let mut polygon: Vec<usize> = Vec::new();
    let mut edges: Vec<BoundaryEdge> = Vec::new();
    if fans.is_empty() {
        let n = ((len / h).ceil() as usize).max(8);
        let ids: Vec<usize> = (0..n)
            .map(|i| {
                let s = len * i as f64 / n as f64;
                let p = curve.point(s);
                b.push(Frame::Global, p, Some(ArcParam::new(s)))
            })
            .collect();
        for i in 0..n {
            let s0 = len * i as f64 / n as f64;
            let s1 = len * (i + 1) as f64 / n as f64;
            edges.push(BoundaryEdge {
                v: [ids[i], ids[(i + 1) % n]],
                s: [ArcParam::new(s0), ArcParam::new(s1)],
            });
        }
        polygon = ids;
    } else {
        let nf = fans.len();
        for k in 0..nf {
            let fan = &fans[k];
            let depth = fan.rings.len();
            // Side θ = π, from the outer ring to the center, then back out.
            let mut chain: Vec<usize> = (0..depth).map(|i| fan.rings[i][n_seg]).collect();
            chain.push(fan.center);
            chain.extend((0..depth).rev().map(|i| fan.rings[i][0]));
            for w in chain.windows(2) {
                edges.push(BoundaryEdge {
                    v: [w[0], w[1]],
                    s: [b.boundary_param[w[0]].unwrap(), b.boundary_param[w[1]].unwrap()],
                });
            }
            polygon.extend((0..=n_seg).rev().map(|j| fan.rings[0][j]));

            let next = &fans[(k + 1) % nf];
            let start_v = fan.rings[0][0];
            let end_v = next.rings[0][n_seg];
            let start = b.boundary_param[start_v].unwrap();
            let mut end = b.boundary_param[end_v].unwrap();
            if k + 1 == nf {
                end = ArcParam::with_offset(end.base + len, end.offset);
            }
            let arc = end.minus(&start);
            if arc <= 0.0 {
                let p = b.position(start_v);
                return Err(Error::Meshing {
                    x: p[0],
                    y: p[1],
                    reason: "graded regions overlap".into(),
                });
            }
            let n = ((arc / h).ceil() as usize).max(1);
            let mut ids = vec![start_v];
            let mut params = vec![start];
            for i in 1..n {
                let s = start.value() + arc * i as f64 / n as f64;
                let p = curve.point(s);
                let id = b.push(Frame::Global, p, Some(ArcParam::new(curve.wrap(s))));
                ids.push(id);
                params.push(ArcParam::new(s));
                polygon.push(id);
            }
            ids.push(end_v);
            params.push(end);
            for i in 0..n {
                edges.push(BoundaryEdge {
                    v: [ids[i], ids[i + 1]],
                    s: [params[i], params[i + 1]],
                });
            }
        }
    }

    let poly_pts: Vec<[f64; 2]> = polygon.iter().map(|&i| b.position(i)).collect();
    let interior = lattice_points(&poly_pts, h);
    let (cdt_tris, extra) = triangulate(&poly_pts, interior, h)?;
    let base = b.vertices.len();
    for p in &extra {
        b.push(Frame::Global, *p, None);
    }
    let mut triangles: Vec<[usize; 3]> = cdt_tris
        .into_iter()
        .map(|t| {
            t.map(|i| {
                if i < polygon.len() {
                    polygon[i]
                } else {
                    base + i - polygon.len()
                }
            })
        })
        .collect();

    for fan in &mut fans {
        fan.first_triangle = triangles.len();
        let n = fan.segments;
        for i in 0..fan.rings.len() - 1 {
            let (o, inn) = (&fan.rings[i], &fan.rings[i + 1]);
            for j in 0..n {
                if j < n / 2 {
                    triangles.push([o[j], o[j + 1], inn[j + 1]]);
                    triangles.push([o[j], inn[j + 1], inn[j]]);
                } else {
                    triangles.push([o[j], o[j + 1], inn[j]]);
                    triangles.push([o[j + 1], inn[j + 1], inn[j]]);
                }
            }
        }
        let inner = fan.rings.last().unwrap();
        for j in 0..n {
            triangles.push([fan.center, inner[j], inner[j + 1]]);
        }
    }

    let mut mesh = DomainMesh {
        curve: curve.clone(),
        spec: MeshSpec {
            h,
            grading: grading.cloned(),
        },
        anchors: b.anchors,
        vertices: b.vertices,
        triangles,
        boundary_edges: edges,
        boundary_param: b.boundary_param,
        fans,
        grid: OnceLock::new(),
    };
    for t in 0..mesh.triangles.len() {
        if mesh.triangle_area(t) < 0.0 {
            mesh.triangles[t].swap(1, 2);
        }
    }
    if let Err(Error::DegenerateElement { element, area }) = mesh.validate() {
        let c = mesh.position(mesh.triangles[element][0]);
        return Err(Error::Meshing {
            x: c[0],
            y: c[1],
            reason: format!("degenerate triangle {element} with area {area:.3e}"),
        });
    }
    mesh.validate()?;
    Ok(mesh)
}

fn point_in_polygon(poly: &[[f64; 2]], x: [f64; 2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > x[1]) != (b[1] > x[1]) {
            let t = (x[1] - a[1]) / (b[1] - a[1]);
            if x[0] < a[0] + t * (b[0] - a[0]) {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(a: [f64; 2], b: [f64; 2], x: [f64; 2]) -> f64 {
    let d = sub(b, a);
    let t = (dot(sub(x, a), d) / dot(d, d)).clamp(0.0, 1.0);
    norm(sub(x, [a[0] + t * d[0], a[1] + t * d[1]]))
}

fn lattice_points(poly: &[[f64; 2]], h: f64) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((hi[1] - lo[1]) / dy).ceil() as usize + 1;
    let cols = ((hi[0] - lo[0]) / h).ceil() as usize + 2;
    let mut out = Vec::new();
    for r in 0..rows {
        let y = lo[1] + dy * r as f64;
        let shift = if r % 2 == 1 { 0.5 * h } else { 0.0 };
        for c in 0..cols {
            let x = [lo[0] + shift + h * c as f64, y];
            if !point_in_polygon(poly, x) {
                continue;
            }
            let n = poly.len();
            let near = (0..n).any(|i| segment_distance(poly[i], poly[(i + 1) % n], x) < 0.55 * h);
            if !near {
                out.push(x);
            }
        }
    }
    out
}

/// Constrained Delaunay triangulation of the polygon plus interior points,
/// refined by centroid insertion until every triangle has diameter ≤ 2h.
/// Returns triangles over `polygon ++ interior ++ added` indices and the
/// interior points actually used.
fn triangulate(
    poly: &[[f64; 2]],
    mut interior: Vec<[f64; 2]>,
    h: f64,
) -> Result<(Vec<[usize; 3]>, Vec<[f64; 2]>)> {
    let np = poly.len();
    for _round in 0..12 {
        let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
        let mut handles = Vec::with_capacity(np + interior.len());
        let all: Vec<[f64; 2]> = poly.iter().chain(interior.iter()).copied().collect();
        for p in &all {
            let hnd = cdt.insert(Point2::new(p[0], p[1])).map_err(|e| Error::Meshing {
                x: p[0],
                y: p[1],
                reason: format!("point insertion failed: {e:?}"),
            })?;
            handles.push(hnd);
        }
        if cdt.num_vertices() != all.len() {
            return Err(Error::Meshing {
                x: 0.0,
                y: 0.0,
                reason: "duplicate mesh points".into(),
            });
        }
        let mut back = vec![usize::MAX; all.len()];
        for (i, hnd) in handles.iter().enumerate() {
            back[hnd.index()] = i;
        }
        for i in 0..np {
            let (a, b) = (handles[i], handles[(i + 1) % np]);
            if !cdt.can_add_constraint(a, b) {
                let p = poly[i];
                return Err(Error::Meshing {
                    x: p[0],
                    y: p[1],
                    reason: "boundary segment crosses another".into(),
                });
            }
            cdt.add_constraint(a, b);
        }
        let mut tris = Vec::new();
        let mut added = Vec::new();
        for face in cdt.inner_faces() {
            let vs = face.vertices().map(|v| back[v.fix().index()]);
            let p = vs.map(|i| all[i]);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            if !point_in_polygon(poly, c) {
                continue;
            }
            let diam = norm(sub(p[1], p[0])).max(norm(sub(p[2], p[1]))).max(norm(sub(p[0], p[2])));
            if diam > 2.0 * h {
                added.push(c);
            }
            tris.push(vs);
        }
        if added.is_empty() {
            return Ok((tris, interior));
        }
        interior.extend(added);
    }
    Err(Error::Meshing {
        x: 0.0,
        y: 0.0,
        reason: "refinement did not reach the target size".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_mesh_topology() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.5, None).unwrap();
        assert_eq!(m.euler_characteristic(), 1);
        m.validate().unwrap();
        assert!(m.boundary_fidelity() < 1e-10);
        assert!(m.stats().max_diameter <= 1.0);
    }

    #[test]
    fn graded_fan_reaches_core() {
        let c = BoundaryCurve::preset("ellipse", &[("a", 2.0), ("b", 1.0)]).unwrap();
        let g = Grading::new(vec![0.0], 4.0).with_core(1e-15);
        let m = generate_mesh(&c, 0.2, Some(&g)).unwrap();
        m.validate().unwrap();
        let st = m.stats();
        assert!(st.min_boundary_edge <= 1.1e-15);
        assert!(st.min_angle_deg > 10.0, "{st:?}");
        assert!(m.boundary_fidelity() < 1e-10);
        let fan = &m.fans()[0];
        let inner = fan.rings.last().unwrap()[fan.segments / 2];
        let x = m.coords_in(Frame::Anchor(0), inner);
        assert!((norm(x) / 1e-15 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn locate_finds_tiny_triangles() {
        let c = BoundaryCurve::unit_disk();
        let g = Grading::new(vec![1.0], 8.0).with_core(1e-12);
        let m = generate_mesh(&c, 0.2, Some(&g)).unwrap();
        let chart = FlatChart::new(&c, ArcParam::new(1.0));
        for r in [3e-12, 1e-9, 1e-4, 0.05] {
            let x = chart.pullback([0.3 * r, 0.5 * r]).unwrap();
            let (t, l) = m.locate(Frame::Anchor(0), x).unwrap();
            assert!(l.iter().all(|&v| v > -1e-9));
            assert!(m.triangle_diameter(t) < 4.0 * r);
        }
        assert!(m.locate(Frame::Global, [0.0, 0.0]).is_some());
        assert!(m.locate(Frame::Global, [2.0, 0.0]).is_none());
    }

    #[test]
    fn text_round_trip() {
        let c = BoundaryCurve::unit_disk();
        let m = generate_mesh(&c, 0.3, None).unwrap();
        let back = DomainMesh::from_text(&m.to_text(), &c, 0.3).unwrap();
        assert_eq!(back.vertex_count(), m.vertex_count());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_edges().len(), m.boundary_edges().len());
    }

    #[test]
    fn rejects_bad_size() {
        let c = BoundaryCurve::unit_disk();
        assert!(generate_mesh(&c, 0.0, None).is_err());
        assert!(generate_mesh(&c, f64::NAN, None).is_err());
        let g = Grading::new(vec![0.0], 0.5);
        assert!(generate_mesh(&c, 0.2, Some(&g)).is_err());
    }
}

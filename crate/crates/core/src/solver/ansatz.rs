use super::newton::Discretization;
use crate::fem::{boundary_residual, NodalField};
use crate::geometry::{norm, ArcParam, DomainMesh, FlatChart, Frame};
use crate::liouville::BubbleProfile;
use crate::{Error, Result};

/// Lower cap of the far-field value, as a fraction of the amplitude.
pub const FLOOR_FRACTION: f64 = 0.1;

/// Peak width `ε = (p A^{p−1})^{−1}`.
pub fn bubble_epsilon(p: f64, amplitude: f64) -> f64 {
    (-(p.ln() + (p - 1.0) * amplitude.ln())).exp()
}

/// Bubble center and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzSite {
    pub s: f64,
    pub amplitude: f64,
}

/// Anchor of `mesh` sitting at the curve parameter `s`, if any.
pub(crate) fn anchor_at(mesh: &DomainMesh, s: f64) -> Option<usize> {
    let curve = mesh.curve();
    mesh.anchors()
        .iter()
        .position(|a| curve.arc_distance(a.param.value(), s) < 1e-12 * curve.length())
}

/// Chart coordinates `Ψ(x)` of every vertex relative to the base point `s`,
/// computed in the anchor frame when the mesh has one at `s`.
pub(crate) fn chart_coordinates(mesh: &DomainMesh, s: f64) -> (FlatChart, Vec<[f64; 2]>) {
    let curve = mesh.curve();
    let s = curve.wrap(s);
    let chart = FlatChart::new(curve, ArcParam::new(s));
    let frame = anchor_at(mesh, s).map(Frame::Anchor);
    let origin = chart.origin();
    let r = chart.radius();
    let coords = (0..mesh.vertex_count())
        .map(|i| {
            let d = match frame {
                Some(f) => mesh.coords_in(f, i),
                None => {
                    let x = mesh.position(i);
                    [x[0] - origin[0], x[1] - origin[1]]
                }
            };
            let y = chart.to_local(d);
            let t = if y[0].abs() < 0.95 * r && norm(y) < 1.9 * r {
                chart.psi(d)
            } else {
                y
            };
            [t[0], t[1].max(0.0)]
        })
        .collect();
    (chart, coords)
}

/// `U(t/ε)` evaluated without forming `t/ε`.
fn scaled_bubble(t: [f64; 2], eps: f64) -> f64 {
    let u = BubbleProfile::canonical();
    if eps >= 1e-100 && norm(t) < 1e6 * eps {
        return u.value([t[0] / eps, t[1] / eps]);
    }
    4f64.ln() + 2.0 * eps.ln() - (t[0] * t[0] + (t[1] + 2.0 * eps).powi(2)).ln()
}

fn site_values(mesh: &DomainMesh, site: AnsatzSite, p: f64) -> Result<Vec<f64>> {
    let eps = bubble_epsilon(p, site.amplitude);
    if eps < 1e-3 * mesh.h() && anchor_at(mesh, site.s).is_none() {
        log::warn!("peak unresolved by mesh: ε = {eps:.3e} at s = {:.4}", site.s);
    }
    let (_, coords) = chart_coordinates(mesh, site.s);
    site_values_from_coords(&coords, site, p)
}

/// Bubble values at precomputed chart coordinates of the site.
pub(crate) fn site_values_from_coords(coords: &[[f64; 2]], site: AnsatzSite, p: f64) -> Result<Vec<f64>> {
    if !(p >= 2.0) {
        return Err(Error::InvalidArgument(format!("bubble ansatz needs p >= 2, got {p}")));
    }
    if !(site.amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!("amplitude must be positive, got {}", site.amplitude)));
    }
    let a = site.amplitude;
    let eps = bubble_epsilon(p, a);
    let floor = a * (1.0 - 2.0 * (1.0 / eps).ln() / p).max(FLOOR_FRACTION);
    Ok(coords
        .iter()
        .map(|&t| (a * (1.0 + scaled_bubble(t, eps) / p)).max(floor))
        .collect())
}

/// Replaces the far field of an ansatz by the linear response to its own
/// boundary flux: `max(u, (K + M)⁻¹ ∫ u^p φᵢ)`.
pub fn far_field_corrected(disc: &Discretization, field: &NodalField, p: f64) -> Result<NodalField> {
    let flux = boundary_residual(&disc.mesh, &field.values, p, &disc.quadrature)?;
    let v = disc.solve_volume(&flux);
    let values = field.values.iter().zip(v).map(|(a, b)| a.max(b)).collect();
    Ok(NodalField::new(values, field.label.clone())?.with_p(p))
}

/// `A (1 + U(Ψ(x)/ε)/p)` with `ε = (p A^{p−1})^{−1}`, capped below at
/// `A · max(1 − 2 log(1/ε)/p, 0.1)`.
pub fn bubble_ansatz(mesh: &DomainMesh, s0: f64, p: f64, amplitude: f64) -> Result<NodalField> {
    let values = site_values(mesh, AnsatzSite { s: s0, amplitude }, p)?;
    Ok(NodalField::new(values, format!("bubble at s={s0}"))?.with_p(p))
}

/// Pointwise maximum of single bubbles.
pub fn multi_bubble_ansatz(mesh: &DomainMesh, sites: &[AnsatzSite], p: f64) -> Result<NodalField> {
    if sites.is_empty() {
        return Err(Error::InvalidArgument("no bubble sites".into()));
    }
    let mut values = site_values(mesh, sites[0], p)?;
    for &site in &sites[1..] {
        for (v, w) in values.iter_mut().zip(site_values(mesh, site, p)?) {
            *v = v.max(w);
        }
    }
    let label = sites.iter().map(|s| format!("{}", s.s)).collect::<Vec<_>>().join(",");
    Ok(NodalField::new(values, format!("bubbles at s={label}"))?.with_p(p))
}

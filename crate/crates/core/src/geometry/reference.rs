use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{DensityKind, DensitySpec, ManifoldKind, ManifoldSpec};
use crate::error::{Error, Result};
use crate::fmath;
use crate::measure::WeightedMeasure;
use crate::numerics::PointSet;
use crate::quadrature::gauss_legendre;

/// Smallest accepted resolution.
pub const MIN_RESOLUTION: usize = 4;

/// Deterministic discretization of `f vol_M`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceMeasure {
    pub measure: WeightedMeasure,
    /// Every cell of the partition lies within this distance of its node,
    /// so `W_p(reference, f vol_M) <= mesh` for every `p`.
    pub mesh: f64,
    pub resolution: usize,
}

/// Cell-integral discretization with about `resolution` nodes.
///
/// - curves: `resolution` cells of equal parameter length, node at the cell
///   midpoint;
/// - sphere: polar-angle bands of height about `sqrt(4 pi / resolution)`,
///   each split into azimuthal cells of comparable width, the polar caps
///   being single cells with the node at the pole;
/// - torus: a tensor grid in both angles.
///
/// Weights are the exact (or Gauss–Legendre) cell integrals of the density,
/// rescaled to total mass one.
pub fn reference_measure(spec: &ManifoldSpec, density: &DensitySpec, resolution: usize) -> Result<ReferenceMeasure> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Unsupported(format!("resolution {resolution} below {MIN_RESOLUTION}")));
    }
    let (params, weights, mesh) = match spec.kind {
        ManifoldKind::Circle { .. } | ManifoldKind::PlanarCurve { .. } => curve_cells(spec, density, resolution),
        ManifoldKind::Sphere2 { radius } => sphere_cells(radius, density, resolution),
        ManifoldKind::Torus2 { major, minor } => torus_cells(major, minor, density, resolution),
    };
    let total: f64 = weights.iter().sum();
    let mut support = PointSet::with_capacity(spec.ambient_dim, weights.len());
    for q in params.rows() {
        support.push(&spec.point(q));
    }
    let measure = WeightedMeasure::new(support, weights.iter().map(|w| w / total).collect())?;
    Ok(ReferenceMeasure { measure, mesh, resolution })
}

/// Nodes and weights integrating against `vol_M` (total weight `|vol_M|`).
pub fn volume_quadrature(spec: &ManifoldSpec, resolution: usize) -> Result<WeightedMeasure> {
    let r = reference_measure(spec, &DensitySpec::uniform(spec), resolution)?;
    let vol = spec.total_volume();
    WeightedMeasure::new(r.measure.support, r.measure.weights.iter().map(|w| w * vol).collect())
}

/// `int_a^b (1 + amp cos(k phi)) dphi`.
fn trig_integral(kind: DensityKind, a: f64, b: f64) -> f64 {
    match kind {
        DensityKind::Uniform => b - a,
        DensityKind::TrigPerturbed { amplitude, frequency } => {
            let k = frequency as f64;
            (b - a) + amplitude / k * (fmath::sin(k * b) - fmath::sin(k * a))
        }
    }
}

fn curve_cells(spec: &ManifoldSpec, density: &DensitySpec, res: usize) -> (PointSet, Vec<f64>, f64) {
    let (x, w) = gauss_legendre(16);
    let h = 2.0 * PI / res as f64;
    let mut params = PointSet::with_capacity(1, res);
    let mut weights = Vec::with_capacity(res);
    let mut mesh: f64 = 0.0;
    for j in 0..res {
        let t = j as f64 * h;
        let mut mass = 0.0;
        let mut len = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            let s = t + 0.5 * h * xi;
            let je = spec.volume_element(&[s]);
            mass += wi * density.profile(spec, &[s]) * je;
            len += wi * je;
        }
        params.push(&[t]);
        weights.push(mass * 0.5 * h);
        // the node sits at the parameter midpoint; each half has arc length
        // at most the whole
        mesh = mesh.max(len * 0.5 * h);
    }
    (params, weights, mesh)
}

fn sphere_cells(radius: f64, density: &DensitySpec, res: usize) -> (PointSet, Vec<f64>, f64) {
    let target = fmath::sqrt(4.0 * PI / res as f64);
    let bands = (fmath::round(PI / target) as usize).max(2);
    let dtheta = PI / bands as f64;
    let mut params = PointSet::new(2);
    let mut weights = Vec::new();
    let mut mesh: f64 = 0.0;
    for b in 0..bands {
        let (t0, t1) = (b as f64 * dtheta, (b + 1) as f64 * dtheta);
        let polar = b == 0 || b + 1 == bands;
        let cells = if polar {
            1
        } else {
            let smid = fmath::sin(0.5 * (t0 + t1));
            (fmath::round(2.0 * PI * smid / dtheta) as usize).max(3)
        };
        let dphi = 2.0 * PI / cells as f64;
        let band_area = radius * radius * (fmath::cos(t0) - fmath::cos(t1));
        let smax = if t0 < PI / 2.0 && t1 > PI / 2.0 { 1.0 } else { fmath::sin(t0).max(fmath::sin(t1)) };
        for c in 0..cells {
            let (p0, p1) = (c as f64 * dphi, (c + 1) as f64 * dphi);
            let w = band_area * trig_integral(density.kind, p0, p1) / (2.0 * PI);
            if polar {
                let pole = if b == 0 { 0.0 } else { PI };
                params.push(&[pole, 0.0]);
                mesh = mesh.max(radius * dtheta);
            } else {
                params.push(&[0.5 * (t0 + t1), 0.5 * (p0 + p1)]);
                mesh = mesh.max(radius * (0.5 * dtheta + smax * 0.5 * dphi));
            }
            weights.push(w);
        }
    }
    (params, weights, mesh)
}

fn torus_cells(major: f64, minor: f64, density: &DensitySpec, res: usize) -> (PointSet, Vec<f64>, f64) {
    let ntheta = (fmath::round(fmath::sqrt(res as f64 * minor / major)) as usize).max(4);
    let nphi = (fmath::round(res as f64 / ntheta as f64) as usize).max(4);
    let dphi = 2.0 * PI / nphi as f64;
    let dtheta = 2.0 * PI / ntheta as f64;
    let mut params = PointSet::with_capacity(2, nphi * ntheta);
    let mut weights = Vec::with_capacity(nphi * ntheta);
    for i in 0..nphi {
        let (p0, p1) = (i as f64 * dphi, (i + 1) as f64 * dphi);
        let wphi = trig_integral(density.kind, p0, p1);
        for j in 0..ntheta {
            let (t0, t1) = (j as f64 * dtheta, (j + 1) as f64 * dtheta);
            let wtheta = minor * (major * dtheta + minor * (fmath::sin(t1) - fmath::sin(t0)));
            params.push(&[0.5 * (p0 + p1), 0.5 * (t0 + t1)]);
            weights.push(wphi * wtheta);
        }
    }
    let mesh = (major + minor) * 0.5 * dphi + minor * 0.5 * dtheta;
    (params, weights, mesh)
}

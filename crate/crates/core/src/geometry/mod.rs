//! Synthetic manifolds with closed-form tangent spaces and volume measures,
//! samplers for the noise-free and tubular-noise models, and deterministic
//! reference discretizations.

mod reference;
mod sample;

pub use reference::{reference_measure, volume_quadrature, ReferenceMeasure, MIN_RESOLUTION};
pub use sample::{add_tubular_noise, sample_manifold, PointCloud, Truth, REJECTION_FACTOR};

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::{seeded_rng, streams};

/// Family of the manifold before the rigid embedding.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum ManifoldKind {
    Circle { radius: f64 },
    Sphere2 { radius: f64 },
    Torus2 { major: f64, minor: f64 },
    /// Star-shaped closed curve `t -> r(t) (cos t, sin t)` with
    /// `r(t) = base + sum_k cos[k-1] cos(kt) + sin[k-1] sin(kt)`.
    PlanarCurve { base: f64, cos: Vec<f64>, sin: Vec<f64> },
}

impl ManifoldKind {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldKind::Circle { .. } | ManifoldKind::PlanarCurve { .. } => 1,
            ManifoldKind::Sphere2 { .. } | ManifoldKind::Torus2 { .. } => 2,
        }
    }

    /// Dimension of the canonical (unrotated) embedding.
    pub fn canonical_dim(&self) -> usize {
        self.intrinsic_dim() + 1
    }

    fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be positive and finite"))
            }
        };
        match self {
            ManifoldKind::Circle { radius } | ManifoldKind::Sphere2 { radius } => pos("radius", *radius),
            ManifoldKind::Torus2 { major, minor } => {
                pos("minor", *minor)?;
                pos("major", *major)?;
                if major > minor {
                    Ok(())
                } else {
                    Err(Error::invalid("major", "must exceed the minor radius"))
                }
            }
            ManifoldKind::PlanarCurve { base, cos, sin } => {
                pos("base", *base)?;
                if cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
                    return Err(Error::invalid("coefficients", "must be finite"));
                }
                // Positivity of r(t) on a fine grid, with the derivative bound
                // covering the gaps.
                let dbound: f64 = cos.iter().enumerate().map(|(k, c)| c.abs() * (k + 1) as f64).sum::<f64>()
                    + sin.iter().enumerate().map(|(k, c)| c.abs() * (k + 1) as f64).sum::<f64>();
                let n = 4096;
                let h = 2.0 * PI / n as f64;
                let min = (0..n).map(|j| curve_radius(*base, cos, sin, j as f64 * h).0).fold(f64::INFINITY, f64::min);
                if min - dbound * h > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("coefficients", "radius function must stay positive"))
                }
            }
        }
    }
}

/// `(r(t), r'(t), r''(t))` for the planar curve.
fn curve_radius(base: f64, cos: &[f64], sin: &[f64], t: f64) -> (f64, f64, f64) {
    let mut r = base;
    let mut dr = 0.0;
    let mut ddr = 0.0;
    let kmax = cos.len().max(sin.len());
    for k in 1..=kmax {
        let kf = k as f64;
        let (s, c) = (fmath::sin(kf * t), fmath::cos(kf * t));
        let a = cos.get(k - 1).copied().unwrap_or(0.0);
        let b = sin.get(k - 1).copied().unwrap_or(0.0);
        r += a * c + b * s;
        dr += kf * (-a * s + b * c);
        ddr -= kf * kf * (a * c + b * s);
    }
    (r, dr, ddr)
}

/// A manifold rigidly embedded in `R^ambient_dim`:
/// `x = offset + Q[:, :c] p` for canonical coordinates `p`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub ambient_dim: usize,
    /// Row-major orthogonal `ambient_dim x ambient_dim` matrix.
    pub rotation: Vec<f64>,
    pub offset: Vec<f64>,
}

impl ManifoldSpec {
    /// Canonical embedding padded with zero coordinates.
    pub fn new(kind: ManifoldKind, ambient_dim: usize) -> Result<Self> {
        kind.validate()?;
        if ambient_dim < kind.canonical_dim() {
            return Err(Error::invalid("ambient_dim", "must be at least intrinsic dimension + 1"));
        }
        let mut rotation = vec![0.0; ambient_dim * ambient_dim];
        for i in 0..ambient_dim {
            rotation[i * ambient_dim + i] = 1.0;
        }
        Ok(ManifoldSpec { kind, ambient_dim, rotation, offset: vec![0.0; ambient_dim] })
    }

    /// Embedding by a random orthogonal matrix: QR of a seeded Gaussian
    /// matrix with the signs of `R`'s diagonal absorbed into `Q`.
    pub fn rotated(kind: ManifoldKind, ambient_dim: usize, seed: u64) -> Result<Self> {
        let mut spec = Self::new(kind, ambient_dim)?;
        let mut rng = seeded_rng(seed, streams::EMBEDDING);
        let g = DMatrix::<f64>::from_fn(ambient_dim, ambient_dim, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..ambient_dim {
            if r[(j, j)] < 0.0 {
                for i in 0..ambient_dim {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        for i in 0..ambient_dim {
            for j in 0..ambient_dim {
                spec.rotation[i * ambient_dim + j] = q[(i, j)];
            }
        }
        Ok(spec)
    }

    /// Explicit rigid motion.
    pub fn with_motion(kind: ManifoldKind, ambient_dim: usize, rotation: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        let mut spec = Self::new(kind, ambient_dim)?;
        if rotation.len() != ambient_dim * ambient_dim {
            return Err(Error::DimensionMismatch { expected: ambient_dim * ambient_dim, found: rotation.len() });
        }
        if offset.len() != ambient_dim {
            return Err(Error::DimensionMismatch { expected: ambient_dim, found: offset.len() });
        }
        let q = DMatrix::from_row_slice(ambient_dim, ambient_dim, &rotation);
        let dev = (q.transpose() * &q - DMatrix::<f64>::identity(ambient_dim, ambient_dim)).abs().max();
        if !(dev <= 1e-10) {
            return Err(Error::invalid("rotation", "must be orthogonal"));
        }
        spec.rotation = rotation;
        spec.offset = offset;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        Self::with_motion(self.kind.clone(), self.ambient_dim, self.rotation.clone(), self.offset.clone()).map(|_| ())
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.kind.intrinsic_dim()
    }

    fn cdim(&self) -> usize {
        self.kind.canonical_dim()
    }

    /// Ambient image of a canonical vector (no offset).
    fn rotate(&self, p: &[f64], out: &mut [f64]) {
        let dd = self.ambient_dim;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.rotation[i * dd..i * dd + p.len()];
            *o = fmath::dot(row, p);
        }
    }

    fn unrotate(&self, x: &[f64], out: &mut [f64]) {
        let dd = self.ambient_dim;
        for (j, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for i in 0..dd {
                s += self.rotation[i * dd + j] * (x[i] - self.offset[i]);
            }
            *o = s;
        }
    }

    /// Canonical point and the canonical tangent derivatives `dp/dq_k`
    /// (unnormalized), stacked.
    fn canonical(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            ManifoldKind::Circle { radius } => {
                let (s, c) = (fmath::sin(q[0]), fmath::cos(q[0]));
                (vec![radius * c, radius * s], vec![-radius * s, radius * c])
            }
            ManifoldKind::PlanarCurve { base, cos, sin } => {
                let (r, dr, _) = curve_radius(*base, cos, sin, q[0]);
                let (s, c) = (fmath::sin(q[0]), fmath::cos(q[0]));
                (vec![r * c, r * s], vec![dr * c - r * s, dr * s + r * c])
            }
            ManifoldKind::Sphere2 { radius } => {
                let (st, ct) = (fmath::sin(q[0]), fmath::cos(q[0]));
                let (sp, cp) = (fmath::sin(q[1]), fmath::cos(q[1]));
                (
                    vec![radius * st * cp, radius * st * sp, radius * ct],
                    vec![radius * ct * cp, radius * ct * sp, -radius * st, -radius * st * sp, radius * st * cp, 0.0],
                )
            }
            ManifoldKind::Torus2 { major, minor } => {
                let (sp, cp) = (fmath::sin(q[0]), fmath::cos(q[0]));
                let (st, ct) = (fmath::sin(q[1]), fmath::cos(q[1]));
                let w = major + minor * ct;
                (
                    vec![w * cp, w * sp, minor * st],
                    vec![-w * sp, w * cp, 0.0, -minor * st * cp, -minor * st * sp, minor * ct],
                )
            }
        }
    }

    /// Ambient point at parameters `q`.
    pub fn point(&self, q: &[f64]) -> Vec<f64> {
        let (p, _) = self.canonical(q);
        let mut x = vec![0.0; self.ambient_dim];
        self.rotate(&p, &mut x);
        for (xi, oi) in x.iter_mut().zip(&self.offset) {
            *xi += oi;
        }
        x
    }

    /// Column-major `D x d` matrix of parameter derivatives of the embedding.
    pub fn parameter_differential(&self, q: &[f64]) -> Vec<f64> {
        let (_, dp) = self.canonical(q);
        let c = self.cdim();
        let dd = self.ambient_dim;
        let d = self.intrinsic_dim();
        let mut out = vec![0.0; dd * d];
        for k in 0..d {
            self.rotate(&dp[k * c..(k + 1) * c], &mut out[k * dd..(k + 1) * dd]);
        }
        out
    }

    /// Orthonormal tangent frame at `q`, column-major `D x d`.
    ///
    /// For the sphere the columns are `e_theta` and `e_phi`, which are
    /// orthogonal; away from the poles they are the normalized parameter
    /// derivatives. At a pole `e_phi` is still well defined from `phi`.
    pub fn tangent_frame(&self, q: &[f64]) -> Vec<f64> {
        let c = self.cdim();
        let canon: Vec<f64> = match &self.kind {
            ManifoldKind::Sphere2 { .. } => {
                let (st, ct) = (fmath::sin(q[0]), fmath::cos(q[0]));
                let (sp, cp) = (fmath::sin(q[1]), fmath::cos(q[1]));
                vec![ct * cp, ct * sp, -st, -sp, cp, 0.0]
            }
            _ => {
                let (_, mut dp) = self.canonical(q);
                for col in dp.chunks_exact_mut(c) {
                    let nrm = fmath::norm(col);
                    for v in col.iter_mut() {
                        *v /= nrm;
                    }
                }
                dp
            }
        };
        let dd = self.ambient_dim;
        let d = self.intrinsic_dim();
        let mut out = vec![0.0; dd * d];
        for k in 0..d {
            self.rotate(&canon[k * c..(k + 1) * c], &mut out[k * dd..(k + 1) * dd]);
        }
        out
    }

    /// Orthonormal basis of the normal space at `q`, column-major
    /// `D x (D - d)`: the canonical unit normal followed by the padding
    /// directions.
    pub fn normal_basis(&self, q: &[f64]) -> Vec<f64> {
        let c = self.cdim();
        let n: Vec<f64> = match &self.kind {
            ManifoldKind::Circle { .. } => vec![fmath::cos(q[0]), fmath::sin(q[0])],
            ManifoldKind::PlanarCurve { .. } => {
                let (_, dp) = self.canonical(q);
                let nrm = fmath::norm(&dp);
                vec![dp[1] / nrm, -dp[0] / nrm]
            }
            ManifoldKind::Sphere2 { .. } => {
                let (st, ct) = (fmath::sin(q[0]), fmath::cos(q[0]));
                let (sp, cp) = (fmath::sin(q[1]), fmath::cos(q[1]));
                vec![st * cp, st * sp, ct]
            }
            ManifoldKind::Torus2 { .. } => {
                let (sp, cp) = (fmath::sin(q[0]), fmath::cos(q[0]));
                let (st, ct) = (fmath::sin(q[1]), fmath::cos(q[1]));
                vec![ct * cp, ct * sp, st]
            }
        };
        let dd = self.ambient_dim;
        let k = dd - self.intrinsic_dim();
        let mut out = vec![0.0; dd * k];
        self.rotate(&n, &mut out[..dd]);
        for e in 1..k {
            let col = c + e - 1;
            for i in 0..dd {
                out[e * dd + i] = self.rotation[i * dd + col];
            }
        }
        out
    }

    /// Parameters of the point of the manifold nearest (along the canonical
    /// construction) to `y`; exact inverse of [`ManifoldSpec::point`] on the
    /// manifold.
    pub fn locate(&self, y: &[f64]) -> Vec<f64> {
        let c = self.cdim();
        let mut z = vec![0.0; c];
        self.unrotate(y, &mut z);
        let wrap = |a: f64| if a < 0.0 { a + 2.0 * PI } else { a };
        match &self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::PlanarCurve { .. } => vec![wrap(fmath::atan2(z[1], z[0]))],
            ManifoldKind::Sphere2 { .. } => {
                let r = fmath::norm(&z);
                vec![fmath::acos((z[2] / r).clamp(-1.0, 1.0)), wrap(fmath::atan2(z[1], z[0]))]
            }
            ManifoldKind::Torus2 { major, .. } => {
                let rho = fmath::sqrt(z[0] * z[0] + z[1] * z[1]);
                vec![wrap(fmath::atan2(z[1], z[0])), wrap(fmath::atan2(z[2], rho - major))]
            }
        }
    }

    /// Volume element `sqrt(det(dP^T dP))` in parameter coordinates.
    pub fn volume_element(&self, q: &[f64]) -> f64 {
        match &self.kind {
            ManifoldKind::Circle { radius } => *radius,
            ManifoldKind::PlanarCurve { base, cos, sin } => {
                let (r, dr, _) = curve_radius(*base, cos, sin, q[0]);
                fmath::sqrt(r * r + dr * dr)
            }
            ManifoldKind::Sphere2 { radius } => radius * radius * fmath::sin(q[0]).abs(),
            ManifoldKind::Torus2 { major, minor } => (major + minor * fmath::cos(q[1])) * minor,
        }
    }

    /// Parameter domain as `(lower, upper)` per coordinate.
    pub fn parameter_box(&self) -> Vec<(f64, f64)> {
        match &self.kind {
            ManifoldKind::Circle { .. } | ManifoldKind::PlanarCurve { .. } => vec![(0.0, 2.0 * PI)],
            ManifoldKind::Sphere2 { .. } => vec![(0.0, PI), (0.0, 2.0 * PI)],
            ManifoldKind::Torus2 { .. } => vec![(0.0, 2.0 * PI), (0.0, 2.0 * PI)],
        }
    }

    /// Total volume `|vol_M|`.
    pub fn total_volume(&self) -> f64 {
        match &self.kind {
            ManifoldKind::Circle { radius } => 2.0 * PI * radius,
            ManifoldKind::Sphere2 { radius } => 4.0 * PI * radius * radius,
            ManifoldKind::Torus2 { major, minor } => 4.0 * PI * PI * major * minor,
            ManifoldKind::PlanarCurve { .. } => periodic_integral(|t| self.volume_element(&[t])),
        }
    }

    /// The analytic chart `Psi_Y`: the point `p` of the manifold near the
    /// base point at parameters `q0` with `pi_Y(p - Y) = w`, for a tangent
    /// vector `w` given in ambient coordinates. Solved by Newton's method in
    /// the parameters.
    pub fn local_chart(&self, q0: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let d = self.intrinsic_dim();
        let dd = self.ambient_dim;
        let y = self.point(q0);
        let frame = self.tangent_frame(q0);
        let target: Vec<f64> = (0..d).map(|k| fmath::dot(&frame[k * dd..(k + 1) * dd], w)).collect();
        let mut q = q0.to_vec();
        for _ in 0..100 {
            let p = self.point(&q);
            let diff: Vec<f64> = p.iter().zip(&y).map(|(a, b)| a - b).collect();
            let f: Vec<f64> = (0..d).map(|k| fmath::dot(&frame[k * dd..(k + 1) * dd], &diff) - target[k]).collect();
            if fmath::norm(&f) <= 1e-14 * (1.0 + fmath::norm(&target)) {
                return Ok(p);
            }
            let dp = self.parameter_differential(&q);
            let jac = DMatrix::from_fn(d, d, |a, b| fmath::dot(&frame[a * dd..(a + 1) * dd], &dp[b * dd..(b + 1) * dd]));
            let step = jac
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&f))
                .ok_or_else(|| Error::invalid("w", "outside the chart domain"))?;
            for k in 0..d {
                q[k] -= step[k];
            }
        }
        Err(Error::invalid("w", "analytic chart did not converge"))
    }
}

/// Integral of a smooth `2 pi`-periodic function by the trapezoid rule,
/// which converges geometrically for analytic integrands.
fn periodic_integral<F: Fn(f64) -> f64>(f: F) -> f64 {
    let n = 4096;
    let h = 2.0 * PI / n as f64;
    (0..n).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

/// Density with respect to the volume measure, before normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum DensityKind {
    Uniform,
    /// `1 + amplitude * cos(frequency * phi)`, where `phi` is the curve
    /// parameter (circle, planar curve), the azimuth (sphere) or the major
    /// angle (torus).
    TrigPerturbed { amplitude: f64, frequency: u32 },
}

/// A density normalized against a given manifold.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DensitySpec {
    pub kind: DensityKind,
    /// `int g dvol`, so that `f = g / normalizer`.
    pub normalizer: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl DensitySpec {
    pub fn new(kind: DensityKind, manifold: &ManifoldSpec) -> Result<Self> {
        let (lo, hi) = match kind {
            DensityKind::Uniform => (1.0, 1.0),
            DensityKind::TrigPerturbed { amplitude, frequency } => {
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::invalid("amplitude", "must satisfy |a| < 1"));
                }
                if frequency == 0 {
                    return Err(Error::invalid("frequency", "must be a positive integer"));
                }
                (1.0 - amplitude.abs(), 1.0 + amplitude.abs())
            }
        };
        let normalizer = match (&manifold.kind, kind) {
            (ManifoldKind::PlanarCurve { .. }, DensityKind::TrigPerturbed { amplitude, frequency }) => {
                periodic_integral(|t| (1.0 + amplitude * fmath::cos(frequency as f64 * t)) * manifold.volume_element(&[t]))
            }
            // The perturbation integrates to zero against the volume element.
            _ => manifold.total_volume(),
        };
        Ok(DensitySpec { kind, normalizer, f_min: lo / normalizer, f_max: hi / normalizer })
    }

    pub fn uniform(manifold: &ManifoldSpec) -> Self {
        Self::new(DensityKind::Uniform, manifold).expect("uniform density is valid")
    }

    pub fn is_uniform(&self) -> bool {
        self.f_min == self.f_max
    }

    /// Angular coordinate the perturbation depends on.
    fn angle(manifold: &ManifoldSpec, q: &[f64]) -> f64 {
        match manifold.kind {
            ManifoldKind::Sphere2 { .. } => q[1],
            _ => q[0],
        }
    }

    /// Unnormalized profile `g`.
    pub fn profile(&self, manifold: &ManifoldSpec, q: &[f64]) -> f64 {
        match self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::TrigPerturbed { amplitude, frequency } => {
                1.0 + amplitude * fmath::cos(frequency as f64 * Self::angle(manifold, q))
            }
        }
    }

    pub fn profile_max(&self) -> f64 {
        self.f_max * self.normalizer
    }

    /// Normalized density `f` at parameters `q`.
    pub fn eval(&self, manifold: &ManifoldSpec, q: &[f64]) -> f64 {
        self.profile(manifold, q) / self.normalizer
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<ManifoldSpec> {
        vec![
            ManifoldSpec::new(ManifoldKind::Circle { radius: 1.5 }, 2).unwrap(),
            ManifoldSpec::rotated(ManifoldKind::Circle { radius: 1.0 }, 4, 9).unwrap(),
            ManifoldSpec::new(ManifoldKind::Sphere2 { radius: 1.0 }, 3).unwrap(),
            ManifoldSpec::rotated(ManifoldKind::Sphere2 { radius: 2.0 }, 5, 1).unwrap(),
            ManifoldSpec::rotated(ManifoldKind::Torus2 { major: 2.0, minor: 0.5 }, 4, 2).unwrap(),
            ManifoldSpec::rotated(
                ManifoldKind::PlanarCurve { base: 1.0, cos: vec![0.1, 0.0, 0.05], sin: vec![0.0, 0.1] },
                3,
                3,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ManifoldSpec::new(ManifoldKind::Circle { radius: 0.0 }, 2).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Torus2 { major: 1.0, minor: 1.0 }, 3).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Sphere2 { radius: 1.0 }, 2).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::PlanarCurve { base: 1.0, cos: vec![1.2], sin: vec![] }, 2).is_err());
    }

    #[test]
    fn frames_are_orthonormal_and_normal_complement() {
        for s in specs() {
            let dd = s.ambient_dim;
            let d = s.intrinsic_dim();
            for q in [[0.3, 1.1], [2.0, 4.0], [1.2, 0.1]] {
                let q = &q[..d];
                let t = s.tangent_frame(q);
                let n = s.normal_basis(q);
                let mut all = t.clone();
                all.extend_from_slice(&n);
                let m = DMatrix::from_column_slice(dd, dd, &all);
                let dev = (m.transpose() * &m - DMatrix::<f64>::identity(dd, dd)).abs().max();
                assert!(dev < 1e-13, "{:?} dev {dev}", s.kind);
                // tangent spans the parameter derivatives
                let dp = s.parameter_differential(q);
                for col in dp.chunks_exact(dd) {
                    for nc in n.chunks_exact(dd) {
                        assert!(fmath::dot(col, nc).abs() < 1e-13);
                    }
                }
                // locate inverts point
                let x = s.point(q);
                let q2 = s.locate(&x);
                let x2 = s.point(&q2);
                assert!(fmath::dist(&x, &x2) < 1e-13);
                let je = s.volume_element(q);
                let g = DMatrix::from_column_slice(dd, d, &dp);
                let det = (g.transpose() * &g).determinant();
                assert!((fmath::sqrt(det) - je).abs() < 1e-12 * je.max(1.0));
            }
        }
    }

    #[test]
    fn curve_volume_matches_quadrature() {
        let s = ManifoldSpec::new(ManifoldKind::PlanarCurve { base: 1.0, cos: vec![], sin: vec![] }, 2).unwrap();
        assert!((s.total_volume() - 2.0 * PI).abs() < 1e-12);
        // ellipse-free check: r = 1 + 0.3 cos t has length computed by adaptive quadrature
        let s = ManifoldSpec::new(ManifoldKind::PlanarCurve { base: 1.0, cos: vec![0.3], sin: vec![] }, 2).unwrap();
        let oracle = crate::quadrature::integrate(|t| s.volume_element(&[t]), 0.0, 2.0 * PI, 1e-13, 1e-13, 500).unwrap();
        assert!((s.total_volume() - oracle.value).abs() < 1e-11);
    }

    #[test]
    fn local_chart_circle_closed_form() {
        let s = ManifoldSpec::new(ManifoldKind::Circle { radius: 1.0 }, 2).unwrap();
        let w = [0.0, 0.3];
        let p = s.local_chart(&[0.0], &w).unwrap();
        assert!((p[0] - fmath::sqrt(1.0 - 0.09)).abs() < 1e-14);
        assert!((p[1] - 0.3).abs() < 1e-14);
        let sp = ManifoldSpec::new(ManifoldKind::Sphere2 { radius: 1.0 }, 3).unwrap();
        // base at the north-pole side: theta small; tangent step in e_phi
        let q0 = [PI / 2.0, 0.0];
        let p = sp.local_chart(&q0, &[0.0, 0.2, 0.1]).unwrap();
        assert!((p[1] - 0.2).abs() < 1e-13 && (p[2] - 0.1).abs() < 1e-13);
        assert!((p[0] - fmath::sqrt(1.0 - 0.05)).abs() < 1e-13);
    }

    #[test]
    fn densities_normalize() {
        for s in specs() {
            let dens = DensitySpec::new(DensityKind::TrigPerturbed { amplitude: 0.4, frequency: 2 }, &s).unwrap();
            let bx = s.parameter_box();
            let total = if s.intrinsic_dim() == 1 {
                crate::quadrature::integrate(|t| dens.eval(&s, &[t]) * s.volume_element(&[t]), 0.0, bx[0].1, 1e-13, 1e-13, 500)
                    .unwrap()
                    .value
            } else {
                let (x, w) = crate::quadrature::gauss_legendre(64);
                let mut acc = 0.0;
                for (xa, wa) in x.iter().zip(&w) {
                    for (xb, wb) in x.iter().zip(&w) {
                        let q = [bx[0].1 * (xa + 1.0) / 2.0, bx[1].1 * (xb + 1.0) / 2.0];
                        acc += wa * wb * dens.eval(&s, &q) * s.volume_element(&q);
                    }
                }
                acc * bx[0].1 * bx[1].1 / 4.0
            };
            assert!((total - 1.0).abs() < 1e-11, "{:?}: {total}", s.kind);
            assert!(dens.f_min > 0.0 && dens.f_min < dens.f_max);
        }
    }
}

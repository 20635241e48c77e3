use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DensitySpec, ManifoldKind, ManifoldSpec};
use crate::error::{Error, Result};
use crate::fmath;
use crate::numerics::PointSet;
use crate::rng::{seeded_rng, streams, StreamRng};

/// Rejection samplers give up after this many proposals per requested point.
pub const REJECTION_FACTOR: usize = 1000;

/// Ground truth attached to generated samples.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truth {
    /// Base points `Y_i` on the manifold.
    pub base: PointSet,
    /// Manifold parameters of `Y_i`.
    pub params: PointSet,
    /// Per point, a column-major `D x d` orthonormal tangent frame.
    pub frames: Vec<f64>,
    /// Noise vectors `Z_i = X_i - Y_i`.
    pub noise: PointSet,
}

impl Truth {
    pub fn frame(&self, i: usize, intrinsic_dim: usize) -> &[f64] {
        let dd = self.base.dim();
        let sz = dd * intrinsic_dim;
        &self.frames[i * sz..(i + 1) * sz]
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointCloud {
    pub points: PointSet,
    pub truth: Option<Truth>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` i.i.d. draws from `f vol_M`: inverse CDF in the curve parameter for
/// curves, rejection against the uniform measure for surfaces.
pub fn sample_manifold(spec: &ManifoldSpec, density: &DensitySpec, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    let mut rng = seeded_rng(seed, streams::SAMPLE);
    let d = spec.intrinsic_dim();
    let params = match d {
        1 => {
            let cdf = CurveCdf::new(spec, density);
            let mut p = PointSet::with_capacity(1, n);
            for _ in 0..n {
                let u: f64 = rng.random();
                p.push(&[cdf.invert(u)]);
            }
            p
        }
        _ => surface_rejection(spec, density, n, &mut rng)?,
    };
    let dd = spec.ambient_dim;
    let mut base = PointSet::with_capacity(dd, n);
    let mut frames = Vec::with_capacity(n * dd * d);
    for q in params.rows() {
        base.push(&spec.point(q));
        frames.extend_from_slice(&spec.tangent_frame(q));
    }
    let noise = PointSet::from_flat(dd, vec![0.0; n * dd]).expect("shape");
    Ok(PointCloud { points: base.clone(), truth: Some(Truth { base, params, frames, noise }) })
}

fn surface_rejection(spec: &ManifoldSpec, density: &DensitySpec, n: usize, rng: &mut StreamRng) -> Result<PointSet> {
    let cap = REJECTION_FACTOR.saturating_mul(n);
    let gmax = density.profile_max();
    let mut out = PointSet::with_capacity(2, n);
    let mut proposals = 0usize;
    while out.len() < n {
        if proposals >= cap {
            return Err(Error::RejectionCap { cap, accepted: out.len() });
        }
        proposals += 1;
        let (q, envelope) = match spec.kind {
            ManifoldKind::Sphere2 { .. } => {
                let z = 1.0 - 2.0 * rng.random::<f64>();
                let phi = 2.0 * PI * rng.random::<f64>();
                ([fmath::acos(z), phi], 1.0)
            }
            ManifoldKind::Torus2 { major, minor } => {
                let phi = 2.0 * PI * rng.random::<f64>();
                let theta = 2.0 * PI * rng.random::<f64>();
                ([phi, theta], (major + minor * fmath::cos(theta)) / (major + minor))
            }
            _ => unreachable!("curves use the inverse CDF"),
        };
        let accept = envelope * density.profile(spec, &q) / gmax;
        if rng.random::<f64>() < accept {
            out.push(&q);
        }
    }
    Ok(out)
}

/// Tabulated CDF of the curve parameter with exact refinement inside cells.
struct CurveCdf<'a> {
    spec: &'a ManifoldSpec,
    density: &'a DensitySpec,
    breaks: Vec<f64>,
    cum: Vec<f64>,
    gl: (Vec<f64>, Vec<f64>),
}

const CDF_CELLS: usize = 1024;
const CELL_GL: usize = 12;

impl<'a> CurveCdf<'a> {
    fn new(spec: &'a ManifoldSpec, density: &'a DensitySpec) -> Self {
        let gl = crate::quadrature::gauss_legendre(CELL_GL);
        let breaks: Vec<f64> = (0..=CDF_CELLS).map(|j| 2.0 * PI * j as f64 / CDF_CELLS as f64).collect();
        let mut cdf = CurveCdf { spec, density, breaks, cum: Vec::with_capacity(CDF_CELLS + 1), gl };
        let mut acc = 0.0;
        cdf.cum.push(0.0);
        for j in 0..CDF_CELLS {
            acc += cdf.partial(cdf.breaks[j], cdf.breaks[j + 1]);
            cdf.cum.push(acc);
        }
        cdf
    }

    fn pdf(&self, t: f64) -> f64 {
        self.density.profile(self.spec, &[t]) * self.spec.volume_element(&[t])
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.gl.0.iter().zip(&self.gl.1).map(|(x, w)| w * self.pdf(c + h * x)).sum::<f64>() * h
    }

    fn invert(&self, u: f64) -> f64 {
        let total = self.cum[CDF_CELLS];
        let target = u * total;
        let j = (self.cum.partition_point(|&c| c <= target) - 1).min(CDF_CELLS - 1);
        let (mut lo, mut hi) = (self.breaks[j], self.breaks[j + 1]);
        let base = self.cum[j];
        let mut t = lo + (hi - lo) * ((target - base) / (self.cum[j + 1] - base)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = base + self.partial(self.breaks[j], t) - target;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let step = f / self.pdf(t);
            let next = t - step;
            t = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
            if step.abs() < 1e-15 || hi - lo < 1e-15 {
                break;
            }
        }
        t
    }
}

/// Replaces every noise vector with a fresh draw, uniform in the ball of
/// radius `gamma` of the normal space at `Y_i`; `X_i = Y_i + Z_i`.
/// `gamma = 0` returns the input unchanged.
pub fn add_tubular_noise(spec: &ManifoldSpec, cloud: &PointCloud, gamma: f64, seed: u64) -> Result<PointCloud> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "must be nonnegative and finite"));
    }
    let truth = cloud.truth.as_ref().ok_or(Error::MissingTruth)?;
    if gamma == 0.0 {
        return Ok(cloud.clone());
    }
    let dd = spec.ambient_dim;
    let k = dd - spec.intrinsic_dim();
    let mut rng = seeded_rng(seed, streams::NOISE);
    let n = cloud.len();
    let mut points = PointSet::with_capacity(dd, n);
    let mut noise = PointSet::with_capacity(dd, n);
    let mut g = vec![0.0; k];
    for i in 0..n {
        let nb = spec.normal_basis(truth.params.row(i));
        let mut nrm;
        loop {
            for gi in g.iter_mut() {
                *gi = StandardNormal.sample(&mut rng);
            }
            nrm = fmath::norm(&g);
            if nrm > 0.0 {
                break;
            }
        }
        let u: f64 = rng.random();
        // keep |Z| <= gamma through rounding
        let radius = gamma * fmath::powf(u, 1.0 / k as f64).min(1.0 - 1e-14);
        let mut z = vec![0.0; dd];
        for (e, ge) in g.iter().enumerate() {
            let c = radius * ge / nrm;
            for (zi, ni) in z.iter_mut().zip(&nb[e * dd..(e + 1) * dd]) {
                *zi += c * ni;
            }
        }
        let y = truth.base.row(i);
        let x: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
        points.push(&x);
        noise.push(&z);
    }
    let truth = Truth { noise, ..truth.clone() };
    Ok(PointCloud { points, truth: Some(truth) })
}

#[cfg(test)]
mod tests {
    use super::super::DensityKind;
    use super::*;

    #[test]
    fn circle_points_on_circle() {
        let s = ManifoldSpec::new(ManifoldKind::Circle { radius: 1.0 }, 2).unwrap();
        let c = sample_manifold(&s, &DensitySpec::uniform(&s), 4, 11).unwrap();
        for p in c.points.rows() {
            assert!((fmath::norm(p) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_cdf_matches_closed_form() {
        // F(t) = (t + (a/k) sin(kt)) / (2 pi) for the perturbed circle
        let s = ManifoldSpec::new(ManifoldKind::Circle { radius: 1.0 }, 2).unwrap();
        let dens = DensitySpec::new(DensityKind::TrigPerturbed { amplitude: 0.5, frequency: 3 }, &s).unwrap();
        let cdf = CurveCdf::new(&s, &dens);
        for u in [0.0, 0.013, 0.25, 0.5, 0.77, 0.999] {
            let t = cdf.invert(u);
            let f = (t + 0.5 / 3.0 * fmath::sin(3.0 * t)) / (2.0 * PI);
            assert!((f - u).abs() < 1e-13, "u={u} t={t} F={f}");
        }
    }

    #[test]
    fn noise_is_normal_and_bounded() {
        let s = ManifoldSpec::rotated(ManifoldKind::Sphere2 { radius: 1.0 }, 5, 4).unwrap();
        let c = sample_manifold(&s, &DensitySpec::uniform(&s), 300, 1).unwrap();
        let z = add_tubular_noise(&s, &c, 0.05, 2).unwrap();
        let t = z.truth.as_ref().unwrap();
        for i in 0..300 {
            let zi = t.noise.row(i);
            assert!(fmath::norm(zi) <= 0.05);
            for col in t.frame(i, 2).chunks_exact(5) {
                assert!(fmath::dot(col, zi).abs() <= 1e-12);
            }
            let x: Vec<f64> = t.base.row(i).iter().zip(zi).map(|(a, b)| a + b).collect();
            assert_eq!(x.as_slice(), z.points.row(i));
        }
        assert_eq!(add_tubular_noise(&s, &c, 0.0, 2).unwrap(), c);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = ManifoldSpec::new(ManifoldKind::Torus2 { major: 2.0, minor: 0.7 }, 3).unwrap();
        let d = DensitySpec::new(DensityKind::TrigPerturbed { amplitude: 0.3, frequency: 1 }, &s).unwrap();
        assert_eq!(sample_manifold(&s, &d, 50, 5).unwrap(), sample_manifold(&s, &d, 50, 5).unwrap());
        assert_ne!(sample_manifold(&s, &d, 50, 5).unwrap(), sample_manifold(&s, &d, 50, 6).unwrap());
    }
}

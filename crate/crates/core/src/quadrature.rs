//! Quadrature rules: Gauss–Legendre, adaptive Gauss–Kronrod, Halton points and
//! rules on the d-dimensional ball.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::rng::StreamRng;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = fmath::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// The error estimate is the Gauss/Kronrod discrepancy, which bounds the
/// error of the Kronrod value generously for smooth integrands. Fails when
/// the requested tolerance is not met within `max_intervals` subintervals.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    integrate_breaks(f, &[a, b], abs_tol, rel_tol, max_intervals)
}

/// As [`integrate`], starting from the given ascending breakpoints.
pub fn integrate_breaks<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<Integral> {
    let mut parts: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&f, w[0], w[1]);
            parts.push((w[0], w[1], v, e));
        }
    }
    loop {
        let value: f64 = parts.iter().map(|p| p.2).sum();
        let error: f64 = parts.iter().map(|p| p.3).sum();
        let tol = abs_tol.max(rel_tol * value.abs());
        if error <= tol {
            return Ok(Integral { value, error, intervals: parts.len() });
        }
        if parts.len() >= max_intervals {
            return Err(Error::Certification {
                what: "adaptive quadrature".into(),
                value: error,
                tol,
            });
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = parts[worst];
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            return Err(Error::Certification {
                what: "adaptive quadrature (interval underflow)".into(),
                value: error,
                tol,
            });
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts[worst] = (lo, mid, v1, e1);
        parts.push((mid, hi, v2, e2));
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b as u64) as f64 * f;
        i /= b as u64;
        f *= inv;
    }
    r
}

/// The first `count` Halton points in `[0,1)^dim` (starting at index 1),
/// row-major.
pub fn halton(dim: usize, count: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len());
    let mut out = Vec::with_capacity(dim * count);
    for i in 0..count {
        for &p in PRIMES.iter().take(dim) {
            out.push(radical_inverse(i as u64 + 1, p));
        }
    }
    out
}

/// Quadrature rule for the centered ball of a given radius in `R^dim`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BallRule {
    pub dim: usize,
    pub radius: f64,
    /// Row-major `count x dim` nodes.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub description: BallRuleKind,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "rule"))]
pub enum BallRuleKind {
    GaussLegendre { nodes: usize },
    Polar { radial: usize, angular: usize },
    Halton { nodes: usize },
}

pub const GL_NODES_1D: usize = 32;
pub const POLAR_RADIAL: usize = 16;
pub const POLAR_ANGULAR: usize = 32;
pub const HALTON_NODES: usize = 4096;

impl BallRule {
    /// Default rule: 32-point Gauss–Legendre (d=1), 16x32 polar (d=2), or
    /// 4096 Halton points with a random shift drawn from `rng` (d >= 3).
    pub fn standard(dim: usize, radius: f64, rng: &mut StreamRng) -> Self {
        match dim {
            1 => Self::gauss_legendre(radius, GL_NODES_1D),
            2 => Self::polar(radius, POLAR_RADIAL, POLAR_ANGULAR),
            _ => Self::halton(dim, radius, HALTON_NODES, rng),
        }
    }

    pub fn gauss_legendre(radius: f64, n: usize) -> Self {
        let (x, w) = gauss_legendre_on(n, -radius, radius);
        BallRule {
            dim: 1,
            radius,
            nodes: x,
            weights: w,
            description: BallRuleKind::GaussLegendre { nodes: n },
        }
    }

    /// Gauss–Legendre in the radius (with the `r dr` factor) times the
    /// trapezoid rule in the angle.
    pub fn polar(radius: f64, radial: usize, angular: usize) -> Self {
        let (r, wr) = gauss_legendre_on(radial, 0.0, radius);
        let mut nodes = Vec::with_capacity(2 * radial * angular);
        let mut weights = Vec::with_capacity(radial * angular);
        let dphi = 2.0 * PI / angular as f64;
        for (ri, wi) in r.iter().zip(&wr) {
            for k in 0..angular {
                let phi = k as f64 * dphi;
                nodes.push(ri * fmath::cos(phi));
                nodes.push(ri * fmath::sin(phi));
                weights.push(wi * ri * dphi);
            }
        }
        BallRule { dim: 2, radius, nodes, weights, description: BallRuleKind::Polar { radial, angular } }
    }

    /// Shifted Halton points in the cube mapped to the ball by rejection,
    /// equal weights summing to the ball volume.
    pub fn halton(dim: usize, radius: f64, count: usize, rng: &mut StreamRng) -> Self {
        let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mut nodes = Vec::with_capacity(dim * count);
        let mut idx = 1u64;
        let mut p = vec![0.0; dim];
        while nodes.len() < dim * count {
            let mut r2 = 0.0;
            for (k, pk) in p.iter_mut().enumerate() {
                let mut u = radical_inverse(idx, PRIMES[k]) + shift[k];
                if u >= 1.0 {
                    u -= 1.0;
                }
                *pk = 2.0 * u - 1.0;
                r2 += *pk * *pk;
            }
            idx += 1;
            if r2 <= 1.0 {
                nodes.extend(p.iter().map(|x| x * radius));
            }
        }
        let w = fmath::unit_ball_volume(dim) * fmath::powi(radius, dim as i32) / count as f64;
        BallRule {
            dim,
            radius,
            nodes,
            weights: vec![w; count],
            description: BallRuleKind::Halton { nodes: count },
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.dim..(q + 1) * self.dim]
    }
}

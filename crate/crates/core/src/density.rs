//! Kernel density estimates realized as weighted measures on quadrature
//! nodes.
//!
//! Given nodes `z` with weights `w_z` approximating a volume measure and
//! samples `X_i` with weights `s_i`, the estimate puts weight
//! `w_z sum_i s_i K_h(z - X_i) / rho(X_i)` at `z`, where
//! `rho(x) = sum_z w_z K_h(x - z)`. Since `rho` uses the same nodes, the
//! total mass is exactly `sum_i s_i`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fmath;
use crate::kernels::RadialKernel;
use crate::measure::WeightedMeasure;
use crate::numerics::{GridIndex, PointSet};

/// Normalizers at or below this count as vanishing.
pub const NORMALIZER_FLOOR: f64 = 1e-300;
/// Mass tolerance for accepting an estimate as a probability measure.
pub const MASS_TOL: f64 = 1e-9;

/// `x -> sum_z w_z K_h(x - z)` with range-query pruning.
#[derive(Clone, Debug)]
pub struct Smoother<'a> {
    nodes: &'a PointSet,
    weights: &'a [f64],
    kernel: &'a RadialKernel,
    h: f64,
    grid: GridIndex,
}

impl<'a> Smoother<'a> {
    pub fn new(nodes: &'a PointSet, weights: &'a [f64], kernel: &'a RadialKernel, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", "bandwidth must be positive"));
        }
        if nodes.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: nodes.len(), found: weights.len() });
        }
        Ok(Smoother { nodes, weights, kernel, h, grid: GridIndex::new(nodes, h) })
    }

    pub fn at(&self, x: &[f64]) -> f64 {
        let mut idx = Vec::new();
        self.grid.query(self.nodes, x, self.h, &mut idx);
        idx.iter()
            .map(|&z| self.weights[z] * self.kernel.eval_scaled_norm(self.h, fmath::dist(x, self.nodes.row(z))))
            .sum()
    }
}

/// `rho_h(x) = K_h * nodes` at a single point.
pub fn rho_hat(nodes: &WeightedMeasure, kernel: &RadialKernel, h: f64, x: &[f64]) -> Result<f64> {
    Ok(Smoother::new(&nodes.support, &nodes.weights, kernel, h)?.at(x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityEstimate {
    pub measure: WeightedMeasure,
    /// `rho(X_i)` per sample.
    pub normalizers: Vec<f64>,
}

/// Smoothed, renormalized sample measure on the given nodes.
pub fn estimate_density<E: Executor>(
    samples: &WeightedMeasure,
    nodes: &WeightedMeasure,
    kernel: &RadialKernel,
    h: f64,
    exec: &E,
) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample"));
    }
    if samples.dim() != nodes.dim() {
        return Err(Error::DimensionMismatch { expected: nodes.dim(), found: samples.dim() });
    }
    let smoother = Smoother::new(&nodes.support, &nodes.weights, kernel, h)?;
    let normalizers = exec.map(samples.len(), |i| smoother.at(samples.support.row(i)));
    if let Some(i) = normalizers.iter().position(|r| !(*r > NORMALIZER_FLOOR)) {
        return Err(Error::VanishingNormalizer { index: i, value: normalizers[i] });
    }
    let coef: Vec<f64> = samples.weights.iter().zip(&normalizers).map(|(s, r)| s / r).collect();
    let sample_grid = GridIndex::new(&samples.support, h);
    let weights = exec.map(nodes.len(), |z| {
        let pz = nodes.support.row(z);
        let mut idx = Vec::new();
        sample_grid.query(&samples.support, pz, h, &mut idx);
        let s: f64 = idx
            .iter()
            .map(|&i| coef[i] * kernel.eval_scaled_norm(h, fmath::dist(pz, samples.support.row(i))))
            .sum();
        nodes.weights[z] * s
    });
    let measure = WeightedMeasure::new(nodes.support.clone(), weights)?;
    Ok(DensityEstimate { measure, normalizers })
}

/// Density of each node weight relative to its node measure weight.
pub fn node_density(est: &WeightedMeasure, nodes: &WeightedMeasure) -> Vec<f64> {
    est.weights.iter().zip(&nodes.weights).map(|(e, w)| if *w > 0.0 { e / w } else { 0.0 }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct FallbackResult {
    pub measure: WeightedMeasure,
    pub fell_back: bool,
}

/// Keeps `est` when it is a probability measure, else the Dirac mass at
/// the first sample.
pub fn with_fallback(est: &WeightedMeasure, samples: &WeightedMeasure) -> Result<FallbackResult> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample"));
    }
    if est.nonnegative && (est.mass - 1.0).abs() <= MASS_TOL {
        Ok(FallbackResult { measure: est.clone(), fell_back: false })
    } else {
        Ok(FallbackResult { measure: WeightedMeasure::dirac(samples.support.row(0)), fell_back: true })
    }
}

/// Bandwidth and scale schedule in `n`.
///
/// `eps = c_eps (ln n / n)^(1/d)`; `h = c_h (ln n / n)^(1/d)` for `d <= 2`
/// and `h = c_h n^(-1/(2s+d))` otherwise, raised to at least `eps`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct BandwidthSchedule {
    pub c_h: f64,
    pub c_eps: f64,
    /// `ell = c_ell / eps`.
    pub c_ell: f64,
    /// Noise level as a multiple of `eps^2`.
    pub gamma_factor: f64,
}

impl Default for BandwidthSchedule {
    fn default() -> Self {
        BandwidthSchedule { c_h: 1.0, c_eps: 1.0, c_ell: 1.0, gamma_factor: 0.0 }
    }
}

impl BandwidthSchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_h", self.c_h), ("c_eps", self.c_eps), ("c_ell", self.c_ell)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !(self.gamma_factor >= 0.0) || !self.gamma_factor.is_finite() {
            return Err(Error::invalid("gamma_factor", "must be nonnegative"));
        }
        Ok(())
    }

    fn base(n: usize, d: usize) -> f64 {
        let n = (n.max(3)) as f64;
        fmath::powf(fmath::ln(n) / n, 1.0 / d as f64)
    }

    pub fn epsilon(&self, n: usize, d: usize) -> f64 {
        self.c_eps * Self::base(n, d)
    }

    pub fn h(&self, n: usize, d: usize, s: f64) -> f64 {
        let raw = if d <= 2 {
            self.c_h * Self::base(n, d)
        } else {
            self.c_h * fmath::powf(n.max(1) as f64, -1.0 / (2.0 * s + d as f64))
        };
        raw.max(self.epsilon(n, d))
    }

    pub fn ell(&self, n: usize, d: usize) -> f64 {
        self.c_ell / self.epsilon(n, d)
    }

    pub fn gamma(&self, n: usize, d: usize) -> f64 {
        let e = self.epsilon(n, d);
        self.gamma_factor * e * e
    }
}

//! Finite weighted measures on `R^D`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::PointSet;

/// Weights at or above this value count as nonnegative float dust.
pub const NONNEGATIVE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightedMeasure {
    pub support: PointSet,
    pub weights: Vec<f64>,
    /// True iff the smallest raw weight was at least `-1e-12`; small negative
    /// weights are then clamped to zero.
    pub nonnegative: bool,
    /// Sum of the (possibly clamped) weights.
    pub mass: f64,
}

impl WeightedMeasure {
    /// Builds the measure, clamping float-dust negatives when every weight is
    /// at least `-1e-12`. The mass is not renormalized.
    pub fn new(support: PointSet, mut weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: support.len(), found: weights.len() });
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::invalid("weights", alloc::format!("non-finite weight at {i}")));
        }
        let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let nonnegative = weights.is_empty() || min >= -NONNEGATIVE_SLACK;
        if nonnegative {
            for w in weights.iter_mut() {
                if *w < 0.0 {
                    *w = 0.0;
                }
            }
        }
        let mass = weights.iter().sum();
        Ok(WeightedMeasure { support, weights, nonnegative, mass })
    }

    /// Equal weights `1/n` on the given points.
    pub fn empirical(points: PointSet) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::ZeroMass);
        }
        Self::new(points, alloc::vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: &[f64]) -> Self {
        let support = PointSet::from_rows(point.len(), &[point]).expect("single row");
        WeightedMeasure { support, weights: alloc::vec![1.0], nonnegative: true, mass: 1.0 }
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weights divided by the mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::ZeroMass);
        }
        let weights = self.weights.iter().map(|w| w / self.mass).collect();
        Self::new(self.support.clone(), weights)
    }

    /// Drops support points with zero weight.
    pub fn without_zeros(&self) -> Self {
        let mut support = PointSet::new(self.dim());
        let mut weights = Vec::new();
        for (i, &w) in self.weights.iter().enumerate() {
            if w != 0.0 {
                support.push(self.support.row(i));
                weights.push(w);
            }
        }
        let mass = weights.iter().sum();
        WeightedMeasure { support, weights, nonnegative: self.nonnegative, mass }
    }
}

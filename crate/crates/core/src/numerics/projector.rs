use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on `B^T B = I` for a projector basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthogonal projector `B B^T` onto a `rank`-dimensional subspace of
/// `R^ambient`, represented by an orthonormal basis `B`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Projector {
    ambient: usize,
    rank: usize,
    /// Column-major `ambient x rank`: column `k` is the `k`-th basis vector.
    basis: Vec<f64>,
}

impl Projector {
    /// Validates orthonormality of the columns.
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let (ambient, rank) = basis.shape();
        if rank == 0 || rank > ambient {
            return Err(Error::invalid("basis", "rank must be in 1..=ambient dimension"));
        }
        let gram = basis.transpose() * &basis;
        let dev = (gram - DMatrix::<f64>::identity(rank, rank)).abs().max();
        if !(dev <= ORTHONORMAL_TOL) {
            return Err(Error::invalid("basis", alloc::format!("columns not orthonormal (deviation {dev:e})")));
        }
        Ok(Projector { ambient, rank, basis: basis.as_slice().to_vec() })
    }

    /// Skips validation; the caller guarantees orthonormal columns.
    pub(crate) fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        let (ambient, rank) = basis.shape();
        Projector { ambient, rank, basis: basis.as_slice().to_vec() }
    }

    /// Span of the first `rank` coordinate axes.
    pub fn coordinate(ambient: usize, rank: usize) -> Self {
        Self::from_orthonormal(DMatrix::identity(ambient, rank))
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.ambient, self.rank, &self.basis)
    }

    pub fn basis_column(&self, k: usize) -> &[f64] {
        &self.basis[k * self.ambient..(k + 1) * self.ambient]
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let b = self.basis();
        &b * b.transpose()
    }

    /// Coordinates `B^T x`.
    pub fn coordinates(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate().take(self.rank) {
            *o = crate::fmath::dot(self.basis_column(k), x);
        }
    }

    /// `B B^T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.rank];
        self.coordinates(x, &mut c);
        let mut out = alloc::vec![0.0; self.ambient];
        for (k, ck) in c.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.basis_column(k)) {
                *o += ck * b;
            }
        }
        out
    }
}

/// Operator norm `||P_a - P_b||`: the largest singular value of the
/// difference, in `[0, 1]`.
pub fn subspace_angle(a: &Projector, b: &Projector) -> Result<f64> {
    if a.ambient != b.ambient {
        return Err(Error::DimensionMismatch { expected: a.ambient, found: b.ambient });
    }
    if a.rank != b.rank {
        return Err(Error::DimensionMismatch { expected: a.rank, found: b.rank });
    }
    let diff = a.matrix() - b.matrix();
    let s = diff.singular_values();
    Ok(s.iter().copied().fold(0.0, f64::max).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmath;

    fn line(theta: f64) -> Projector {
        Projector::new(DMatrix::from_column_slice(2, 1, &[fmath::cos(theta), fmath::sin(theta)])).unwrap()
    }

    #[test]
    fn known_angles() {
        assert_eq!(subspace_angle(&line(0.0), &line(0.0)).unwrap(), 0.0);
        assert!((subspace_angle(&line(0.0), &line(core::f64::consts::FRAC_PI_2)).unwrap() - 1.0).abs() < 1e-15);
        let a = subspace_angle(&line(0.0), &line(0.3)).unwrap();
        assert!((a - fmath::sin(0.3)).abs() < 1e-15, "{a}");
    }

    #[test]
    fn rejects_mismatch_and_non_orthonormal() {
        let p3 = Projector::coordinate(3, 1);
        assert!(subspace_angle(&line(0.0), &p3).is_err());
        assert!(subspace_angle(&Projector::coordinate(3, 2), &p3).is_err());
        assert!(Projector::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.1])).is_err());
    }
}

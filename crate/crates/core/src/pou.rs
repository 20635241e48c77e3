//! Partition of unity over the patch centers.
//!
//! `chi_j(y) = theta(|y - X_j| / eps) / sum_k theta(|y - X_k| / eps)` with
//! centers from farthest point sampling at separation `7 eps / 24` and a
//! radial step `theta` equal to 1 on `[0, 1/2]` and 0 beyond 1.

use alloc::vec::Vec;

use crate::charts::farthest_point_sampling;
use crate::error::{Error, Result};
use crate::fmath;
use crate::numerics::{GridIndex, PointSet};

/// Denominators below this are treated as uncovered.
pub const COVERAGE_FLOOR: f64 = 1e-300;

/// Separation used by farthest point sampling, relative to `eps`.
pub const FPS_FRACTION: f64 = 7.0 / 24.0;

fn expm(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        fmath::exp(-1.0 / s)
    }
}

/// Radial step: 1 on `[0, 1/2]`, 0 on `[1, inf)`, smooth in between.
pub fn theta(t: f64) -> f64 {
    if t <= 0.5 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * (1.0 - t);
    let a = expm(s);
    let b = expm(1.0 - s);
    a / (a + b)
}

/// Derivative of [`theta`].
pub fn theta_derivative(t: f64) -> f64 {
    if t <= 0.5 || t >= 1.0 {
        return 0.0;
    }
    let s = 2.0 * (1.0 - t);
    let a = expm(s);
    let b = expm(1.0 - s);
    let da = a / (s * s);
    let db = b / ((1.0 - s) * (1.0 - s));
    let ds = (da * b + a * db) / ((a + b) * (a + b));
    -2.0 * ds
}

#[derive(Clone, Debug)]
pub struct PartitionOfUnity {
    /// Indices into the sample, in selection order.
    pub centers: Vec<usize>,
    pub center_points: PointSet,
    pub epsilon: f64,
    /// `eps / 8`; the bump radius is `8 delta`.
    pub delta: f64,
    grid: GridIndex,
}

/// Centers by farthest point sampling at `7 eps / 24`.
pub fn build_pou(points: &PointSet, epsilon: f64) -> Result<PartitionOfUnity> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be positive"));
    }
    if points.is_empty() {
        return Err(Error::invalid("points", "empty point set"));
    }
    let centers = farthest_point_sampling(points, FPS_FRACTION * epsilon);
    PartitionOfUnity::new(points, centers, epsilon)
}

impl PartitionOfUnity {
    pub fn new(points: &PointSet, centers: Vec<usize>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if centers.is_empty() {
            return Err(Error::invalid("centers", "no centers"));
        }
        if let Some(&c) = centers.iter().find(|&&c| c >= points.len()) {
            return Err(Error::invalid("centers", alloc::format!("index {c} out of range")));
        }
        let center_points = points.select(&centers);
        let grid = GridIndex::new(&center_points, epsilon);
        Ok(PartitionOfUnity { centers, center_points, epsilon, delta: epsilon / 8.0, grid })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn bump(&self, j: usize, y: &[f64]) -> f64 {
        theta(fmath::dist(y, self.center_points.row(j)) / self.epsilon)
    }

    /// Center ids within `eps` of `y`, ascending.
    pub fn active(&self, y: &[f64], out: &mut Vec<usize>) {
        self.grid.query(&self.center_points, y, self.epsilon, out);
    }

    /// `sum_k theta(|y - X_k| / eps)` over active centers.
    pub fn denominator(&self, y: &[f64]) -> f64 {
        let mut act = Vec::new();
        self.active(y, &mut act);
        act.iter().map(|&k| self.bump(k, y)).sum()
    }

    fn checked_denominator(&self, y: &[f64]) -> Result<f64> {
        let s = self.denominator(y);
        if !(s >= COVERAGE_FLOOR) {
            return Err(Error::Uncovered { denominator: s });
        }
        Ok(s)
    }

    /// `chi_j(y)`; exactly 0 when `|y - X_j| >= eps`.
    pub fn eval(&self, j: usize, y: &[f64]) -> Result<f64> {
        let num = self.bump(j, y);
        let s = self.checked_denominator(y)?;
        if num == 0.0 {
            return Ok(0.0);
        }
        Ok(num / s)
    }

    /// All nonzero `(j, chi_j(y))`, ascending in `j`.
    pub fn eval_all(&self, y: &[f64]) -> Result<Vec<(usize, f64)>> {
        let mut act = Vec::new();
        self.active(y, &mut act);
        let vals: Vec<(usize, f64)> = act.iter().map(|&k| (k, self.bump(k, y))).filter(|p| p.1 > 0.0).collect();
        let s: f64 = vals.iter().map(|p| p.1).sum();
        if !(s >= COVERAGE_FLOOR) {
            return Err(Error::Uncovered { denominator: s });
        }
        Ok(vals.into_iter().map(|(k, v)| (k, v / s)).collect())
    }

    fn bump_gradient(&self, k: usize, y: &[f64], out: &mut [f64]) {
        let c = self.center_points.row(k);
        let r = fmath::dist(y, c);
        let dt = theta_derivative(r / self.epsilon);
        for (o, (a, b)) in out.iter_mut().zip(y.iter().zip(c)) {
            *o = if r > 0.0 && dt != 0.0 { dt * (a - b) / (r * self.epsilon) } else { 0.0 };
        }
    }

    /// Gradient of `chi_j` at `y`.
    pub fn gradient(&self, j: usize, y: &[f64]) -> Result<Vec<f64>> {
        let dim = y.len();
        let s = self.checked_denominator(y)?;
        let tj = self.bump(j, y);
        let mut gj = alloc::vec![0.0; dim];
        self.bump_gradient(j, y, &mut gj);
        let mut act = Vec::new();
        self.active(y, &mut act);
        let mut gs = alloc::vec![0.0; dim];
        let mut buf = alloc::vec![0.0; dim];
        for &k in &act {
            self.bump_gradient(k, y, &mut buf);
            for (a, b) in gs.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        Ok(gj.iter().zip(&gs).map(|(a, b)| (a * s - tj * b) / (s * s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_shape() {
        assert_eq!(theta(0.0), 1.0);
        assert_eq!(theta(0.5), 1.0);
        assert_eq!(theta(1.0), 0.0);
        assert!((theta(0.75) - 0.5).abs() < 1e-15);
        for k in 1..100 {
            let t = 0.5 + 0.5 * k as f64 / 100.0;
            let h = 1e-6;
            let fd = (theta(t + h) - theta(t - h)) / (2.0 * h);
            assert!((fd - theta_derivative(t)).abs() < 1e-5, "{t}");
            assert!(theta(t) <= theta(t - 0.001));
        }
    }

    #[test]
    fn single_point() {
        let p = PointSet::from_rows(2, &[&[0.0, 0.0]]).unwrap();
        let pou = build_pou(&p, 1.0).unwrap();
        assert_eq!(pou.len(), 1);
        assert_eq!(pou.eval(0, &[0.3, 0.2]).unwrap(), 1.0);
        assert!(matches!(pou.eval(0, &[1.0, 0.0]), Err(Error::Uncovered { .. })));
    }

    #[test]
    fn far_apart_points() {
        let p = PointSet::from_rows(1, &[&[0.0], &[10.0]]).unwrap();
        let pou = build_pou(&p, 1.0).unwrap();
        assert_eq!(pou.centers, [0, 1]);
        assert_eq!(pou.eval(0, &[0.1]).unwrap(), 1.0);
        assert_eq!(pou.eval(1, &[0.1]).unwrap(), 0.0);
        assert_eq!(pou.eval(1, &[9.6]).unwrap(), 1.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.0314159;
                [fmath::cos(t), fmath::sin(t)]
            })
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| &r[..]).collect();
        let p = PointSet::from_rows(2, &refs).unwrap();
        let pou = build_pou(&p, 0.3).unwrap();
        let y = [fmath::cos(0.51), fmath::sin(0.51) + 0.01];
        let act = pou.eval_all(&y).unwrap();
        assert!((act.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-12);
        for &(j, _) in &act {
            let g = pou.gradient(j, &y).unwrap();
            for q in 0..2 {
                let h = 1e-6;
                let mut a = y;
                let mut b = y;
                a[q] += h;
                b[q] -= h;
                let fd = (pou.eval(j, &a).unwrap() - pou.eval(j, &b).unwrap()) / (2.0 * h);
                assert!((fd - g[q]).abs() < 1e-4, "{fd} {}", g[q]);
            }
        }
    }
}

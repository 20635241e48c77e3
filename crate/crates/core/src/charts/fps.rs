use alloc::vec;
use alloc::vec::Vec;

use crate::fmath;
use crate::numerics::PointSet;

/// Greedy farthest point sampling: start at index 0, repeatedly add the
/// point farthest from the selection (lowest index on ties) until every
/// point is within `r`. The output is `r`-sparse (pairwise distances `> r`)
/// and `r`-covering.
pub fn farthest_point_sampling(points: &PointSet, r: f64) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut selected = vec![0usize];
    let mut mind: Vec<f64> = points.rows().map(|p| fmath::dist(p, points.row(0))).collect();
    loop {
        let mut best = 0usize;
        let mut far = f64::NEG_INFINITY;
        for (i, &v) in mind.iter().enumerate() {
            if v > far {
                far = v;
                best = i;
            }
        }
        if !(far > r) {
            return selected;
        }
        selected.push(best);
        let c = points.row(best);
        for (i, p) in points.rows().enumerate() {
            let dd = fmath::dist(p, c);
            if dd < mind[i] {
                mind[i] = dd;
            }
        }
    }
}

/// Exhaustive check of sparsity and covering; returns the first violation.
pub fn verify_fps(points: &PointSet, selected: &[usize], r: f64) -> Result<(), FpsViolation> {
    for (a, &i) in selected.iter().enumerate() {
        for &j in &selected[a + 1..] {
            let dd = fmath::dist(points.row(i), points.row(j));
            if !(dd > r) {
                return Err(FpsViolation::NotSparse { a: i, b: j, distance: dd });
            }
        }
    }
    for (i, p) in points.rows().enumerate() {
        let near = selected.iter().map(|&j| fmath::dist(p, points.row(j))).fold(f64::INFINITY, f64::min);
        if !(near <= r) {
            return Err(FpsViolation::NotCovering { point: i, distance: near });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum FpsViolation {
    NotSparse { a: usize, b: usize, distance: f64 },
    NotCovering { point: usize, distance: f64 },
}

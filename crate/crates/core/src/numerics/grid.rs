use alloc::vec::Vec;

use super::PointSet;
use crate::fmath;

/// Point counts below this are always searched linearly.
pub const LINEAR_SCAN_BELOW: usize = 256;

const MAX_AXES: usize = 3;

/// Uniform-grid index over up to three coordinate axes (the ones with the
/// widest spread). Query results equal a linear scan with the closed-ball
/// test `|x - c|^2 <= r^2`.
#[derive(Clone, Debug)]
pub struct GridIndex {
    len: usize,
    cell: f64,
    axes: Vec<usize>,
    origin: [f64; MAX_AXES],
    kmin: [i64; MAX_AXES],
    kmax: [i64; MAX_AXES],
    /// `(cell key, point index)` sorted by key then index.
    entries: Vec<([i64; MAX_AXES], u32)>,
}

impl GridIndex {
    /// Builds an index with the given cell size. A non-positive or
    /// non-finite cell, or a small point set, gives a linear-scan index.
    pub fn new(points: &PointSet, cell: f64) -> Self {
        let len = points.len();
        let dim = points.dim();
        let mut lo = alloc::vec![f64::INFINITY; dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; dim];
        for p in points.rows() {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let linear = len < LINEAR_SCAN_BELOW || !(cell > 0.0) || !cell.is_finite();
        if linear {
            return GridIndex {
                len,
                cell: 0.0,
                axes: Vec::new(),
                origin: [0.0; MAX_AXES],
                kmin: [0; MAX_AXES],
                kmax: [0; MAX_AXES],
                entries: Vec::new(),
            };
        }
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| (hi[b] - lo[b]).total_cmp(&(hi[a] - lo[a])).then(a.cmp(&b)));
        order.truncate(MAX_AXES);
        order.sort_unstable();
        let mut origin = [0.0; MAX_AXES];
        for (s, &a) in order.iter().enumerate() {
            origin[s] = lo[a];
        }
        let mut idx = GridIndex {
            len,
            cell,
            axes: order,
            origin,
            kmin: [i64::MAX; MAX_AXES],
            kmax: [i64::MIN; MAX_AXES],
            entries: Vec::with_capacity(len),
        };
        for (i, p) in points.rows().enumerate() {
            let key = idx.key(p);
            for s in 0..MAX_AXES {
                idx.kmin[s] = idx.kmin[s].min(key[s]);
                idx.kmax[s] = idx.kmax[s].max(key[s]);
            }
            idx.entries.push((key, i as u32));
        }
        idx.entries.sort_unstable();
        idx
    }

    fn key(&self, p: &[f64]) -> [i64; MAX_AXES] {
        let mut k = [0i64; MAX_AXES];
        for (s, &a) in self.axes.iter().enumerate() {
            let t = fmath::floor((p[a] - self.origin[s]) / self.cell);
            k[s] = t.clamp(-1e15, 1e15) as i64;
        }
        k
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Indices `i` with `|points[i] - center| <= radius`, ascending. `points`
    /// must be the set the index was built from.
    pub fn query(&self, points: &PointSet, center: &[f64], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        if self.axes.is_empty() {
            linear(points, center, r2, out);
            return;
        }
        let reach = fmath::ceil(radius / self.cell).min(1e12) as i64 + 1;
        let ck = self.key(center);
        let mut lo = [0i64; MAX_AXES];
        let mut hi = [0i64; MAX_AXES];
        let mut cells: f64 = 1.0;
        for s in 0..self.axes.len() {
            lo[s] = ck[s].saturating_sub(reach).max(self.kmin[s]);
            hi[s] = ck[s].saturating_add(reach).min(self.kmax[s]);
            if lo[s] > hi[s] {
                return;
            }
            cells *= (hi[s] - lo[s] + 1) as f64;
        }
        if cells > self.len as f64 {
            linear(points, center, r2, out);
            return;
        }
        let naxes = self.axes.len();
        let last = naxes - 1;
        let mut cur = lo;
        loop {
            let mut start = cur;
            start[last] = lo[last];
            let mut end = cur;
            end[last] = hi[last];
            let from = self.entries.partition_point(|e| e.0 < start);
            for e in &self.entries[from..] {
                if e.0 > end {
                    break;
                }
                let i = e.1 as usize;
                if fmath::dist2(points.row(i), center) <= r2 {
                    out.push(i);
                }
            }
            // advance the outer axes odometer
            let mut s = last;
            loop {
                if s == 0 {
                    out.sort_unstable();
                    return;
                }
                s -= 1;
                if cur[s] < hi[s] {
                    cur[s] += 1;
                    for t in (s + 1)..last {
                        cur[t] = lo[t];
                    }
                    break;
                }
            }
        }
    }
}

fn linear(points: &PointSet, center: &[f64], r2: f64, out: &mut Vec<usize>) {
    for (i, p) in points.rows().enumerate() {
        if fmath::dist2(p, center) <= r2 {
            out.push(i);
        }
    }
}

/// Linear-scan reference for [`range_query`].
pub fn brute_force_query(points: &PointSet, center: &[f64], radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    if radius >= 0.0 {
        linear(points, center, radius * radius, &mut out);
    }
    out
}

/// One-shot closed-ball query on a grid with cell size `radius`.
pub fn range_query(points: &PointSet, center: &[f64], radius: f64) -> Vec<usize> {
    let idx = GridIndex::new(points, radius);
    let mut out = Vec::new();
    idx.query(points, center, radius, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn matches_linear_scan() {
        let mut rng = seeded_rng(3, 0);
        for dim in [1usize, 2, 3, 5] {
            let n = 2000;
            let flat: Vec<f64> = (0..n * dim).map(|_| rng.random::<f64>()).collect();
            let pts = PointSet::from_flat(dim, flat).unwrap();
            for cell in [0.05, 0.2] {
                let idx = GridIndex::new(&pts, cell);
                let mut out = Vec::new();
                for _ in 0..200 {
                    let c: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 1.4 - 0.2).collect();
                    let r = rng.random::<f64>() * 0.3;
                    idx.query(&pts, &c, r, &mut out);
                    assert_eq!(out, brute_force_query(&pts, &c, r));
                }
            }
        }
    }

    #[test]
    fn zero_radius_and_duplicates() {
        let mut flat = Vec::new();
        for i in 0..300 {
            flat.push((i % 100) as f64);
            flat.push(0.0);
        }
        let pts = PointSet::from_flat(2, flat).unwrap();
        let mut out = Vec::new();
        GridIndex::new(&pts, 1.0).query(&pts, pts.row(3), 0.0, &mut out);
        assert_eq!(out, alloc::vec![3, 103, 203]);
        assert_eq!(range_query(&pts, pts.row(3), 1e6).len(), 300);
    }
}

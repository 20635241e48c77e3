//! Farthest point sampling and local polynomial charts.
//!
//! Around a center `X_i` the neighbors `x_j = X_j - X_i`, `|x_j| <= eps`,
//! are fitted by `x ~ B u + sum_k V_k[u^k]` with `u = B^T x`, an orthonormal
//! basis `B` of the estimated tangent space and normal-valued symmetric
//! tensors `V_2..V_{m-1}`. The objective is
//! `(1/(n-1)) sum_j |x_j - B B^T x_j - sum_k V_k[(B^T x_j)^k]|^2`.

mod diagnostics;
mod fps;

pub use diagnostics::{diagnostics, ChartDiagnostics, DiagnosticsReport};
pub use fps::{farthest_point_sampling, verify_fps, FpsViolation};

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::fmath;
use crate::numerics::{multi_indices, multinomial, GridIndex, PointSet, Projector, SymTensor};

/// Relative eigengap below which the PCA is flagged as ill-conditioned.
pub const EIGENGAP_TOL: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChartParams {
    /// Intrinsic dimension.
    pub d: usize,
    /// Order: tensors `V_2..V_{m-1}` are fitted.
    pub m: usize,
    pub epsilon: f64,
    /// Cap on the Frobenius norm of each tensor.
    pub ell: f64,
    pub max_iter: usize,
    /// Stop when the relative objective decrease falls below this.
    pub rel_tol: f64,
}

impl ChartParams {
    pub fn new(d: usize, m: usize, epsilon: f64, ell: f64) -> Self {
        ChartParams { d, m, epsilon, ell, max_iter: 200, rel_tol: 1e-10 }
    }

    fn validate(&self, ambient: usize) -> Result<()> {
        if self.d == 0 || self.d >= ambient {
            return Err(Error::invalid("d", "must satisfy 1 <= d < ambient dimension"));
        }
        if self.m < 2 {
            return Err(Error::invalid("m", "chart order must be at least 2"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        if !(self.ell > 0.0) {
            return Err(Error::invalid("ell", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Chart {
    pub center_index: usize,
    pub center: Vec<f64>,
    pub projector: Projector,
    /// `V_2, .., V_{m-1}` acting on chart coordinates.
    pub tensors: Vec<SymTensor>,
    pub epsilon: f64,
    pub ell: f64,
    pub objective: f64,
    /// Objective after initialization and after each accepted iteration.
    pub trace: Vec<f64>,
    pub neighbors: usize,
    pub warnings: Vec<String>,
}

/// Output of [`chart_eval`].
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub point: Vec<f64>,
    /// Row-major `D x d`.
    pub differential: Vec<f64>,
    pub jacobian: f64,
}

/// Columns: tensor features `multinomial(alpha) (u/eps)^alpha` for
/// `|alpha| = 2..m-1`.
struct Features {
    d: usize,
    orders: Vec<usize>,
    alphas: Vec<Vec<u32>>,
    mult: Vec<f64>,
    eps: f64,
}

impl Features {
    fn new(d: usize, m: usize, eps: f64) -> Self {
        let mut orders = Vec::new();
        let mut alphas = Vec::new();
        let mut mult = Vec::new();
        for k in 2..m {
            for a in multi_indices(d, k).chunks_exact(d) {
                orders.push(k);
                mult.push(multinomial(a));
                alphas.push(a.to_vec());
            }
        }
        Features { d, orders, alphas, mult, eps }
    }

    fn len(&self) -> usize {
        self.alphas.len()
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        for (f, (a, m)) in self.alphas.iter().zip(&self.mult).enumerate() {
            let mut v = *m;
            for (ui, &ai) in u.iter().zip(a) {
                v *= fmath::powi(ui / self.eps, ai as i32);
            }
            out[f] = v;
        }
    }

    /// Row-major `len x d`.
    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        for (f, (a, m)) in self.alphas.iter().zip(&self.mult).enumerate() {
            for q in 0..self.d {
                if a[q] == 0 {
                    out[f * self.d + q] = 0.0;
                    continue;
                }
                let mut v = m * a[q] as f64 / self.eps;
                for (i, (ui, &ai)) in u.iter().zip(a).enumerate() {
                    let e = if i == q { ai - 1 } else { ai };
                    v *= fmath::powi(ui / self.eps, e as i32);
                }
                out[f * self.d + q] = v;
            }
        }
    }

    fn matrix(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let n = u.ncols();
        let mut phi = DMatrix::zeros(self.len(), n);
        let mut buf = vec![0.0; self.len()];
        for j in 0..n {
            let col: Vec<f64> = u.column(j).iter().copied().collect();
            self.eval(&col, &mut buf);
            for (f, b) in buf.iter().enumerate() {
                phi[(f, j)] = *b;
            }
        }
        phi
    }

    /// Frobenius norms of each tensor order given scaled coefficients.
    fn cap(&self, c: &mut DMatrix<f64>, ell: f64) {
        let mut k = 2;
        loop {
            let idx: Vec<usize> = (0..self.len()).filter(|&f| self.orders[f] == k).collect();
            if idx.is_empty() {
                break;
            }
            let ek = fmath::powi(self.eps, -(k as i32));
            let fro2: f64 = idx.iter().map(|&f| self.mult[f] * c.column(f).norm_squared() * ek * ek).sum();
            let fro = fmath::sqrt(fro2);
            if fro > ell {
                let s = ell / fro;
                for &f in &idx {
                    for v in c.column_mut(f).iter_mut() {
                        *v *= s;
                    }
                }
            }
            k += 1;
        }
    }
}

struct Problem<'a> {
    x: DMatrix<f64>,
    feats: &'a Features,
    norm: f64,
}

impl Problem<'_> {
    fn residual(&self, b: &DMatrix<f64>, c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let u = b.transpose() * &self.x;
        let mut r = &self.x - b * &u;
        if self.feats.len() > 0 {
            r -= c * self.feats.matrix(&u);
        }
        (r, u)
    }

    fn objective(&self, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
        self.residual(b, c).0.norm_squared() / self.norm
    }

    /// Least-squares tensor coefficients at fixed `b`, capped; the better of
    /// that and the projected previous coefficients is returned.
    fn fit_tensors(&self, b: &DMatrix<f64>, prev: Option<&DMatrix<f64>>, ell: f64) -> DMatrix<f64> {
        let dd = self.x.nrows();
        let u = b.transpose() * &self.x;
        let phi = self.feats.matrix(&u);
        let y = &self.x - b * &u;
        let gram = &phi * phi.transpose();
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut inv = DMatrix::zeros(self.feats.len(), self.feats.len());
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 1e-12 * lmax && l > 0.0 {
                let v = eig.eigenvectors.column(k);
                inv += (v * v.transpose()) / l;
            }
        }
        let mut c = (&y * phi.transpose()) * inv;
        project_normal(b, &mut c);
        self.feats.cap(&mut c, ell);
        if let Some(p) = prev {
            let mut q = p.clone();
            project_normal(b, &mut q);
            self.feats.cap(&mut q, ell);
            if self.objective(b, &q) < self.objective(b, &c) {
                return q;
            }
        }
        debug_assert_eq!(c.nrows(), dd);
        c
    }

    fn gradient(&self, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
        let (r, u) = self.residual(b, c);
        let d = b.ncols();
        let nf = self.feats.len();
        // sum_j r_j u_j^T + x_j (B^T r_j + J_j^T C^T r_j)^T
        let mut g = &r * u.transpose();
        let btr = b.transpose() * &r;
        let mut w = btr;
        if nf > 0 {
            let ctr = c.transpose() * &r;
            let mut jac = vec![0.0; nf * d];
            for j in 0..self.x.ncols() {
                let col: Vec<f64> = u.column(j).iter().copied().collect();
                self.feats.jacobian(&col, &mut jac);
                for q in 0..d {
                    let mut s = 0.0;
                    for f in 0..nf {
                        s += jac[f * d + q] * ctr[(f, j)];
                    }
                    w[(q, j)] += s;
                }
            }
        }
        g += &self.x * w.transpose();
        g * (-2.0 / self.norm)
    }
}

fn project_normal(b: &DMatrix<f64>, c: &mut DMatrix<f64>) {
    if c.ncols() == 0 {
        return;
    }
    let t = b * (b.transpose() * &*c);
    *c -= t;
}

/// QR retraction with a positive diagonal in `R`.
fn retract(a: DMatrix<f64>) -> DMatrix<f64> {
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            for v in q.column_mut(j).iter_mut() {
                *v = -*v;
            }
        }
    }
    q
}

/// Indices `j != i` with `|X_j - X_i| <= eps`.
pub fn neighborhood(points: &PointSet, grid: &GridIndex, i: usize, eps: f64) -> Vec<usize> {
    let mut out = Vec::new();
    grid.query(points, points.row(i), eps, &mut out);
    out.retain(|&j| j != i);
    out
}

/// Fits the chart at center `i`. `grid` must index `points`.
pub fn fit_chart(points: &PointSet, grid: &GridIndex, i: usize, params: &ChartParams) -> Result<Chart> {
    let dd = points.dim();
    params.validate(dd)?;
    let d = params.d;
    let nb = neighborhood(points, grid, i, params.epsilon);
    if nb.len() < d + 1 {
        return Err(Error::DegenerateNeighborhood { center: i, found: nb.len(), required: d + 1 });
    }
    let center = points.row(i).to_vec();
    let x = DMatrix::from_fn(dd, nb.len(), |r, c| points.row(nb[c])[r] - center[r]);
    let norm = (points.len().max(2) - 1) as f64;
    let feats = Features::new(d, params.m, params.epsilon);
    let prob = Problem { x, feats: &feats, norm };
    let mut warnings = Vec::new();

    // PCA on the second-moment matrix of the neighbors around the center
    let s = &prob.x * prob.x.transpose();
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..dd).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lmax = eig.eigenvalues[order[0]].max(0.0);
    let gap = eig.eigenvalues[order[d - 1]] - eig.eigenvalues[order[d]];
    if !(gap > EIGENGAP_TOL * lmax) {
        warnings.push(alloc::format!("ill-conditioned PCA: eigengap {gap:e}"));
    }
    let mut b = DMatrix::from_fn(dd, d, |r, c| eig.eigenvectors[(r, order[c])]);
    b = retract(b);

    let mut c = if feats.len() > 0 { prob.fit_tensors(&b, None, params.ell) } else { DMatrix::zeros(dd, 0) };
    let mut obj = prob.objective(&b, &c);
    let mut trace = vec![obj];
    for _ in 0..params.max_iter {
        let g = prob.gradient(&b, &c);
        let xi = &g - &b * (b.transpose() * &g);
        let xn2 = xi.norm_squared();
        if !(xn2 > 0.0) {
            break;
        }
        let mut t = 0.1 / fmath::sqrt(xn2);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = retract(&b - &xi * t);
            let val = prob.objective(&cand, &c);
            if val <= obj - ARMIJO * t * xn2 {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(nb_) = accepted else { break };
        let nc = if feats.len() > 0 { prob.fit_tensors(&nb_, Some(&c), params.ell) } else { c.clone() };
        let nobj = prob.objective(&nb_, &nc);
        if !(nobj <= obj) {
            break;
        }
        let dec = obj - nobj;
        b = nb_;
        c = nc;
        obj = nobj;
        trace.push(obj);
        if dec <= params.rel_tol * obj.max(f64::MIN_POSITIVE) {
            break;
        }
    }

    let mut tensors = Vec::new();
    let mut f0 = 0;
    for k in 2..params.m {
        let mut t = SymTensor::zeros(k, d, dd)?;
        for a in 0..t.num_indices() {
            let scale = fmath::powi(params.epsilon, -(k as i32));
            let col = c.column(f0 + a);
            for (o, v) in t.coeff_mut(a).iter_mut().zip(col.iter()) {
                *o = v * scale;
            }
        }
        f0 += t.num_indices();
        tensors.push(t);
    }
    Ok(Chart {
        center_index: i,
        center,
        projector: Projector::from_orthonormal(b),
        tensors,
        epsilon: params.epsilon,
        ell: params.ell,
        objective: obj,
        trace,
        neighbors: nb.len(),
        warnings,
    })
}

/// Fits a chart at every center. Results are in center order and do not
/// depend on the executor.
pub fn fit_charts<E: Executor>(
    points: &PointSet,
    centers: &[usize],
    params: &ChartParams,
    exec: &E,
) -> Result<Vec<Chart>> {
    let grid = GridIndex::new(points, params.epsilon);
    exec.map(centers.len(), |c| fit_chart(points, &grid, centers[c], params)).into_iter().collect()
}

/// Evaluates `Psi(v) = X + B v + sum_k V_k[v^k]`, its differential and its
/// Jacobian `sqrt(det(dPsi^T dPsi))`. Requires `|v| <= 3 eps`.
pub fn chart_eval(chart: &Chart, v: &[f64]) -> Result<ChartPoint> {
    let d = chart.projector.rank();
    let dd = chart.projector.ambient_dim();
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.len() });
    }
    let nv = fmath::norm(v);
    let limit = 3.0 * chart.epsilon;
    if !(nv <= limit) {
        return Err(Error::OutOfRegime { norm: nv, limit });
    }
    let mut point = chart.center.clone();
    let mut diff = vec![0.0; dd * d];
    for k in 0..d {
        let col = chart.projector.basis_column(k);
        for r in 0..dd {
            point[r] += col[r] * v[k];
            diff[r * d + k] = col[r];
        }
    }
    for t in &chart.tensors {
        t.eval_add(v, &mut point);
        t.differential_add(v, &mut diff);
    }
    let jacobian = jacobian_of(&diff, dd, d);
    Ok(ChartPoint { point, differential: diff, jacobian })
}

/// `sqrt(det(A^T A))` for a row-major `rows x cols` matrix.
pub fn jacobian_of(a: &[f64], rows: usize, cols: usize) -> f64 {
    let m = DMatrix::from_row_slice(rows, cols, a);
    if cols == 1 {
        return m.norm();
    }
    let g = m.transpose() * &m;
    fmath::sqrt(g.determinant().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn circle(n: usize) -> PointSet {
        let mut p = PointSet::new(2);
        for j in 0..n {
            let t = 2.0 * core::f64::consts::PI * j as f64 / n as f64;
            p.push(&[fmath::cos(t), fmath::sin(t)]);
        }
        p
    }

    #[test]
    fn planar_data_is_exact() {
        let mut rng = seeded_rng(1, 0);
        let mut p = PointSet::new(3);
        for _ in 0..300 {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            p.push(&[a, 2.0 * b - a, 0.5 * a + b]);
        }
        let grid = GridIndex::new(&p, 0.3);
        let ch = fit_chart(&p, &grid, 0, &ChartParams::new(2, 2, 0.3, 10.0)).unwrap();
        assert!(ch.objective <= 1e-16);
        let v1 = [1.0, -1.0, 0.5];
        let v2 = [0.0, 2.0, 1.0];
        let basis = DMatrix::from_column_slice(3, 2, &[v1, v2].concat()).qr().q();
        let truth = Projector::new(basis).unwrap();
        assert!(crate::numerics::subspace_angle(&ch.projector, &truth).unwrap() <= 1e-8);
    }

    #[test]
    fn circle_curvature_recovered() {
        let p = circle(4000);
        let grid = GridIndex::new(&p, 0.2);
        let ch = fit_chart(&p, &grid, 0, &ChartParams::new(1, 3, 0.2, 5.0)).unwrap();
        let v2 = ch.tensors[0].eval(&[1.0]);
        // normal direction at angle 0 is -e_1 (inward)
        assert!((fmath::norm(&v2) - 0.5).abs() < 0.05, "{v2:?}");
        assert!(v2[0] < 0.0);
        let tr = &ch.trace;
        assert!(tr.windows(2).all(|w| w[1] <= w[0]));
        let bt = crate::fmath::dot(ch.projector.basis_column(0), &v2);
        assert!(bt.abs() < 1e-10);
    }

    #[test]
    fn degenerate_neighborhood() {
        let p = circle(10);
        let grid = GridIndex::new(&p, 0.01);
        let e = fit_chart(&p, &grid, 0, &ChartParams::new(1, 2, 0.01, 1.0)).unwrap_err();
        assert!(matches!(e, Error::DegenerateNeighborhood { found: 0, .. }));
    }

    #[test]
    fn eval_at_origin_and_regime() {
        let p = circle(2000);
        let grid = GridIndex::new(&p, 0.3);
        let ch = fit_chart(&p, &grid, 5, &ChartParams::new(1, 4, 0.3, 10.0)).unwrap();
        let e = chart_eval(&ch, &[0.0]).unwrap();
        assert_eq!(e.point, ch.center);
        assert!((e.jacobian - 1.0).abs() < 1e-12);
        assert!(chart_eval(&ch, &[0.95]).is_err());
    }
}

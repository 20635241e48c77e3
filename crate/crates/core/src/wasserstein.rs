//! Exact Wasserstein distances between finite weighted measures.
//!
//! [`wasserstein`] solves the transportation problem with a primal network
//! simplex (block pricing, strongly feasible leaving-arc rule, artificial
//! root). The dual potentials give a certificate: for unit masses,
//! `primal - dual + max dual violation` bounds the suboptimality.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::measure::WeightedMeasure;
use crate::numerics::PointSet;

/// Largest `source x target` product accepted by default.
pub const DEFAULT_MAX_ENTRIES: usize = 40_000_000;
/// Mass agreement required between the two measures.
pub const MASS_TOL: f64 = 1e-9;
/// Relative certificate tolerance, `gap <= tol (1 + cost)`.
pub const GAP_TOL: f64 = 1e-9;
const COLLINEAR_TOL: f64 = 1e-10;
const MAX_PIVOTS: u64 = 2_000_000_000;
const ASSIGNMENT_MAX: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportProblem<'a> {
    pub source: &'a WeightedMeasure,
    pub target: &'a WeightedMeasure,
    /// 1 or 2.
    pub p: u32,
    pub max_entries: usize,
}

impl<'a> TransportProblem<'a> {
    pub fn new(source: &'a WeightedMeasure, target: &'a WeightedMeasure, p: u32) -> Self {
        TransportProblem { source, target, p, max_entries: DEFAULT_MAX_ENTRIES }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransportReport {
    pub distance: f64,
    /// Optimal `sum pi_ij |x_i - y_j|^p`.
    pub cost: f64,
    pub dual: f64,
    /// `|cost - dual|`.
    pub gap: f64,
    /// Largest negative reduced cost over all arcs.
    pub dual_violation: f64,
    pub pivots: u64,
    pub source_len: usize,
    pub target_len: usize,
}

/// Positive-weight atoms rescaled to unit mass.
struct Prepared {
    points: PointSet,
    weights: Vec<f64>,
}

fn prepare(m: &WeightedMeasure) -> Result<Prepared> {
    if let Some((i, &w)) = m.weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::NegativeWeight { index: i, value: w });
    }
    if !(m.mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let mut points = PointSet::new(m.dim());
    let mut weights = Vec::new();
    for (i, &w) in m.weights.iter().enumerate() {
        if w > 0.0 {
            points.push(m.support.row(i));
            weights.push(w / m.mass);
        }
    }
    Ok(Prepared { points, weights })
}

fn check_pair(p: &TransportProblem) -> Result<(Prepared, Prepared)> {
    if p.p != 1 && p.p != 2 {
        return Err(Error::invalid("p", "exponent must be 1 or 2"));
    }
    if p.source.dim() != p.target.dim() {
        return Err(Error::DimensionMismatch { expected: p.source.dim(), found: p.target.dim() });
    }
    if !(((p.source.mass - p.target.mass).abs()) <= MASS_TOL * p.source.mass.abs().max(1.0)) {
        return Err(Error::MassMismatch { source_mass: p.source.mass, target_mass: p.target.mass });
    }
    Ok((prepare(p.source)?, prepare(p.target)?))
}

#[inline]
fn ground_cost(x: &[f64], y: &[f64], p: u32) -> f64 {
    let d2 = fmath::dist2(x, y);
    if p == 2 {
        d2
    } else {
        fmath::sqrt(d2)
    }
}

fn root_p(cost: f64, p: u32) -> f64 {
    let c = cost.max(0.0);
    if p == 2 {
        fmath::sqrt(c)
    } else {
        c
    }
}

/// `W_p` by network simplex, with its optimality certificate.
pub fn wasserstein_report(problem: &TransportProblem) -> Result<TransportReport> {
    let (a, b) = check_pair(problem)?;
    let entries = a.weights.len().saturating_mul(b.weights.len());
    if entries > problem.max_entries {
        return Err(Error::ProblemTooLarge { entries, cap: problem.max_entries });
    }
    let mut ns = NetworkSimplex::new(&a, &b, problem.p);
    ns.run()?;
    let rep = ns.report(problem.p);
    let tol = GAP_TOL * (1.0 + rep.cost.abs());
    if !(rep.gap + rep.dual_violation <= tol) {
        return Err(Error::Certification { what: "transport duality gap".into(), value: rep.gap + rep.dual_violation, tol });
    }
    Ok(rep)
}

/// `W_p(source, target)`.
pub fn wasserstein(problem: &TransportProblem) -> Result<f64> {
    Ok(wasserstein_report(problem)?.distance)
}

const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;

/// Transportation network: sources `0..n1`, targets `n1..n1+n2`, root
/// `n1+n2`; arc `i*n2 + j` joins source `i` to target `j`, arc `m + u` is
/// the artificial arc of node `u`. Every arc is uncapacitated, so only tree
/// arcs carry flow, stored per child node.
struct NetworkSimplex<'a> {
    xs: &'a PointSet,
    ys: &'a PointSet,
    n1: usize,
    n2: usize,
    m: usize,
    node_num: usize,
    root: usize,
    p: u32,
    cost_table: Option<Vec<f64>>,
    art_cost: f64,
    art_up: Vec<bool>,
    supply: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    pred_dir: Vec<i8>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pi: Vec<f64>,
    /// Flow on `pred[u]`.
    flow: Vec<f64>,
    dirty_revs: Vec<usize>,
    next_arc: usize,
    block_size: usize,
    eps: f64,
    pivots: u64,
    // pivot state
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: f64,
}

const NONE: usize = usize::MAX;

impl<'a> NetworkSimplex<'a> {
    fn new(a: &'a Prepared, b: &'a Prepared, p: u32) -> Self {
        let n1 = a.weights.len();
        let n2 = b.weights.len();
        let m = n1 * n2;
        let node_num = n1 + n2;
        let root = node_num;
        let cost_table = if m <= 8_000_000 {
            let mut t = Vec::with_capacity(m);
            for i in 0..n1 {
                let x = a.points.row(i);
                for j in 0..n2 {
                    t.push(ground_cost(x, b.points.row(j), p));
                }
            }
            Some(t)
        } else {
            None
        };
        let mut max_cost: f64 = 0.0;
        match &cost_table {
            Some(t) => t.iter().for_each(|c| max_cost = max_cost.max(*c)),
            None => {
                for i in 0..n1 {
                    for j in 0..n2 {
                        max_cost = max_cost.max(ground_cost(a.points.row(i), b.points.row(j), p));
                    }
                }
            }
        }
        let mut supply = Vec::with_capacity(node_num + 1);
        supply.extend_from_slice(&a.weights);
        supply.extend(b.weights.iter().map(|w| -w));
        // absorb rounding so that supplies balance
        let total: f64 = supply.iter().sum();
        if let Some(k) = (n1..node_num).rev().find(|&k| supply[k] - total <= 0.0) {
            supply[k] -= total;
        }
        let sum_supply: f64 = supply.iter().sum();
        supply.push(-sum_supply);
        let art_cost = (max_cost + 1.0) * node_num as f64;
        let block_size = (fmath::ceil(fmath::sqrt(m as f64)) as usize).max(10);
        let mut ns = NetworkSimplex {
            xs: &a.points,
            ys: &b.points,
            n1,
            n2,
            m,
            node_num,
            root,
            p,
            cost_table,
            art_cost,
            art_up: vec![true; node_num],
            supply,
            in_tree: vec![false; m],
            parent: vec![NONE; node_num + 1],
            pred: vec![NONE; node_num + 1],
            pred_dir: vec![DIR_UP; node_num + 1],
            thread: vec![0; node_num + 1],
            rev_thread: vec![0; node_num + 1],
            succ_num: vec![1; node_num + 1],
            last_succ: vec![0; node_num + 1],
            pi: vec![0.0; node_num + 1],
            flow: vec![0.0; node_num + 1],
            dirty_revs: Vec::new(),
            next_arc: 0,
            block_size,
            eps: 1e-13 * (1.0 + max_cost),
            pivots: 0,
            in_arc: NONE,
            join: NONE,
            u_in: NONE,
            v_in: NONE,
            u_out: NONE,
            delta: 0.0,
        };
        ns.init_tree();
        ns
    }

    fn init_tree(&mut self) {
        let root = self.root;
        for u in 0..self.node_num {
            self.parent[u] = root;
            self.pred[u] = self.m + u;
            self.thread[u] = u + 1;
            self.rev_thread[u + 1] = u;
            self.succ_num[u] = 1;
            self.last_succ[u] = u;
            if self.supply[u] >= 0.0 {
                self.pred_dir[u] = DIR_UP;
                self.art_up[u] = true;
                self.pi[u] = 0.0;
                self.flow[u] = self.supply[u];
            } else {
                self.pred_dir[u] = DIR_DOWN;
                self.art_up[u] = false;
                self.pi[u] = self.art_cost;
                self.flow[u] = -self.supply[u];
            }
        }
        self.parent[root] = NONE;
        self.pred[root] = NONE;
        self.thread[root] = 0;
        self.rev_thread[0] = root;
        self.succ_num[root] = self.node_num + 1;
        self.last_succ[root] = root - 1;
        self.pi[root] = 0.0;
    }

    #[inline]
    fn source(&self, e: usize) -> usize {
        if e < self.m {
            e / self.n2
        } else {
            let u = e - self.m;
            if self.art_up[u] {
                u
            } else {
                self.root
            }
        }
    }

    #[inline]
    fn target(&self, e: usize) -> usize {
        if e < self.m {
            self.n1 + e % self.n2
        } else {
            let u = e - self.m;
            if self.art_up[u] {
                self.root
            } else {
                u
            }
        }
    }

    #[inline]
    fn cost(&self, e: usize) -> f64 {
        if e < self.m {
            match &self.cost_table {
                Some(t) => t[e],
                None => ground_cost(self.xs.row(e / self.n2), self.ys.row(e % self.n2), self.p),
            }
        } else if self.art_up[e - self.m] {
            0.0
        } else {
            self.art_cost
        }
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        let i = e / self.n2;
        let j = self.n1 + e % self.n2;
        self.cost(e) + self.pi[i] - self.pi[j]
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.eps;
        let mut cnt = self.block_size;
        let mut best = NONE;
        let mut e = self.next_arc;
        for _ in 0..self.m {
            if !self.in_tree[e] {
                let c = self.reduced(e);
                if c < min {
                    min = c;
                    best = e;
                }
            }
            e += 1;
            if e == self.m {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if best != NONE {
                    break;
                }
                cnt = self.block_size;
            }
        }
        if best == NONE {
            return false;
        }
        self.in_arc = best;
        self.next_arc = e;
        true
    }

    fn find_join_node(&mut self) {
        let mut u = self.source(self.in_arc);
        let mut v = self.target(self.in_arc);
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    /// Strongly feasible rule; entering arcs always come from the lower
    /// bound, so flow is pushed from source to target along `in_arc`.
    fn find_leaving_arc(&mut self) -> bool {
        let first = self.source(self.in_arc);
        let second = self.target(self.in_arc);
        let mut delta = f64::INFINITY;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            if self.pred_dir[u] == DIR_UP && self.flow[u] < delta {
                delta = self.flow[u];
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            if self.pred_dir[u] == DIR_DOWN && self.flow[u] <= delta {
                delta = self.flow[u];
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        self.delta = delta;
        result != 0
    }

    /// Pushes `delta` around the cycle; returns the entering arc's flow.
    fn change_flow(&mut self) -> f64 {
        let val = self.delta;
        if val > 0.0 {
            let mut u = self.source(self.in_arc);
            while u != self.join {
                self.flow[u] -= self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
            let mut u = self.target(self.in_arc);
            while u != self.join {
                self.flow[u] += self.pred_dir[u] as f64 * val;
                u = self.parent[u];
            }
        }
        self.flow[self.u_out] = 0.0;
        self.in_tree[self.in_arc] = true;
        let out = self.pred[self.u_out];
        if out < self.m {
            self.in_tree[out] = false;
        }
        val
    }

    fn update_tree_structure(&mut self, in_flow: f64) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let in_arc = self.in_arc;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];
        let in_dir = if u_in == self.source(in_arc) { DIR_UP } else { DIR_DOWN };

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.flow[u_in] = in_flow;
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;
            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }
            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }
            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                self.flow[u] = self.flow[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = in_arc;
            self.pred_dir[u_in] = in_dir;
            self.flow[u_in] = in_flow;
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }
        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }
        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] as f64 * self.cost(self.in_arc);
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }

    fn run(&mut self) -> Result<()> {
        while self.find_entering_arc() {
            self.pivots += 1;
            if self.pivots > MAX_PIVOTS {
                return Err(Error::SolverStalled { pivots: self.pivots as usize });
            }
            self.find_join_node();
            if !self.find_leaving_arc() {
                return Err(Error::Unsupported("unbounded transport problem".into()));
            }
            let f = self.change_flow();
            self.update_tree_structure(f);
            self.update_potential();
        }
        Ok(())
    }

    fn report(&self, p: u32) -> TransportReport {
        let mut cost = 0.0;
        for u in 0..self.node_num {
            let e = self.pred[u];
            if e < self.m && self.flow[u] > 0.0 {
                cost += self.flow[u] * self.cost(e);
            }
        }
        // shift potentials so that magnitudes stay near the cost scale
        let shift = self.pi[0];
        let pi = |u: usize| self.pi[u] - shift;
        let mut dual = 0.0;
        for u in 0..self.node_num {
            dual -= self.supply[u] * pi(u);
        }
        let mut viol: f64 = 0.0;
        for e in 0..self.m {
            let i = e / self.n2;
            let j = self.n1 + e % self.n2;
            let r = self.cost(e) + pi(i) - pi(j);
            viol = viol.max(-r);
        }
        TransportReport {
            distance: root_p(cost, p),
            cost,
            dual,
            gap: (cost - dual).abs(),
            dual_violation: viol,
            pivots: self.pivots,
            source_len: self.n1,
            target_len: self.n2,
        }
    }
}

/// Projection onto the best line through the points, or an error if some
/// point is farther than `1e-10 (1 + diameter)` from it.
fn line_coordinates(a: &PointSet, b: &PointSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = a.dim();
    let all: Vec<&[f64]> = a.rows().chain(b.rows()).collect();
    if all.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let o = all[0];
    let far = all.iter().copied().max_by(|x, y| fmath::dist2(x, o).total_cmp(&fmath::dist2(y, o))).unwrap_or(o);
    let len = fmath::dist(far, o);
    let dir: Vec<f64> = if len > 0.0 {
        far.iter().zip(o).map(|(f, z)| (f - z) / len).collect()
    } else {
        let mut v = vec![0.0; dim];
        if dim > 0 {
            v[0] = 1.0;
        }
        v
    };
    let tol = COLLINEAR_TOL * (1.0 + 2.0 * len);
    let mut residual: f64 = 0.0;
    let mut coord = |x: &[f64]| {
        let rel: Vec<f64> = x.iter().zip(o).map(|(a, b)| a - b).collect();
        let t = fmath::dot(&rel, &dir);
        let r2: f64 = rel.iter().zip(&dir).map(|(r, d)| (r - t * d) * (r - t * d)).sum();
        residual = residual.max(fmath::sqrt(r2));
        t
    };
    let ta: Vec<f64> = a.rows().map(&mut coord).collect();
    let tb: Vec<f64> = b.rows().map(&mut coord).collect();
    if residual > tol {
        return Err(Error::NotCollinear { residual });
    }
    Ok((ta, tb))
}

/// `W_p` for collinear supports by the monotone quantile coupling.
pub fn wasserstein_1d(problem: &TransportProblem) -> Result<f64> {
    let (a, b) = check_pair(problem)?;
    let (ta, tb) = line_coordinates(&a.points, &b.points)?;
    let mut ia: Vec<usize> = (0..ta.len()).collect();
    let mut ib: Vec<usize> = (0..tb.len()).collect();
    ia.sort_by(|&x, &y| ta[x].total_cmp(&ta[y]));
    ib.sort_by(|&x, &y| tb[x].total_cmp(&tb[y]));
    let (mut i, mut j) = (0, 0);
    let mut ra = a.weights[ia[0]];
    let mut rb = b.weights[ib[0]];
    let mut cost = 0.0;
    while i < ia.len() && j < ib.len() {
        let m = ra.min(rb);
        let gap = (ta[ia[i]] - tb[ib[j]]).abs();
        cost += m * if problem.p == 2 { gap * gap } else { gap };
        ra -= m;
        rb -= m;
        if ra <= 0.0 {
            i += 1;
            if i < ia.len() {
                ra = a.weights[ia[i]];
            }
        }
        if rb <= 0.0 {
            j += 1;
            if j < ib.len() {
                rb = b.weights[ib[j]];
            }
        }
    }
    Ok(root_p(cost, problem.p))
}

/// A measure binned on the lattice of cubes of side `cell`, each bin
/// replaced by its barycenter.
#[derive(Clone, Debug, PartialEq)]
pub struct Coarsened {
    pub measure: WeightedMeasure,
    pub cell: f64,
    /// Bound on the distance any unit of mass was moved: `cell sqrt(D)`.
    pub displacement: f64,
}

/// Bins `m` on cubes of side `cell`. Bins are ordered by lattice key.
pub fn coarsen(m: &WeightedMeasure, cell: f64) -> Result<Coarsened> {
    if !(cell > 0.0) || !cell.is_finite() {
        return Err(Error::invalid("cell", "must be positive"));
    }
    let dim = m.dim();
    let mut bins: alloc::collections::BTreeMap<Vec<i64>, (f64, Vec<f64>)> = alloc::collections::BTreeMap::new();
    for (x, &w) in m.support.rows().zip(&m.weights) {
        if w == 0.0 {
            continue;
        }
        let key: Vec<i64> = x.iter().map(|c| fmath::floor(c / cell) as i64).collect();
        let e = bins.entry(key).or_insert_with(|| (0.0, vec![0.0; dim]));
        e.0 += w;
        for (a, c) in e.1.iter_mut().zip(x) {
            *a += w * c;
        }
    }
    let mut support = PointSet::with_capacity(dim, bins.len());
    let mut weights = Vec::with_capacity(bins.len());
    for (key, (w, sx)) in bins {
        // barycenters of signed or vanishing bins fall back to the cell center
        let p: Vec<f64> = if w > 0.0 {
            sx.iter().map(|s| s / w).collect()
        } else {
            key.iter().map(|&k| (k as f64 + 0.5) * cell).collect()
        };
        support.push(&p);
        weights.push(w);
    }
    let measure = WeightedMeasure::new(support, weights)?;
    Ok(Coarsened { measure, cell, displacement: cell * fmath::sqrt(dim as f64) })
}

/// Smallest cell of the form `start * 2^(k/4)` for which both binned
/// measures have at most `max_atoms` atoms; `start` itself when the raw
/// measures are already small enough (no binning).
pub fn coarsen_pair(
    a: &WeightedMeasure,
    b: &WeightedMeasure,
    start: f64,
    max_atoms: usize,
) -> Result<(Coarsened, Coarsened)> {
    if a.len() <= max_atoms && b.len() <= max_atoms {
        let id = |m: &WeightedMeasure| Coarsened { measure: m.without_zeros(), cell: 0.0, displacement: 0.0 };
        return Ok((id(a), id(b)));
    }
    let mut cell = start;
    for _ in 0..400 {
        let ca = coarsen(a, cell)?;
        if ca.measure.len() <= max_atoms {
            let cb = coarsen(b, cell)?;
            if cb.measure.len() <= max_atoms {
                return Ok((ca, cb));
            }
        }
        cell *= fmath::powf(2.0, 0.25);
    }
    Err(Error::ProblemTooLarge { entries: a.len().max(b.len()), cap: max_atoms })
}

fn uniform_len(m: &WeightedMeasure) -> Result<usize> {
    let n = m.len();
    if n == 0 {
        return Err(Error::ZeroMass);
    }
    let w = m.mass / n as f64;
    if m.weights.iter().any(|x| (x - w).abs() > 1e-12 * w.abs().max(1e-300)) {
        return Err(Error::NonUniformWeights);
    }
    Ok(n)
}

/// `W_p` between uniform measures of equal size `N <= 64` by the
/// Hungarian algorithm.
pub fn assignment_oracle(source: &WeightedMeasure, target: &WeightedMeasure, p: u32) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::invalid("p", "exponent must be 1 or 2"));
    }
    let n = uniform_len(source)?;
    let n2 = uniform_len(target)?;
    if n != n2 {
        return Err(Error::DimensionMismatch { expected: n, found: n2 });
    }
    if n > ASSIGNMENT_MAX {
        return Err(Error::ProblemTooLarge { entries: n * n, cap: ASSIGNMENT_MAX * ASSIGNMENT_MAX });
    }
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: source.dim(), found: target.dim() });
    }
    let c = |i: usize, j: usize| ground_cost(source.support.row(i), target.support.row(j), p);
    let assign = hungarian(n, c);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| c(i, j)).sum();
    Ok(root_p(total / n as f64, p))
}

/// Minimum-cost perfect matching; returns the column of each row.
pub fn hungarian<F: Fn(usize, usize) -> f64>(n: usize, cost: F) -> Vec<usize> {
    // potentials u (rows), v (columns), 1-based with column 0 as sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

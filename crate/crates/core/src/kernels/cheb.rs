//! Adaptive piecewise Chebyshev interpolation on an interval.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::fmath;

pub const DEGREE: usize = 24;
const NODES: usize = DEGREE + 1;
const CHECKS: usize = 11;
const MIN_WIDTH: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ChebTable {
    breaks: Vec<f64>,
    /// Per interval: value, first and second derivative coefficients.
    coeffs: Vec<[[f64; NODES]; 3]>,
    pub max_error: f64,
}

fn fit<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> [f64; NODES] {
    let mut vals = [0.0; NODES];
    for (k, v) in vals.iter_mut().enumerate() {
        let t = fmath::cos(PI * (k as f64 + 0.5) / NODES as f64);
        *v = f(0.5 * (a + b) + 0.5 * (b - a) * t);
    }
    let mut c = [0.0; NODES];
    for (j, cj) in c.iter_mut().enumerate() {
        let mut s = 0.0;
        for (k, v) in vals.iter().enumerate() {
            s += v * fmath::cos(PI * j as f64 * (k as f64 + 0.5) / NODES as f64);
        }
        *cj = 2.0 * s / NODES as f64;
    }
    c[0] *= 0.5;
    c
}

/// Chebyshev coefficients of the derivative with respect to `t in [-1, 1]`.
fn derivative(c: &[f64; NODES]) -> [f64; NODES] {
    let n = NODES;
    let mut d = [0.0; NODES];
    if n < 2 {
        return d;
    }
    // d_{k-1} = d_{k+1} + 2 k c_k
    let mut dk1 = 0.0; // d_{k+1}
    let mut dk2 = 0.0; // d_{k+2}
    for k in (1..n).rev() {
        let v = dk2 + 2.0 * k as f64 * c[k];
        d[k - 1] = v;
        dk2 = dk1;
        dk1 = v;
    }
    d[0] *= 0.5;
    d
}

#[inline]
fn clenshaw(c: &[f64; NODES], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for k in (1..NODES).rev() {
        let b0 = c[k] + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + t * b1 - b2
}

impl ChebTable {
    /// Bisects the initial intervals until the interpolant matches `f` to
    /// `tol` at off-node check points.
    pub fn build<F: Fn(f64) -> f64>(f: F, initial: &[f64], tol: f64) -> Self {
        let mut done: Vec<(f64, f64, [f64; NODES], f64)> = Vec::new();
        let mut stack: Vec<(f64, f64)> = initial.windows(2).rev().map(|w| (w[0], w[1])).collect();
        while let Some((a, b)) = stack.pop() {
            let c = fit(&f, a, b);
            let mut err: f64 = 0.0;
            for j in 0..CHECKS {
                let t = -1.0 + (2.0 * j as f64 + 1.0) / CHECKS as f64;
                let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                err = err.max((clenshaw(&c, t) - f(x)).abs());
            }
            if err <= tol || b - a <= MIN_WIDTH {
                done.push((a, b, c, err));
            } else {
                let m = 0.5 * (a + b);
                stack.push((m, b));
                stack.push((a, m));
            }
        }
        let mut breaks = vec![done[0].0];
        let mut coeffs = Vec::with_capacity(done.len());
        let mut max_error: f64 = 0.0;
        for (a, b, c, e) in done {
            let scale = 2.0 / (b - a);
            let mut d1 = derivative(&c);
            let mut d2 = derivative(&d1);
            for v in d1.iter_mut() {
                *v *= scale;
            }
            for v in d2.iter_mut() {
                *v *= scale * scale;
            }
            breaks.push(b);
            coeffs.push([c, d1, d2]);
            max_error = max_error.max(e);
        }
        ChebTable { breaks, coeffs, max_error }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breaks[0], *self.breaks.last().unwrap())
    }

    pub fn intervals(&self) -> usize {
        self.coeffs.len()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    /// Value (`order = 0`) or derivative (`order` 1 or 2) at `x`; zero
    /// outside the domain.
    #[inline]
    pub fn eval(&self, x: f64, order: usize) -> f64 {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return 0.0;
        }
        let j = (self.breaks.partition_point(|&b| b <= x).max(1) - 1).min(self.coeffs.len() - 1);
        let (a, b) = (self.breaks[j], self.breaks[j + 1]);
        let t = ((2.0 * x - a - b) / (b - a)).clamp(-1.0, 1.0);
        clenshaw(&self.coeffs[j][order], t)
    }
}

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// All multi-indices `alpha` in `N^vars` with `|alpha| = order`, in
/// descending lexicographic order, flattened (`vars` entries each).
pub fn multi_indices(vars: usize, order: usize) -> Vec<u32> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; vars];
    fn rec(k: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<u32>) {
        let vars = cur.len();
        if k + 1 == vars {
            cur[k] = left as u32;
            out.extend_from_slice(cur);
            return;
        }
        for a in (0..=left).rev() {
            cur[k] = a as u32;
            rec(k + 1, left - a, cur, out);
        }
    }
    if vars > 0 {
        rec(0, order, &mut cur, &mut out);
    }
    out
}

/// `|alpha|! / prod(alpha_i!)`.
pub fn multinomial(alpha: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0u32;
    for &a in alpha {
        for k in 1..=a {
            n += 1;
            acc = acc * n as f64 / k as f64;
        }
    }
    acc
}

/// Symmetric `order`-linear map `(R^vars)^order -> R^out_dim`, stored by
/// multi-index. `T[v^order] = sum_alpha multinomial(alpha) c_alpha v^alpha`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymTensor {
    order: usize,
    vars: usize,
    out_dim: usize,
    /// Multi-indices, `vars` entries each.
    indices: Vec<u32>,
    /// Row `a` holds the `out_dim` coefficient vector of multi-index `a`.
    coeffs: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(order: usize, vars: usize, out_dim: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::invalid("order", "symmetric tensors have order >= 2"));
        }
        if vars == 0 || out_dim == 0 {
            return Err(Error::invalid("vars", "dimensions must be positive"));
        }
        let indices = multi_indices(vars, order);
        let n = indices.len() / vars;
        Ok(SymTensor { order, vars, out_dim, indices, coeffs: vec![0.0; n * out_dim] })
    }

    /// Coefficients given per multi-index, in [`multi_indices`] order.
    pub fn from_coeffs(order: usize, vars: usize, out_dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut t = Self::zeros(order, vars, out_dim)?;
        if coeffs.len() != t.coeffs.len() {
            return Err(Error::DimensionMismatch { expected: t.coeffs.len(), found: coeffs.len() });
        }
        t.coeffs = coeffs;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn num_indices(&self) -> usize {
        self.indices.len() / self.vars
    }

    pub fn index(&self, a: usize) -> &[u32] {
        &self.indices[a * self.vars..(a + 1) * self.vars]
    }

    pub fn coeff(&self, a: usize) -> &[f64] {
        &self.coeffs[a * self.out_dim..(a + 1) * self.out_dim]
    }

    pub fn coeff_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.coeffs[a * self.out_dim..(a + 1) * self.out_dim]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Sum of squares of the full (non-symmetrized) tensor entries.
    pub fn frobenius_sq(&self) -> f64 {
        (0..self.num_indices())
            .map(|a| multinomial(self.index(a)) * self.coeff(a).iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
    }

    /// Adds `T[v^order]` to `out`.
    pub fn eval_add(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.vars);
        for a in 0..self.num_indices() {
            let alpha = self.index(a);
            let mut m = multinomial(alpha);
            for (vi, &ai) in v.iter().zip(alpha) {
                m *= crate::fmath::powi(*vi, ai as i32);
            }
            if m != 0.0 {
                for (o, c) in out.iter_mut().zip(self.coeff(a)) {
                    *o += m * c;
                }
            }
        }
    }

    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim];
        self.eval_add(v, &mut out);
        out
    }

    /// Adds the differential of `v -> T[v^order]` to the row-major
    /// `out_dim x vars` matrix `out`.
    pub fn differential_add(&self, v: &[f64], out: &mut [f64]) {
        for a in 0..self.num_indices() {
            let alpha = self.index(a);
            let mult = multinomial(alpha);
            for k in 0..self.vars {
                if alpha[k] == 0 {
                    continue;
                }
                let mut m = mult * alpha[k] as f64;
                for (i, (vi, &ai)) in v.iter().zip(alpha).enumerate() {
                    let e = if i == k { ai - 1 } else { ai };
                    m *= crate::fmath::powi(*vi, e as i32);
                }
                if m != 0.0 {
                    for (r, c) in self.coeff(a).iter().enumerate() {
                        out[r * self.vars + k] += m * c;
                    }
                }
            }
        }
    }
}

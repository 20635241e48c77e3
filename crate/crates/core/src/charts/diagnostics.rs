use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{chart_eval, Chart};
use crate::error::Result;
use crate::fmath;
use crate::geometry::{ManifoldSpec, Truth};
use crate::numerics::{subspace_angle, Projector};

const GRID_STEPS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChartDiagnostics {
    pub center_index: usize,
    /// Angle between the fitted and the true tangent space at `Y_i`.
    pub angle: f64,
    /// Max over the grid of `|Psi_hat(v) - Psi_Y(pi_Y(X_i + B v - Y_i))|`.
    pub param_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiagnosticsReport {
    pub charts: Vec<ChartDiagnostics>,
    pub max_angle: f64,
    pub median_angle: f64,
    pub max_param_error: f64,
    pub median_param_error: f64,
}

/// Grid of chart coordinates with `|v| <= eps`.
fn grid(d: usize, eps: f64) -> Vec<Vec<f64>> {
    let n = 2 * GRID_STEPS + 1;
    let total = n.pow(d as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut k = flat;
        let mut v = Vec::with_capacity(d);
        for _ in 0..d {
            v.push(eps * ((k % n) as f64 - GRID_STEPS as f64) / GRID_STEPS as f64);
            k /= n;
        }
        if fmath::norm(&v) <= eps * (1.0 + 1e-12) {
            out.push(v);
        }
    }
    out
}

fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Compares fitted charts against the analytic manifold.
pub fn diagnostics(charts: &[Chart], spec: &ManifoldSpec, truth: &Truth) -> Result<DiagnosticsReport> {
    let d = spec.intrinsic_dim();
    let dd = spec.ambient_dim;
    let mut out = Vec::with_capacity(charts.len());
    for ch in charts {
        let i = ch.center_index;
        let frame = truth.frame(i, d);
        let true_proj = Projector::from_orthonormal(DMatrix::from_column_slice(dd, d, frame));
        let angle = subspace_angle(&ch.projector, &true_proj)?;
        let base = truth.base.row(i);
        let q0 = truth.params.row(i);
        let mut param_error: f64 = 0.0;
        for v in grid(d, ch.epsilon) {
            let est = chart_eval(ch, &v)?.point;
            let mut w = ch.center.clone();
            for k in 0..d {
                let col = ch.projector.basis_column(k);
                for r in 0..dd {
                    w[r] += col[r] * v[k];
                }
            }
            for r in 0..dd {
                w[r] -= base[r];
            }
            let exact = spec.local_chart(q0, &w)?;
            param_error = param_error.max(fmath::dist(&est, &exact));
        }
        out.push(ChartDiagnostics { center_index: i, angle, param_error });
    }
    let mut angles: Vec<f64> = out.iter().map(|c| c.angle).collect();
    let mut errs: Vec<f64> = out.iter().map(|c| c.param_error).collect();
    Ok(DiagnosticsReport {
        max_angle: angles.iter().copied().fold(0.0, f64::max),
        max_param_error: errs.iter().copied().fold(0.0, f64::max),
        median_angle: median(&mut angles),
        median_param_error: median(&mut errs),
        charts: out,
    })
}

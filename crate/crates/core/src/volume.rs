//! Volume measure estimate: the partition of unity integrated over the
//! fitted patches with the chart Jacobian.

use alloc::vec::Vec;

use crate::charts::{chart_eval, Chart};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::measure::WeightedMeasure;
use crate::numerics::PointSet;
use crate::pou::PartitionOfUnity;
use crate::quadrature::{BallRule, BallRuleKind};
use crate::rng::{seeded_rng, streams};

/// Node weights below this are dropped.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolumeProvenance {
    pub epsilon: f64,
    pub m: usize,
    pub ell: f64,
    pub rule: BallRuleKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VolumeEstimate {
    pub nodes: PointSet,
    pub weights: Vec<f64>,
    /// Patch id of each node.
    pub patch: Vec<usize>,
    pub total_mass: f64,
    pub provenance: VolumeProvenance,
}

impl VolumeEstimate {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_measure(&self) -> WeightedMeasure {
        WeightedMeasure {
            support: self.nodes.clone(),
            weights: self.weights.clone(),
            nonnegative: true,
            mass: self.total_mass,
        }
    }
}

/// Integrates each `chi_j` over its patch `Psi_j(B(0, eps))`. `charts[j]`
/// must belong to `pou.centers[j]`. The quadrature rule is shared by all
/// patches; for `d >= 3` its random shift is drawn from `seed`.
pub fn estimate_volume<E: Executor>(
    charts: &[Chart],
    pou: &PartitionOfUnity,
    seed: u64,
    exec: &E,
) -> Result<VolumeEstimate> {
    let first = charts.first().ok_or_else(|| Error::invalid("charts", "no charts"))?;
    if charts.len() != pou.len() {
        return Err(Error::DimensionMismatch { expected: pou.len(), found: charts.len() });
    }
    for (j, ch) in charts.iter().enumerate() {
        if ch.center_index != pou.centers[j] || ch.epsilon != pou.epsilon {
            return Err(Error::invalid("charts", alloc::format!("chart {j} does not match the partition of unity")));
        }
    }
    let d = first.projector.rank();
    let dd = first.projector.ambient_dim();
    let mut rng = seeded_rng(seed, streams::QUADRATURE);
    let rule = BallRule::standard(d, pou.epsilon, &mut rng);
    let per_patch = exec.map(charts.len(), |j| integrate_patch(&charts[j], j, pou, &rule));
    let mut nodes = PointSet::new(dd);
    let mut weights = Vec::new();
    let mut patch = Vec::new();
    for (j, r) in per_patch.into_iter().enumerate() {
        for (p, w) in r? {
            nodes.push(&p);
            weights.push(w);
            patch.push(j);
        }
    }
    let total_mass = weights.iter().sum();
    Ok(VolumeEstimate {
        nodes,
        weights,
        patch,
        total_mass,
        provenance: VolumeProvenance {
            epsilon: pou.epsilon,
            m: first.tensors.len() + 2,
            ell: first.ell,
            rule: rule.description.clone(),
            seed,
        },
    })
}

fn integrate_patch(chart: &Chart, j: usize, pou: &PartitionOfUnity, rule: &BallRule) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut out = Vec::with_capacity(rule.len());
    for q in 0..rule.len() {
        let e = chart_eval(chart, rule.node(q))?;
        if !(e.jacobian > 0.0) || !e.jacobian.is_finite() {
            return Err(Error::CorruptChart { patch: j, jacobian: e.jacobian });
        }
        // chi_j vanishes off its ball whatever the other centers do
        if crate::fmath::dist(&e.point, &chart.center) >= pou.epsilon {
            continue;
        }
        let chi = pou.eval(j, &e.point)?;
        let w = rule.weights[q] * chi * e.jacobian;
        if w >= WEIGHT_FLOOR {
            out.push((e.point, w));
        }
    }
    Ok(out)
}

/// Probability measure `vol / |vol|`.
pub fn normalize(vol: &VolumeEstimate) -> Result<WeightedMeasure> {
    vol.as_measure().normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::{fit_chart, ChartParams};
    use crate::exec::Sequential;
    use crate::fmath;
    use crate::numerics::GridIndex;

    fn flat_single(d: usize) -> (Vec<Chart>, PartitionOfUnity) {
        // a grid on the plane z = 0 in R^3, one chart at the origin
        let mut p = PointSet::new(3);
        p.push(&[0.0, 0.0, 0.0]);
        for a in -5i32..=5 {
            for b in -5i32..=5 {
                if (a, b) != (0, 0) {
                    let y = if d == 2 { b as f64 * 0.05 } else { 0.0 };
                    p.push(&[a as f64 * 0.05, y, 0.0]);
                }
            }
        }
        let grid = GridIndex::new(&p, 0.2);
        let ch = fit_chart(&p, &grid, 0, &ChartParams::new(d, 2, 0.2, 5.0)).unwrap();
        let pou = PartitionOfUnity::new(&p, alloc::vec![0], 0.2).unwrap();
        (alloc::vec![ch], pou)
    }

    #[test]
    fn flat_patch_has_ball_volume() {
        for d in [1, 2] {
            let (ch, pou) = flat_single(d);
            let v = estimate_volume(&ch, &pou, 0, &Sequential).unwrap();
            let exact = fmath::unit_ball_volume(d) * fmath::powi(0.2, d as i32);
            assert!((v.total_mass - exact).abs() < 1e-12 * exact, "{d}: {} {exact}", v.total_mass);
            assert!(v.patch.iter().all(|&j| j == 0));
            let n = normalize(&v).unwrap();
            assert!((n.mass - 1.0).abs() < 1e-12);
            let n2 = n.normalized().unwrap();
            assert!(n.weights.iter().zip(&n2.weights).all(|(a, b)| (a - b).abs() <= 1e-13 * a));
        }
    }

    #[test]
    fn circle_length() {
        let mut p = PointSet::new(2);
        let n = 3000;
        for k in 0..n {
            let t = 2.0 * core::f64::consts::PI * (k as f64 + 0.37) / n as f64;
            p.push(&[fmath::cos(t), fmath::sin(t)]);
        }
        let eps = 0.15;
        let pou = crate::pou::build_pou(&p, eps).unwrap();
        let grid = GridIndex::new(&p, eps);
        let params = ChartParams::new(1, 2, eps, 1.0 / eps);
        let charts: Vec<Chart> = pou.centers.iter().map(|&c| fit_chart(&p, &grid, c, &params).unwrap()).collect();
        let v = estimate_volume(&charts, &pou, 0, &Sequential).unwrap();
        let rel = (v.total_mass - 2.0 * core::f64::consts::PI).abs() / (2.0 * core::f64::consts::PI);
        assert!(rel < 0.02, "{rel}");
        for (k, &j) in v.patch.iter().enumerate() {
            assert!(fmath::dist(v.nodes.row(k), &charts[j].center) <= 3.0 * eps);
        }
    }
}

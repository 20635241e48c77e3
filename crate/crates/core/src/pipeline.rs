//! End-to-end estimation: sample, noise, centers, charts, partition of
//! unity, volume, density, fallback.

use alloc::vec::Vec;

use crate::charts::{farthest_point_sampling, fit_charts, Chart, ChartParams};
use crate::density::{estimate_density, with_fallback, BandwidthSchedule};
use crate::error::{Error, Result, Stage, StageExt};
use crate::exec::Executor;
use crate::geometry::{
    add_tubular_noise, sample_manifold, volume_quadrature, DensityKind, DensitySpec, ManifoldSpec, PointCloud,
};
use crate::kernels::{build_kernel, default_beta, RadialKernel};
use crate::measure::WeightedMeasure;
use crate::numerics::{subspace_angle, Projector};
use crate::pou::{PartitionOfUnity, FPS_FRACTION};
use crate::volume::{estimate_volume, VolumeEstimate};

/// Negative-mass budget used when the density is constant.
pub const UNIFORM_BETA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum EstimatorKind {
    /// Volume measure estimated from the sample.
    UnknownManifold,
    /// Analytic volume quadrature with the given resolution.
    KnownManifold { resolution: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub manifold: ManifoldSpec,
    pub density: DensityKind,
    /// Kernel order.
    pub k: usize,
    /// Chart order; `None` means `k`.
    pub m: Option<usize>,
    /// Smoothness, used by the bandwidth for `d >= 3`.
    pub s: f64,
    /// Kernel negative-mass budget; `None` derives it from the density bounds.
    pub beta: Option<f64>,
    pub schedule: BandwidthSchedule,
    pub estimator: EstimatorKind,
}

impl PipelineConfig {
    pub fn new(manifold: ManifoldSpec) -> Self {
        PipelineConfig {
            manifold,
            density: DensityKind::Uniform,
            k: 2,
            m: None,
            s: 1.0,
            beta: None,
            schedule: BandwidthSchedule::default(),
            estimator: EstimatorKind::UnknownManifold,
        }
    }

    pub fn chart_order(&self) -> usize {
        self.m.unwrap_or(self.k)
    }

    pub fn density_spec(&self) -> Result<DensitySpec> {
        DensitySpec::new(self.density, &self.manifold)
    }

    pub fn beta(&self) -> Result<f64> {
        if let Some(b) = self.beta {
            return Ok(b);
        }
        let ds = self.density_spec()?;
        Ok(default_beta(ds.f_min, ds.f_max, UNIFORM_BETA))
    }

    pub fn validate(&self) -> Result<()> {
        self.manifold.validate()?;
        self.schedule.validate()?;
        if self.chart_order() < 2 {
            return Err(Error::invalid("m", "chart order must be at least 2"));
        }
        if self.chart_order() > self.k.max(2) {
            return Err(Error::invalid("m", "chart order must not exceed the kernel order"));
        }
        if !(self.s > 0.0) {
            return Err(Error::invalid("s", "must be positive"));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::invalid("beta", "must be positive"));
            }
        }
        if let EstimatorKind::KnownManifold { resolution } = self.estimator {
            if resolution < crate::geometry::MIN_RESOLUTION {
                return Err(Error::invalid("resolution", "too small"));
            }
        }
        Ok(())
    }

    /// Kernel of dimension `d`, order `k` and the configured budget.
    pub fn build_kernel(&self) -> Result<RadialKernel> {
        build_kernel(self.manifold.intrinsic_dim(), self.k, self.beta()?).at(Stage::Kernel)
    }
}

/// Parameters resolved for a given sample size.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResolvedParams {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub h: f64,
    pub ell: f64,
    pub gamma: f64,
}

impl ResolvedParams {
    pub fn new(cfg: &PipelineConfig, n: usize) -> Self {
        let d = cfg.manifold.intrinsic_dim();
        ResolvedParams {
            n,
            d,
            m: cfg.chart_order(),
            k: cfg.k,
            epsilon: cfg.schedule.epsilon(n, d),
            h: cfg.schedule.h(n, d, cfg.s),
            ell: cfg.schedule.ell(n, d),
            gamma: cfg.schedule.gamma(n, d),
        }
    }
}

/// Hooks around each stage, e.g. for timing.
pub trait StageObserver {
    fn started(&mut self, _stage: Stage) {}
    fn finished(&mut self, _stage: Stage) {}
}

/// Observer that does nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoObserver;

impl StageObserver for NoObserver {}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineDiagnostics {
    pub params: ResolvedParams,
    pub centers: usize,
    pub volume_nodes: usize,
    pub vol_mass: f64,
    pub estimate_mass: f64,
    pub nonnegative: bool,
    pub fallback: bool,
    /// Tangent angle statistics against the truth, when known.
    pub max_angle: Option<f64>,
    pub median_angle: Option<f64>,
    pub chart_warnings: usize,
    pub min_normalizer: f64,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    /// Estimate after the fallback rule.
    pub estimate: WeightedMeasure,
    /// Estimate before the fallback rule.
    pub raw: WeightedMeasure,
    pub cloud: PointCloud,
    pub charts: Vec<Chart>,
    pub volume: Option<VolumeEstimate>,
    pub diagnostics: PipelineDiagnostics,
}

fn run<T>(obs: &mut dyn StageObserver, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    obs.started(stage);
    let r = f().at(stage);
    obs.finished(stage);
    r
}

/// Tangent angles of each chart against the true frame at its center.
pub fn chart_angles(charts: &[Chart], cloud: &PointCloud, d: usize) -> Result<Option<Vec<f64>>> {
    let Some(truth) = &cloud.truth else { return Ok(None) };
    let dd = cloud.points.dim();
    let mut out = Vec::with_capacity(charts.len());
    for ch in charts {
        let frame = truth.frame(ch.center_index, d);
        let p = Projector::from_orthonormal(nalgebra::DMatrix::from_column_slice(dd, d, frame));
        out.push(subspace_angle(&ch.projector, &p)?);
    }
    Ok(Some(out))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Fits charts and the partition of unity on a point set.
pub fn fit_patches<E: Executor>(
    points: &crate::numerics::PointSet,
    params: &ResolvedParams,
    exec: &E,
    obs: &mut dyn StageObserver,
) -> Result<(Vec<Chart>, PartitionOfUnity)> {
    if !(params.epsilon > 0.0) || !params.epsilon.is_finite() {
        return Err(Error::invalid("epsilon", "must be positive")).at(Stage::Fps);
    }
    let centers = run(obs, Stage::Fps, || Ok(farthest_point_sampling(points, FPS_FRACTION * params.epsilon)))?;
    let cp = ChartParams::new(params.d, params.m, params.epsilon, params.ell);
    let charts = run(obs, Stage::Charts, || fit_charts(points, &centers, &cp, exec))?;
    let pou = run(obs, Stage::Pou, || PartitionOfUnity::new(points, centers, params.epsilon))?;
    Ok((charts, pou))
}

/// Runs the full estimator for sample size `n` and `seed`.
pub fn run_pipeline<E: Executor>(
    cfg: &PipelineConfig,
    kernel: &RadialKernel,
    n: usize,
    seed: u64,
    exec: &E,
    obs: &mut dyn StageObserver,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    let params = ResolvedParams::new(cfg, n);
    let density = cfg.density_spec().at(Stage::Sample)?;
    let clean = run(obs, Stage::Sample, || sample_manifold(&cfg.manifold, &density, n, seed))?;
    let cloud = if params.gamma > 0.0 {
        run(obs, Stage::Noise, || add_tubular_noise(&cfg.manifold, &clean, params.gamma, seed))?
    } else {
        clean
    };
    let samples = WeightedMeasure::empirical(cloud.points.clone()).at(Stage::Sample)?;

    let (charts, volume, nodes, centers) = match cfg.estimator {
        EstimatorKind::UnknownManifold => {
            let (charts, pou) = fit_patches(&cloud.points, &params, exec, obs)?;
            let vol = run(obs, Stage::Volume, || estimate_volume(&charts, &pou, seed, exec))?;
            let nodes = vol.as_measure();
            let c = pou.len();
            (charts, Some(vol), nodes, c)
        }
        EstimatorKind::KnownManifold { resolution } => {
            let nodes = run(obs, Stage::Reference, || volume_quadrature(&cfg.manifold, resolution))?;
            (Vec::new(), None, nodes, 0)
        }
    };
    let est = run(obs, Stage::Density, || estimate_density(&samples, &nodes, kernel, params.h, exec))?;
    let fb = run(obs, Stage::Fallback, || with_fallback(&est.measure, &samples))?;

    let angles = chart_angles(&charts, &cloud, params.d)?;
    let diagnostics = PipelineDiagnostics {
        centers,
        volume_nodes: nodes.len(),
        vol_mass: nodes.mass,
        estimate_mass: est.measure.mass,
        nonnegative: est.measure.nonnegative,
        fallback: fb.fell_back,
        max_angle: angles.as_ref().map(|a| a.iter().copied().fold(0.0, f64::max)),
        median_angle: angles.map(median),
        chart_warnings: charts.iter().map(|c| c.warnings.len()).sum(),
        min_normalizer: est.normalizers.iter().copied().fold(f64::INFINITY, f64::min),
        params,
    };
    Ok(PipelineOutput { estimate: fb.measure, raw: est.measure, cloud, charts, volume, diagnostics })
}

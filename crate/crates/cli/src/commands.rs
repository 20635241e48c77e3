//! Subcommand bodies, callable without the argument parser.

use std::path::{Path, PathBuf};

use manidens_core::charts::{farthest_point_sampling, fit_charts, ChartParams};
use manidens_core::density::{estimate_density, with_fallback};
use manidens_core::geometry::{add_tubular_noise, sample_manifold, volume_quadrature, DensityKind, ManifoldSpec, PointCloud};
use manidens_core::kernels::RadialKernel;
use manidens_core::pipeline::{EstimatorKind, PipelineConfig, ResolvedParams};
use manidens_core::pou::{PartitionOfUnity, FPS_FRACTION};
use manidens_core::volume::{estimate_volume, VolumeEstimate};
use manidens_core::wasserstein::{wasserstein_report, TransportProblem};
use manidens_core::{Stage, WeightedMeasure};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_config, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::exec::Parallel;
use crate::experiment::{emit_plots, run_rate_experiment, REPORT_FILES};
use crate::formats::{
    read_charts, read_cloud, read_cloud_sidecar, read_indices, read_kernel, read_measure, read_volume, to_json_bytes,
    write_charts, write_cloud, write_indices, write_json, write_kernel, write_measure, write_volume,
    ChartsFile, CloudSidecar, MeasureSidecar,
};
use crate::manifest::{unix_now, RunManifest};

/// Global inputs shared by the subcommands.
#[derive(Clone, Debug, Default)]
pub struct Context {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Loaded configuration with the effective seed.
pub struct Setup {
    pub cfg: Option<ExperimentConfig>,
    pub seed: u64,
}

impl Context {
    pub fn setup(&self) -> CliResult<Setup> {
        let cfg = self.config.as_deref().map(load_config).transpose()?;
        let seed = self.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0);
        Ok(Setup { cfg, seed })
    }
}

impl Setup {
    fn require(&self) -> CliResult<&ExperimentConfig> {
        self.cfg.as_ref().ok_or_else(|| CliError::Usage("this command needs --config".into()))
    }

    /// Pipeline settings for a cloud: the config when given, otherwise
    /// defaults on the manifold recorded in the cloud's sidecar.
    fn pipeline_for(&self, sidecar: Option<&CloudSidecar>) -> CliResult<PipelineConfig> {
        if let Some(cfg) = &self.cfg {
            return cfg.pipeline();
        }
        let side = sidecar.ok_or_else(|| CliError::Usage("no --config and no cloud sidecar to infer the manifold".into()))?;
        let mut p = PipelineConfig::new(side.manifold.clone());
        p.density = side.density;
        Ok(p)
    }

    fn manifold(&self, sidecar: Option<&CloudSidecar>) -> CliResult<Option<ManifoldSpec>> {
        if let Some(s) = sidecar {
            return Ok(Some(s.manifold.clone()));
        }
        self.cfg.as_ref().map(|c| c.spec()).transpose()
    }
}

fn load_cloud(setup: &Setup, input: &Path) -> CliResult<(PointCloud, Option<CloudSidecar>)> {
    let side = read_cloud_sidecar(input)?;
    let spec = setup.manifold(side.as_ref())?;
    let cloud = read_cloud(input, spec.as_ref())?;
    Ok((cloud, side))
}

fn print_json<T: Serialize>(value: &T) {
    print!("{}", String::from_utf8(to_json_bytes(value)).expect("utf-8"));
}

pub fn gen(ctx: &Context, n: usize, out: &Path) -> CliResult<()> {
    let setup = ctx.setup()?;
    let cfg = setup.require()?;
    let spec = cfg.spec()?;
    let density = cfg.pipeline()?.density_spec()?;
    let cloud = sample_manifold(&spec, &density, n, setup.seed).map_err(|e| e.at(Stage::Sample))?;
    let side = CloudSidecar { manifold: spec, density: cfg.density, n, seed: setup.seed, gamma: 0.0 };
    write_cloud(out, &cloud, &side)?;
    print_json(&json!({ "points": n, "output": out }));
    Ok(())
}

pub fn noise(ctx: &Context, input: &Path, gamma: Option<f64>, out: &Path) -> CliResult<()> {
    let setup = ctx.setup()?;
    let (cloud, side) = load_cloud(&setup, input)?;
    let spec = setup
        .manifold(side.as_ref())?
        .ok_or_else(|| CliError::Usage("noise needs the manifold: pass --config or keep the sidecar".into()))?;
    if cloud.truth.is_none() {
        return Err(manidens_core::Error::MissingTruth.at(Stage::Noise).into());
    }
    let gamma = match gamma {
        Some(g) => g,
        None => ResolvedParams::new(&setup.pipeline_for(side.as_ref())?, cloud.len()).gamma,
    };
    let noisy = add_tubular_noise(&spec, &cloud, gamma, setup.seed).map_err(|e| e.at(Stage::Noise))?;
    let density = side.as_ref().map(|s| s.density).or(setup.cfg.as_ref().map(|c| c.density)).unwrap_or(DensityKind::Uniform);
    let new_side = CloudSidecar { manifold: spec, density, n: noisy.len(), seed: setup.seed, gamma };
    write_cloud(out, &noisy, &new_side)?;
    print_json(&json!({ "points": noisy.len(), "gamma": gamma, "output": out }));
    Ok(())
}

fn resolved(setup: &Setup, side: Option<&CloudSidecar>, n: usize) -> CliResult<ResolvedParams> {
    let p = setup.pipeline_for(side)?;
    p.validate().map_err(CliError::from)?;
    Ok(ResolvedParams::new(&p, n))
}

pub fn fps(ctx: &Context, input: &Path, radius: Option<f64>, out: &Path) -> CliResult<()> {
    let setup = ctx.setup()?;
    let (cloud, side) = load_cloud(&setup, input)?;
    let r = match radius {
        Some(r) => r,
        None => FPS_FRACTION * resolved(&setup, side.as_ref(), cloud.len())?.epsilon,
    };
    if !(r > 0.0) || !r.is_finite() {
        return Err(CliError::Usage("radius must be positive".into()));
    }
    let centers = farthest_point_sampling(&cloud.points, r);
    write_indices(out, "index", &centers)?;
    print_json(&json!({ "centers": centers.len(), "radius": r, "output": out }));
    Ok(())
}

fn charts_for(
    cloud: &PointCloud,
    params: &ResolvedParams,
    centers: Option<Vec<usize>>,
) -> CliResult<(ChartsFile, Vec<usize>)> {
    let centers = centers.unwrap_or_else(|| farthest_point_sampling(&cloud.points, FPS_FRACTION * params.epsilon));
    if let Some(&bad) = centers.iter().find(|&&c| c >= cloud.len()) {
        return Err(CliError::Usage(format!("center index {bad} out of range")));
    }
    let cp = ChartParams::new(params.d, params.m, params.epsilon, params.ell);
    let charts = fit_charts(&cloud.points, &centers, &cp, &Parallel).map_err(|e| e.at(Stage::Charts))?;
    Ok((ChartsFile { d: params.d, m: params.m, epsilon: params.epsilon, ell: params.ell, charts }, centers))
}

pub fn fit_charts_cmd(ctx: &Context, input: &Path, centers: Option<&Path>, out: &Path) -> CliResult<()> {
    let setup = ctx.setup()?;
    let (cloud, side) = load_cloud(&setup, input)?;
    let params = resolved(&setup, side.as_ref(), cloud.len())?;
    let centers = centers.map(|p| read_indices(p, "index")).transpose()?;
    let (file, _) = charts_for(&cloud, &params, centers)?;
    write_charts(out, &file)?;
    let warnings: usize = file.charts.iter().map(|c| c.warnings.len()).sum();
    print_json(&json!({ "charts": file.charts.len(), "epsilon": params.epsilon, "warnings": warnings, "output": out }));
    Ok(())
}

fn volume_for(cloud: &PointCloud, params: &ResolvedParams, charts: Option<ChartsFile>, seed: u64) -> CliResult<(VolumeEstimate, usize)> {
    let file = match charts {
        Some(f) => f,
        None => charts_for(cloud, params, None)?.0,
    };
    let centers: Vec<usize> = file.charts.iter().map(|c| c.center_index).collect();
    if let Some(&bad) = centers.iter().find(|&&c| c >= cloud.len()) {
        return Err(CliError::Usage(format!("chart center {bad} is not a point of the cloud")));
    }
    let pou = PartitionOfUnity::new(&cloud.points, centers, file.epsilon).map_err(|e| e.at(Stage::Pou))?;
    let vol = estimate_volume(&file.charts, &pou, seed, &Parallel).map_err(|e| e.at(Stage::Volume))?;
    Ok((vol, file.charts.len()))
}

pub fn estimate_volume_cmd(ctx: &Context, input: &Path, charts: Option<&Path>, out: &Path) -> CliResult<()> {
    let setup = ctx.setup()?;
    let (cloud, side) = load_cloud(&setup, input)?;
    let params = resolved(&setup, side.as_ref(), cloud.len())?;
    let charts = charts.map(read_charts).transpose()?;
    let (vol, patches) = volume_for(&cloud, &params, charts, setup.seed)?;
    write_volume(out, &vol, patches)?;
    print_json(&json!({ "nodes": vol.len(), "patches": patches, "total_mass": vol.total_mass, "output": out }));
    Ok(())
}

pub struct DensityArgs<'a> {
    pub input: &'a Path,
    pub volume: Option<&'a Path>,
    pub kernel: Option<&'a Path>,
    pub export_kernel: Option<&'a Path>,
    pub out: &'a Path,
}

pub fn estimate_density_cmd(ctx: &Context, args: &DensityArgs) -> CliResult<()> {
    let setup = ctx.setup()?;
    let (cloud, side) = load_cloud(&setup, args.input)?;
    let pipe = setup.pipeline_for(side.as_ref())?;
    pipe.validate()?;
    let params = ResolvedParams::new(&pipe, cloud.len());
    let kernel: RadialKernel = match args.kernel {
        Some(p) => read_kernel(p)?,
        None => pipe.build_kernel()?,
    };
    if kernel.dim() != params.d {
        return Err(CliError::Usage(format!("kernel dimension {} does not match d = {}", kernel.dim(), params.d)));
    }
    if let Some(p) = args.export_kernel {
        write_kernel(p, &kernel)?;
    }
    let nodes: WeightedMeasure = match (args.volume, &pipe.estimator) {
        (Some(p), _) => read_volume(p)?.as_measure(),
        (None, EstimatorKind::KnownManifold { resolution }) => {
            volume_quadrature(&pipe.manifold, *resolution).map_err(|e| e.at(Stage::Reference))?
        }
        (None, EstimatorKind::UnknownManifold) => volume_for(&cloud, &params, None, setup.seed)?.0.as_measure(),
    };
    let samples = WeightedMeasure::empirical(cloud.points.clone()).map_err(|e| e.at(Stage::Sample))?;
    let est = estimate_density(&samples, &nodes, &kernel, params.h, &Parallel).map_err(|e| e.at(Stage::Density))?;
    let fb = with_fallback(&est.measure, &samples).map_err(|e| e.at(Stage::Fallback))?;
    let side = MeasureSidecar {
        mass: fb.measure.mass,
        nonnegative: est.measure.nonnegative,
        fallback: Some(fb.fell_back),
        h: Some(params.h),
        seed: Some(setup.seed),
    };
    write_measure(args.out, &fb.measure, &side)?;
    print_json(&json!({
        "atoms": fb.measure.len(),
        "h": params.h,
        "raw_mass": est.measure.mass,
        "nonnegative": est.measure.nonnegative,
        "fallback": fb.fell_back,
        "output": args.out,
    }));
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct DistanceOutput {
    pub p: u32,
    pub distance: f64,
    pub cost: f64,
    pub gap: f64,
    pub dual_violation: f64,
    pub source_atoms: usize,
    pub target_atoms: usize,
}

pub fn wasserstein_cmd(ctx: &Context, source: &Path, target: &Path, p: Option<u32>) -> CliResult<DistanceOutput> {
    let setup = ctx.setup()?;
    let p = p.or(setup.cfg.as_ref().map(|c| c.p)).unwrap_or(1);
    let a = read_measure(source)?;
    let b = read_measure(target)?;
    let mut prob = TransportProblem::new(&a, &b, p);
    if let Some(c) = &setup.cfg {
        prob.max_entries = c.transport.max_entries;
    }
    let r = wasserstein_report(&prob).map_err(|e| e.at(Stage::Wasserstein))?;
    let out = DistanceOutput {
        p,
        distance: r.distance,
        cost: r.cost,
        gap: r.gap,
        dual_violation: r.dual_violation,
        source_atoms: r.source_len,
        target_atoms: r.target_len,
    };
    print_json(&out);
    Ok(out)
}

/// Files of an experiment directory that must be byte-identical across
/// runs: everything except `timings.json` and `manifest.json`.
pub const DETERMINISTIC_FILES: [&str; 5] = ["config.json", "rates.csv", "rates.svg", "report.json", "replicates.csv"];

pub fn experiment_cmd(ctx: &Context, out: &Path) -> CliResult<RunManifest> {
    let setup = ctx.setup()?;
    let mut cfg = setup.require()?.clone();
    cfg.seed = setup.seed;
    run_experiment_into(&cfg, ctx.config.as_deref(), out)
}

/// Runs the experiment and writes the report, config, timings and
/// manifest under `out`.
pub fn run_experiment_into(cfg: &ExperimentConfig, config_path: Option<&Path>, out: &Path) -> CliResult<RunManifest> {
    let started = unix_now();
    let (report, timings) = run_rate_experiment(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    crate::config::save_config(&out.join("config.json"), cfg)?;
    emit_plots(&report, out)?;
    write_json(&out.join("timings.json"), &timings)?;
    let mut manifest = RunManifest::new("experiment", cfg, cfg.seed, started);
    if let Some(p) = config_path {
        manifest.add_input(p)?;
    }
    manifest.add_output(out, "config.json")?;
    for f in REPORT_FILES {
        manifest.add_output(out, f)?;
    }
    manifest.finished_unix = unix_now();
    write_json(&out.join("manifest.json"), &manifest)?;
    print_json(&json!({
        "slope": report.slope,
        "residual": report.residual,
        "fallback_rate": report.fallback_rate,
        "medians": report.levels.iter().map(|l| l.median).collect::<Vec<_>>(),
        "output": out,
    }));
    Ok(manifest)
}

/// Re-runs the experiment recorded in a manifest into `out` and returns the
/// outputs whose bytes differ from the recorded digests.
pub fn replay(manifest: &RunManifest, out: &Path) -> CliResult<Vec<PathBuf>> {
    if !manifest.config_intact() {
        return Err(CliError::config("", "manifest config does not match its digest"));
    }
    run_experiment_into(&manifest.config, None, out)?;
    manifest.mismatches(out)
}

//! Monte Carlo rate experiments and their artifacts.

use std::path::Path;
use std::time::Instant;

use manidens_core::geometry::{add_tubular_noise, reference_measure, sample_manifold, ReferenceMeasure};
use manidens_core::kernels::RadialKernel;
use manidens_core::pipeline::{fit_patches, run_pipeline, NoObserver, PipelineConfig, ResolvedParams};
use manidens_core::volume::estimate_volume;
use manidens_core::wasserstein::{coarsen_pair, wasserstein, TransportProblem};
use manidens_core::{Error, Sequential, Stage, WeightedMeasure};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Metric, TransportConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{csv_bytes, fmt_f64, to_json_bytes, write_bytes};

/// Largest tolerated fraction of failed replicates per sample size.
pub const FAILURE_CAP: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateError {
    pub stage: String,
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ReplicateError {
    fn from(e: &Error) -> Self {
        ReplicateError {
            stage: e.stage().map_or("core", |s| s.name()).into(),
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: Option<f64>,
    pub fallback: Option<bool>,
    pub vol_mass: Option<f64>,
    /// Grid cell used to bin both measures before the transport solve.
    pub transport_cell: Option<f64>,
    /// Bound on the distance change caused by the binning.
    pub transport_bound: Option<f64>,
    pub error: Option<ReplicateError>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub failures: usize,
    pub fallbacks: usize,
    /// Value of the fitted line at `n`.
    pub fit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceInfo {
    pub resolution: usize,
    pub atoms: usize,
    /// Bound on `W_1(reference, truth)`.
    pub mesh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub metric: Metric,
    pub p: u32,
    pub reference: Option<ReferenceInfo>,
    pub levels: Vec<LevelSummary>,
    /// Least-squares slope of `ln median` against `ln n`.
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual of the fit.
    pub residual: f64,
    pub fallback_rate: f64,
    pub records: Vec<ReplicateRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub n: usize,
    pub replicate: usize,
    pub estimate_seconds: f64,
    pub risk_seconds: f64,
}

/// Wall-clock figures, kept apart from the deterministic report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub threads: usize,
    pub total_seconds: f64,
    pub runs: Vec<RunTiming>,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(slope, intercept, rms residual)` of the least-squares line through
/// `(ln x, ln y)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> CliResult<(f64, f64, f64)> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(CliError::Usage("a slope needs at least two sample sizes".into()));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(CliError::Usage("medians must be positive for a log-log fit".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok((slope, intercept, (rss / k).sqrt()))
}

/// Binned transport distance between an estimate and the reference.
pub fn transport_risk(
    est: &WeightedMeasure,
    reference: &WeightedMeasure,
    p: u32,
    t: &TransportConfig,
) -> manidens_core::Result<(f64, f64, f64)> {
    let est = est.without_zeros();
    let (a, b) = coarsen_pair(&est, reference, t.start_cell, t.max_atoms).map_err(|e| e.at(Stage::Wasserstein))?;
    let mut prob = TransportProblem::new(&a.measure, &b.measure, p);
    prob.max_entries = t.max_entries;
    let w = wasserstein(&prob).map_err(|e| e.at(Stage::Wasserstein))?;
    Ok((w, a.cell, a.displacement + b.displacement))
}

struct Outcome {
    record: ReplicateRecord,
    timing: RunTiming,
}

fn volume_mass_error(cfg: &PipelineConfig, n: usize, seed: u64) -> manidens_core::Result<f64> {
    let params = ResolvedParams::new(cfg, n);
    let density = cfg.density_spec().map_err(|e| e.at(Stage::Sample))?;
    let clean = sample_manifold(&cfg.manifold, &density, n, seed).map_err(|e| e.at(Stage::Sample))?;
    let cloud = if params.gamma > 0.0 {
        add_tubular_noise(&cfg.manifold, &clean, params.gamma, seed).map_err(|e| e.at(Stage::Noise))?
    } else {
        clean
    };
    let (charts, pou) = fit_patches(&cloud.points, &params, &Sequential, &mut NoObserver)?;
    let vol = estimate_volume(&charts, &pou, seed, &Sequential).map_err(|e| e.at(Stage::Volume))?;
    Ok((vol.total_mass - cfg.manifold.total_volume()).abs())
}

fn one_run(
    cfg: &ExperimentConfig,
    pipe: &PipelineConfig,
    kernel: &RadialKernel,
    reference: Option<&ReferenceMeasure>,
    n: usize,
    replicate: usize,
) -> Outcome {
    let seed = cfg.seed.wrapping_add(replicate as u64);
    let mut record = ReplicateRecord {
        n,
        replicate,
        seed,
        value: None,
        fallback: None,
        vol_mass: None,
        transport_cell: None,
        transport_bound: None,
        error: None,
    };
    let mut timing = RunTiming { n, replicate, estimate_seconds: 0.0, risk_seconds: 0.0 };
    let t0 = Instant::now();
    match cfg.metric {
        Metric::VolumeMassError => match volume_mass_error(pipe, n, seed) {
            Ok(v) => record.value = Some(v),
            Err(e) => record.error = Some((&e).into()),
        },
        Metric::Wasserstein => match run_pipeline(pipe, kernel, n, seed, &Sequential, &mut NoObserver) {
            Ok(out) => {
                record.fallback = Some(out.diagnostics.fallback);
                record.vol_mass = Some(out.diagnostics.vol_mass);
                timing.estimate_seconds = t0.elapsed().as_secs_f64();
                let t1 = Instant::now();
                let reference = reference.expect("reference built for transport metrics");
                match transport_risk(&out.estimate, &reference.measure, cfg.p, &cfg.transport) {
                    Ok((w, cell, bound)) => {
                        record.value = Some(w);
                        record.transport_cell = Some(cell);
                        record.transport_bound = Some(bound);
                    }
                    Err(e) => record.error = Some((&e).into()),
                }
                timing.risk_seconds = t1.elapsed().as_secs_f64();
                return Outcome { record, timing };
            }
            Err(e) => record.error = Some((&e).into()),
        },
    }
    timing.estimate_seconds = t0.elapsed().as_secs_f64();
    Outcome { record, timing }
}

/// Runs every `(n, replicate)` pair on the current rayon pool and
/// aggregates in `(n, replicate)` order.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> CliResult<(RateReport, Timings)> {
    cfg.validate()?;
    let start = Instant::now();
    let pipe = cfg.pipeline()?;
    let kernel = pipe.build_kernel()?;
    let reference = match cfg.metric {
        Metric::Wasserstein => {
            let res = cfg.reference_resolution();
            let max_n = *cfg.n.last().expect("validated");
            if res < 4 * max_n {
                return Err(CliError::config("reference_resolution", format!("must be at least 4 x max n = {}", 4 * max_n)));
            }
            let density = pipe.density_spec()?;
            Some(reference_measure(&pipe.manifold, &density, res).map_err(|e| e.at(Stage::Reference))?)
        }
        Metric::VolumeMassError => None,
    };
    let tasks: Vec<(usize, usize)> =
        cfg.n.iter().flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r))).collect();
    let outcomes: Vec<Outcome> =
        tasks.par_iter().map(|&(n, r)| one_run(cfg, &pipe, &kernel, reference.as_ref(), n, r)).collect();

    let mut levels = Vec::with_capacity(cfg.n.len());
    let mut total_fallbacks = 0usize;
    let mut completed = 0usize;
    for (li, &n) in cfg.n.iter().enumerate() {
        let rows = &outcomes[li * cfg.replicates..(li + 1) * cfg.replicates];
        let failures = rows.iter().filter(|o| o.record.value.is_none()).count();
        if failures as f64 >= FAILURE_CAP * cfg.replicates as f64 && failures > 0 {
            return Err(CliError::TooManyFailures { n, failed: failures, total: cfg.replicates });
        }
        let mut vals: Vec<f64> = rows.iter().filter_map(|o| o.record.value).collect();
        vals.sort_by(f64::total_cmp);
        let fallbacks = rows.iter().filter(|o| o.record.fallback == Some(true)).count();
        total_fallbacks += fallbacks;
        completed += rows.iter().filter(|o| o.record.fallback.is_some()).count();
        levels.push(LevelSummary {
            n,
            median: quantile(&vals, 0.5),
            q25: quantile(&vals, 0.25),
            q75: quantile(&vals, 0.75),
            failures,
            fallbacks,
            fit: 0.0,
        });
    }
    let xs: Vec<f64> = levels.iter().map(|l| l.n as f64).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.median).collect();
    let (slope, intercept, residual) = loglog_fit(&xs, &ys)?;
    for l in levels.iter_mut() {
        l.fit = (intercept + slope * (l.n as f64).ln()).exp();
    }
    let report = RateReport {
        metric: cfg.metric,
        p: cfg.p,
        reference: reference.as_ref().map(|r| ReferenceInfo {
            resolution: r.resolution,
            atoms: r.measure.len(),
            mesh: r.mesh,
        }),
        levels,
        slope,
        intercept,
        residual,
        fallback_rate: if completed == 0 { 0.0 } else { total_fallbacks as f64 / completed as f64 },
        records: outcomes.iter().map(|o| o.record.clone()).collect(),
    };
    let timings = Timings {
        threads: rayon::current_num_threads(),
        total_seconds: start.elapsed().as_secs_f64(),
        runs: outcomes.into_iter().map(|o| o.timing).collect(),
    };
    Ok((report, timings))
}

pub fn rates_csv(report: &RateReport) -> Vec<u8> {
    let header: Vec<String> = ["n", "median", "q25", "q75", "fit"].iter().map(|s| s.to_string()).collect();
    let rows = report.levels.iter().map(|l| {
        vec![l.n.to_string(), fmt_f64(l.median), fmt_f64(l.q25), fmt_f64(l.q75), fmt_f64(l.fit)]
    });
    csv_bytes(&header, rows)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn replicates_csv(report: &RateReport) -> Vec<u8> {
    let header: Vec<String> =
        ["n", "replicate", "seed", "value", "fallback", "vol_mass", "transport_cell", "transport_bound", "error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    let rows = report.records.iter().map(|r| {
        vec![
            r.n.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(r.value),
            r.fallback.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.vol_mass),
            opt(r.transport_cell),
            opt(r.transport_bound),
            r.error.as_ref().map(|e| format!("{}/{}", e.stage, e.kind)).unwrap_or_default(),
        ]
    });
    csv_bytes(&header, rows)
}

/// `-0.5 -> "−0.50"` with a typographic minus.
pub fn slope_label(slope: f64) -> String {
    let s = format!("{slope:.2}");
    let s = if s == "-0.00" { "0.00".to_string() } else { s };
    s.replace('-', "\u{2212}")
}

/// Log-log scatter of the medians with interquartile bars and the fitted
/// line.
pub fn rates_svg(report: &RateReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const L: f64 = 80.0;
    const R: f64 = 30.0;
    const T: f64 = 40.0;
    const B: f64 = 60.0;
    let lx: Vec<f64> = report.levels.iter().map(|l| (l.n as f64).ln()).collect();
    let mut ys: Vec<f64> = Vec::new();
    for l in &report.levels {
        for v in [l.median, l.q25, l.q75, l.fit] {
            if v > 0.0 && v.is_finite() {
                ys.push(v.ln());
            }
        }
    }
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ys);
    let px = |x: f64| L + (x - x0) / (x1 - x0) * (W - L - R);
    let py = |y: f64| H - B - (y - y0) / (y1 - y0) * (H - T - B);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<line x1=\"{L}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        H - B,
        W - R,
        H - B
    ));
    s.push_str(&format!("<line x1=\"{L}\" y1=\"{T}\" x2=\"{L}\" y2=\"{:.2}\" stroke=\"black\"/>\n", H - B));
    for l in &report.levels {
        let x = px((l.n as f64).ln());
        s.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            H - B + 18.0,
            l.n
        ));
    }
    for k in 0..=4 {
        let y = y0 + (y1 - y0) * k as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{:.3e}</text>\n",
            L - 6.0,
            py(y) + 4.0,
            y.exp()
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\">n</text>\n",
        0.5 * (L + W - R),
        H - 15.0
    ));
    let ylabel = match report.metric {
        Metric::Wasserstein => format!("median W{} risk", report.p),
        Metric::VolumeMassError => "median volume mass error".to_string(),
    };
    s.push_str(&format!(
        "<text x=\"18\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{ylabel}</text>\n",
        0.5 * (T + H - B),
        0.5 * (T + H - B)
    ));
    for l in &report.levels {
        if !(l.q25 > 0.0 && l.q75 > 0.0) {
            continue;
        }
        let x = px((l.n as f64).ln());
        s.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"gray\"/>\n",
            py(l.q25.ln()),
            py(l.q75.ln())
        ));
    }
    if let (Some(a), Some(b)) = (report.levels.first(), report.levels.last()) {
        s.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
            px((a.n as f64).ln()),
            py(a.fit.ln()),
            px((b.n as f64).ln()),
            py(b.fit.ln())
        ));
    }
    for l in &report.levels {
        if l.median > 0.0 {
            s.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"black\"/>\n",
                px((l.n as f64).ln()),
                py(l.median.ln())
            ));
        }
    }
    s.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"end\">slope {}</text>\n",
        W - R,
        T - 12.0,
        slope_label(report.slope)
    ));
    s.push_str("</svg>\n");
    s
}

fn span(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}

/// File names written by [`emit_plots`], in order.
pub const REPORT_FILES: [&str; 4] = ["rates.csv", "rates.svg", "report.json", "replicates.csv"];

/// Writes `rates.csv`, `rates.svg`, `report.json` and `replicates.csv`.
pub fn emit_plots(report: &RateReport, dir: &Path) -> CliResult<()> {
    write_bytes(&dir.join("rates.csv"), &rates_csv(report))?;
    write_bytes(&dir.join("rates.svg"), rates_svg(report).as_bytes())?;
    write_bytes(&dir.join("report.json"), &to_json_bytes(report))?;
    write_bytes(&dir.join("replicates.csv"), &replicates_csv(report))
}

use manidens_cli::commands::{replay, run_experiment_into, DETERMINISTIC_FILES};
use manidens_cli::config::{ExperimentConfig, ManifoldConfig, Metric, Shape};
use manidens_cli::experiment::{emit_plots, loglog_fit, quantile, rates_svg, run_rate_experiment, slope_label};
use manidens_cli::formats::read_json;
use manidens_cli::manifest::RunManifest;
use manidens_cli::CliError;
use manidens_core::density::BandwidthSchedule;

fn small() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ManifoldConfig::new(Shape::Circle));
    cfg.n = vec![250, 500];
    cfg.replicates = 3;
    cfg.m = Some(2);
    cfg.seed = 5;
    cfg.schedule = BandwidthSchedule { c_eps: 10.0, c_h: 40.0, ..BandwidthSchedule::default() };
    cfg
}

#[test]
fn label_uses_unicode_minus() {
    assert_eq!(slope_label(-0.5), "\u{2212}0.50");
    assert_eq!(slope_label(-0.498), "\u{2212}0.50");
    assert_eq!(slope_label(0.25), "0.25");
}

#[test]
fn fit_recovers_power_law() {
    let x: Vec<f64> = [100.0, 200.0, 400.0, 800.0].to_vec();
    let y: Vec<f64> = x.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
    let (s, c, r) = loglog_fit(&x, &y).unwrap();
    assert!((s + 0.5).abs() < 1e-12);
    assert!((c - 3f64.ln()).abs() < 1e-12);
    assert!(r < 1e-12);
    assert!(loglog_fit(&[1.0], &[1.0]).is_err());
}

#[test]
fn quantiles_interpolate() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.5), 2.5);
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert_eq!(quantile(&v, 0.25), 1.75);
}

#[test]
fn experiment_outputs_and_replay() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let manifest = run_experiment_into(&cfg, None, &out).unwrap();
    for f in DETERMINISTIC_FILES.iter().chain(&["timings.json", "manifest.json"]) {
        assert!(out.join(f).exists(), "{f}");
    }
    let rates = std::fs::read_to_string(out.join("rates.csv")).unwrap();
    assert_eq!(rates.lines().count(), 1 + cfg.n.len());
    assert!(rates.starts_with("n,"));
    let reps = std::fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + cfg.n.len() * cfg.replicates);

    let report: serde_json::Value = read_json(&out.join("report.json")).unwrap();
    let slope = report["slope"].as_f64().unwrap();
    let svg = std::fs::read_to_string(out.join("rates.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains(&format!("slope {}", slope_label(slope))));

    // re-emitting the same report gives the same bytes
    let (rep, _) = run_rate_experiment(&cfg).unwrap();
    let again = dir.path().join("again");
    emit_plots(&rep, &again).unwrap();
    for f in ["rates.csv", "rates.svg", "report.json", "replicates.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
    assert_eq!(rates_svg(&rep), svg);

    let loaded: RunManifest = read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(loaded.outputs, manifest.outputs);
    assert!(loaded.config_intact());
    let bad = replay(&loaded, &dir.path().join("replay")).unwrap();
    assert!(bad.is_empty(), "{bad:?}");

    let mut tampered = loaded.clone();
    tampered.config.seed += 1;
    assert!(!tampered.config_intact());
    assert!(replay(&tampered, &dir.path().join("tampered")).is_err());
}

#[test]
fn failures_above_cap_abort() {
    let mut cfg = small();
    // default constants leave almost every neighborhood empty
    cfg.schedule = BandwidthSchedule::default();
    match run_rate_experiment(&cfg) {
        Err(CliError::TooManyFailures { n, failed, total }) => {
            assert_eq!(n, 250);
            assert_eq!(total, 3);
            assert!(failed >= 1);
        }
        other => panic!("expected TooManyFailures, got {other:?}"),
    }
}

#[test]
fn reference_must_be_fine_enough() {
    let mut cfg = small();
    cfg.reference_resolution = Some(1000);
    let e = run_rate_experiment(&cfg).unwrap_err();
    assert_eq!(e.report().key.as_deref(), Some("reference_resolution"));
}

#[test]
fn volume_mass_error_decays() {
    let mut cfg = small();
    cfg.metric = Metric::VolumeMassError;
    cfg.k = 2;
    cfg.m = Some(2);
    cfg.n = vec![250, 500, 1000, 2000, 4000];
    cfg.replicates = 5;
    let (rep, _) = run_rate_experiment(&cfg).unwrap();
    assert!(rep.reference.is_none());
    assert!(rep.slope <= -0.5, "slope {} medians {:?}", rep.slope, rep.levels.iter().map(|l| l.median).collect::<Vec<_>>());
}

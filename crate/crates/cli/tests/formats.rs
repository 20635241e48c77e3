use std::path::Path;

use manidens_cli::formats::*;
use manidens_cli::CliError;
use manidens_core::charts::{farthest_point_sampling, fit_charts, ChartParams};
use manidens_core::geometry::{sample_manifold, DensityKind, DensitySpec, ManifoldKind, ManifoldSpec};
use manidens_core::kernels::build_kernel;
use manidens_core::pou::PartitionOfUnity;
use manidens_core::volume::estimate_volume;
use manidens_core::{PointSet, Sequential, WeightedMeasure};
use proptest::prelude::*;

fn circle() -> ManifoldSpec {
    ManifoldSpec::rotated(ManifoldKind::Circle { radius: 1.0 }, 3, 5).unwrap()
}

fn format_line(e: CliError) -> usize {
    match e {
        CliError::Format { line, .. } => line,
        other => panic!("expected a format error, got {other}"),
    }
}

proptest! {
    #[test]
    fn floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let s = fmt_f64(x);
        let y: f64 = s.parse().unwrap();
        prop_assert!(y == x);
        prop_assert!(!s.contains(',') && !s.ends_with(".0"));
    }

    #[test]
    fn measures_round_trip(
        pts in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..40),
        ws in proptest::collection::vec(-1.0f64..1.0, 40),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let flat: Vec<f64> = pts.iter().flat_map(|&(a, b)| [a, b]).collect();
        let support = PointSet::from_flat(2, flat).unwrap();
        let m = WeightedMeasure::new(support, ws[..pts.len()].to_vec()).unwrap();
        let path = dir.path().join("m.csv");
        write_measure(&path, &m, &MeasureSidecar { mass: m.mass, nonnegative: m.nonnegative, ..Default::default() }).unwrap();
        let back = read_measure(&path).unwrap();
        prop_assert_eq!(back.support, m.support);
        prop_assert_eq!(back.weights, m.weights);
        prop_assert_eq!(back.nonnegative, m.nonnegative);
    }
}

#[test]
fn float_text_is_plain() {
    assert_eq!(fmt_f64(1.0), "1");
    assert_eq!(fmt_f64(-0.0), "0");
    assert_eq!(fmt_f64(0.25), "0.25");
    assert_eq!(fmt_f64(-2.5), "-2.5");
}

#[test]
fn cloud_round_trip_rebuilds_truth() {
    let dir = tempfile::tempdir().unwrap();
    let spec = circle();
    let cloud = sample_manifold(&spec, &DensitySpec::uniform(&spec), 200, 3).unwrap();
    let path = dir.path().join("cloud.csv");
    let side = CloudSidecar { manifold: spec.clone(), density: DensityKind::Uniform, n: 200, seed: 3, gamma: 0.0 };
    write_cloud(&path, &cloud, &side).unwrap();
    assert_eq!(read_cloud_sidecar(&path).unwrap(), Some(side));
    let back = read_cloud(&path, Some(&spec)).unwrap();
    assert_eq!(back.points, cloud.points);
    let (t0, t1) = (cloud.truth.unwrap(), back.truth.unwrap());
    assert_eq!(t0.base, t1.base);
    assert_eq!(t0.noise, t1.noise);
    for (a, b) in t0.frames.iter().zip(&t1.frames) {
        // frames are defined up to sign only through the parameter
        assert!((a.abs() - b.abs()).abs() < 1e-9);
    }
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("x0,x1,x2,y0,y1,y2,z0,z1,z2\n"));
    let plain = read_cloud(&path, None).unwrap();
    assert!(plain.truth.is_none());
}

fn fitted(dir: &Path) -> (PointSet, ChartsFile, std::path::PathBuf) {
    let spec = circle();
    let cloud = sample_manifold(&spec, &DensitySpec::uniform(&spec), 800, 1).unwrap();
    let eps = 0.15;
    let centers = farthest_point_sampling(&cloud.points, 7.0 * eps / 24.0);
    let charts = fit_charts(&cloud.points, &centers, &ChartParams::new(1, 3, eps, 1.0 / eps), &Sequential).unwrap();
    let file = ChartsFile { d: 1, m: 3, epsilon: eps, ell: 1.0 / eps, charts };
    let path = dir.join("charts.json");
    write_charts(&path, &file).unwrap();
    (cloud.points, file, path)
}

#[test]
fn charts_and_volume_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (points, file, path) = fitted(dir.path());
    let back = read_charts(&path).unwrap();
    assert_eq!(back, file);

    let centers: Vec<usize> = file.charts.iter().map(|c| c.center_index).collect();
    let pou = PartitionOfUnity::new(&points, centers, file.epsilon).unwrap();
    let vol = estimate_volume(&file.charts, &pou, 0, &Sequential).unwrap();
    let vpath = dir.path().join("volume.csv");
    write_volume(&vpath, &vol, pou.len()).unwrap();
    let vb = read_volume(&vpath).unwrap();
    assert_eq!(vb.nodes, vol.nodes);
    assert_eq!(vb.weights, vol.weights);
    assert_eq!(vb.patch, vol.patch);
    assert_eq!(vb.provenance, vol.provenance);
    assert!((vb.total_mass - vol.total_mass).abs() <= 1e-12 * vol.total_mass);
}

#[test]
fn non_orthonormal_chart_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, path) = fitted(dir.path());
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let basis = &mut v["charts"][0]["projector"]["basis"];
    basis[0] = serde_json::json!(basis[0].as_f64().unwrap() * 2.0 + 1.0);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    let e = read_charts(&path).unwrap_err();
    assert!(e.to_string().contains("chart 0"), "{e}");
}

#[test]
fn kernel_round_trip_recertifies() {
    let dir = tempfile::tempdir().unwrap();
    let k = build_kernel(2, 2, 0.2).unwrap();
    let path = dir.path().join("kernel.json");
    write_kernel(&path, &k).unwrap();
    let back = read_kernel(&path).unwrap();
    assert_eq!(back.to_record(), k.to_record());
    for r in [0.0, 0.1, 0.37, 0.8, 0.99] {
        assert_eq!(back.profile(r), k.profile(r));
    }

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["certificate"]["mass"] = serde_json::json!(0.5);
    std::fs::write(&path, serde_json::to_vec(&v).unwrap()).unwrap();
    assert!(read_kernel(&path).is_err());
}

#[test]
fn malformed_csv_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x0,x1,weight\n0,1,0.5\n1,2\n").unwrap();
    assert_eq!(format_line(read_measure(&path).unwrap_err()), 3);
    std::fs::write(&path, "x0,x1,weight\n0,1,0.5\n1,2,0.25\n3,abc,0.25\n").unwrap();
    assert_eq!(format_line(read_measure(&path).unwrap_err()), 4);
    std::fs::write(&path, "x0,x1,weight\n0,NaN,1\n").unwrap();
    assert_eq!(format_line(read_measure(&path).unwrap_err()), 2);
    std::fs::write(&path, "a,b\n0,1\n").unwrap();
    assert_eq!(format_line(read_measure(&path).unwrap_err()), 1);
}

#[test]
fn measure_without_weights_is_empirical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    std::fs::write(&path, "x0\n0\n1\n2\n3\n").unwrap();
    let m = read_measure(&path).unwrap();
    assert_eq!(m.weights, vec![0.25; 4]);
}

#[test]
fn indices_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.csv");
    write_indices(&path, "index", &[4, 0, 17]).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "index\n4\n0\n17\n");
    assert_eq!(read_indices(&path, "index").unwrap(), vec![4, 0, 17]);
    std::fs::write(&path, "index\n1\n2.5\n").unwrap();
    assert_eq!(format_line(read_indices(&path, "index").unwrap_err()), 3);
}

//! Fixed-instance checks against closed forms, brute force and frozen
//! reference values.

use std::f64::consts::{PI, TAU};

use manidens_core::charts::{chart_eval, Chart};
use manidens_core::density::{estimate_density, node_density, rho_hat, BandwidthSchedule};
use manidens_core::geometry::{
    reference_measure, sample_manifold, volume_quadrature, DensityKind, DensitySpec, ManifoldKind, ManifoldSpec,
};
use manidens_core::kernels::build_kernel;
use manidens_core::numerics::{Projector, SymTensor};
use manidens_core::pipeline::{fit_patches, run_pipeline, EstimatorKind, NoObserver, PipelineConfig, ResolvedParams};
use manidens_core::pou::build_pou;
use manidens_core::rng::seeded_rng;
use manidens_core::volume::{estimate_volume, normalize};
use manidens_core::wasserstein::{coarsen_pair, wasserstein, TransportProblem};
use manidens_core::{Error, PointSet, Sequential, Stage, WeightedMeasure};
use rand::Rng;

fn circle() -> ManifoldSpec {
    ManifoldSpec::new(ManifoldKind::Circle { radius: 1.0 }, 2).unwrap()
}

fn sphere() -> ManifoldSpec {
    ManifoldSpec::new(ManifoldKind::Sphere2 { radius: 1.0 }, 3).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn w1(a: &WeightedMeasure, b: &WeightedMeasure) -> f64 {
    let (ca, cb) = coarsen_pair(a, b, 1e-3, 2000).unwrap();
    wasserstein(&TransportProblem::new(&ca.measure, &cb.measure, 1)).unwrap()
}

fn circle_cfg() -> PipelineConfig {
    let mut cfg = PipelineConfig::new(circle());
    cfg.m = Some(2);
    cfg.schedule = BandwidthSchedule { c_eps: 10.0, c_h: 40.0, ..BandwidthSchedule::default() };
    cfg
}

/// Frozen outputs; any change here breaks replay of stored manifests.
#[test]
fn rng_golden_draws() {
    let mut rng = seeded_rng(42, 0);
    let got: Vec<u64> = (0..4).map(|_| rng.random::<u64>()).collect();
    assert_eq!(got, [9482535800248027256, 7566832397956113305, 1804347359131428821, 3088291667719571736]);
    let mut other = seeded_rng(42, 1);
    assert_ne!(got[0], other.random::<u64>());
    let c = sample_manifold(&circle(), &DensitySpec::uniform(&circle()), 3, 42).unwrap();
    let expect = [
        -0.9961063508213809,
        -0.08815972920394044,
        -0.8449965873691803,
        0.5347716964597503,
        0.8170141706736558,
        0.5766175898448108,
    ];
    for (a, b) in c.points.as_flat().iter().zip(expect) {
        assert!((a - b).abs() <= 1e-15, "{a} vs {b}");
    }
}

#[test]
fn sphere_sample_mean_concentrates() {
    let spec = sphere();
    let ds = DensitySpec::uniform(&spec);
    let norms: Vec<f64> = (0..9)
        .map(|seed| {
            let c = sample_manifold(&spec, &ds, 1000, seed).unwrap();
            let mut m = [0.0; 3];
            for p in c.points.rows() {
                for k in 0..3 {
                    m[k] += p[k] / 1000.0;
                }
            }
            (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
        })
        .collect();
    assert!(median(norms) <= 0.1);
}

#[test]
fn trig_density_half_circle_mass() {
    let spec = circle();
    let ds = DensitySpec::new(DensityKind::TrigPerturbed { amplitude: 0.5, frequency: 1 }, &spec).unwrap();
    let c = sample_manifold(&spec, &ds, 100_000, 1).unwrap();
    let right = c.points.rows().filter(|p| p[0] > 0.0).count() as f64 / 1e5;
    // int_{-pi/2}^{pi/2} (1 + cos(phi) / 2) / (2 pi) dphi
    let exact = 0.5 + 1.0 / TAU;
    assert!((right - exact).abs() <= 0.01, "{right} vs {exact}");
    let upper = c.points.rows().filter(|p| p[1] > 0.0).count() as f64 / 1e5;
    assert!((upper - 0.5).abs() <= 0.01);
}

#[test]
fn sphere_reference_refines() {
    let spec = sphere();
    let ds = DensitySpec::uniform(&spec);
    let coarse = reference_measure(&spec, &ds, 50).unwrap().measure;
    let d: Vec<f64> = [200, 800, 3200]
        .iter()
        .map(|&r| w1(&reference_measure(&spec, &ds, r).unwrap().measure, &coarse))
        .collect();
    assert!(d[0] >= d[1] && d[1] >= d[2], "{d:?}");
    let fine = reference_measure(&spec, &ds, 3200).unwrap().measure;
    let e: Vec<f64> = [100, 400, 1600]
        .iter()
        .map(|&r| w1(&reference_measure(&spec, &ds, r).unwrap().measure, &fine))
        .collect();
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

#[test]
fn odd_moments_vanish_by_evenness() {
    let k = build_kernel(2, 4, 0.1).unwrap();
    let c = k.certificate();
    for i in [0, 2] {
        assert!(c.moments[i].abs() <= 1e-10, "moment {}: {}", i + 1, c.moments[i]);
    }
}

/// `int_{R^d} K_h` by midpoint rule in polar form.
fn radial_mass(k: &manidens_core::kernels::RadialKernel, d: usize, h: f64) -> f64 {
    let steps = 200_000;
    let area = match d {
        1 => 2.0,
        2 => TAU,
        3 => 4.0 * PI,
        _ => unreachable!(),
    };
    let dr = h / steps as f64;
    (0..steps)
        .map(|i| {
            let r = (i as f64 + 0.5) * dr;
            k.eval_scaled_norm(h, r) * r.powi(d as i32 - 1) * dr
        })
        .sum::<f64>()
        * area
}

#[test]
fn scaled_kernels_have_unit_mass() {
    for d in 1..=3 {
        let k = build_kernel(d, 2, 0.3).unwrap();
        for h in [0.1, 1.0] {
            let m = radial_mass(&k, d, h);
            assert!((m - 1.0).abs() <= 1e-6, "d={d} h={h}: {m}");
        }
    }
}

#[test]
fn flat_chart_is_isometric() {
    let chart = Chart {
        center_index: 0,
        center: vec![1.0, 2.0, 3.0],
        projector: Projector::coordinate(3, 2),
        tensors: vec![SymTensor::zeros(2, 2, 3).unwrap()],
        epsilon: 1.0,
        ell: 1.0,
        objective: 0.0,
        trace: vec![],
        neighbors: 0,
        warnings: vec![],
    };
    let mut rng = seeded_rng(3, 0);
    for _ in 0..50 {
        let v = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
        let e = chart_eval(&chart, &v).unwrap();
        assert_eq!(e.jacobian, 1.0);
        assert_eq!(e.point, vec![1.0 + v[0], 2.0 + v[1], 3.0]);
    }
}

#[test]
fn dense_circle_pou_sums_with_few_terms() {
    let spec = circle();
    let c = sample_manifold(&spec, &DensitySpec::uniform(&spec), 3000, 2).unwrap();
    let pou = build_pou(&c.points, 0.1).unwrap();
    let mut worst = 0usize;
    for y in c.points.rows() {
        let all = pou.eval_all(y).unwrap();
        let s: f64 = all.iter().map(|p| p.1).sum();
        assert!((s - 1.0).abs() <= 1e-12);
        worst = worst.max(all.len());
    }
    assert!(worst <= 100, "{worst} active terms");
}

#[test]
fn circle_volume_dense_samples() {
    let spec = circle();
    let ds = DensitySpec::uniform(&spec);
    let params = ResolvedParams { n: 4000, d: 1, m: 2, k: 2, epsilon: 0.15, h: 0.15, ell: 1.0 / 0.15, gamma: 0.0 };
    let errs: Vec<f64> = (0..10)
        .map(|seed| {
            let c = sample_manifold(&spec, &ds, 4000, seed).unwrap();
            let (charts, pou) = fit_patches(&c.points, &params, &Sequential, &mut NoObserver).unwrap();
            let v = estimate_volume(&charts, &pou, seed, &Sequential).unwrap();
            (v.total_mass - TAU).abs() / TAU
        })
        .collect();
    assert!(median(errs) <= 0.02);
}

#[test]
fn normalized_volume_near_uniform_reference() {
    let cfg = circle_cfg();
    let params = ResolvedParams::new(&cfg, 5000);
    let c = sample_manifold(&cfg.manifold, &DensitySpec::uniform(&cfg.manifold), 5000, 4).unwrap();
    let (charts, pou) = fit_patches(&c.points, &params, &Sequential, &mut NoObserver).unwrap();
    let v = estimate_volume(&charts, &pou, 4, &Sequential).unwrap();
    let est = normalize(&v).unwrap();
    assert!((est.mass - 1.0).abs() <= 1e-12);
    let twice = est.normalized().unwrap();
    for (a, b) in est.weights.iter().zip(&twice.weights) {
        assert!((a - b).abs() <= 1e-13 * a.abs().max(1e-300));
    }
    let reference = reference_measure(&cfg.manifold, &DensitySpec::uniform(&cfg.manifold), 2000).unwrap().measure;
    let d = w1(&est, &reference);
    assert!(d <= 0.05, "{d}");
}

#[test]
fn flat_line_smoothing_is_one() {
    let k = build_kernel(1, 0, 0.1).unwrap();
    let n = 20001;
    let mut p = PointSet::new(1);
    for i in 0..n {
        p.push(&[-1.0 + 2.0 * i as f64 / (n - 1) as f64]);
    }
    let w = vec![2.0 / (n - 1) as f64; n];
    let nodes = WeightedMeasure::new(p, w).unwrap();
    for x in [0.0, 0.3, -0.42] {
        let r = rho_hat(&nodes, &k, 0.1, &[x]).unwrap();
        assert!((r - 1.0).abs() <= 1e-6, "{r}");
    }
}

#[test]
fn circle_smoothing_error_scales_with_h() {
    let spec = circle();
    let nodes = volume_quadrature(&spec, 20000).unwrap();
    let k = build_kernel(1, 2, 1.0).unwrap();
    let dev = |h: f64| {
        (0..16)
            .map(|i| {
                let t = i as f64 * TAU / 16.0 + 0.01;
                (rho_hat(&nodes, &k, h, &[t.cos(), t.sin()]).unwrap() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    };
    let hs = [0.4, 0.2, 0.1, 0.05];
    let c = dev(hs[0]) / hs[0];
    for &h in &hs[1..] {
        assert!(dev(h) <= c * h + 1e-9, "h = {h}: {} > {}", dev(h), c * h);
    }
}

#[test]
fn single_sample_gives_normalized_bump() {
    let k = build_kernel(1, 0, 0.1).unwrap();
    let h = 0.2;
    let n = 4001;
    let mut p = PointSet::new(1);
    for i in 0..n {
        p.push(&[-1.0 + 2.0 * i as f64 / (n - 1) as f64]);
    }
    let nodes = WeightedMeasure::new(p, vec![2.0 / (n - 1) as f64; n]).unwrap();
    let x1 = 0.123;
    let samples = WeightedMeasure::empirical(PointSet::from_flat(1, vec![x1]).unwrap()).unwrap();
    let est = estimate_density(&samples, &nodes, &k, h, &Sequential).unwrap();
    let rho: f64 = nodes.support.rows().zip(&nodes.weights).map(|(z, w)| w * k.eval_scaled_norm(h, (z[0] - x1).abs())).sum();
    for (z, (&w, &e)) in nodes.support.rows().zip(nodes.weights.iter().zip(&est.measure.weights)) {
        let direct = w * k.eval_scaled_norm(h, (z[0] - x1).abs()) / rho;
        assert!((e - direct).abs() <= 1e-15, "{e} vs {direct}");
    }
    assert!((est.measure.mass - 1.0).abs() <= 1e-12);
}

#[test]
fn fallback_occurs_for_hostile_settings() {
    let mut cfg = PipelineConfig::new(circle());
    cfg.k = 4;
    cfg.beta = Some(50.0);
    cfg.schedule = BandwidthSchedule { c_h: 0.5, ..BandwidthSchedule::default() };
    cfg.estimator = EstimatorKind::KnownManifold { resolution: 400 };
    let kernel = cfg.build_kernel().unwrap();
    let mut fell = 0;
    for seed in 0..100 {
        let out = run_pipeline(&cfg, &kernel, 6, seed, &Sequential, &mut NoObserver).unwrap();
        assert!((out.estimate.mass - 1.0).abs() <= 1e-9);
        fell += out.diagnostics.fallback as usize;
    }
    assert!(fell > 0);
}

#[test]
fn tuned_circle_rarely_falls_back() {
    let cfg = circle_cfg();
    let kernel = cfg.build_kernel().unwrap();
    let mut ok = 0;
    for seed in 0..100 {
        let out = run_pipeline(&cfg, &kernel, 500, seed, &Sequential, &mut NoObserver).unwrap();
        assert!((out.estimate.mass - 1.0).abs() <= 1e-9);
        ok += !out.diagnostics.fallback as usize;
    }
    assert!(ok >= 95, "{ok} of 100 without fallback");
}

#[test]
fn sparse_sample_fails_cleanly() {
    let cfg = PipelineConfig::new(circle());
    let kernel = cfg.build_kernel().unwrap();
    let e = run_pipeline(&cfg, &kernel, 20, 0, &Sequential, &mut NoObserver).unwrap_err();
    assert_eq!(e.stage(), Some(Stage::Charts));
    assert!(matches!(e.root(), Error::DegenerateNeighborhood { .. }), "{e}");
}

#[test]
fn transport_closed_forms() {
    let line = |xs: &[f64]| WeightedMeasure::empirical(PointSet::from_flat(1, xs.to_vec()).unwrap()).unwrap();
    let a = line(&[0.0, 1.0]);
    let b = line(&[0.5, 1.5]);
    assert!((wasserstein(&TransportProblem::new(&a, &b, 1)).unwrap() - 0.5).abs() <= 1e-12);
    let t = 0.731;
    let c = line(&[0.2, 0.9, 1.7]);
    let ct = line(&[0.2 + t, 0.9 + t, 1.7 + t]);
    assert!((wasserstein(&TransportProblem::new(&c, &ct, 1)).unwrap() - t).abs() <= 1e-12);
    let u = line(&[0.0, 1.0, 2.0]);
    assert!(wasserstein(&TransportProblem::new(&u, &u, 2)).unwrap() <= 1e-12);
    // crossing pair: matchings cost (|0-3| + |1-2|)/2 = 2 and (|0-2| + |1-3|)/2 = 2
    let x = line(&[0.0, 1.0]);
    let y = line(&[3.0, 2.0]);
    assert!((wasserstein(&TransportProblem::new(&x, &y, 1)).unwrap() - 2.0).abs() <= 1e-12);
    let p2 = wasserstein(&TransportProblem::new(&x, &y, 2)).unwrap();
    // p = 2: min(sqrt((9 + 1) / 2), sqrt((4 + 4) / 2)) = 2
    assert!((p2 - 2.0).abs() <= 1e-12, "{p2}");
}

#[test]
fn uniform_density_stays_in_band() {
    let mut cfg = circle_cfg();
    cfg.estimator = EstimatorKind::KnownManifold { resolution: 2000 };
    // every node in band needs n h / ln n = 200
    cfg.schedule.c_h = 200.0;
    let kernel = cfg.build_kernel().unwrap();
    let f = 1.0 / TAU;
    for seed in 0..5 {
        let out = run_pipeline(&cfg, &kernel, 4000, seed, &Sequential, &mut NoObserver).unwrap();
        let nodes = volume_quadrature(&cfg.manifold, 2000).unwrap();
        let dens = node_density(&out.raw, &nodes);
        let lo = dens.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = dens.iter().copied().fold(0.0, f64::max);
        assert!(lo >= f / 2.0 && hi <= 2.0 * f, "seed {seed}: [{lo}, {hi}]");
    }
}

use std::collections::BTreeSet;

use manidens_cli::config::{config_bytes, Metric, SCHEMA_PATH};
use manidens_cli::{parse_config, CliError};
use manidens_core::geometry::DensityKind;
use manidens_core::pipeline::EstimatorKind;

fn key_of(e: CliError) -> String {
    e.report().key.unwrap_or_default()
}

#[test]
fn minimal_config_takes_defaults() {
    let cfg = parse_config(r#"{"manifold": "circle"}"#).unwrap();
    assert_eq!(cfg.n, vec![250, 500, 1000, 2000, 4000]);
    assert_eq!(cfg.replicates, 20);
    assert_eq!(cfg.k, 2);
    assert_eq!(cfg.p, 1);
    assert_eq!(cfg.metric, Metric::Wasserstein);
    assert_eq!(cfg.density, DensityKind::Uniform);
    assert_eq!(cfg.estimator, EstimatorKind::UnknownManifold);
    assert_eq!(cfg.reference_resolution(), 16000);
    assert_eq!(cfg.schedule.c_h, 1.0);
    let spec = cfg.spec().unwrap();
    assert_eq!(spec.ambient_dim, 2);
}

#[test]
fn string_and_object_manifolds_agree() {
    let a = parse_config(r#"{"manifold": "sphere2"}"#).unwrap();
    let b = parse_config(r#"{"manifold": {"kind": "sphere2"}}"#).unwrap();
    assert_eq!(a, b);
}

#[test]
fn invalid_bandwidth_constant_is_keyed() {
    let e = parse_config(r#"{"manifold": "circle", "schedule": {"c_h": -1}}"#).unwrap_err();
    assert_eq!(e.stage(), "config");
    assert_eq!(key_of(e), "schedule.c_h");
}

#[test]
fn unknown_key_is_rejected() {
    let e = parse_config(r#"{"manifold": "circle", "foo": 1}"#).unwrap_err();
    assert_eq!(key_of(e), "foo");
    let e = parse_config(r#"{"manifold": "circle", "schedule": {"c_x": 1}}"#).unwrap_err();
    assert!(key_of(e).starts_with("schedule"));
}

#[test]
fn type_error_reports_path() {
    let e = parse_config(r#"{"manifold": "circle", "n": [250, "x"]}"#).unwrap_err();
    assert_eq!(key_of(e), "n[1]");
}

#[test]
fn semantic_checks() {
    let cases = [
        (r#"{"manifold": "circle", "n": [500, 250]}"#, "n"),
        (r#"{"manifold": "circle", "replicates": 0}"#, "replicates"),
        (r#"{"manifold": "circle", "p": 3}"#, "p"),
        (r#"{"manifold": "circle", "m": 1}"#, "m"),
        (r#"{"manifold": "circle", "beta": -0.1}"#, "beta"),
        (r#"{"manifold": {"kind": "circle", "major": 2}}"#, "manifold.major"),
        (r#"{"manifold": {"kind": "torus2", "major": 1, "minor": 2}}"#, "manifold"),
    ];
    for (text, key) in cases {
        let e = parse_config(text).unwrap_err();
        let k = key_of(e);
        assert!(k.starts_with(key), "{text}: key {k}, expected {key}");
    }
}

#[test]
fn round_trip_is_stable() {
    let text = r#"{
        "manifold": {"kind": "torus2", "major": 3, "minor": 1, "ambient_dim": 5, "embedding": {"kind": "rotated", "seed": 4}},
        "density": {"kind": "trig_perturbed", "amplitude": 0.3, "frequency": 2},
        "estimator": {"kind": "known_manifold", "resolution": 900},
        "n": [100, 200],
        "replicates": 3,
        "seed": 9,
        "schedule": {"c_h": 2.5, "c_eps": 4, "c_ell": 1, "gamma_factor": 0.1},
        "k": 3,
        "m": 2,
        "beta": 0.2,
        "p": 2,
        "metric": "volume_mass_error"
    }"#;
    let cfg = parse_config(text).unwrap();
    let bytes = config_bytes(&cfg);
    let again = parse_config(std::str::from_utf8(&bytes).unwrap()).unwrap();
    assert_eq!(cfg, again);
    assert_eq!(bytes, config_bytes(&again));
}

#[test]
fn schema_lists_every_serialized_key() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{root}{SCHEMA_PATH}")).unwrap()).unwrap();
    let props: BTreeSet<String> = schema["properties"].as_object().unwrap().keys().cloned().collect();
    let cfg = parse_config(r#"{"manifold": "circle"}"#).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&config_bytes(&cfg)).unwrap();
    let keys: BTreeSet<String> = v.as_object().unwrap().keys().cloned().collect();
    assert!(keys.is_subset(&props), "{:?}", keys.difference(&props).collect::<Vec<_>>());
    let sched: BTreeSet<String> = schema["$defs"]["schedule"]["properties"].as_object().unwrap().keys().cloned().collect();
    let vs: BTreeSet<String> = v["schedule"].as_object().unwrap().keys().cloned().collect();
    assert_eq!(sched, vs);
    assert_eq!(schema["required"], serde_json::json!(["manifold"]));
}

use std::collections::BTreeMap;
use std::f64::consts::PI;

use heatpencil_core::io::{read_json, write_json};
use heatpencil_core::model::HeatProblem;
use heatpencil_core::pipeline::{self, IdentificationResult, PipelineConfig};
use heatpencil_core::{benchmark, Error};

fn problem(alpha: f64, coeffs: &[(usize, f64)]) -> HeatProblem {
    let map: BTreeMap<usize, f64> = coeffs.iter().copied().collect();
    HeatProblem::new(alpha, map, 0.3, 0.8, 1.3, 1.0).unwrap()
}

#[test]
fn single_cosine_mode_is_indexed_and_recovered() {
    let cfg = PipelineConfig::default();
    let p = problem(4.0, &[(2, 1.0)]);
    let traces = pipeline::simulate_traces(&p, &cfg).unwrap();
    let res = pipeline::identify(&traces, &cfg, None).unwrap();
    assert_eq!(res.free_modes.len(), 1);
    assert_eq!(res.free_modes[0].n, 2);
    assert!((res.free_modes[0].lambda - 16.0 * PI * PI).abs() < 1e-8);
    assert!((res.alpha_hat - 4.0).abs() < 1e-6);
    for x in [0.0, 0.25, 0.5, 0.9] {
        let want = (2.0 * PI * x).cos();
        assert!((res.initial_state(x) - want).abs() < 1e-2, "x = {x}");
    }
}

#[test]
fn zero_initial_state_still_yields_alpha_from_the_step() {
    let cfg = PipelineConfig::default();
    let p = problem(2.5, &[]);
    let traces = pipeline::simulate_traces(&p, &cfg).unwrap();

    let err = pipeline::identify(&traces, &cfg, None).unwrap_err();
    assert!(matches!(err.root(), Error::NoModes));
    assert!(err.to_string().starts_with("step 1"), "{err}");

    let s3 = pipeline::step3_alpha(&traces.step, &[], &cfg).unwrap();
    assert!((s3.alpha - 2.5).abs() < 1e-6 * 2.5, "alpha {}", s3.alpha);
    assert_eq!(s3.modes[0].index, 0);
    assert!((s3.modes[0].c_prime + 1.0 / (3.0 * 2.5)).abs() < 1e-9);
}

#[test]
fn reference_result_round_trips_through_json() {
    let cfg = benchmark::config();
    let traces = pipeline::simulate_traces(&benchmark::problem(), &cfg).unwrap();
    let res = pipeline::identify(&traces, &cfg, Some(benchmark::priors())).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("result.json");
    write_json(&path, &res).unwrap();
    let back: IdentificationResult = read_json(&path).unwrap();
    assert_eq!(back.alpha_hat.to_bits(), res.alpha_hat.to_bits());
    assert_eq!(back.u0_cosine_hat, res.u0_cosine_hat);
    assert_eq!(back.certificate, res.certificate);
    assert_eq!(back.free_modes, res.free_modes);
}

#[test]
fn reference_identification_is_deterministic() {
    let cfg = benchmark::config();
    let traces = pipeline::simulate_traces(&benchmark::problem(), &cfg).unwrap();
    let a = serde_json::to_string(
        &pipeline::identify(&traces, &cfg, Some(benchmark::priors())).unwrap(),
    )
    .unwrap();
    let b = serde_json::to_string(
        &pipeline::identify(&traces, &cfg, Some(benchmark::priors())).unwrap(),
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn result_fields_are_named_for_consumers() {
    let cfg = benchmark::config();
    let traces = pipeline::simulate_traces(&benchmark::problem(), &cfg).unwrap();
    let res = pipeline::identify(&traces, &cfg, Some(benchmark::priors())).unwrap();
    let v = serde_json::to_value(&res).unwrap();
    for key in [
        "alpha_hat",
        "alpha_candidates",
        "free_modes",
        "u0_cosine_hat",
        "gcv_k",
        "gcv_curve",
        "certificate",
    ] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let pencil = &v["diagnostics"]["free_pencil"];
    for key in [
        "order",
        "poles",
        "rates",
        "amplitudes",
        "sigma",
        "sigma_M",
        "y1_norm_2",
        "y0_trunc_gap_2",
    ] {
        assert!(pencil.get(key).is_some(), "{key}");
    }
}

#[test]
fn reconstruction_window_must_end_before_the_control() {
    let cfg = PipelineConfig::default();
    let p = problem(4.0, &[(1, 1.0)]);
    let mut traces = pipeline::simulate_traces(&p, &cfg).unwrap();
    traces.rec = p.sample_window(0.01, 1.0, 79).unwrap();
    assert!(matches!(
        pipeline::identify(&traces, &cfg, None),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn single_cosine_mode_index_across_diffusivities() {
    let cfg = PipelineConfig::default();
    for alpha in [1.0, 2.0, 3.0, 5.0, 8.0] {
        let traces = pipeline::simulate_traces(&problem(alpha, &[(2, 1.0)]), &cfg).unwrap();
        let res = pipeline::identify(&traces, &cfg, None).unwrap();
        assert_eq!(res.free_modes.len(), 1);
        assert_eq!(res.free_modes[0].n, 2, "alpha {alpha}");
        assert!((res.alpha_hat / alpha - 1.0).abs() < 1e-6, "alpha {alpha}");
    }
}

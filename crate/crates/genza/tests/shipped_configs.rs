//! The JSON files shipped under `configs/` and `schemas/` are part of the
//! public surface: configs must stay loadable and the platform files must
//! stay value-equal to the builtin presets they mirror.

use std::path::PathBuf;

use genza::platform::{self, Platform};
use genza::workload::{self, WorkloadSpec};
use genza::{model, Error};

fn repo_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(name)
}

fn preset(name: &str) -> Platform {
    platform::builtin_platforms()
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, p)| p)
        .unwrap()
}

#[test]
fn platform_files_mirror_the_builtin_presets() {
    for (file, name) in [
        ("a100_80gb.json", "a100-80gb"),
        ("a100_40gb_x2.json", "a100-40gb-x2"),
        ("h100_x8.json", "h100-x8"),
        ("reference_x2.json", "reference-x2"),
    ] {
        let path = repo_dir("configs").join(file);
        let loaded = Platform::from_json_file(&path)
            .unwrap_or_else(|e| panic!("{file} failed to load: {e}"));
        assert_eq!(loaded, preset(name), "{file} drifted from preset {name}");
    }
}

#[test]
fn example_model_config_loads_and_validates() {
    let path = repo_dir("configs").join("example_moe_16x7b.json");
    let m = model::load_model_config(path.to_str().unwrap()).unwrap();
    assert_eq!(m.name, "example-moe-16x7b");
    assert_eq!(m.n_experts, 16);
    assert_eq!(m.experts_per_token, 2);
    assert!(m.mlp_gated);
    assert_eq!(m.head_dim(), 128);
}

#[test]
fn example_usecase_config_loads_and_validates() {
    let text =
        std::fs::read_to_string(repo_dir("configs").join("example_usecase_contact_center.json"))
            .unwrap();
    let uc: genza::workload::UseCase = serde_json::from_str(&text).unwrap();
    uc.validate().unwrap();
    assert_eq!(uc.name, "contact-center");
    assert_eq!(uc.final_context(), 3300);
}

#[test]
fn example_workload_resolves_against_the_catalogs() {
    let text = std::fs::read_to_string(repo_dir("configs").join("example_workload.json")).unwrap();
    let spec = WorkloadSpec::from_json_str(&text).unwrap();
    let w = spec.resolve().unwrap();
    assert_eq!(w.model.name, "mixtral-8x7b");
    assert_eq!(w.usecase.name, "qa-rag");
    assert_eq!(w.tensor_parallel, 2);
}

/// Inline model/usecase objects in a workload file must pass through the same
/// validation as named ones. Architecture checks run during deserialization,
/// so a bad inline model is rejected before resolve() is ever reached.
#[test]
fn inline_workload_definitions_are_validated() {
    let good = r#"{
        "model": {"name": "x", "d_model": 96, "n_layers": 2, "n_heads": 3, "ff_ratio": 4.0},
        "usecase": "qa",
        "precision": "int8",
        "batch": 1
    }"#;
    let w = WorkloadSpec::from_json_str(good)
        .unwrap()
        .resolve()
        .unwrap();
    assert_eq!(w.model.head_dim(), 32);

    // d_model 100 is not divisible by n_heads 3.
    let bad = good.replace("\"d_model\": 96", "\"d_model\": 100");
    let err = WorkloadSpec::from_json_str(&bad).unwrap_err();
    match err {
        Error::Config { message, .. } => {
            assert!(message.contains("model"), "path missing from {message:?}")
        }
        other => panic!("expected Config, got {other}"),
    }
}

/// Light structural pins on the schema files: each is valid JSON, carries a
/// versioned `$id`, rejects unknown keys like the loaders do, and lists only
/// known properties in `required`.
#[test]
fn schema_files_are_versioned_and_strict() {
    let dir = repo_dir("schemas");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        seen += 1;
        let text = std::fs::read_to_string(&path).unwrap();
        let doc: serde_json::Value =
            serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let id = doc["$id"].as_str().unwrap_or_default();
        assert!(
            id.starts_with("urn:genza:schema:") && id.ends_with(":v1"),
            "{}: $id {id:?} is not versioned",
            path.display()
        );
        assert_eq!(
            doc["additionalProperties"],
            serde_json::Value::Bool(false),
            "{}: top level must reject unknown keys",
            path.display()
        );
        let props: Vec<&str> = doc["properties"]
            .as_object()
            .map(|m| m.keys().map(|k| k.as_str()).collect())
            .unwrap_or_default();
        for req in doc["required"].as_array().into_iter().flatten() {
            let req = req.as_str().unwrap();
            assert!(
                props.contains(&req),
                "{}: required field {req:?} missing from properties",
                path.display()
            );
        }
    }
    assert_eq!(seen, 5, "expected five schema files in {}", dir.display());
}

/// The file formats named by the schemas stay in lockstep with the loaders:
/// every property the schema declares round-trips through the parser, and a
/// key outside the schema is rejected.
#[test]
fn schemas_agree_with_the_loaders_on_field_names() {
    // Platform: build a document exercising every declared field.
    let full = r#"{
        "n_npus": 4,
        "npu": {
            "peak_tflops": 500,
            "compute_efficiency": 0.5,
            "fast_mem": {"capacity_gb": 64, "bandwidth_gb_per_s": 2000, "efficiency": 0.8},
            "slow_mem": {"capacity_gb": 500, "bandwidth_gb_per_s": 50, "efficiency": 0.9}
        },
        "icn": {"link_bandwidth_gb_per_s": 450, "link_latency_us": 1.5, "link_efficiency": 0.8, "warmup_us": 3}
    }"#;
    Platform::from_json_str(full).unwrap();
    assert!(Platform::from_json_str(&full.replace("peak_tflops", "peak_tflop")).is_err());

    // Usecase: all declared fields parse, unknown ones do not.
    let uc = r#"{"name": "x", "input_tokens": 10, "output_tokens": 5,
                 "beam_size": 2, "ttft_slo_s": 1.0, "tpot_slo_s": 0.1}"#;
    assert!(serde_json::from_str::<workload::UseCase>(uc).is_ok());
    assert!(serde_json::from_str::<workload::UseCase>(&uc.replace("beam_size", "beam")).is_err());
}

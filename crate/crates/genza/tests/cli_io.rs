//! End-to-end checks of the `genza` binary: exit codes, the one-line error
//! contract on stderr, byte-stable output formats, file emission, and config
//! resolution through files and the search-path environment variable.

use std::path::Path;
use std::process::{Command, Output};

use genza::analyzer::batch_sweep;
use genza::model::{load_model_config, Precision};
use genza::platform::load_platform;
use genza::report::{
    parse_requirement_csv, parse_sweep_csv, sweep_rows, REQUIREMENT_CSV_HEADER, SWEEP_CSV_HEADER,
};
use genza::workload::{load_usecase, Workload};

fn genza(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genza"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn genza_env(args: &[&str], key: &str, value: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genza"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "expected success, got {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const ANALYZE_QA: &[&str] = &[
    "analyze",
    "--model",
    "llama2-7b",
    "--usecase",
    "qa",
    "--platform",
    "a100-80gb",
    "--batch",
    "4",
];

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(genza(&["--help"]).status.code(), Some(0));
    assert_eq!(genza(&["--version"]).status.code(), Some(0));
    assert_eq!(genza(&["analyze", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_is_a_one_line_validation_error() {
    let out = genza(&["analyze", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "stderr: {stderr}");
    assert!(stderr.starts_with("error: kind=validation msg=\""));
}

#[test]
fn unknown_model_is_validation_unknown_platform_too() {
    let out = genza(&[
        "analyze",
        "--model",
        "nope",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nope"));

    let out = genza(&[
        "analyze",
        "--model",
        "llama2-7b",
        "--usecase",
        "qa",
        "--platform",
        "warp-drive",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn model_level_failures_exit_two() {
    // 175B parameters in fp16 cannot fit one 80 GB + 1 TB host NPU at B=256.
    let out = genza(&[
        "analyze",
        "--model",
        "gpt3-175b",
        "--usecase",
        "chat",
        "--platform",
        "a100-80gb",
        "--precision",
        "fp16",
        "--batch",
        "256",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.starts_with("error: kind=model msg=\""),
        "stderr: {stderr}"
    );
    assert_eq!(stderr.lines().count(), 1);

    // A placement that cannot exist is also model-level.
    let out = genza(&[
        "analyze",
        "--model",
        "llama2-7b",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
        "--tp",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_output_is_versioned_and_byte_identical_across_runs() {
    let mut args = ANALYZE_QA.to_vec();
    args.extend(["--format", "json"]);
    let a = stdout_of(&genza(&args));
    let b = stdout_of(&genza(&args));
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "analyze");
    assert!(v["result"]["ttft_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_csv_header_is_pinned_and_round_trips_through_the_library() {
    let out = stdout_of(&genza(&[
        "sweep-batch",
        "--model",
        "llama2-7b",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
        "--batches",
        "1,2,4,8",
        "--format",
        "csv",
    ]));
    assert!(out.starts_with(&format!("{SWEEP_CSV_HEADER}\n")));

    // The binary's CSV parses back to exactly what the library computes.
    let w = Workload {
        model: load_model_config("llama2-7b").unwrap(),
        usecase: load_usecase("qa").unwrap(),
        precision: Precision::Int8,
        batch: 1,
        tensor_parallel: 1,
        pipeline_parallel: 1,
    };
    let platform = load_platform("a100-80gb").unwrap();
    let sweep = batch_sweep(&w, &platform, &[1, 2, 4, 8]).unwrap();
    assert_eq!(parse_sweep_csv(&out).unwrap(), sweep_rows(&sweep));
}

#[test]
fn requirement_csv_header_is_pinned() {
    let out = stdout_of(&genza(&[
        "extreme-scale",
        "--contexts",
        "1000,1000000,2000000",
        "--format",
        "csv",
    ]));
    assert!(out.starts_with(&format!("{REQUIREMENT_CSV_HEADER}\n")));
    let rows = parse_requirement_csv(&out).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].bw_tbps > rows[0].bw_tbps);
}

#[test]
fn output_directory_gets_one_file_per_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap();
    let mut args = ANALYZE_QA.to_vec();
    args.extend(["-o", path, "--format", "csv,json,md"]);
    let out = genza(&args);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    for ext in ["csv", "json", "md"] {
        let f = dir.path().join(format!("analyze.{ext}"));
        assert!(f.is_file(), "missing {}", f.display());
        assert!(std::fs::metadata(&f).unwrap().len() > 0);
    }
}

#[test]
fn validation_failure_writes_no_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("reports");
    let target_str = target.to_str().unwrap();

    // Descending range fails after parsing but before any computation.
    let out = genza(&[
        "sweep-batch",
        "--model",
        "llama2-7b",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
        "--batches",
        "8:1:step1",
        "-o",
        target_str,
        "--format",
        "csv,json",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists(), "failed run must not create outputs");

    // Same for an unknown format, even though the analysis itself would work.
    let mut args = ANALYZE_QA.to_vec();
    args.extend(["-o", target_str, "--format", "yaml"]);
    let out = genza(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(!target.exists());
}

#[test]
fn platform_files_load_and_unknown_keys_report_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("two_npu.json");
    std::fs::write(
        &good,
        r#"{
          "n_npus": 2,
          "npu": {
            "peak_tflops": 800,
            "fast_mem": { "capacity_gb": 40, "bandwidth_gb_per_s": 4000 }
          },
          "icn": { "link_bandwidth_gb_per_s": 300 }
        }"#,
    )
    .unwrap();
    let mut args = ANALYZE_QA.to_vec();
    let good_str = good.to_str().unwrap();
    args[6] = good_str; // replace the --platform value
    args.extend(["--tp", "2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&genza(&args))).unwrap();
    assert!(v["result"]["ttft_s"].as_f64().unwrap() > 0.0);

    let bad = dir.path().join("typo.json");
    std::fs::write(
        &bad,
        r#"{
          "n_npus": 2,
          "npu": {
            "peak_tflops": 800,
            "fast_mem": { "capacity_gb": 40, "bandwith_gb_per_s": 4000 }
          },
          "icn": { "link_bandwidth_gb_per_s": 300 }
        }"#,
    )
    .unwrap();
    let mut args = ANALYZE_QA.to_vec();
    args[6] = bad.to_str().unwrap();
    let out = genza(&args);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(
        stderr.contains("npu.fast_mem") && stderr.contains("bandwith_gb_per_s"),
        "error must locate the offending key: {stderr}"
    );
}

#[test]
fn model_search_path_resolves_named_configs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tiny-test-model.json"),
        r#"{
          "name": "tiny-test-model",
          "d_model": 512,
          "n_layers": 4,
          "n_heads": 8,
          "ff_ratio": 4.0
        }"#,
    )
    .unwrap();

    let args = [
        "analyze",
        "--model",
        "tiny-test-model",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
        "--format",
        "json",
    ];
    // Without the search path the name is unknown...
    assert_eq!(genza(&args).status.code(), Some(1));
    // ...with it, the config resolves by name.
    let out = genza_env(&args, "GENZA_MODEL_PATH", dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usecase_override_flags_reach_the_model() {
    // Doubling the prompt must raise TTFT; everything else fixed.
    let base = [
        "analyze",
        "--model",
        "llama2-7b",
        "--usecase",
        "qa",
        "--platform",
        "a100-80gb",
    ];
    let short: serde_json::Value = serde_json::from_str(&stdout_of(&genza(&base))).unwrap();
    let mut long_args = base.to_vec();
    long_args.extend(["--input-tokens", "2000"]);
    let long: serde_json::Value = serde_json::from_str(&stdout_of(&genza(&long_args))).unwrap();
    let ttft = |v: &serde_json::Value| v["result"]["ttft_s"].as_f64().unwrap();
    assert!(ttft(&long) > 1.5 * ttft(&short));
}

#[test]
fn listed_names_round_trip_into_flags() {
    let models = stdout_of(&genza(&["list-models"]));
    let usecases = stdout_of(&genza(&["list-usecases"]));
    for model in models.lines().map(|l| l.split('\t').next().unwrap()) {
        for usecase in usecases.lines().map(|l| l.split('\t').next().unwrap()) {
            // Spot-check one pairing per model to keep this quick.
            if usecase != "qa" {
                continue;
            }
            let out = genza(&[
                "require",
                "--model",
                model,
                "--usecase",
                usecase,
                "--format",
                "json",
            ]);
            assert_eq!(
                out.status.code(),
                Some(0),
                "require failed for {model}/{usecase}: {}",
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}

#[test]
fn sweep_embeds_oom_points_without_failing() {
    // fp16 gpt3-175b outgrows 80 GB + 1 TB between B=1 and B=512.
    let out = stdout_of(&genza(&[
        "sweep-batch",
        "--model",
        "gpt3-175b",
        "--usecase",
        "chat",
        "--platform",
        "a100-80gb",
        "--precision",
        "fp16",
        "--batches",
        "1:513:log10",
        "--format",
        "csv",
    ]));
    assert!(out.contains("error:model"), "csv: {out}");
    let rows = parse_sweep_csv(&out).unwrap();
    assert!(rows.iter().any(|r| r.ttft_s.is_some()));
    assert!(rows.iter().any(|r| r.ttft_s.is_none()));
}

#[test]
fn markdown_report_names_the_time_components() {
    let mut args = ANALYZE_QA.to_vec();
    args.extend(["--format", "md"]);
    let md = stdout_of(&genza(&args));
    for component in ["gemm", "attention", "collective", "handoff"] {
        assert!(md.contains(component), "missing {component} in: {md}");
    }
}

//! Command-line surface: argument grammar, config resolution, range parsing,
//! and report emission for every analysis.
//!
//! Exit codes: 0 success, 1 validation error (flags, schemas, invariants),
//! 2 model-level error (impossible placement, out of memory). Errors print as
//! one machine-parsable line on stderr. Output files are written only after
//! the whole analysis has succeeded.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::analyzer::{self, Characteristic};
use crate::error::Error;
use crate::model::{self, Precision};
use crate::platform::{self, Platform};
use crate::report;
use crate::requirements;
use crate::workload::{self, UseCase, Workload};
use crate::Result;

#[derive(Parser, Debug)]
#[command(
    name = "genza",
    version,
    about = "Analytical performance model for LLM inference on multi-accelerator platforms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Predict TTFT, TPOT, latency, throughput, and memory fit for one workload.
    Analyze {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        platform: PlatformArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate the workload across a range of batch sizes.
    SweepBatch {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        platform: PlatformArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Batch sizes: `start:stop:stepK`, `start:stop:logN`, or a comma list.
        #[arg(long)]
        batches: String,
    },
    /// Compare every tensor/pipeline mapping that fits the platform.
    CompareParallelism {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        platform: PlatformArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Rerun the analysis while scaling one platform characteristic.
    SweepCharacteristic {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        platform: PlatformArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Axis to scale: flops, mem_bw, icn_bw, or link_latency.
        #[arg(long)]
        axis: String,
        /// Multipliers: `start:stop:stepK`, `start:stop:logN`, or a comma list.
        #[arg(long)]
        multipliers: String,
    },
    /// Invert the model: compute/bandwidth/capacity floors for a workload's SLOs.
    Require {
        #[command(flatten)]
        workload: WorkloadArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Compute derating applied when converting ideal FLOPs to peak FLOPS.
        #[arg(long, default_value_t = requirements::DEFAULT_COMPUTE_EFF)]
        compute_eff: f64,
    },
    /// Bandwidth/capacity requirement curve across prompt lengths.
    ExtremeScale {
        /// Model name or config file.
        #[arg(long, default_value = "super-llm-10t")]
        model: String,
        /// Prompt lengths: `start:stop:stepK`, `start:stop:logN`, or a comma list.
        #[arg(long)]
        contexts: String,
        /// Decode tokens generated per beam.
        #[arg(long, default_value_t = 2000)]
        decode_tokens: u64,
        #[arg(long, default_value_t = 4)]
        beam: u64,
        #[arg(long, default_value_t = 1)]
        batch: u64,
        /// Time-per-output-token budget in seconds.
        #[arg(long, default_value_t = 0.2)]
        tpot_slo: f64,
        #[arg(long, default_value = "int8")]
        precision: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the built-in model catalog.
    ListModels,
    /// List the built-in use-case presets.
    ListUsecases,
}

/// Workload selection plus per-run overrides.
#[derive(Args, Debug)]
pub struct WorkloadArgs {
    /// Model name from the catalog or a model config file.
    #[arg(long)]
    pub model: String,
    /// Use-case preset name or a use-case config file.
    #[arg(long)]
    pub usecase: String,
    #[arg(long, default_value_t = 1)]
    pub batch: u64,
    /// Numeric precision: fp16, int8, fp8, or int4.
    #[arg(long, default_value = "int8")]
    pub precision: String,
    /// Tensor-parallel degree.
    #[arg(long, default_value_t = 1)]
    pub tp: u64,
    /// Pipeline-parallel degree.
    #[arg(long, default_value_t = 1)]
    pub pp: u64,
    /// Override the use case's TTFT target (seconds).
    #[arg(long)]
    pub ttft_slo: Option<f64>,
    /// Override the use case's TPOT target (seconds).
    #[arg(long)]
    pub tpot_slo: Option<f64>,
    /// Override the use case's prompt length.
    #[arg(long)]
    pub input_tokens: Option<u64>,
    /// Override the use case's generation length.
    #[arg(long)]
    pub output_tokens: Option<u64>,
    /// Override the use case's beam width.
    #[arg(long)]
    pub beam: Option<u64>,
}

#[derive(Args, Debug)]
pub struct PlatformArgs {
    /// Platform preset name or a platform JSON file.
    #[arg(long)]
    pub platform: String,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Directory to write report files into; omit to print to stdout.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Report formats, comma separated: csv, json, md.
    #[arg(long, default_value = "json", value_delimiter = ',')]
    pub format: Vec<String>,
}

fn load_usecase_arg(source: &str) -> Result<UseCase> {
    if let Ok(u) = workload::load_usecase(source) {
        return Ok(u);
    }
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: source.to_string(),
            source: e,
        })?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        return serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: source.to_string(),
            message: format!("{} (at {})", e.inner(), e.path()),
        });
    }
    Err(Error::UnknownUseCase(source.to_string()))
}

impl WorkloadArgs {
    pub fn resolve(&self) -> Result<Workload> {
        let mut usecase = load_usecase_arg(&self.usecase)?;
        if let Some(v) = self.ttft_slo {
            usecase.ttft_slo_s = v;
        }
        if let Some(v) = self.tpot_slo {
            usecase.tpot_slo_s = v;
        }
        if let Some(v) = self.input_tokens {
            usecase.input_tokens = v;
        }
        if let Some(v) = self.output_tokens {
            usecase.output_tokens = v;
        }
        if let Some(v) = self.beam {
            usecase.beam_size = v;
        }
        usecase.validate()?;
        if self.batch == 0 {
            return Err(Error::invalid("batch", "must be >= 1"));
        }
        if self.tp == 0 || self.pp == 0 {
            return Err(Error::invalid("tp/pp", "must be >= 1"));
        }
        Ok(Workload {
            model: model::load_model_config(&self.model)?,
            usecase,
            precision: Precision::parse(&self.precision)?,
            batch: self.batch,
            tensor_parallel: self.tp,
            pipeline_parallel: self.pp,
        })
    }
}

// --- range grammar -----------------------------------------------------------

/// Parse a sweep axis: `start:stop:logN` (N log-spaced points),
/// `start:stop:stepK` (arithmetic with step K), a comma list, or one value.
pub fn parse_range_f64(spec: &str) -> Result<Vec<f64>> {
    let bad = |reason: String| Error::invalid("range", reason);
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{s:?} is not a finite number")))
    };

    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!(
                "{spec:?} must be start:stop:logN or start:stop:stepK"
            )));
        }
        let (start, stop) = (num(parts[0])?, num(parts[1])?);
        if start > stop {
            return Err(bad(format!("start {start} exceeds stop {stop}")));
        }
        if let Some(n) = parts[2].strip_prefix("log") {
            let n: usize = n
                .parse()
                .map_err(|_| bad(format!("bad point count in {:?}", parts[2])))?;
            if n == 0 {
                return Err(bad("log range needs at least one point".into()));
            }
            if start <= 0.0 {
                return Err(bad("log range needs start > 0".into()));
            }
            if n == 1 {
                return Ok(vec![start]);
            }
            let ratio = stop / start;
            let mut points: Vec<f64> = (0..n)
                .map(|i| start * ratio.powf(i as f64 / (n - 1) as f64))
                .collect();
            points[0] = start;
            points[n - 1] = stop;
            return Ok(points);
        }
        if let Some(k) = parts[2].strip_prefix("step") {
            let k = num(k)?;
            if k <= 0.0 {
                return Err(bad("step must be > 0".into()));
            }
            let mut points = Vec::new();
            let mut i = 0u64;
            loop {
                let v = start + k * i as f64;
                if v > stop * (1.0 + 1e-12) {
                    break;
                }
                points.push(v.min(stop));
                i += 1;
            }
            return Ok(points);
        }
        return Err(bad(format!(
            "third range field {:?} must start with log or step",
            parts[2]
        )));
    }

    spec.split(',').map(num).collect()
}

/// Integer variant of [`parse_range_f64`]: rounds to the nearest integer and
/// drops consecutive duplicates produced by rounding.
pub fn parse_range_u64(spec: &str) -> Result<Vec<u64>> {
    let raw = parse_range_f64(spec)?;
    let mut out: Vec<u64> = Vec::with_capacity(raw.len());
    for v in raw {
        if v < 0.0 || v > u64::MAX as f64 {
            return Err(Error::invalid("range", format!("{v} out of integer range")));
        }
        let r = v.round() as u64;
        if out.last() != Some(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

// --- output emission -----------------------------------------------------------

struct Rendered {
    json: String,
    csv: Option<String>,
    md: Option<String>,
}

fn emit(command: &str, output: &OutputArgs, rendered: &Rendered) -> Result<()> {
    if output.format.is_empty() {
        return Err(Error::invalid("format", "need at least one format"));
    }
    for f in &output.format {
        match f.as_str() {
            "json" => {}
            "csv" | "md" => {
                let available = match f.as_str() {
                    "csv" => rendered.csv.is_some(),
                    _ => rendered.md.is_some(),
                };
                if !available {
                    return Err(Error::invalid(
                        "format",
                        format!("{command} does not support {f}"),
                    ));
                }
            }
            other => {
                return Err(Error::invalid(
                    "format",
                    format!("unknown format {other:?} (expected csv, json, md)"),
                ))
            }
        }
    }

    let body = |f: &str| -> &str {
        match f {
            "json" => &rendered.json,
            "csv" => rendered.csv.as_deref().unwrap(),
            _ => rendered.md.as_deref().unwrap(),
        }
    };

    match &output.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                path: dir.display().to_string(),
                source: e,
            })?;
            for f in &output.format {
                let path = dir.join(format!("{command}.{f}"));
                std::fs::write(&path, body(f)).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
            }
        }
        None => {
            for f in &output.format {
                print!("{}", body(f));
            }
        }
    }
    Ok(())
}

fn load_platform_arg(args: &PlatformArgs) -> Result<Platform> {
    platform::load_platform(&args.platform)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze {
            workload,
            platform,
            output,
        } => {
            let w = workload.resolve()?;
            let p = load_platform_arg(&platform)?;
            let metrics = analyzer::analyze(&w, &p)?;
            emit(
                "analyze",
                &output,
                &Rendered {
                    json: report::to_json("analyze", &metrics),
                    csv: Some(report::analyze_to_csv(w.batch, &metrics)),
                    md: Some(report::analyze_to_md(&metrics)),
                },
            )
        }
        Command::SweepBatch {
            workload,
            platform,
            output,
            batches,
        } => {
            let w = workload.resolve()?;
            let p = load_platform_arg(&platform)?;
            let axis = parse_range_u64(&batches)?;
            let sweep = analyzer::batch_sweep(&w, &p, &axis)?;
            emit(
                "sweep-batch",
                &output,
                &Rendered {
                    json: report::to_json("sweep-batch", &sweep),
                    csv: Some(report::sweep_to_csv(&sweep)),
                    md: Some(report::sweep_to_md(&sweep)),
                },
            )
        }
        Command::CompareParallelism {
            workload,
            platform,
            output,
        } => {
            let w = workload.resolve()?;
            let p = load_platform_arg(&platform)?;
            let cmp = analyzer::parallelism_compare(&w, &p)?;
            emit(
                "compare-parallelism",
                &output,
                &Rendered {
                    json: report::to_json("compare-parallelism", &cmp),
                    csv: Some(report::compare_to_csv(&cmp)),
                    md: Some(report::compare_to_md(&cmp)),
                },
            )
        }
        Command::SweepCharacteristic {
            workload,
            platform,
            output,
            axis,
            multipliers,
        } => {
            let w = workload.resolve()?;
            let p = load_platform_arg(&platform)?;
            let axis = Characteristic::parse(&axis)?;
            let mult = parse_range_f64(&multipliers)?;
            let sweep = analyzer::characteristic_sweep(&w, &p, axis, &mult)?;
            emit(
                "sweep-characteristic",
                &output,
                &Rendered {
                    json: report::to_json("sweep-characteristic", &sweep),
                    csv: Some(report::sweep_to_csv(&sweep)),
                    md: Some(report::sweep_to_md(&sweep)),
                },
            )
        }
        Command::Require {
            workload,
            output,
            compute_eff,
        } => {
            let w = workload.resolve()?;
            let r = requirements::requirement_report(&w, compute_eff)?;
            let reports = [r.clone()];
            emit(
                "require",
                &output,
                &Rendered {
                    json: report::to_json("require", &r),
                    csv: Some(report::requirements_to_csv(&reports)),
                    md: Some(report::requirements_to_md(
                        "Platform requirements",
                        &reports,
                    )),
                },
            )
        }
        Command::ExtremeScale {
            model,
            contexts,
            decode_tokens,
            beam,
            batch,
            tpot_slo,
            precision,
            output,
        } => {
            let m = model::load_model_config(&model)?;
            let precision = Precision::parse(&precision)?;
            let axis = parse_range_u64(&contexts)?;
            let curve = requirements::extreme_scale_curve(
                &m,
                &axis,
                decode_tokens,
                beam,
                batch,
                tpot_slo,
                precision,
            )?;
            emit(
                "extreme-scale",
                &output,
                &Rendered {
                    json: report::to_json("extreme-scale", &curve),
                    csv: Some(report::requirements_to_csv(&curve)),
                    md: Some(report::requirements_to_md("Requirement curve", &curve)),
                },
            )
        }
        Command::ListModels => {
            for m in model::builtin_models() {
                let moe = if m.is_moe() {
                    format!("experts={}({})", m.n_experts, m.experts_per_token)
                } else {
                    "dense".to_string()
                };
                println!(
                    "{}\td_model={} layers={} heads={}/{} ff_ratio={} {} {}",
                    m.name,
                    m.d_model,
                    m.n_layers,
                    m.n_heads,
                    m.kv_heads,
                    m.ff_ratio,
                    moe,
                    if m.mlp_gated { "gated" } else { "ungated" },
                );
            }
            Ok(())
        }
        Command::ListUsecases => {
            for u in workload::builtin_usecases() {
                println!(
                    "{}\tinput={} output={} beam={} ttft_slo_s={} tpot_slo_s={}",
                    u.name,
                    u.input_tokens,
                    u.output_tokens,
                    u.beam_size,
                    u.ttft_slo_s,
                    u.tpot_slo_s,
                );
            }
            Ok(())
        }
    }
}

/// One-line machine-parsable error for the diagnostic stream.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ").replace('"', "'");
    format!("error: kind={} msg=\"{}\"", e.category(), msg)
}

/// Parse arguments and execute; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let msg = e.to_string().replace('\n', " ").replace('"', "'");
            eprintln!("error: kind=validation msg=\"{msg}\"");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}

/// Expose the clap definition for documentation tooling and tests.
pub fn command() -> clap::Command {
    Cli::command()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_comma_list_and_single_value() {
        assert_eq!(parse_range_f64("3").unwrap(), vec![3.0]);
        assert_eq!(parse_range_f64("1,2,8").unwrap(), vec![1.0, 2.0, 8.0]);
        assert_eq!(parse_range_u64("1,2,8").unwrap(), vec![1, 2, 8]);
        assert!(parse_range_f64("1,x").is_err());
    }

    #[test]
    fn range_step_grammar() {
        assert_eq!(parse_range_f64("1:2:step0.5").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_range_u64("1:7:step2").unwrap(), vec![1, 3, 5, 7]);
        // Stop not on the grid: last point on the grid wins.
        assert_eq!(parse_range_u64("1:6:step2").unwrap(), vec![1, 3, 5]);
        assert!(parse_range_f64("5:1:step1").is_err());
        assert!(parse_range_f64("1:5:step0").is_err());
    }

    #[test]
    fn range_log_grammar() {
        let pts = parse_range_f64("1:1000:log4").unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0], 1.0);
        assert_eq!(pts[3], 1000.0);
        assert!((pts[1] - 10.0).abs() < 1e-9);
        assert!((pts[2] - 100.0).abs() < 1e-9);

        // Endpoints are exact, interior points rounded; duplicates collapse.
        let ints = parse_range_u64("1000:2000000:log32").unwrap();
        assert_eq!(ints.first(), Some(&1000));
        assert_eq!(ints.last(), Some(&2_000_000));
        assert!(ints.windows(2).all(|p| p[0] < p[1]));

        assert!(parse_range_f64("0:10:log3").is_err());
        assert!(parse_range_f64("1:10:log0").is_err());
        assert!(parse_range_f64("1:10:zoom3").is_err());
    }

    #[test]
    fn cli_parses_the_documented_invocation() {
        let cli = Cli::try_parse_from([
            "genza",
            "analyze",
            "--model",
            "llama2-7b",
            "--usecase",
            "qa",
            "--platform",
            "a100-80gb",
            "--batch",
            "4",
            "-o",
            "out",
            "--format",
            "csv,json",
        ])
        .unwrap();
        match cli.command {
            Command::Analyze {
                workload, output, ..
            } => {
                assert_eq!(workload.batch, 4);
                assert_eq!(output.format, ["csv", "json"]);
                assert_eq!(output.out.unwrap(), PathBuf::from("out"));
            }
            _ => panic!("wrong command"),
        }
    }

    #[test]
    fn workload_args_apply_overrides() {
        let args = WorkloadArgs {
            model: "llama2-7b".into(),
            usecase: "qa".into(),
            batch: 2,
            precision: "fp16".into(),
            tp: 2,
            pp: 1,
            ttft_slo: Some(0.5),
            tpot_slo: None,
            input_tokens: Some(2000),
            output_tokens: Some(100),
            beam: Some(1),
        };
        let w = args.resolve().unwrap();
        assert_eq!(w.usecase.input_tokens, 2000);
        assert_eq!(w.usecase.ttft_slo_s, 0.5);
        assert_eq!(w.usecase.tpot_slo_s, 0.010); // untouched
        assert_eq!(w.usecase.beam_size, 1);
        assert_eq!(w.precision, Precision::Fp16);
    }

    #[test]
    fn bad_override_is_a_validation_error() {
        let args = WorkloadArgs {
            model: "llama2-7b".into(),
            usecase: "qa".into(),
            batch: 1,
            precision: "int8".into(),
            tp: 1,
            pp: 1,
            ttft_slo: Some(-0.5),
            tpot_slo: None,
            input_tokens: None,
            output_tokens: None,
            beam: None,
        };
        let err = args.resolve().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("ttft_slo_s"));
    }

    #[test]
    fn error_lines_are_single_line_and_tagged() {
        let e = Error::invalid("batch", "must be >= 1\nextra");
        let line = error_line(&e);
        assert!(!line.contains('\n'));
        assert!(line.starts_with("error: kind=validation msg="));

        let oom = Error::OutOfMemory {
            required_gb: 100.0,
            fast_gb: 40.0,
            slow_gb: 10.0,
        };
        assert!(error_line(&oom).contains("kind=model"));
    }

    #[test]
    fn clap_definition_is_internally_consistent() {
        command().debug_assert();
    }
}

//! Report emission: canonical JSON (schema-versioned, sorted keys), fixed
//! CSV column contracts, and human-readable markdown. Identical inputs
//! produce byte-identical outputs: maps serialize in key order and floats
//! print as shortest round-trip decimals.

use serde::Serialize;

use crate::analyzer::{InferenceMetrics, ParallelismReport, StageBreakdown, SweepResult};
use crate::error::Error;
use crate::requirements::RequirementReport;
use crate::Result;

/// Version tag stamped into every JSON document.
pub const SCHEMA_VERSION: u64 = 1;

/// Wrap a result in the versioned JSON envelope. Keys come out sorted, so the
/// bytes are canonical for a given value.
pub fn to_json<T: Serialize>(command: &str, payload: &T) -> String {
    let envelope = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "result": serde_json::to_value(payload).expect("report value serializes"),
    });
    let mut text = serde_json::to_string_pretty(&envelope).expect("report serializes");
    text.push('\n');
    text
}

// --- sweep CSV ---------------------------------------------------------------

pub const SWEEP_CSV_HEADER: &str =
    "axis,ttft_s,tpot_ms,latency_s,throughput_tps,fits,prefill_bound,decode_bound";

/// One sweep CSV row; metric cells are empty for points that failed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub ttft_s: Option<f64>,
    pub tpot_ms: Option<f64>,
    pub latency_s: Option<f64>,
    pub throughput_tps: Option<f64>,
    pub fits: Option<bool>,
    pub prefill_bound: Option<String>,
    pub decode_bound: Option<String>,
}

fn metrics_row(axis: f64, m: &InferenceMetrics) -> SweepRow {
    SweepRow {
        axis,
        ttft_s: Some(m.ttft_s),
        tpot_ms: Some(m.tpot_mean_s * 1e3),
        latency_s: Some(m.latency_s),
        throughput_tps: Some(m.throughput_tps),
        fits: Some(m.memory.fits),
        prefill_bound: Some(m.prefill.bound.name().to_string()),
        decode_bound: Some(m.decode.bound.name().to_string()),
    }
}

/// Flatten a sweep into its CSV row values.
pub fn sweep_rows(sweep: &SweepResult) -> Vec<SweepRow> {
    sweep
        .points
        .iter()
        .map(|p| match &p.metrics {
            Some(m) => metrics_row(p.axis_value, m),
            None => SweepRow {
                axis: p.axis_value,
                ttft_s: None,
                tpot_ms: None,
                latency_s: None,
                throughput_tps: None,
                fits: None,
                prefill_bound: p.error.clone().map(|e| format!("error:{e}")),
                decode_bound: p.error.clone().map(|e| format!("error:{e}")),
            },
        })
        .collect()
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_to_csv(sweep: &SweepResult) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in sweep_rows(sweep) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.axis,
            opt_f64(r.ttft_s),
            opt_f64(r.tpot_ms),
            opt_f64(r.latency_s),
            opt_f64(r.throughput_tps),
            r.fits.map(|b| b.to_string()).unwrap_or_default(),
            r.prefill_bound.as_deref().unwrap_or(""),
            r.decode_bound.as_deref().unwrap_or(""),
        ));
    }
    out
}

/// A single analysis rendered as a one-row sweep (axis = batch).
pub fn analyze_to_csv(batch: u64, metrics: &InferenceMetrics) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    let r = metrics_row(batch as f64, metrics);
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        r.axis,
        opt_f64(r.ttft_s),
        opt_f64(r.tpot_ms),
        opt_f64(r.latency_s),
        opt_f64(r.throughput_tps),
        r.fits.unwrap(),
        r.prefill_bound.as_deref().unwrap(),
        r.decode_bound.as_deref().unwrap(),
    ));
    out
}

fn parse_opt_f64(field: &str, cell: &str) -> Result<Option<f64>> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::invalid("csv", format!("bad {field} value {cell:?}")))
}

/// Parse a sweep CSV produced by [`sweep_to_csv`] back into rows.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_CSV_HEADER => {}
        other => {
            return Err(Error::invalid(
                "csv",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(Error::invalid(
                "csv",
                format!("expected 8 columns, got {}", cells.len()),
            ));
        }
        rows.push(SweepRow {
            axis: cells[0]
                .parse()
                .map_err(|_| Error::invalid("csv", format!("bad axis value {:?}", cells[0])))?,
            ttft_s: parse_opt_f64("ttft_s", cells[1])?,
            tpot_ms: parse_opt_f64("tpot_ms", cells[2])?,
            latency_s: parse_opt_f64("latency_s", cells[3])?,
            throughput_tps: parse_opt_f64("throughput_tps", cells[4])?,
            fits: match cells[5] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => return Err(Error::invalid("csv", format!("bad fits value {other:?}"))),
            },
            prefill_bound: (!cells[6].is_empty()).then(|| cells[6].to_string()),
            decode_bound: (!cells[7].is_empty()).then(|| cells[7].to_string()),
        });
    }
    Ok(rows)
}

// --- requirement CSV ----------------------------------------------------------

pub const REQUIREMENT_CSV_HEADER: &str =
    "context_tokens,bw_TBps,capacity_TB,bw_stacks,capacity_stacks,weights_TB,kv_TB";

#[derive(Clone, Debug, PartialEq)]
pub struct RequirementRow {
    pub context_tokens: u64,
    pub bw_tbps: f64,
    pub capacity_tb: f64,
    pub bw_stacks: f64,
    pub capacity_stacks: f64,
    pub weights_tb: f64,
    pub kv_tb: f64,
}

pub fn requirement_rows(reports: &[RequirementReport]) -> Vec<RequirementRow> {
    reports
        .iter()
        .map(|r| RequirementRow {
            context_tokens: r.context_tokens,
            bw_tbps: r.bandwidth_bytes_per_s / 1e12,
            capacity_tb: r.capacity_bytes / 1e12,
            bw_stacks: r.hbm3e_equivalents.bw_stacks,
            capacity_stacks: r.hbm3e_equivalents.capacity_stacks,
            weights_tb: r.per_component.weights_bytes / 1e12,
            kv_tb: r.per_component.kv_bytes / 1e12,
        })
        .collect()
}

pub fn requirements_to_csv(reports: &[RequirementReport]) -> String {
    let mut out = String::from(REQUIREMENT_CSV_HEADER);
    out.push('\n');
    for r in requirement_rows(reports) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.context_tokens,
            r.bw_tbps,
            r.capacity_tb,
            r.bw_stacks,
            r.capacity_stacks,
            r.weights_tb,
            r.kv_tb,
        ));
    }
    out
}

/// Parse a requirement CSV produced by [`requirements_to_csv`].
pub fn parse_requirement_csv(text: &str) -> Result<Vec<RequirementRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == REQUIREMENT_CSV_HEADER => {}
        other => {
            return Err(Error::invalid(
                "csv",
                format!("unexpected header {other:?}"),
            ))
        }
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 7 {
            return Err(Error::invalid(
                "csv",
                format!("expected 7 columns, got {}", cells.len()),
            ));
        }
        let f = |i: usize| -> Result<f64> {
            cells[i]
                .parse()
                .map_err(|_| Error::invalid("csv", format!("bad value {:?}", cells[i])))
        };
        rows.push(RequirementRow {
            context_tokens: cells[0]
                .parse()
                .map_err(|_| Error::invalid("csv", format!("bad context {:?}", cells[0])))?,
            bw_tbps: f(1)?,
            capacity_tb: f(2)?,
            bw_stacks: f(3)?,
            capacity_stacks: f(4)?,
            weights_tb: f(5)?,
            kv_tb: f(6)?,
        });
    }
    Ok(rows)
}

// --- parallelism CSV -----------------------------------------------------------

pub const COMPARE_CSV_HEADER: &str = "tp,pp,dp_replicas,max_feasible_batch,feasible,prefill_rate_qps,decode_rate_tps,ttft_s,tpot_ms,throughput_tps";

pub fn compare_to_csv(report: &ParallelismReport) -> String {
    let mut out = String::from(COMPARE_CSV_HEADER);
    out.push('\n');
    for o in &report.options {
        let (ttft, tpot_ms, thr) = match &o.metrics {
            Some(m) => (
                Some(m.ttft_s),
                Some(m.tpot_mean_s * 1e3),
                Some(m.throughput_tps),
            ),
            None => (None, None, None),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            o.tp,
            o.pp,
            o.dp_replicas,
            o.max_feasible_batch,
            o.feasible_at_batch,
            opt_f64(o.prefill_rate_qps),
            opt_f64(o.decode_rate_tps),
            opt_f64(ttft),
            opt_f64(tpot_ms),
            opt_f64(thr),
        ));
    }
    out
}

// --- markdown -----------------------------------------------------------------

fn breakdown_md(out: &mut String, title: &str, bd: &StageBreakdown) {
    out.push_str(&format!("\n## {title}\n\n"));
    out.push_str("| component | time_s |\n|---|---|\n");
    out.push_str(&format!("| gemm | {} |\n", bd.gemm_time_s));
    out.push_str(&format!("| attention | {} |\n", bd.attention_time_s));
    out.push_str(&format!("| collective | {} |\n", bd.collective_time_s));
    out.push_str(&format!("| handoff | {} |\n", bd.pipeline_handoff_time_s));
    out.push_str(&format!("| **total** | {} |\n", bd.total_s));
    out.push_str(&format!(
        "\nbound: {}, resident fraction: {}\n",
        bd.bound.name(),
        bd.resident_fraction
    ));
}

pub fn analyze_to_md(metrics: &InferenceMetrics) -> String {
    let mut out = String::from("# Inference analysis\n\n");
    out.push_str("| metric | value |\n|---|---|\n");
    out.push_str(&format!("| ttft_s | {} |\n", metrics.ttft_s));
    out.push_str(&format!("| tpot_mean_s | {} |\n", metrics.tpot_mean_s));
    out.push_str(&format!("| tpot_first_s | {} |\n", metrics.tpot_first_s));
    out.push_str(&format!("| tpot_last_s | {} |\n", metrics.tpot_last_s));
    out.push_str(&format!("| latency_s | {} |\n", metrics.latency_s));
    out.push_str(&format!(
        "| throughput_tps | {} |\n",
        metrics.throughput_tps
    ));
    out.push_str(&format!("| dp_replicas | {} |\n", metrics.dp_replicas));
    out.push_str(&format!(
        "| per_npu_required_gb | {} |\n| fits_fast_memory | {} |\n",
        metrics.memory.per_npu_required_bytes / 1e9,
        metrics.memory.fits
    ));
    breakdown_md(&mut out, "Prefill breakdown", &metrics.prefill);
    breakdown_md(&mut out, "Decode breakdown", &metrics.decode);
    out
}

pub fn sweep_to_md(sweep: &SweepResult) -> String {
    let mut out = format!("# Sweep over {}\n\n", sweep.axis);
    out.push_str("| axis | ttft_s | tpot_ms | latency_s | throughput_tps | fits |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for r in sweep_rows(sweep) {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.axis,
            opt_f64(r.ttft_s),
            opt_f64(r.tpot_ms),
            opt_f64(r.latency_s),
            opt_f64(r.throughput_tps),
            r.fits.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
        ));
    }
    if let Some(s) = sweep.saturation_at {
        out.push_str(&format!("\nthroughput saturates at axis = {s}\n"));
    }
    if let Some(o) = sweep.oom_at {
        out.push_str(&format!("\nout of memory from axis = {o}\n"));
    }
    out
}

pub fn requirements_to_md(title: &str, reports: &[RequirementReport]) -> String {
    let mut out = format!("# {title}\n\n");
    out.push_str(
        "| context_tokens | bw_TBps | capacity_TB | bw_stacks | capacity_stacks | weights_TB | kv_TB |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    for r in requirement_rows(reports) {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} |\n",
            r.context_tokens,
            r.bw_tbps,
            r.capacity_tb,
            r.bw_stacks,
            r.capacity_stacks,
            r.weights_tb,
            r.kv_tb,
        ));
    }
    for r in reports {
        if let Some(f) = r.flops_required {
            out.push_str(&format!(
                "\npeak compute floor at context {}: {} PFLOPS\n",
                r.context_tokens,
                f / 1e15
            ));
        }
    }
    out
}

pub fn compare_to_md(report: &ParallelismReport) -> String {
    let mut out = String::from("# Parallelism comparison\n\n");
    out.push_str("| tp | pp | replicas | max_batch | prefill_qps | decode_tps |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for o in &report.options {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            o.tp,
            o.pp,
            o.dp_replicas,
            o.max_feasible_batch,
            opt_f64(o.prefill_rate_qps),
            opt_f64(o.decode_rate_tps),
        ));
    }
    if let Some((tp, pp)) = report.best_prefill {
        out.push_str(&format!("\nbest prefill mapping: tp={tp}, pp={pp}\n"));
    }
    if let Some((tp, pp)) = report.best_decode {
        out.push_str(&format!("best decode mapping: tp={tp}, pp={pp}\n"));
    }
    out
}

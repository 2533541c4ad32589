//! End-to-end serving analysis: shards operator graphs across tensor/pipeline
//! parallel groups, times whole stages, derives TTFT/TPOT/latency/throughput,
//! and runs the sweep studies (batch, parallelism, platform characteristics).

use serde::Serialize;

use crate::error::Error;
use crate::model::{self, OperatorGraph, OperatorSpec, Stage};
use crate::platform::Platform;
use crate::roofline::{self, Bound, OffloadPlan};
use crate::workload::Workload;
use crate::Result;

/// Per-NPU bytes by category.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoryBytes {
    pub weights: f64,
    pub kv: f64,
    pub activations: f64,
}

impl MemoryBytes {
    #[inline]
    pub fn total(&self) -> f64 {
        self.weights + self.kv + self.activations
    }
}

/// One stage's operator graph mapped onto a tp x pp group.
#[derive(Clone, Debug, Serialize)]
pub struct ShardedPlan {
    pub stage: Stage,
    /// Per-layer operators with per-NPU costs (all tallies divided by tp).
    pub ops: Vec<OperatorSpec>,
    pub n_layers: u64,
    pub tp: u64,
    pub pp: u64,
    /// Layers on the fullest pipeline stage, `ceil(L / pp)`.
    pub max_stage_layers: u64,
    /// All-reduce events over one whole forward pass (2 per layer under TP).
    pub allreduce_events: u64,
    pub allreduce_message_bytes: f64,
    /// Stage-boundary transfers over one forward pass (pp - 1).
    pub handoff_events: u64,
    pub handoff_message_bytes: f64,
    pub per_npu: MemoryBytes,
    /// Data-parallel replicas the remaining NPUs can hold.
    pub dp_replicas: u64,
}

/// Map one stage's graph onto the platform under the workload's parallelism.
///
/// TP divides every operator's FLOPs and bytes uniformly by `tp` and inserts
/// two all-reduces per layer; PP assigns `ceil(L/pp)` layers to the fullest
/// stage and hands activations across `pp - 1` boundaries. Per-NPU memory
/// counts resident weights (all experts), the end-of-generation KV share, and
/// the largest operator's activation working set scaled by the micro-batch
/// share `ceil(B/pp)/B`.
pub fn shard_workload(
    graph: &OperatorGraph,
    w: &Workload,
    platform: &Platform,
) -> Result<ShardedPlan> {
    let (tp, pp) = (w.tensor_parallel, w.pipeline_parallel);
    if tp * pp > platform.n_npus {
        return Err(Error::Placement(format!(
            "tp {} x pp {} exceeds {} NPUs",
            tp, pp, platform.n_npus
        )));
    }
    if tp > w.model.n_heads {
        return Err(Error::Placement(format!(
            "tp {} exceeds {} attention heads",
            tp, w.model.n_heads
        )));
    }
    if pp > w.model.n_layers {
        return Err(Error::Placement(format!(
            "pp {} exceeds {} layers",
            pp, w.model.n_layers
        )));
    }

    let tp_f = tp as f64;
    let ops: Vec<OperatorSpec> = graph
        .per_layer_ops
        .iter()
        .map(|op| {
            let mut s = op.clone();
            s.flops /= tp_f;
            s.weight_bytes /= tp_f;
            s.activation_bytes /= tp_f;
            s.kv_read_bytes /= tp_f;
            s
        })
        .collect();

    // Activations crossing a layer boundary: one embedding row per token.
    let boundary_tokens = match graph.stage {
        Stage::Prefill => w.usecase.input_tokens,
        Stage::Decode => 1,
    };
    let message_bytes = graph.batch as f64
        * boundary_tokens as f64
        * w.model.d_model as f64
        * w.precision.act_bytes();

    let n_layers = graph.n_layers;
    let max_stage_layers = n_layers.div_ceil(pp);
    let stage_share = max_stage_layers as f64 / n_layers as f64;

    let weights_total = model::count_params(&w.model).total as f64 * w.precision.weight_bytes();
    let kv_total = model::kv_cache_bytes(
        &w.model,
        w.batch,
        w.usecase.beam_size,
        w.usecase.input_tokens,
        w.usecase.output_tokens,
        w.precision,
    );
    let micro_batch_share = graph.batch.div_ceil(pp) as f64 / graph.batch as f64;
    let peak_act = ops.iter().map(|op| op.activation_bytes).fold(0.0, f64::max);

    Ok(ShardedPlan {
        stage: graph.stage,
        ops,
        n_layers,
        tp,
        pp,
        max_stage_layers,
        allreduce_events: if tp > 1 {
            graph.collective_points_per_layer as u64 * n_layers
        } else {
            0
        },
        allreduce_message_bytes: message_bytes,
        handoff_events: pp - 1,
        handoff_message_bytes: message_bytes,
        per_npu: MemoryBytes {
            weights: weights_total * stage_share / tp_f,
            kv: kv_total * stage_share / tp_f,
            activations: peak_act * micro_batch_share,
        },
        dp_replicas: platform.n_npus / (tp * pp),
    })
}

/// Stage time split into its contributing components.
#[derive(Clone, Debug, Serialize)]
pub struct StageBreakdown {
    pub stage: Stage,
    pub gemm_time_s: f64,
    pub attention_time_s: f64,
    pub collective_time_s: f64,
    pub pipeline_handoff_time_s: f64,
    /// One layer's time including its two all-reduces.
    pub per_layer_time_s: f64,
    /// Whole forward pass: all layers serialized plus stage handoffs.
    pub total_s: f64,
    pub per_npu_bytes: MemoryBytes,
    pub bound: Bound,
    pub resident_fraction: f64,
}

/// Time one forward pass of a sharded stage: every layer runs its operators
/// back to back plus two all-reduces, all `L` layers serialize across the
/// pipeline, and each of the `pp - 1` stage boundaries adds one transfer.
pub fn model_time(plan: &ShardedPlan, platform: &Platform) -> Result<StageBreakdown> {
    let offload = roofline::plan_offload(plan.per_npu.total(), &platform.npu)?;

    // Fold op times in graph order so a tp=1, pp=1 plan reproduces the
    // single-NPU layer time bit for bit.
    let mut layer = 0.0_f64;
    let mut gemm = 0.0_f64;
    let mut attention = 0.0_f64;
    let mut slowest = (0.0_f64, Bound::Compute);
    for op in &plan.ops {
        let t = roofline::op_time(op, &platform.npu, &offload);
        layer += t.time_s;
        if op.kind.is_attention() {
            attention += t.time_s;
        } else {
            gemm += t.time_s;
        }
        if t.time_s > slowest.0 {
            slowest = (t.time_s, t.bound);
        }
    }

    let t_ar = roofline::allreduce_time(plan.allreduce_message_bytes, plan.tp, &platform.icn);
    let ar_per_layer = plan.allreduce_events as f64 / plan.n_layers as f64;
    let per_layer_time_s = layer + ar_per_layer * t_ar;
    let handoff =
        plan.handoff_events as f64 * roofline::p2p_time(plan.handoff_message_bytes, &platform.icn);

    let layers = plan.n_layers as f64;
    Ok(StageBreakdown {
        stage: plan.stage,
        gemm_time_s: layers * gemm,
        attention_time_s: layers * attention,
        collective_time_s: layers * ar_per_layer * t_ar,
        pipeline_handoff_time_s: handoff,
        per_layer_time_s,
        total_s: layers * per_layer_time_s + handoff,
        per_npu_bytes: plan.per_npu,
        bound: slowest.1,
        resident_fraction: offload.resident_fraction,
    })
}

/// Memory verdict for a placed workload.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MemoryReport {
    pub per_npu_required_bytes: f64,
    pub per_npu_fast_bytes: f64,
    pub offloaded_bytes: f64,
    /// True when the working set resides entirely in fast memory.
    pub fits: bool,
}

/// Forward-model output for one workload on one platform.
#[derive(Clone, Debug, Serialize)]
pub struct InferenceMetrics {
    pub ttft_s: f64,
    pub tpot_first_s: f64,
    pub tpot_mean_s: f64,
    pub tpot_last_s: f64,
    pub latency_s: f64,
    pub throughput_tps: f64,
    pub memory: MemoryReport,
    pub prefill: StageBreakdown,
    pub decode: StageBreakdown,
    pub dp_replicas: u64,
}

fn decode_breakdown_at(w: &Workload, platform: &Platform, tau_cur: u64) -> Result<StageBreakdown> {
    let graph = model::build_decode_graph(&w.model, w.effective_batch(), tau_cur, w.precision)?;
    let plan = shard_workload(&graph, w, platform)?;
    model_time(&plan, platform)
}

/// Predict serving metrics for one workload.
///
/// TTFT is the prefill pass over the whole prompt; TPOT is one decode pass,
/// evaluated at the first step, the midpoint of generation (the mean, since
/// decode cost is affine in context length), and the last step. Response
/// latency and throughput follow by identity.
pub fn analyze(w: &Workload, platform: &Platform) -> Result<InferenceMetrics> {
    let tau_p = w.usecase.input_tokens;
    let tau_d = w.usecase.output_tokens;

    let prefill_graph = model::build_prefill_graph(&w.model, w.batch, tau_p, w.precision)?;
    let prefill_plan = shard_workload(&prefill_graph, w, platform)?;
    let prefill = model_time(&prefill_plan, platform)?;

    let first = decode_breakdown_at(w, platform, tau_p)?;
    let mid = decode_breakdown_at(w, platform, w.representative_decode_context())?;
    let last = decode_breakdown_at(w, platform, tau_p + tau_d - 1)?;

    let ttft_s = prefill.total_s;
    let tpot_mean_s = mid.total_s;
    let per_npu_required_bytes = prefill.per_npu_bytes.total().max(mid.per_npu_bytes.total());
    let fast = platform.npu.fast.capacity_bytes;

    Ok(InferenceMetrics {
        ttft_s,
        tpot_first_s: first.total_s,
        tpot_mean_s,
        tpot_last_s: last.total_s,
        latency_s: ttft_s + tpot_mean_s * tau_d as f64,
        throughput_tps: w.batch as f64 / tpot_mean_s,
        memory: MemoryReport {
            per_npu_required_bytes,
            per_npu_fast_bytes: fast,
            offloaded_bytes: (per_npu_required_bytes - fast).max(0.0),
            fits: per_npu_required_bytes <= fast,
        },
        dp_replicas: prefill_plan.dp_replicas,
        prefill,
        decode: mid,
    })
}

// --- sweeps -----------------------------------------------------------------

/// One evaluated sweep point; model-level failures are embedded, not fatal.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<InferenceMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepPoint {
    fn from_result(axis_value: f64, r: Result<InferenceMetrics>) -> Self {
        match r {
            Ok(m) => SweepPoint {
                axis_value,
                metrics: Some(m),
                error: None,
            },
            Err(e) => SweepPoint {
                axis_value,
                metrics: None,
                error: Some(e.category().to_string()),
            },
        }
    }
}

/// Sweep output: points in axis order plus derived annotations.
#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    /// Name of the swept parameter.
    pub axis: String,
    pub points: Vec<SweepPoint>,
    /// First axis value whose marginal throughput gain drops below
    /// `SATURATION_GAIN` per unit of axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturation_at: Option<f64>,
    /// First axis value that failed with out-of-memory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oom_at: Option<f64>,
}

/// Marginal throughput gain per unit batch below which the curve is called
/// saturated.
pub const SATURATION_GAIN: f64 = 0.01;

fn annotate(axis: &str, points: Vec<SweepPoint>) -> SweepResult {
    let mut saturation_at = None;
    let mut prev: Option<(f64, f64)> = None; // (axis, throughput)
    for p in &points {
        if let Some(m) = &p.metrics {
            if let Some((ax0, thr0)) = prev {
                let step = p.axis_value - ax0;
                if step > 0.0 && saturation_at.is_none() {
                    let gain = m.throughput_tps / thr0 - 1.0;
                    if gain < SATURATION_GAIN * step {
                        saturation_at = Some(p.axis_value);
                    }
                }
            }
            prev = Some((p.axis_value, m.throughput_tps));
        }
    }
    let oom_at = points
        .iter()
        .find(|p| p.error.as_deref() == Some("model"))
        .map(|p| p.axis_value);
    SweepResult {
        axis: axis.to_string(),
        points,
        saturation_at,
        oom_at,
    }
}

/// Evaluate the workload across batch sizes.
pub fn batch_sweep(w: &Workload, platform: &Platform, batches: &[u64]) -> Result<SweepResult> {
    if batches.is_empty() {
        return Err(Error::invalid("batches", "need at least one batch size"));
    }
    if batches.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("batches", "must be strictly ascending"));
    }
    let points = batches
        .iter()
        .map(|&b| {
            let mut wb = w.clone();
            wb.batch = b;
            SweepPoint::from_result(b as f64, analyze(&wb, platform))
        })
        .collect();
    Ok(annotate("batch", points))
}

/// Platform characteristic to scale in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    Flops,
    MemBw,
    IcnBw,
    LinkLatency,
}

impl Characteristic {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "flops" => Ok(Characteristic::Flops),
            "mem_bw" => Ok(Characteristic::MemBw),
            "icn_bw" => Ok(Characteristic::IcnBw),
            "link_latency" => Ok(Characteristic::LinkLatency),
            other => Err(Error::invalid(
                "axis",
                format!("unknown characteristic {other:?} (expected flops, mem_bw, icn_bw, link_latency)"),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Characteristic::Flops => "flops",
            Characteristic::MemBw => "mem_bw",
            Characteristic::IcnBw => "icn_bw",
            Characteristic::LinkLatency => "link_latency",
        }
    }

    /// Scale the named characteristic of `base` by `multiplier`.
    pub fn scale(self, base: &Platform, multiplier: f64) -> Platform {
        match self {
            Characteristic::Flops => base.with_peak_flops(base.npu.peak_flops * multiplier),
            Characteristic::MemBw => {
                base.with_fast_bandwidth(base.npu.fast.bandwidth_bytes_per_s * multiplier)
            }
            Characteristic::IcnBw => {
                base.with_link_bandwidth(base.icn.link_bandwidth_bytes_per_s * multiplier)
            }
            Characteristic::LinkLatency => {
                base.with_link_latency(base.icn.link_latency_s * multiplier)
            }
        }
    }
}

/// Rerun the analysis while scaling one platform characteristic.
pub fn characteristic_sweep(
    w: &Workload,
    platform: &Platform,
    axis: Characteristic,
    multipliers: &[f64],
) -> Result<SweepResult> {
    if multipliers.is_empty() {
        return Err(Error::invalid("multipliers", "need at least one value"));
    }
    if multipliers.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(Error::invalid("multipliers", "must be finite and > 0"));
    }
    let points = multipliers
        .iter()
        .map(|&m| {
            let scaled = axis.scale(platform, m);
            SweepPoint::from_result(m, analyze(w, &scaled))
        })
        .collect();
    Ok(annotate(axis.name(), points))
}

// --- parallelism comparison --------------------------------------------------

/// Metrics for one (tp, pp) mapping in a comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ParallelismOption {
    pub tp: u64,
    pub pp: u64,
    pub dp_replicas: u64,
    /// Largest batch whose working set stays entirely in fast memory; 0 when
    /// even batch 1 must offload.
    pub max_feasible_batch: u64,
    /// Whether the requested batch fits in fast memory under this mapping.
    pub feasible_at_batch: bool,
    /// Prefill queries per second of one replica at `max_feasible_batch`
    /// (batch over the fullest pipeline stage's time).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefill_rate_qps: Option<f64>,
    /// Decode tokens per second of one replica at `max_feasible_batch`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decode_rate_tps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<InferenceMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Comparison of every (tp, pp) mapping that fits on the platform.
#[derive(Clone, Debug, Serialize)]
pub struct ParallelismReport {
    pub options: Vec<ParallelismOption>,
    /// Mapping with the highest prefill rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_prefill: Option<(u64, u64)>,
    /// Mapping with the highest decode rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_decode: Option<(u64, u64)>,
}

fn with_parallelism(w: &Workload, tp: u64, pp: u64, batch: u64) -> Workload {
    let mut v = w.clone();
    v.tensor_parallel = tp;
    v.pipeline_parallel = pp;
    v.batch = batch;
    v
}

fn fits_fast(w: &Workload, platform: &Platform) -> Result<bool> {
    let prefill =
        model::build_prefill_graph(&w.model, w.batch, w.usecase.input_tokens, w.precision)?;
    let p1 = shard_workload(&prefill, w, platform)?;
    let decode = model::build_decode_graph(
        &w.model,
        w.effective_batch(),
        w.representative_decode_context(),
        w.precision,
    )?;
    let p2 = shard_workload(&decode, w, platform)?;
    let required = p1.per_npu.total().max(p2.per_npu.total());
    Ok(required <= platform.npu.fast.capacity_bytes)
}

/// Largest batch that stays entirely in fast memory (0 if none). Monotone
/// search: per-NPU bytes only grow with batch.
fn max_feasible_batch(w: &Workload, tp: u64, pp: u64, platform: &Platform) -> Result<u64> {
    const CAP: u64 = 1 << 20;
    if !fits_fast(&with_parallelism(w, tp, pp, 1), platform)? {
        return Ok(0);
    }
    let mut lo = 1u64; // known to fit
    let mut hi = 2u64;
    while hi <= CAP && fits_fast(&with_parallelism(w, tp, pp, hi), platform)? {
        lo = hi;
        hi *= 2;
    }
    if hi > CAP {
        return Ok(lo);
    }
    // Invariant: lo fits, hi does not.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits_fast(&with_parallelism(w, tp, pp, mid), platform)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Compare every tensor/pipeline mapping with `tp * pp <= n_npus`
/// (and `tp <= heads`, `pp <= layers`).
pub fn parallelism_compare(w: &Workload, platform: &Platform) -> Result<ParallelismReport> {
    let mut options = Vec::new();
    for tp in 1..=platform.n_npus.min(w.model.n_heads) {
        for pp in 1..=(platform.n_npus / tp).min(w.model.n_layers) {
            let base = with_parallelism(w, tp, pp, w.batch);
            let max_batch = max_feasible_batch(w, tp, pp, platform)?;
            let feasible_at_batch = fits_fast(&base, platform)?;

            let (mut prefill_rate, mut decode_rate) = (None, None);
            if max_batch >= 1 {
                let wb = with_parallelism(w, tp, pp, max_batch);
                let prefill_graph = model::build_prefill_graph(
                    &wb.model,
                    wb.batch,
                    wb.usecase.input_tokens,
                    wb.precision,
                )?;
                let plan = shard_workload(&prefill_graph, &wb, platform)?;
                let bd = model_time(&plan, platform)?;
                let stage_time = plan.max_stage_layers as f64 * bd.per_layer_time_s;
                prefill_rate = Some(max_batch as f64 / stage_time);
                let mid = decode_breakdown_at(&wb, platform, wb.representative_decode_context())?;
                decode_rate = Some(max_batch as f64 / mid.total_s);
            }

            let point = match analyze(&base, platform) {
                Ok(m) => ParallelismOption {
                    tp,
                    pp,
                    dp_replicas: platform.n_npus / (tp * pp),
                    max_feasible_batch: max_batch,
                    feasible_at_batch,
                    prefill_rate_qps: prefill_rate,
                    decode_rate_tps: decode_rate,
                    metrics: Some(m),
                    error: None,
                },
                Err(e) => ParallelismOption {
                    tp,
                    pp,
                    dp_replicas: platform.n_npus / (tp * pp),
                    max_feasible_batch: max_batch,
                    feasible_at_batch,
                    prefill_rate_qps: prefill_rate,
                    decode_rate_tps: decode_rate,
                    metrics: None,
                    error: Some(e.category().to_string()),
                },
            };
            options.push(point);
        }
    }

    let best_by = |key: fn(&ParallelismOption) -> Option<f64>| {
        options
            .iter()
            .filter_map(|o| key(o).map(|v| (o.tp, o.pp, v)))
            .max_by(|a, b| a.2.total_cmp(&b.2))
            .map(|(tp, pp, _)| (tp, pp))
    };
    let best_prefill = best_by(|o| o.prefill_rate_qps);
    let best_decode = best_by(|o| o.decode_rate_tps);

    Ok(ParallelismReport {
        options,
        best_prefill,
        best_decode,
    })
}

/// Single-NPU reference time for a stage graph (used by identity tests and
/// the tp=1/pp=1 fast path): layers times the per-layer roofline sum.
pub fn single_npu_time(graph: &OperatorGraph, platform: &Platform) -> f64 {
    let t = roofline::graph_time(graph, &platform.npu, &OffloadPlan::FULLY_RESIDENT);
    graph.n_layers as f64 * t.layer_time_s
}

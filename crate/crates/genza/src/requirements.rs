//! Inverse model: given a workload and its latency targets, derive the
//! platform-level compute, memory-bandwidth, and memory-capacity floors, plus
//! the extreme-context requirement curve.
//!
//! Conventions: capacity must hold every expert's weights (they stay
//! resident) while bandwidth counts only the weights a token activates;
//! bandwidth is evaluated at the end-of-generation context, the worst decode
//! step.

use serde::Serialize;

use crate::error::Error;
use crate::model::{self, ModelConfig, Precision};
use crate::workload::Workload;
use crate::Result;

/// One HBM3e stack: 1.2 TB/s of bandwidth, 36 GB of capacity.
pub const HBM3E_BANDWIDTH_BYTES_PER_S: f64 = 1.2e12;
pub const HBM3E_CAPACITY_BYTES: f64 = 36e9;

/// Default compute derating when turning ideal prefill FLOPs into a
/// provisionable peak-FLOPS figure.
pub const DEFAULT_COMPUTE_EFF: f64 = 0.6;

/// Byte components behind the capacity and bandwidth requirements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComponentBytes {
    pub weights_bytes: f64,
    pub kv_bytes: f64,
    pub active_weights_bytes: f64,
}

/// Requirement expressed as fractional HBM3e stacks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HbmStacks {
    pub bw_stacks: f64,
    pub capacity_stacks: f64,
}

/// Platform floors needed to serve one workload within its targets.
#[derive(Clone, Debug, Serialize)]
pub struct RequirementReport {
    /// Prompt length the requirement was evaluated at.
    pub context_tokens: u64,
    pub capacity_bytes: f64,
    /// Peak FLOP/s to provision; absent when the study fixes no TTFT budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flops_required: Option<f64>,
    pub bandwidth_bytes_per_s: f64,
    pub per_component: ComponentBytes,
    pub hbm3e_equivalents: HbmStacks,
}

fn components(
    m: &ModelConfig,
    batch: u64,
    s_b: u64,
    tau_p: u64,
    tau_d: u64,
    precision: Precision,
) -> ComponentBytes {
    let params = model::count_params(m);
    let wb = precision.weight_bytes();
    ComponentBytes {
        weights_bytes: params.total as f64 * wb,
        active_weights_bytes: params.active_per_token as f64 * wb,
        kv_bytes: model::kv_cache_bytes(m, batch, s_b, tau_p, tau_d, precision),
    }
}

fn check_slo(field: &'static str, slo: f64) -> Result<()> {
    if !(slo.is_finite() && slo > 0.0) {
        return Err(Error::invalid(field, "must be finite and > 0"));
    }
    Ok(())
}

/// Memory capacity floor: all resident weights plus the full KV cache at the
/// end of generation.
pub fn required_capacity(w: &Workload) -> ComponentBytes {
    components(
        &w.model,
        w.batch,
        w.usecase.beam_size,
        w.usecase.input_tokens,
        w.usecase.output_tokens,
        w.precision,
    )
}

/// Peak-FLOPS floor: the whole prefill pass must finish inside the TTFT
/// budget at `compute_eff` of peak.
pub fn required_flops(w: &Workload, ttft_slo_s: f64, compute_eff: f64) -> Result<f64> {
    check_slo("ttft_slo_s", ttft_slo_s)?;
    if !(compute_eff.is_finite() && compute_eff > 0.0 && compute_eff <= 1.0) {
        return Err(Error::invalid("compute_eff", "must be in (0, 1]"));
    }
    let graph = model::build_prefill_graph(&w.model, w.batch, w.usecase.input_tokens, w.precision)?;
    Ok(graph.total_flops() / (ttft_slo_s * compute_eff))
}

/// Memory-bandwidth floor: one decode step at the final context must stream
/// the active weights plus the whole KV cache inside the TPOT budget.
pub fn required_bandwidth(w: &Workload, tpot_slo_s: f64) -> Result<f64> {
    check_slo("tpot_slo_s", tpot_slo_s)?;
    let c = required_capacity(w);
    Ok((c.active_weights_bytes + c.kv_bytes) / tpot_slo_s)
}

fn stacks(bandwidth: f64, capacity: f64) -> HbmStacks {
    HbmStacks {
        bw_stacks: bandwidth / HBM3E_BANDWIDTH_BYTES_PER_S,
        capacity_stacks: capacity / HBM3E_CAPACITY_BYTES,
    }
}

/// Full requirement report for a workload, using its use case's targets.
pub fn requirement_report(w: &Workload, compute_eff: f64) -> Result<RequirementReport> {
    let c = required_capacity(w);
    let capacity = c.weights_bytes + c.kv_bytes;
    let bandwidth = required_bandwidth(w, w.usecase.tpot_slo_s)?;
    let flops = required_flops(w, w.usecase.ttft_slo_s, compute_eff)?;
    Ok(RequirementReport {
        context_tokens: w.usecase.input_tokens,
        capacity_bytes: capacity,
        flops_required: Some(flops),
        bandwidth_bytes_per_s: bandwidth,
        per_component: c,
        hbm3e_equivalents: stacks(bandwidth, capacity),
    })
}

/// Bandwidth/capacity requirement curve across prompt lengths, for the
/// long-context sizing study. No TTFT budget is involved, so the FLOPS field
/// stays empty.
pub fn extreme_scale_curve(
    model: &ModelConfig,
    contexts: &[u64],
    tau_d: u64,
    s_b: u64,
    batch: u64,
    tpot_slo_s: f64,
    precision: Precision,
) -> Result<Vec<RequirementReport>> {
    if contexts.is_empty() {
        return Err(Error::invalid(
            "contexts",
            "need at least one context length",
        ));
    }
    if contexts.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("contexts", "must be strictly ascending"));
    }
    if batch == 0 {
        return Err(Error::invalid("batch", "must be >= 1"));
    }
    if s_b == 0 {
        return Err(Error::invalid("beam_size", "must be >= 1"));
    }
    check_slo("tpot_slo_s", tpot_slo_s)?;

    Ok(contexts
        .iter()
        .map(|&tau_p| {
            let c = components(model, batch, s_b, tau_p, tau_d, precision);
            let capacity = c.weights_bytes + c.kv_bytes;
            let bandwidth = (c.active_weights_bytes + c.kv_bytes) / tpot_slo_s;
            RequirementReport {
                context_tokens: tau_p,
                capacity_bytes: capacity,
                flops_required: None,
                bandwidth_bytes_per_s: bandwidth,
                per_component: c,
                hbm3e_equivalents: stacks(bandwidth, capacity),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::load_model_config;
    use crate::platform::{MemTier, NpuSpec, Platform};
    use crate::workload::{load_usecase, UseCase, Workload};

    fn workload(model: &str, usecase: &str, batch: u64) -> Workload {
        Workload {
            model: load_model_config(model).unwrap(),
            usecase: load_usecase(usecase).unwrap(),
            precision: Precision::Int8,
            batch,
            tensor_parallel: 1,
            pipeline_parallel: 1,
        }
    }

    /// Independent oracle: sum decode-step reads layer by layer instead of
    /// using the closed forms.
    fn enumerate_bandwidth_bytes(m: &ModelConfig, u: &UseCase, batch: u64) -> f64 {
        let d = m.d_model as f64;
        let dff = m.d_ff() as f64;
        let k = m.experts_per_token as f64;
        let kv_width = (m.kv_heads * m.head_dim()) as f64;
        let context = (u.input_tokens + u.beam_size * u.output_tokens) as f64;
        let mut total = 0.0;
        for _layer in 0..m.n_layers {
            total += d * (d + 2.0 * kv_width); // QKV
            total += d * d; // out projection
            total += k * m.mlp_matrices() as f64 * d * dff; // selected experts
            total += 2.0 * batch as f64 * context * kv_width; // K and V planes
        }
        total
    }

    #[test]
    fn bandwidth_matches_per_layer_enumeration() {
        let w = workload("llama3-70b", "chat", 1);
        let got = required_bandwidth(&w, 0.01).unwrap();
        let oracle = enumerate_bandwidth_bytes(&w.model, &w.usecase, 1) / 0.01;
        assert!((got - oracle).abs() / oracle < 1e-12);
        // Weights ~68.5 GB + 0.82 GB of KV over 10 ms.
        assert!((6.8e12..=7.2e12).contains(&got), "got {got:.4e}");
    }

    #[test]
    fn capacity_splits_weights_and_kv() {
        let w = workload("llama2-7b", "codegen", 1);
        let c = required_capacity(&w);
        assert_eq!(c.kv_bytes, 2.0 * 20_200.0 * 4096.0 * 32.0);
        assert_eq!(c.weights_bytes, c.active_weights_bytes); // dense
        let ratio = c.kv_bytes / c.active_weights_bytes;
        assert!((ratio - 0.82).abs() / 0.82 < 0.15, "ratio {ratio}");
    }

    #[test]
    fn moe_capacity_counts_all_experts_bandwidth_only_active() {
        let w = workload("mixtral-8x7b", "qa", 1);
        let c = required_capacity(&w);
        assert!(c.weights_bytes > c.active_weights_bytes);
        let p = model::count_params(&w.model);
        assert_eq!(c.weights_bytes, p.total as f64);
        assert_eq!(c.active_weights_bytes, p.active_per_token as f64);
    }

    #[test]
    fn doubling_batch_doubles_kv_leaves_weights() {
        let w1 = workload("gpt3-175b", "chat", 1);
        let w2 = workload("gpt3-175b", "chat", 2);
        let (c1, c2) = (required_capacity(&w1), required_capacity(&w2));
        assert_eq!(c2.kv_bytes, 2.0 * c1.kv_bytes);
        assert_eq!(c2.weights_bytes, c1.weights_bytes);
    }

    #[test]
    fn requirements_scale_inversely_with_slo() {
        let w = workload("llama3-70b", "qa", 4);
        for slo in [1e-3, 0.01, 0.5, 2.0] {
            let f = required_flops(&w, slo, 0.6).unwrap();
            let b = required_bandwidth(&w, slo).unwrap();
            let f1 = required_flops(&w, 1.0, 0.6).unwrap();
            let b1 = required_bandwidth(&w, 1.0).unwrap();
            assert!((f * slo - f1).abs() / f1 < 1e-12);
            assert!((b * slo - b1).abs() / b1 < 1e-12);
        }
        assert!(required_flops(&w, 0.0, 0.6).is_err());
        assert!(required_bandwidth(&w, -1.0).is_err());
        assert!(required_flops(&w, 0.2, 1.5).is_err());
    }

    #[test]
    fn flops_requirement_divides_by_compute_efficiency() {
        let w = workload("llama2-7b", "qa", 1);
        let ideal = required_flops(&w, 0.2, 1.0).unwrap();
        let derated = required_flops(&w, 0.2, 0.6).unwrap();
        assert!((derated * 0.6 - ideal).abs() / ideal < 1e-12);
        // llama2 QA at unit efficiency: ~1.35e13 prefill FLOPs in 0.2 s.
        assert!((6.0e13..=7.5e13).contains(&ideal), "got {ideal:.4e}");
    }

    #[test]
    fn longer_prompts_raise_flops_requirement_superlinearly() {
        // Prompt 10x with TTFT budget 2x leaves a >5x gap; quadratic
        // attention pushes it above the linear-only 5.0.
        for name in ["llama2-7b", "llama3-70b", "gpt3-175b", "gpt4-1.8t"] {
            let qa = workload(name, "qa", 1);
            let rag = workload(name, "qa-rag", 1);
            let r =
                required_flops(&rag, 0.4, 0.6).unwrap() / required_flops(&qa, 0.2, 0.6).unwrap();
            assert!((5.0..=7.0).contains(&r), "{name}: ratio {r}");
        }
    }

    #[test]
    fn gpt4_bandwidth_barely_moves_from_qa_to_rag() {
        let qa = workload("gpt4-1.8t", "qa", 1);
        let rag = workload("gpt4-1.8t", "qa-rag", 1);
        let ratio =
            required_bandwidth(&rag, 0.01).unwrap() / required_bandwidth(&qa, 0.01).unwrap();
        // Active weights dominate the stream; a 10x prompt adds only ~8%.
        assert!((1.04..=1.12).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn report_carries_stack_equivalents() {
        let w = workload("gpt4-1.8t", "qa-rag", 1);
        let r = requirement_report(&w, DEFAULT_COMPUTE_EFF).unwrap();
        assert_eq!(r.context_tokens, 10_000);
        assert_eq!(
            r.capacity_bytes,
            r.per_component.weights_bytes + r.per_component.kv_bytes
        );
        assert_eq!(
            r.hbm3e_equivalents.bw_stacks,
            r.bandwidth_bytes_per_s / 1.2e12
        );
        assert_eq!(r.hbm3e_equivalents.capacity_stacks, r.capacity_bytes / 36e9);
        assert!(r.flops_required.unwrap() > 0.0);
    }

    #[test]
    fn extreme_curve_is_affine_in_context_with_known_slope() {
        let m = load_model_config("super-llm-10t").unwrap();
        let pts = extreme_scale_curve(
            &m,
            &[100_000, 200_000, 400_000],
            2000,
            4,
            1,
            0.2,
            Precision::Int8,
        )
        .unwrap();
        let slope01 = (pts[1].bandwidth_bytes_per_s - pts[0].bandwidth_bytes_per_s)
            / (pts[1].context_tokens - pts[0].context_tokens) as f64;
        let slope12 = (pts[2].bandwidth_bytes_per_s - pts[1].bandwidth_bytes_per_s)
            / (pts[2].context_tokens - pts[1].context_tokens) as f64;
        let expect = 2.0 * (m.kv_heads * m.head_dim()) as f64 * m.n_layers as f64 / 0.2;
        assert!((slope01 - expect).abs() / expect < 1e-9);
        assert!((slope12 - expect).abs() / expect < 1e-9);
        assert!(pts[0].flops_required.is_none());
    }

    #[test]
    fn extreme_curve_at_zero_context_holds_weights_plus_beam_kv() {
        let m = load_model_config("llama2-7b").unwrap();
        let pts = extreme_scale_curve(&m, &[0, 1000], 50, 4, 1, 0.02, Precision::Int8).unwrap();
        let c = &pts[0].per_component;
        assert_eq!(c.kv_bytes, 2.0 * (4 * 50) as f64 * 4096.0 * 32.0);
        assert_eq!(pts[0].capacity_bytes, c.weights_bytes + c.kv_bytes);
    }

    #[test]
    fn extreme_curve_validates_axis() {
        let m = load_model_config("llama2-7b").unwrap();
        assert!(extreme_scale_curve(&m, &[], 50, 4, 1, 0.02, Precision::Int8).is_err());
        assert!(extreme_scale_curve(&m, &[5, 5], 50, 4, 1, 0.02, Precision::Int8).is_err());
        assert!(extreme_scale_curve(&m, &[1, 2], 50, 4, 1, 0.0, Precision::Int8).is_err());
    }

    #[test]
    fn provisioning_exactly_the_bandwidth_floor_meets_the_tpot_target() {
        // Forward/inverse consistency: a platform with fast memory at exactly
        // the required bandwidth, unit efficiencies, ample capacity and
        // compute hits the TPOT target on the last, heaviest decode step.
        let mut w = workload("llama2-7b", "chat", 1);
        w.usecase.beam_size = 1;
        let slo = w.usecase.tpot_slo_s;
        let bw = required_bandwidth(&w, slo).unwrap();
        let platform = Platform {
            n_npus: 1,
            npu: NpuSpec {
                peak_flops: 1e30,
                compute_efficiency: 1.0,
                fast: MemTier {
                    capacity_bytes: 1e15,
                    bandwidth_bytes_per_s: bw,
                    efficiency: 1.0,
                },
                slow: MemTier {
                    capacity_bytes: 0.0,
                    bandwidth_bytes_per_s: 1.0,
                    efficiency: 1.0,
                },
            },
            icn: crate::platform::load_platform("a100-80gb").unwrap().icn,
        };
        let m = crate::analyzer::analyze(&w, &platform).unwrap();
        assert!(
            (m.tpot_last_s - slo).abs() / slo < 0.01,
            "tpot_last {} vs slo {}",
            m.tpot_last_s,
            slo
        );
    }
}

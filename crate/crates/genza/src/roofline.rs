//! Roofline timing: per-operator latency from compute and memory-traffic
//! ceilings, the two-tier memory split for oversubscribed working sets, and
//! analytical collective costs.
//!
//! Memory time overlaps the two tiers: the fast tier streams up to its
//! resident share while the slow tier streams the overflow concurrently, so
//! the memory term is the max of the two tier times, and the operator time is
//! the max of that and the compute time.

use serde::Serialize;

use crate::error::Error;
use crate::model::{OperatorGraph, OperatorSpec};
use crate::platform::{IcnSpec, NpuSpec};
use crate::Result;

/// Which ceiling an operator ran into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Compute,
    Memory,
    Offload,
}

impl Bound {
    pub fn name(self) -> &'static str {
        match self {
            Bound::Compute => "compute",
            Bound::Memory => "memory",
            Bound::Offload => "offload",
        }
    }
}

/// How a working set larger than fast memory is split across tiers: every
/// byte stream keeps `resident_fraction` of itself in fast memory and the
/// rest in the slow tier (uniform proportional placement).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OffloadPlan {
    pub resident_fraction: f64,
    pub offloaded_bytes: f64,
}

impl OffloadPlan {
    /// Everything fits in fast memory.
    pub const FULLY_RESIDENT: OffloadPlan = OffloadPlan {
        resident_fraction: 1.0,
        offloaded_bytes: 0.0,
    };
}

/// Split `required_bytes` across the NPU's two tiers. Fails only when the
/// combined tiers cannot hold the working set.
pub fn plan_offload(required_bytes: f64, npu: &NpuSpec) -> Result<OffloadPlan> {
    let fast = npu.fast.capacity_bytes;
    let slow = npu.slow.capacity_bytes;
    if required_bytes <= fast {
        return Ok(OffloadPlan::FULLY_RESIDENT);
    }
    if required_bytes > fast + slow {
        return Err(Error::OutOfMemory {
            required_gb: required_bytes / 1e9,
            fast_gb: fast / 1e9,
            slow_gb: slow / 1e9,
        });
    }
    Ok(OffloadPlan {
        resident_fraction: fast / required_bytes,
        offloaded_bytes: required_bytes - fast,
    })
}

/// Timing verdict for a single operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpTiming {
    pub time_s: f64,
    pub bound: Bound,
    pub compute_time_s: f64,
    pub mem_time_s: f64,
}

/// Roofline time for one operator under an offload plan.
pub fn op_time(op: &OperatorSpec, npu: &NpuSpec, plan: &OffloadPlan) -> OpTiming {
    let bytes = op.total_bytes();
    let fast_bytes = bytes * plan.resident_fraction;
    let slow_bytes = bytes - fast_bytes;

    let fast_time = fast_bytes / npu.fast.effective_bandwidth();
    let slow_time = if slow_bytes > 0.0 {
        slow_bytes / npu.slow.effective_bandwidth()
    } else {
        0.0
    };
    let mem_time = fast_time.max(slow_time);
    let compute_time = op.flops / npu.effective_flops();
    let time = compute_time.max(mem_time);

    let bound = if compute_time >= mem_time {
        Bound::Compute
    } else if slow_time > fast_time {
        Bound::Offload
    } else {
        Bound::Memory
    };

    OpTiming {
        time_s: time,
        bound,
        compute_time_s: compute_time,
        mem_time_s: mem_time,
    }
}

/// One layer's operator times plus the layer's controlling bound (the bound
/// of the operator contributing the most time).
#[derive(Clone, Debug, Serialize)]
pub struct GraphTiming {
    pub per_op: Vec<OpTiming>,
    pub layer_time_s: f64,
    pub dominant_bound: Bound,
}

/// Time one layer of the graph: operators run back to back.
pub fn graph_time(graph: &OperatorGraph, npu: &NpuSpec, plan: &OffloadPlan) -> GraphTiming {
    let per_op: Vec<OpTiming> = graph
        .per_layer_ops
        .iter()
        .map(|op| op_time(op, npu, plan))
        .collect();
    let layer_time_s = per_op.iter().map(|t| t.time_s).sum();
    let dominant_bound = per_op
        .iter()
        .max_by(|a, b| a.time_s.total_cmp(&b.time_s))
        .map(|t| t.bound)
        .unwrap_or(Bound::Compute);
    GraphTiming {
        per_op,
        layer_time_s,
        dominant_bound,
    }
}

/// Ring all-reduce across `participants` NPUs: `2(N-1)` pipelined hops, each
/// carrying a `1/N` shard plus the per-hop link latency. Free on one NPU.
pub fn allreduce_time(message_bytes: f64, participants: u64, icn: &IcnSpec) -> f64 {
    if participants <= 1 {
        return 0.0;
    }
    let n = participants as f64;
    let hop = icn.link_latency_s + (message_bytes / n) / icn.effective_bandwidth();
    icn.warmup_s + 2.0 * (n - 1.0) * hop
}

/// Point-to-point transfer of a full message over one link.
pub fn p2p_time(message_bytes: f64, icn: &IcnSpec) -> f64 {
    icn.warmup_s + icn.link_latency_s + message_bytes / icn.effective_bandwidth()
}

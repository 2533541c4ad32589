//! Platform description: accelerator compute/memory characteristics, the
//! two-tier memory system, and the interconnect. All rates are stored in base
//! SI units (FLOP/s, bytes, bytes/s, seconds) regardless of the wire form.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// One memory tier: capacity, bandwidth, and achievable efficiency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemTier {
    pub capacity_bytes: f64,
    pub bandwidth_bytes_per_s: f64,
    pub efficiency: f64,
}

impl MemTier {
    /// Effective bandwidth after derating.
    #[inline]
    pub fn effective_bandwidth(&self) -> f64 {
        self.bandwidth_bytes_per_s * self.efficiency
    }
}

/// A single accelerator: peak compute, a fast (HBM-class) tier, and a slow
/// (host/CXL-class) offload tier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NpuSpec {
    pub peak_flops: f64,
    pub compute_efficiency: f64,
    pub fast: MemTier,
    pub slow: MemTier,
}

impl NpuSpec {
    /// Effective compute throughput after derating.
    #[inline]
    pub fn effective_flops(&self) -> f64 {
        self.peak_flops * self.compute_efficiency
    }
}

/// Scale-up/scale-out fabric seen by collectives, modeled as per-hop latency
/// plus a bandwidth term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcnSpec {
    pub link_bandwidth_bytes_per_s: f64,
    pub link_latency_s: f64,
    pub link_efficiency: f64,
    pub warmup_s: f64,
}

impl IcnSpec {
    #[inline]
    pub fn effective_bandwidth(&self) -> f64 {
        self.link_bandwidth_bytes_per_s * self.link_efficiency
    }
}

/// A homogeneous pool of `n_npus` accelerators joined by one fabric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Platform {
    pub n_npus: u64,
    pub npu: NpuSpec,
    pub icn: IcnSpec,
}

// --- wire form -------------------------------------------------------------

const GB: f64 = 1e9;
const TFLOPS: f64 = 1e12;
const US: f64 = 1e-6;

fn default_compute_eff() -> f64 {
    0.6
}

fn default_fast_eff() -> f64 {
    0.7
}

fn default_link_eff() -> f64 {
    0.75
}

fn default_link_latency_us() -> f64 {
    2.0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemTierJson {
    capacity_gb: f64,
    bandwidth_gb_per_s: f64,
    #[serde(default = "default_fast_eff")]
    efficiency: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NpuJson {
    peak_tflops: f64,
    #[serde(default = "default_compute_eff")]
    compute_efficiency: f64,
    fast_mem: MemTierJson,
    /// Optional offload tier; defaults to a host-memory pool.
    slow_mem: Option<MemTierJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IcnJson {
    link_bandwidth_gb_per_s: f64,
    #[serde(default = "default_link_latency_us")]
    link_latency_us: f64,
    #[serde(default = "default_link_eff")]
    link_efficiency: f64,
    #[serde(default)]
    warmup_us: f64,
}

/// Wire form of [`Platform`]; converts to base units on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatformJson {
    n_npus: u64,
    npu: NpuJson,
    icn: IcnJson,
}

/// Default offload tier when a platform omits `slow_mem`: a large host pool
/// behind a PCIe-class pipe.
pub fn default_slow_tier() -> MemTier {
    MemTier {
        capacity_bytes: 1000.0 * GB,
        bandwidth_bytes_per_s: 64.0 * GB,
        efficiency: 1.0,
    }
}

impl MemTierJson {
    fn to_tier(&self) -> MemTier {
        MemTier {
            capacity_bytes: self.capacity_gb * GB,
            bandwidth_bytes_per_s: self.bandwidth_gb_per_s * GB,
            efficiency: self.efficiency,
        }
    }
}

impl TryFrom<PlatformJson> for Platform {
    type Error = Error;

    fn try_from(j: PlatformJson) -> Result<Self> {
        let p = Platform {
            n_npus: j.n_npus,
            npu: NpuSpec {
                peak_flops: j.npu.peak_tflops * TFLOPS,
                compute_efficiency: j.npu.compute_efficiency,
                fast: j.npu.fast_mem.to_tier(),
                slow: j
                    .npu
                    .slow_mem
                    .as_ref()
                    .map(MemTierJson::to_tier)
                    .unwrap_or_else(default_slow_tier),
            },
            icn: IcnSpec {
                link_bandwidth_bytes_per_s: j.icn.link_bandwidth_gb_per_s * GB,
                link_latency_s: j.icn.link_latency_us * US,
                link_efficiency: j.icn.link_efficiency,
                warmup_s: j.icn.warmup_us * US,
            },
        };
        p.validate()?;
        Ok(p)
    }
}

impl From<&Platform> for PlatformJson {
    fn from(p: &Platform) -> Self {
        PlatformJson {
            n_npus: p.n_npus,
            npu: NpuJson {
                peak_tflops: p.npu.peak_flops / TFLOPS,
                compute_efficiency: p.npu.compute_efficiency,
                fast_mem: MemTierJson {
                    capacity_gb: p.npu.fast.capacity_bytes / GB,
                    bandwidth_gb_per_s: p.npu.fast.bandwidth_bytes_per_s / GB,
                    efficiency: p.npu.fast.efficiency,
                },
                slow_mem: Some(MemTierJson {
                    capacity_gb: p.npu.slow.capacity_bytes / GB,
                    bandwidth_gb_per_s: p.npu.slow.bandwidth_bytes_per_s / GB,
                    efficiency: p.npu.slow.efficiency,
                }),
            },
            icn: IcnJson {
                link_bandwidth_gb_per_s: p.icn.link_bandwidth_bytes_per_s / GB,
                link_latency_us: p.icn.link_latency_s / US,
                link_efficiency: p.icn.link_efficiency,
                warmup_us: p.icn.warmup_s / US,
            },
        }
    }
}

fn check_eff(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0 && v <= 1.0) {
        return Err(Error::invalid(field, "efficiency must be in (0, 1]"));
    }
    Ok(())
}

fn check_pos(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(field, "must be finite and > 0"));
    }
    Ok(())
}

fn check_nonneg(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::invalid(field, "must be finite and >= 0"));
    }
    Ok(())
}

impl Platform {
    pub fn validate(&self) -> Result<()> {
        if self.n_npus == 0 {
            return Err(Error::invalid("n_npus", "must be >= 1"));
        }
        check_pos("npu.peak_tflops", self.npu.peak_flops)?;
        check_eff("npu.compute_efficiency", self.npu.compute_efficiency)?;
        check_pos("npu.fast_mem.capacity_gb", self.npu.fast.capacity_bytes)?;
        check_pos(
            "npu.fast_mem.bandwidth_gb_per_s",
            self.npu.fast.bandwidth_bytes_per_s,
        )?;
        check_eff("npu.fast_mem.efficiency", self.npu.fast.efficiency)?;
        check_nonneg("npu.slow_mem.capacity_gb", self.npu.slow.capacity_bytes)?;
        check_pos(
            "npu.slow_mem.bandwidth_gb_per_s",
            self.npu.slow.bandwidth_bytes_per_s,
        )?;
        check_eff("npu.slow_mem.efficiency", self.npu.slow.efficiency)?;
        check_pos(
            "icn.link_bandwidth_gb_per_s",
            self.icn.link_bandwidth_bytes_per_s,
        )?;
        check_nonneg("icn.link_latency_us", self.icn.link_latency_s)?;
        check_eff("icn.link_efficiency", self.icn.link_efficiency)?;
        check_nonneg("icn.warmup_us", self.icn.warmup_s)?;
        Ok(())
    }

    /// Parse a platform from its JSON wire form, reporting the path of any
    /// offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let wire: PlatformJson =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
                path: String::new(),
                message: format!("{} (at {})", e.inner(), e.path()),
            })?;
        Platform::try_from(wire)
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config { message, .. } => Error::Config {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn to_json_string(&self) -> String {
        // PlatformJson has no maps, so field order is the struct order.
        serde_json::to_string_pretty(&PlatformJson::from(self)).expect("platform serializes")
    }

    /// Scale selected characteristics, returning the modified platform.
    pub fn with_peak_flops(mut self, flops: f64) -> Self {
        self.npu.peak_flops = flops;
        self
    }

    pub fn with_fast_bandwidth(mut self, bw: f64) -> Self {
        self.npu.fast.bandwidth_bytes_per_s = bw;
        self
    }

    pub fn with_link_bandwidth(mut self, bw: f64) -> Self {
        self.icn.link_bandwidth_bytes_per_s = bw;
        self
    }

    pub fn with_link_latency(mut self, seconds: f64) -> Self {
        self.icn.link_latency_s = seconds;
        self
    }
}

fn npu(peak_tflops: f64, compute_eff: f64, fast: MemTier, slow: MemTier) -> NpuSpec {
    NpuSpec {
        peak_flops: peak_tflops * TFLOPS,
        compute_efficiency: compute_eff,
        fast,
        slow,
    }
}

fn tier(capacity_gb: f64, bandwidth_gb_per_s: f64, efficiency: f64) -> MemTier {
    MemTier {
        capacity_bytes: capacity_gb * GB,
        bandwidth_bytes_per_s: bandwidth_gb_per_s * GB,
        efficiency,
    }
}

fn icn(link_gb_per_s: f64, latency_us: f64, efficiency: f64) -> IcnSpec {
    IcnSpec {
        link_bandwidth_bytes_per_s: link_gb_per_s * GB,
        link_latency_s: latency_us * US,
        link_efficiency: efficiency,
        warmup_s: 0.0,
    }
}

/// Reference accelerator used in scaling studies: 800 TFLOPS, 40 GB of fast
/// memory at 4 TB/s, 300 GB/s links.
pub fn reference_npu() -> NpuSpec {
    npu(800.0, 0.6, tier(40.0, 4000.0, 0.7), default_slow_tier())
}

fn platform(n_npus: u64, npu: NpuSpec, icn: IcnSpec) -> Platform {
    Platform { n_npus, npu, icn }
}

/// Built-in platform presets, addressable by name from the CLI.
pub fn builtin_platforms() -> Vec<(String, Platform)> {
    vec![
        (
            "a100-80gb".to_string(),
            platform(
                1,
                npu(624.0, 0.6, tier(80.0, 2039.0, 0.7), default_slow_tier()),
                icn(600.0, 2.0, 0.75),
            ),
        ),
        (
            "a100-40gb-x2".to_string(),
            platform(
                2,
                npu(624.0, 0.6, tier(40.0, 1555.0, 0.7), default_slow_tier()),
                icn(600.0, 2.0, 0.75),
            ),
        ),
        (
            "h100-x8".to_string(),
            platform(
                8,
                npu(1979.0, 0.6, tier(80.0, 3350.0, 0.7), default_slow_tier()),
                icn(900.0, 2.0, 0.75),
            ),
        ),
        (
            "reference-x2".to_string(),
            platform(2, reference_npu(), icn(300.0, 2.0, 0.75)),
        ),
    ]
}

/// Resolve a platform by preset name or JSON file path.
pub fn load_platform(name_or_path: &str) -> Result<Platform> {
    if let Some((_, p)) = builtin_platforms()
        .into_iter()
        .find(|(n, _)| n == name_or_path)
    {
        return Ok(p);
    }
    let path = std::path::Path::new(name_or_path);
    if path.is_file() {
        return Platform::from_json_file(path);
    }
    Err(Error::Config {
        path: name_or_path.to_string(),
        message: "not a builtin platform name or readable file".to_string(),
    })
}

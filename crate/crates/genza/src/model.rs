//! Model catalog: architecture hyperparameters, parameter counting, per-layer
//! operator graphs for prefill and decode, and KV-cache sizing.
//!
//! Cost conventions used throughout:
//! - FLOPs = 2 x MACs for every matrix product.
//! - Only matrix-multiply operators are costed; elementwise work
//!   (normalization, residual adds, activation functions) and the embedding
//!   lookup are excluded as first-order noise.
//! - Grouped-query attention narrows the K/V projection width to
//!   `kv_heads * head_dim`; query heads keep full width.
//! - Mixture-of-experts: prefill keeps all `n_experts` weight sets resident
//!   (bytes x E) while each token computes through `experts_per_token` of
//!   them (FLOPs and activations x K). Decode reads exactly K experts' weights
//!   per layer regardless of batch.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Bytes per element for weights, activations, and KV cache.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Fp16,
    Int8,
    Fp8,
    Int4,
}

impl Precision {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fp16" => Ok(Precision::Fp16),
            "int8" => Ok(Precision::Int8),
            "fp8" => Ok(Precision::Fp8),
            "int4" => Ok(Precision::Int4),
            other => Err(Error::UnknownPrecision(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Fp16 => "fp16",
            Precision::Int8 => "int8",
            Precision::Fp8 => "fp8",
            Precision::Int4 => "int4",
        }
    }

    pub fn weight_bytes(self) -> f64 {
        match self {
            Precision::Fp16 => 2.0,
            Precision::Int8 | Precision::Fp8 => 1.0,
            Precision::Int4 => 0.5,
        }
    }

    pub fn act_bytes(self) -> f64 {
        self.weight_bytes()
    }

    pub fn kv_bytes(self) -> f64 {
        self.weight_bytes()
    }
}

/// Transformer architecture hyperparameters.
///
/// `ff_ratio` is the MLP expansion ratio; the hidden width is
/// `round(ff_ratio * d_model)`. Dense models are the `n_experts = 1` special
/// case of MoE. `mlp_gated` selects the 3-matrix (gated) MLP over the classic
/// 2-matrix one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModelConfig")]
pub struct ModelConfig {
    pub name: String,
    pub d_model: u64,
    pub n_layers: u64,
    pub n_heads: u64,
    pub kv_heads: u64,
    pub ff_ratio: f64,
    pub n_experts: u64,
    pub experts_per_token: u64,
    pub mlp_gated: bool,
}

/// Wire form of [`ModelConfig`]: MoE fields default to dense, `kv_heads`
/// defaults to `n_heads`. Unknown keys are rejected.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelConfig {
    name: String,
    d_model: u64,
    n_layers: u64,
    n_heads: u64,
    kv_heads: Option<u64>,
    ff_ratio: f64,
    #[serde(default = "one")]
    n_experts: u64,
    #[serde(default = "one")]
    experts_per_token: u64,
    #[serde(default)]
    mlp_gated: bool,
}

fn one() -> u64 {
    1
}

impl TryFrom<RawModelConfig> for ModelConfig {
    type Error = Error;

    fn try_from(raw: RawModelConfig) -> Result<Self> {
        let cfg = ModelConfig {
            kv_heads: raw.kv_heads.unwrap_or(raw.n_heads),
            name: raw.name,
            d_model: raw.d_model,
            n_layers: raw.n_layers,
            n_heads: raw.n_heads,
            ff_ratio: raw.ff_ratio,
            n_experts: raw.n_experts,
            experts_per_token: raw.experts_per_token,
            mlp_gated: raw.mlp_gated,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 {
            return Err(Error::invalid("d_model", "must be >= 1"));
        }
        if self.n_layers == 0 {
            return Err(Error::invalid("n_layers", "must be >= 1"));
        }
        if self.n_heads == 0 {
            return Err(Error::invalid("n_heads", "must be >= 1"));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::invalid(
                "n_heads",
                format!(
                    "head dim must be integral: d_model {} is not divisible by n_heads {}",
                    self.d_model, self.n_heads
                ),
            ));
        }
        if self.kv_heads == 0 || !self.n_heads.is_multiple_of(self.kv_heads) {
            return Err(Error::invalid(
                "kv_heads",
                format!(
                    "must divide n_heads: {} does not divide {}",
                    self.kv_heads, self.n_heads
                ),
            ));
        }
        if !(self.ff_ratio.is_finite() && self.ff_ratio > 0.0) {
            return Err(Error::invalid("ff_ratio", "must be finite and > 0"));
        }
        if self.d_ff() == 0 {
            return Err(Error::invalid("ff_ratio", "rounds to a zero-width MLP"));
        }
        if self.n_experts == 0 {
            return Err(Error::invalid("n_experts", "must be >= 1"));
        }
        if self.experts_per_token == 0 || self.experts_per_token > self.n_experts {
            return Err(Error::invalid(
                "experts_per_token",
                format!(
                    "must be in 1..=n_experts ({}), got {}",
                    self.n_experts, self.experts_per_token
                ),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn head_dim(&self) -> u64 {
        self.d_model / self.n_heads
    }

    /// MLP hidden width, `round(ff_ratio * d_model)`.
    #[inline]
    pub fn d_ff(&self) -> u64 {
        (self.ff_ratio * self.d_model as f64).round() as u64
    }

    /// Combined K+V projection width, `2 * kv_heads * head_dim`.
    #[inline]
    pub fn kv_width(&self) -> u64 {
        2 * self.kv_heads * self.head_dim()
    }

    #[inline]
    pub fn is_moe(&self) -> bool {
        self.n_experts > 1
    }

    /// Number of MLP weight matrices per expert (3 gated, 2 classic).
    #[inline]
    pub fn mlp_matrices(&self) -> u64 {
        if self.mlp_gated {
            3
        } else {
            2
        }
    }
}

/// Weight-parameter totals. `active_per_token` replaces the `n_experts`
/// factor with `experts_per_token`; for dense models the two are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub total: u64,
    pub active_per_token: u64,
    pub attention: u64,
}

/// Count weight parameters layer by layer (embeddings excluded).
pub fn count_params(model: &ModelConfig) -> ParamCount {
    let d = model.d_model as u128;
    let attn_per_layer = d * (d + model.kv_width() as u128) + d * d;
    let mlp_per_expert = model.mlp_matrices() as u128 * d * model.d_ff() as u128;
    let layers = model.n_layers as u128;

    let total = layers * (attn_per_layer + model.n_experts as u128 * mlp_per_expert);
    let active = layers * (attn_per_layer + model.experts_per_token as u128 * mlp_per_expert);
    ParamCount {
        total: total as u64,
        active_per_token: active as u64,
        attention: (layers * attn_per_layer) as u64,
    }
}

/// Matrix-multiply operators in one transformer layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    QkvProj,
    ScoreQk,
    ContextPv,
    OutProj,
    FfUp,
    FfGate,
    FfDown,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::QkvProj => "qkv_proj",
            OpKind::ScoreQk => "score_qk",
            OpKind::ContextPv => "context_pv",
            OpKind::OutProj => "out_proj",
            OpKind::FfUp => "ff_up",
            OpKind::FfGate => "ff_gate",
            OpKind::FfDown => "ff_down",
        }
    }

    /// Attention score/context ops; everything else is a plain GEMM.
    pub fn is_attention(self) -> bool {
        matches!(self, OpKind::ScoreQk | OpKind::ContextPv)
    }
}

/// One costed operator: shapes plus the byte/FLOP tallies the roofline needs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorSpec {
    pub kind: OpKind,
    /// Operand shapes of the (possibly batched) matrix product.
    pub input_shapes: Vec<Vec<u64>>,
    pub output_shape: Vec<u64>,
    pub flops: f64,
    pub weight_bytes: f64,
    pub activation_bytes: f64,
    pub kv_read_bytes: f64,
    pub is_weight_bearing: bool,
    pub is_kv_bearing: bool,
}

impl OperatorSpec {
    /// Total bytes this operator moves through memory.
    #[inline]
    pub fn total_bytes(&self) -> f64 {
        self.weight_bytes + self.activation_bytes + self.kv_read_bytes
    }

    /// The two operand shapes must agree on the contracted dimension and on
    /// leading batch dims, and produce `output_shape`.
    pub fn shapes_consistent(&self) -> bool {
        if self.input_shapes.len() != 2 {
            return false;
        }
        let (a, b) = (&self.input_shapes[0], &self.input_shapes[1]);
        if a.len() < 2 || b.len() < 2 || self.output_shape.len() != a.len() {
            return false;
        }
        let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
        let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
        if k != k2 {
            return false;
        }
        let out = &self.output_shape;
        if out[out.len() - 2] != m || out[out.len() - 1] != n {
            return false;
        }
        // Batch dims of the first operand must carry through to the output.
        a[..a.len() - 2] == out[..out.len() - 2]
    }
}

/// Inference stage a graph models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prefill,
    Decode,
}

/// Per-layer operator list; the whole model is `n_layers` repetitions.
/// Tensor-parallel sharding inserts collectives at `collective_points_per_layer`
/// points (after attention out-projection and after the MLP).
#[derive(Clone, Debug, Serialize)]
pub struct OperatorGraph {
    pub stage: Stage,
    pub batch: u64,
    pub per_layer_ops: Vec<OperatorSpec>,
    pub n_layers: u64,
    pub collective_points_per_layer: u32,
}

impl OperatorGraph {
    /// Weight bytes for the whole model under this graph's counting rules.
    pub fn total_weight_bytes(&self) -> f64 {
        let per_layer: f64 = self.per_layer_ops.iter().map(|op| op.weight_bytes).sum();
        per_layer * self.n_layers as f64
    }

    /// FLOPs for the whole model (all layers).
    pub fn total_flops(&self) -> f64 {
        let per_layer: f64 = self.per_layer_ops.iter().map(|op| op.flops).sum();
        per_layer * self.n_layers as f64
    }

    /// Largest single-operator activation footprint, the working-set proxy
    /// used for capacity accounting.
    pub fn peak_activation_bytes(&self) -> f64 {
        self.per_layer_ops
            .iter()
            .map(|op| op.activation_bytes)
            .fold(0.0, f64::max)
    }
}

fn check_dims(model: &ModelConfig, batch: u64, tokens: u64) -> Result<()> {
    if batch == 0 {
        return Err(Error::invalid("batch", "must be >= 1"));
    }
    // Costs are carried in f64; reject sizes that would lose integer meaning
    // catastrophically rather than silently saturate.
    let worst = (batch as f64)
        * (tokens as f64 + 1.0)
        * (model.d_model as f64)
        * (model.d_ff().max(model.d_model) as f64)
        * (model.n_experts as f64);
    if !worst.is_finite() {
        return Err(Error::invalid("dimensions", "cost overflows f64 range"));
    }
    Ok(())
}

/// Build the prefill (prompt-processing) layer graph: every operator works on
/// all `tokens` positions at once.
pub fn build_prefill_graph(
    model: &ModelConfig,
    batch: u64,
    tokens: u64,
    precision: Precision,
) -> Result<OperatorGraph> {
    if tokens == 0 {
        return Err(Error::invalid("input_tokens", "prefill needs >= 1 token"));
    }
    check_dims(model, batch, tokens)?;

    let b = batch as f64;
    let t = tokens as f64;
    let d = model.d_model as f64;
    let h = model.n_heads as f64;
    let dh = model.head_dim() as f64;
    let kvw = model.kv_width() as f64; // 2 * kv_heads * head_dim
    let dff = model.d_ff() as f64;
    let e = model.n_experts as f64;
    let k = model.experts_per_token as f64;
    let wb = precision.weight_bytes();
    let ab = precision.act_bytes();

    let (d_u, h_u, dh_u, dff_u) = (model.d_model, model.n_heads, model.head_dim(), model.d_ff());
    let kvw_u = model.kv_width();

    let mut ops = vec![
        OperatorSpec {
            kind: OpKind::QkvProj,
            input_shapes: vec![vec![batch, tokens, d_u], vec![d_u, d_u + kvw_u]],
            output_shape: vec![batch, tokens, d_u + kvw_u],
            flops: 2.0 * b * t * d * (d + kvw),
            weight_bytes: d * (d + kvw) * wb,
            activation_bytes: (b * t * d + b * t * (d + kvw)) * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        },
        OperatorSpec {
            kind: OpKind::ScoreQk,
            input_shapes: vec![
                vec![batch, h_u, tokens, dh_u],
                vec![batch, h_u, dh_u, tokens],
            ],
            output_shape: vec![batch, h_u, tokens, tokens],
            flops: 2.0 * b * h * t * t * dh,
            // Q read at full width, K read at kv_heads width, score matrix out.
            activation_bytes: (b * t * d + b * t * (kvw / 2.0) + b * h * t * t) * ab,
            weight_bytes: 0.0,
            kv_read_bytes: 0.0,
            is_weight_bearing: false,
            is_kv_bearing: false,
        },
        OperatorSpec {
            kind: OpKind::ContextPv,
            input_shapes: vec![
                vec![batch, h_u, tokens, tokens],
                vec![batch, h_u, tokens, dh_u],
            ],
            output_shape: vec![batch, h_u, tokens, dh_u],
            flops: 2.0 * b * h * t * t * dh,
            activation_bytes: (b * h * t * t + b * t * (kvw / 2.0) + b * t * d) * ab,
            weight_bytes: 0.0,
            kv_read_bytes: 0.0,
            is_weight_bearing: false,
            is_kv_bearing: false,
        },
        OperatorSpec {
            kind: OpKind::OutProj,
            input_shapes: vec![vec![batch, tokens, d_u], vec![d_u, d_u]],
            output_shape: vec![batch, tokens, d_u],
            flops: 2.0 * b * t * d * d,
            weight_bytes: d * d * wb,
            activation_bytes: 2.0 * b * t * d * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        },
    ];

    // MLP: bytes keep all E expert weight sets resident, compute and
    // activations route each token through K experts.
    let mut push_ff = |kind: OpKind, in_w: u64, out_w: u64| {
        ops.push(OperatorSpec {
            kind,
            input_shapes: vec![vec![batch, tokens, in_w], vec![in_w, out_w]],
            output_shape: vec![batch, tokens, out_w],
            flops: k * 2.0 * b * t * d * dff,
            weight_bytes: e * d * dff * wb,
            activation_bytes: k * (b * t * in_w as f64 + b * t * out_w as f64) * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        });
    };
    push_ff(OpKind::FfUp, d_u, dff_u);
    if model.mlp_gated {
        push_ff(OpKind::FfGate, d_u, dff_u);
    }
    push_ff(OpKind::FfDown, dff_u, d_u);

    Ok(OperatorGraph {
        stage: Stage::Prefill,
        batch,
        per_layer_ops: ops,
        n_layers: model.n_layers,
        collective_points_per_layer: 2,
    })
}

/// Build the decode layer graph for generating one token at context length
/// `tau_cur` (tokens already resident in the KV cache). `batch_eff` is the
/// effective decode batch, `B * beam_size`.
pub fn build_decode_graph(
    model: &ModelConfig,
    batch_eff: u64,
    tau_cur: u64,
    precision: Precision,
) -> Result<OperatorGraph> {
    check_dims(model, batch_eff, tau_cur)?;

    let b = batch_eff as f64;
    let d = model.d_model as f64;
    let h = model.n_heads as f64;
    let dh = model.head_dim() as f64;
    let kvw = model.kv_width() as f64;
    let dff = model.d_ff() as f64;
    let k = model.experts_per_token as f64;
    let wb = precision.weight_bytes();
    let ab = precision.act_bytes();
    let kvb = precision.kv_bytes();

    // Attention spans the cached context plus the token being generated.
    let span = tau_cur + 1;
    let s = span as f64;
    // Each of K and V is span * kv_heads * head_dim elements per sequence.
    let kv_half = b * s * (kvw / 2.0) * kvb;

    let (d_u, h_u, dh_u, dff_u) = (model.d_model, model.n_heads, model.head_dim(), model.d_ff());
    let kvw_u = model.kv_width();

    let mut ops = vec![
        OperatorSpec {
            kind: OpKind::QkvProj,
            input_shapes: vec![vec![batch_eff, 1, d_u], vec![d_u, d_u + kvw_u]],
            output_shape: vec![batch_eff, 1, d_u + kvw_u],
            flops: 2.0 * b * d * (d + kvw),
            weight_bytes: d * (d + kvw) * wb,
            activation_bytes: (b * d + b * (d + kvw)) * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        },
        OperatorSpec {
            kind: OpKind::ScoreQk,
            input_shapes: vec![
                vec![batch_eff, h_u, 1, dh_u],
                vec![batch_eff, h_u, dh_u, span],
            ],
            output_shape: vec![batch_eff, h_u, 1, span],
            flops: 2.0 * b * h * s * dh,
            activation_bytes: (b * d + b * h * s) * ab,
            weight_bytes: 0.0,
            kv_read_bytes: kv_half, // reads the K cache
            is_weight_bearing: false,
            is_kv_bearing: true,
        },
        OperatorSpec {
            kind: OpKind::ContextPv,
            input_shapes: vec![
                vec![batch_eff, h_u, 1, span],
                vec![batch_eff, h_u, span, dh_u],
            ],
            output_shape: vec![batch_eff, h_u, 1, dh_u],
            flops: 2.0 * b * h * s * dh,
            activation_bytes: (b * h * s + b * d) * ab,
            weight_bytes: 0.0,
            kv_read_bytes: kv_half, // reads the V cache
            is_weight_bearing: false,
            is_kv_bearing: true,
        },
        OperatorSpec {
            kind: OpKind::OutProj,
            input_shapes: vec![vec![batch_eff, 1, d_u], vec![d_u, d_u]],
            output_shape: vec![batch_eff, 1, d_u],
            flops: 2.0 * b * d * d,
            weight_bytes: d * d * wb,
            activation_bytes: 2.0 * b * d * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        },
    ];

    // Decode touches exactly K experts' weights per layer.
    let mut push_ff = |kind: OpKind, in_w: u64, out_w: u64| {
        ops.push(OperatorSpec {
            kind,
            input_shapes: vec![vec![batch_eff, 1, in_w], vec![in_w, out_w]],
            output_shape: vec![batch_eff, 1, out_w],
            flops: k * 2.0 * b * d * dff,
            weight_bytes: k * d * dff * wb,
            activation_bytes: k * (b * in_w as f64 + b * out_w as f64) * ab,
            kv_read_bytes: 0.0,
            is_weight_bearing: true,
            is_kv_bearing: false,
        });
    };
    push_ff(OpKind::FfUp, d_u, dff_u);
    if model.mlp_gated {
        push_ff(OpKind::FfGate, d_u, dff_u);
    }
    push_ff(OpKind::FfDown, dff_u, d_u);

    Ok(OperatorGraph {
        stage: Stage::Decode,
        batch: batch_eff,
        per_layer_ops: ops,
        n_layers: model.n_layers,
        collective_points_per_layer: 2,
    })
}

/// Full KV cache footprint in bytes once `tau_d` tokens have been generated:
/// `2 * B * (tau_p + S_b * tau_d) * kv_heads * head_dim * n_layers * kv_bytes`.
/// The leading 2 counts K and V; each beam holds its own cache.
pub fn kv_cache_bytes(
    model: &ModelConfig,
    batch: u64,
    beam: u64,
    tau_p: u64,
    tau_d: u64,
    precision: Precision,
) -> f64 {
    let context = (tau_p + beam * tau_d) as f64;
    2.0 * batch as f64
        * context
        * (model.kv_heads * model.head_dim()) as f64
        * model.n_layers as f64
        * precision.kv_bytes()
}

#[allow(clippy::too_many_arguments)] // one row of the catalog table
fn builtin(
    name: &str,
    d_model: u64,
    n_layers: u64,
    n_heads: u64,
    kv_heads: u64,
    ff_ratio: f64,
    n_experts: u64,
    experts_per_token: u64,
    mlp_gated: bool,
) -> ModelConfig {
    ModelConfig {
        name: name.to_string(),
        d_model,
        n_layers,
        n_heads,
        kv_heads,
        ff_ratio,
        n_experts,
        experts_per_token,
        mlp_gated,
    }
}

/// The built-in model catalog.
pub fn builtin_models() -> Vec<ModelConfig> {
    vec![
        builtin("llama2-7b", 4096, 32, 32, 32, 2.6875, 1, 1, true),
        builtin("mixtral-8x7b", 4096, 32, 32, 8, 3.5, 8, 2, true),
        builtin("llama3-70b", 8192, 80, 64, 8, 3.5, 1, 1, true),
        builtin("gpt3-175b", 12288, 96, 96, 96, 4.0, 1, 1, false),
        builtin("gpt4-1.8t", 10752, 120, 84, 84, 4.0, 16, 2, false),
        builtin("super-llm-10t", 13824, 128, 108, 108, 4.0, 32, 4, true),
    ]
}

/// Environment variable holding extra model-config search directories
/// (colon-separated).
pub const MODEL_PATH_ENV: &str = "GENZA_MODEL_PATH";

fn read_model_file(path: &std::path::Path) -> Result<ModelConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: format!("{} (at {})", e.inner(), e.path()),
    })
}

/// Resolve a model by builtin name, explicit file path, or `<name>.json`
/// under any directory listed in `GENZA_MODEL_PATH`.
pub fn load_model_config(name_or_path: &str) -> Result<ModelConfig> {
    if let Some(m) = builtin_models()
        .into_iter()
        .find(|m| m.name == name_or_path)
    {
        return Ok(m);
    }
    let direct = std::path::Path::new(name_or_path);
    if direct.is_file() {
        return read_model_file(direct);
    }
    if let Ok(dirs) = std::env::var(MODEL_PATH_ENV) {
        for dir in dirs.split(':').filter(|d| !d.is_empty()) {
            let candidate = std::path::Path::new(dir).join(format!("{name_or_path}.json"));
            if candidate.is_file() {
                return read_model_file(&candidate);
            }
        }
    }
    Err(Error::UnknownModel(name_or_path.to_string()))
}

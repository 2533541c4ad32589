//! Serving workloads: named use-case presets (token budgets, beam width,
//! latency targets) and the full workload descriptor the analyzer consumes.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{self, ModelConfig, Precision};
use crate::Result;

/// A serving scenario: prompt/generation token budgets, beam width, and the
/// latency targets it must meet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUseCase")]
pub struct UseCase {
    pub name: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub beam_size: u64,
    pub ttft_slo_s: f64,
    pub tpot_slo_s: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUseCase {
    name: String,
    input_tokens: u64,
    output_tokens: u64,
    #[serde(default = "default_beam")]
    beam_size: u64,
    ttft_slo_s: f64,
    tpot_slo_s: f64,
}

fn default_beam() -> u64 {
    1
}

impl TryFrom<RawUseCase> for UseCase {
    type Error = Error;

    fn try_from(raw: RawUseCase) -> Result<Self> {
        let uc = UseCase {
            name: raw.name,
            input_tokens: raw.input_tokens,
            output_tokens: raw.output_tokens,
            beam_size: raw.beam_size,
            ttft_slo_s: raw.ttft_slo_s,
            tpot_slo_s: raw.tpot_slo_s,
        };
        uc.validate()?;
        Ok(uc)
    }
}

impl UseCase {
    pub fn validate(&self) -> Result<()> {
        if self.input_tokens == 0 {
            return Err(Error::invalid("input_tokens", "must be >= 1"));
        }
        if self.output_tokens == 0 {
            return Err(Error::invalid("output_tokens", "must be >= 1"));
        }
        if self.beam_size == 0 {
            return Err(Error::invalid("beam_size", "must be >= 1"));
        }
        if !(self.ttft_slo_s.is_finite() && self.ttft_slo_s > 0.0) {
            return Err(Error::invalid("ttft_slo_s", "must be finite and > 0"));
        }
        if !(self.tpot_slo_s.is_finite() && self.tpot_slo_s > 0.0) {
            return Err(Error::invalid("tpot_slo_s", "must be finite and > 0"));
        }
        Ok(())
    }

    /// Total context length once generation finishes: `tau_p + S_b * tau_d`.
    pub fn final_context(&self) -> u64 {
        self.input_tokens + self.beam_size * self.output_tokens
    }
}

fn preset(
    name: &str,
    input_tokens: u64,
    output_tokens: u64,
    beam_size: u64,
    ttft_slo_s: f64,
    tpot_slo_s: f64,
) -> UseCase {
    UseCase {
        name: name.to_string(),
        input_tokens,
        output_tokens,
        beam_size,
        ttft_slo_s,
        tpot_slo_s,
    }
}

/// The built-in use-case presets.
pub fn builtin_usecases() -> Vec<UseCase> {
    vec![
        preset("qa", 1000, 200, 4, 0.2, 0.010),
        preset("chat", 3000, 1000, 2, 0.2, 0.010),
        preset("qa-rag", 10_000, 200, 4, 0.4, 0.010),
        preset("summarization", 15_000, 1000, 4, 2.0, 0.020),
        preset("codegen", 20_000, 50, 4, 0.5, 0.020),
    ]
}

/// Resolve a use case by builtin name.
pub fn load_usecase(name: &str) -> Result<UseCase> {
    builtin_usecases()
        .into_iter()
        .find(|u| u.name == name)
        .ok_or_else(|| Error::UnknownUseCase(name.to_string()))
}

/// Reference to a model: either a catalog/filesystem name or an inline config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Name(String),
    Inline(ModelConfig),
}

impl ModelRef {
    pub fn resolve(&self) -> Result<ModelConfig> {
        match self {
            ModelRef::Name(name) => model::load_model_config(name),
            ModelRef::Inline(cfg) => {
                cfg.validate()?;
                Ok(cfg.clone())
            }
        }
    }
}

/// Reference to a use case: builtin name or inline definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UseCaseRef {
    Name(String),
    Inline(UseCase),
}

impl UseCaseRef {
    pub fn resolve(&self) -> Result<UseCase> {
        match self {
            UseCaseRef::Name(name) => load_usecase(name),
            UseCaseRef::Inline(uc) => {
                uc.validate()?;
                Ok(uc.clone())
            }
        }
    }
}

/// Everything the analyzer needs besides the platform: which model, which
/// serving scenario, numeric precision, batch, and the parallelism mapping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub model: ModelRef,
    pub usecase: UseCaseRef,
    pub precision: Precision,
    pub batch: u64,
    #[serde(default = "default_par")]
    pub tensor_parallel: u64,
    #[serde(default = "default_par")]
    pub pipeline_parallel: u64,
}

fn default_par() -> u64 {
    1
}

/// Fully resolved workload.
#[derive(Clone, Debug, PartialEq)]
pub struct Workload {
    pub model: ModelConfig,
    pub usecase: UseCase,
    pub precision: Precision,
    pub batch: u64,
    pub tensor_parallel: u64,
    pub pipeline_parallel: u64,
}

impl WorkloadSpec {
    /// Parse a workload from its JSON wire form, reporting the path of any
    /// offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: String::new(),
            message: format!("{} (at {})", e.inner(), e.path()),
        })
    }

    pub fn resolve(&self) -> Result<Workload> {
        if self.batch == 0 {
            return Err(Error::invalid("batch", "must be >= 1"));
        }
        if self.tensor_parallel == 0 {
            return Err(Error::invalid("tensor_parallel", "must be >= 1"));
        }
        if self.pipeline_parallel == 0 {
            return Err(Error::invalid("pipeline_parallel", "must be >= 1"));
        }
        Ok(Workload {
            model: self.model.resolve()?,
            usecase: self.usecase.resolve()?,
            precision: self.precision,
            batch: self.batch,
            tensor_parallel: self.tensor_parallel,
            pipeline_parallel: self.pipeline_parallel,
        })
    }
}

impl Workload {
    /// Effective decode batch: request batch times beam width.
    pub fn effective_batch(&self) -> u64 {
        self.batch * self.usecase.beam_size
    }

    /// Context length at which the representative decode step is evaluated:
    /// the midpoint of generation, clamped to the last valid step.
    pub fn representative_decode_context(&self) -> u64 {
        let tau_p = self.usecase.input_tokens;
        let tau_d = self.usecase.output_tokens;
        let mid = tau_p + tau_d.div_ceil(2);
        mid.min(tau_p + tau_d - 1)
    }
}

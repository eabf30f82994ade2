//! Single abstraction over all model inference: chat generation, text
//! embedding, and NLI classification. Two backends implement it — an
//! OpenAI-compatible HTTP client ([`live::LiveGateway`]) and a deterministic,
//! network-free mock ([`mock::MockGateway`]) driven by a seed and optional
//! fixtures.

pub mod fixtures;
pub mod live;
pub mod mock;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use fixtures::Fixtures;
pub use live::{LiveGateway, LiveGatewayConfig};
pub use mock::MockGateway;

/// Tolerance for the unit-norm and sum-to-one checks.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limit exhausted after {attempts} attempts: {message}")]
    RateLimitExhausted { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("http {status}: {message}")]
    Http { status: u16, message: String },
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
}

/// One chat-completion call. Pipeline stages all use temperature 0 so that
/// identical inputs produce identical generations on deterministic backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_content: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    pub fn deterministic(
        system_prompt: impl Into<String>,
        user_content: impl Into<String>,
        max_output_tokens: u32,
        model_id: impl Into<String>,
    ) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_content: user_content.into(),
            temperature: 0.0,
            max_output_tokens,
            model_id: model_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_content.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(
                "user_content must be nonempty".into(),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A unit-norm embedding plus the digest of the text it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_text_hash: String,
}

impl EmbeddingVector {
    /// Normalizes `values` to unit L2 norm and records the source digest.
    pub fn normalized(mut values: Vec<f64>, source_text: &str) -> Result<Self, GatewayError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GatewayError::Protocol(format!(
                "embedding has degenerate norm {norm}"
            )));
        }
        for v in &mut values {
            *v /= norm;
        }
        Ok(Self {
            values,
            source_text_hash: sha256_hex(source_text),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Three-way NLI distribution: contradiction, neutral, entailment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliVerdict {
    pub q_contra: f64,
    pub q_neutral: f64,
    pub q_entail: f64,
}

impl NliVerdict {
    /// Accepts only distributions with components in [0, 1] summing to one
    /// (within [`PROBABILITY_TOLERANCE`]); anything else is a protocol error.
    pub fn new(q_contra: f64, q_neutral: f64, q_entail: f64) -> Result<Self, GatewayError> {
        for (name, q) in [
            ("contradiction", q_contra),
            ("neutral", q_neutral),
            ("entailment", q_entail),
        ] {
            if !(0.0..=1.0).contains(&q) || !q.is_finite() {
                return Err(GatewayError::Protocol(format!(
                    "{name} probability {q} outside [0, 1]"
                )));
            }
        }
        let sum = q_contra + q_neutral + q_entail;
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(GatewayError::Protocol(format!(
                "NLI distribution sums to {sum}, expected 1"
            )));
        }
        Ok(Self {
            q_contra,
            q_neutral,
            q_entail,
        })
    }

    pub fn uniform() -> Self {
        Self {
            q_contra: 1.0 / 3.0,
            q_neutral: 1.0 / 3.0,
            q_entail: 1.0 / 3.0,
        }
    }
}

/// How a backend is reached and how hard to lean on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub base_url: String,
    pub auth_env_var: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Requests per second; 0 disables pacing.
    pub rate_limit_per_sec: f64,
    pub mode: BackendMode,
    /// Mock determinism seed; ignored in live mode.
    pub seed: u64,
    /// First backoff pause in milliseconds (doubles per retry).
    pub retry_initial_ms: u64,
    /// Upper bound on concurrently in-flight requests.
    pub max_in_flight: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            auth_env_var: "INFERENCE_API_KEY".into(),
            timeout_secs: 60,
            max_retries: 4,
            rate_limit_per_sec: 4.0,
            mode: BackendMode::Live,
            seed: 42,
            retry_initial_ms: 500,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    Live,
    Mock,
}

/// The inference surface the whole pipeline is written against.
///
/// Implementations must be safe for concurrent use. Mock implementations are
/// pure functions of (request, seed, fixtures).
#[async_trait]
pub trait InferenceGateway: Send + Sync {
    /// Returns the model's text completion for a validated request.
    async fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError>;

    /// Embeds each text, order-preserving, one unit-norm vector per input.
    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError>;

    /// Classifies the (premise, hypothesis) pair into a three-way
    /// distribution.
    async fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError>;
}

pub(crate) fn validate_embed_inputs(texts: &[String]) -> Result<(), GatewayError> {
    if texts.is_empty() {
        return Err(GatewayError::InvalidRequest(
            "embed requires at least one text".into(),
        ));
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(GatewayError::InvalidRequest(format!(
            "embed input {i} is empty"
        )));
    }
    Ok(())
}

pub(crate) fn validate_nli_inputs(premise: &str, hypothesis: &str) -> Result<(), GatewayError> {
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(GatewayError::InvalidRequest(
            "nli premise and hypothesis must be nonempty".into(),
        ));
    }
    Ok(())
}

/// Checks that every vector in a batch shares one dimension.
pub(crate) fn check_uniform_dimension(vectors: &[EmbeddingVector]) -> Result<(), GatewayError> {
    if let Some(first) = vectors.first() {
        let d = first.dim();
        if let Some(bad) = vectors.iter().find(|v| v.dim() != d) {
            return Err(GatewayError::Protocol(format!(
                "embedding dimension mismatch in batch: {} vs {}",
                d,
                bad.dim()
            )));
        }
    }
    Ok(())
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hex::encode(hasher.finalize())
}

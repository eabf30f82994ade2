//! Live HTTP backend speaking the OpenAI-compatible chat-completions and
//! embeddings protocols, plus a generic three-way classification endpoint
//! for NLI. Transient failures (timeouts, 429, 5xx) are retried with
//! exponential backoff; auth failures are surfaced immediately.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::transport::{HttpResponse, HttpTransport, RateLimiter, ReqwestTransport, RetryPolicy, TransportError};

use super::{
    check_uniform_dimension, validate_embed_inputs, validate_nli_inputs, BackendConfig,
    ChatRequest, EmbeddingVector, GatewayError, InferenceGateway, NliVerdict,
};

/// One reachable endpoint plus its client-side discipline (auth, retries,
/// pacing, in-flight bound).
pub struct LiveBackend {
    config: BackendConfig,
    transport: Arc<dyn HttpTransport>,
    limiter: RateLimiter,
    in_flight: Semaphore,
}

impl LiveBackend {
    pub fn new(config: BackendConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let limiter = RateLimiter::new(config.rate_limit_per_sec);
        let in_flight = Semaphore::new(config.max_in_flight.max(1));
        Self {
            config,
            transport,
            limiter,
            in_flight,
        }
    }

    /// Builds a backend with its own reqwest transport.
    pub fn with_default_transport(config: BackendConfig) -> Result<Self, GatewayError> {
        let transport = ReqwestTransport::new(Duration::from_secs(config.timeout_secs))
            .map_err(|e| GatewayError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(Self::new(config, Arc::new(transport)))
    }

    fn endpoint(&self, path: &str) -> String {
        format!(
            "{}/{}",
            self.config.base_url.trim_end_matches('/'),
            path.trim_start_matches('/')
        )
    }

    fn auth_headers(&self) -> Result<Vec<(String, String)>, GatewayError> {
        if self.config.auth_env_var.is_empty() {
            return Ok(Vec::new());
        }
        match std::env::var(&self.config.auth_env_var) {
            Ok(token) if !token.is_empty() => Ok(vec![(
                "Authorization".to_string(),
                format!("Bearer {token}"),
            )]),
            _ => Err(GatewayError::Auth(format!(
                "environment variable {} is not set",
                self.config.auth_env_var
            ))),
        }
    }

    async fn post_with_retry(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<HttpResponse, GatewayError> {
        let headers = self.auth_headers()?;
        let url = self.endpoint(path);
        let policy = RetryPolicy {
            max_retries: self.config.max_retries,
            initial_delay: Duration::from_millis(self.config.retry_initial_ms),
        };
        let _permit = self
            .in_flight
            .acquire()
            .await
            .expect("in-flight semaphore closed");

        let mut attempts = 0u32;
        loop {
            self.limiter.acquire().await;
            attempts += 1;
            let outcome = self.transport.post_json(&url, &headers, body.clone()).await;
            match outcome {
                Ok(res) if res.is_success() => return Ok(res),
                Ok(res) if res.status == 401 || res.status == 403 => {
                    return Err(GatewayError::Auth(format!(
                        "http {}: {}",
                        res.status,
                        snippet(&res.body)
                    )));
                }
                Ok(res) if res.is_retryable() => {
                    if attempts > self.config.max_retries {
                        return Err(if res.status == 429 {
                            GatewayError::RateLimitExhausted {
                                attempts,
                                message: snippet(&res.body),
                            }
                        } else {
                            GatewayError::Http {
                                status: res.status,
                                message: snippet(&res.body),
                            }
                        });
                    }
                    let delay = policy.delay(attempts - 1);
                    tracing::warn!(status = res.status, ?delay, url, "retrying request");
                    tokio::time::sleep(delay).await;
                }
                Ok(res) => {
                    return Err(GatewayError::Http {
                        status: res.status,
                        message: snippet(&res.body),
                    });
                }
                Err(TransportError::Timeout) if attempts <= self.config.max_retries => {
                    let delay = policy.delay(attempts - 1);
                    tracing::warn!(?delay, url, "timeout, retrying");
                    tokio::time::sleep(delay).await;
                }
                Err(TransportError::Timeout) => {
                    return Err(GatewayError::Timeout { attempts });
                }
                Err(TransportError::Network(message)) if attempts <= self.config.max_retries => {
                    let delay = policy.delay(attempts - 1);
                    tracing::warn!(%message, ?delay, url, "network error, retrying");
                    tokio::time::sleep(delay).await;
                }
                Err(TransportError::Network(message)) => {
                    return Err(GatewayError::Transport { attempts, message });
                }
            }
        }
    }
}

fn snippet(body: &str) -> String {
    let trimmed = body.trim();
    if trimmed.len() <= 200 {
        trimmed.to_string()
    } else {
        let cut = trimmed
            .char_indices()
            .take_while(|(i, _)| *i < 200)
            .last()
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        format!("{}…", &trimmed[..cut])
    }
}

#[derive(Deserialize)]
struct ChatCompletionResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct ClassificationResponse {
    contradiction: f64,
    neutral: f64,
    entailment: f64,
}

fn parse_json<T: for<'de> Deserialize<'de>>(res: &HttpResponse) -> Result<T, GatewayError> {
    serde_json::from_str(&res.body)
        .map_err(|e| GatewayError::Protocol(format!("malformed response payload: {e}")))
}

/// Routes chat requests to per-model backends and serves embeddings and NLI
/// from their own endpoints. This is how the extraction model and the
/// fine-tuned novelty model live behind different base URLs while the
/// pipeline sees one gateway.
pub struct LiveGateway {
    default_chat: LiveBackend,
    chat_overrides: HashMap<String, LiveBackend>,
    embedding: LiveBackend,
    embedding_model_id: String,
    nli: LiveBackend,
}

/// Wiring for [`LiveGateway`].
pub struct LiveGatewayConfig {
    pub default_chat: BackendConfig,
    /// model_id → endpoint, consulted before the default chat backend.
    pub chat_overrides: HashMap<String, BackendConfig>,
    pub embedding: BackendConfig,
    pub embedding_model_id: String,
    pub nli: BackendConfig,
}

impl LiveGateway {
    pub fn new(config: LiveGatewayConfig, transport: Arc<dyn HttpTransport>) -> Self {
        let chat_overrides = config
            .chat_overrides
            .into_iter()
            .map(|(model, cfg)| (model, LiveBackend::new(cfg, Arc::clone(&transport))))
            .collect();
        Self {
            default_chat: LiveBackend::new(config.default_chat, Arc::clone(&transport)),
            chat_overrides,
            embedding: LiveBackend::new(config.embedding, Arc::clone(&transport)),
            embedding_model_id: config.embedding_model_id,
            nli: LiveBackend::new(config.nli, transport),
        }
    }

    fn chat_backend(&self, model_id: &str) -> &LiveBackend {
        self.chat_overrides
            .get(model_id)
            .unwrap_or(&self.default_chat)
    }
}

#[async_trait]
impl InferenceGateway for LiveGateway {
    async fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let backend = self.chat_backend(&req.model_id);
        let body = json!({
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_content},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        });
        let res = backend.post_with_retry("chat/completions", body).await?;
        let parsed: ChatCompletionResponse = parse_json(&res)?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }
        Ok(content)
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        validate_embed_inputs(texts)?;
        let body = json!({
            "model": self.embedding_model_id,
            "input": texts,
        });
        let res = self.embedding.post_with_retry("embeddings", body).await?;
        let parsed: EmbeddingsResponse = parse_json(&res)?;
        if parsed.data.len() != texts.len() {
            return Err(GatewayError::Protocol(format!(
                "embedding count mismatch: sent {}, got {}",
                texts.len(),
                parsed.data.len()
            )));
        }
        let mut data = parsed.data;
        data.sort_by_key(|d| d.index);
        let vectors = data
            .into_iter()
            .zip(texts)
            .map(|(d, text)| EmbeddingVector::normalized(d.embedding, text))
            .collect::<Result<Vec<_>, _>>()?;
        check_uniform_dimension(&vectors)?;
        Ok(vectors)
    }

    async fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        validate_nli_inputs(premise, hypothesis)?;
        let body = json!({
            "premise": premise,
            "hypothesis": hypothesis,
        });
        let res = self.nli.post_with_retry("classify", body).await?;
        let parsed: ClassificationResponse = parse_json(&res)?;
        NliVerdict::new(parsed.contradiction, parsed.neutral, parsed.entailment)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::CountingTransport;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn test_config(max_retries: u32) -> BackendConfig {
        BackendConfig {
            base_url: "http://fake.test/v1".into(),
            auth_env_var: String::new(), // no auth in unit tests
            max_retries,
            rate_limit_per_sec: 0.0,
            retry_initial_ms: 1,
            ..Default::default()
        }
    }

    fn chat_body(text: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
    }

    fn gateway_with(transport: Arc<CountingTransport>, cfg: BackendConfig) -> LiveGateway {
        LiveGateway::new(
            LiveGatewayConfig {
                default_chat: cfg.clone(),
                chat_overrides: HashMap::new(),
                embedding: cfg.clone(),
                embedding_model_id: "embed-model".into(),
                nli: cfg,
            },
            transport,
        )
    }

    #[tokio::test]
    async fn retries_transient_failures_then_succeeds() {
        let calls = Arc::new(AtomicUsize::new(0));
        let calls_in = Arc::clone(&calls);
        let transport = CountingTransport::new(move |_| {
            let n = calls_in.fetch_add(1, Ordering::SeqCst);
            if n < 2 {
                Ok(HttpResponse {
                    status: 503,
                    body: "unavailable".into(),
                })
            } else {
                Ok(HttpResponse {
                    status: 200,
                    body: chat_body("recovered"),
                })
            }
        });
        let gw = gateway_with(Arc::clone(&transport), test_config(4));
        let req = ChatRequest::deterministic("s", "u", 16, "m");
        assert_eq!(gw.chat(&req).await.unwrap(), "recovered");
        assert_eq!(transport.total_calls(), 3);
    }

    #[tokio::test]
    async fn auth_failure_is_not_retried() {
        let transport = CountingTransport::new(|_| {
            Ok(HttpResponse {
                status: 401,
                body: "bad token".into(),
            })
        });
        let gw = gateway_with(Arc::clone(&transport), test_config(4));
        let req = ChatRequest::deterministic("s", "u", 16, "m");
        assert!(matches!(gw.chat(&req).await, Err(GatewayError::Auth(_))));
        assert_eq!(transport.total_calls(), 1);
    }

    #[tokio::test]
    async fn rate_limit_exhaustion_reports_attempts() {
        let transport = CountingTransport::new(|_| {
            Ok(HttpResponse {
                status: 429,
                body: "slow down".into(),
            })
        });
        let gw = gateway_with(Arc::clone(&transport), test_config(2));
        let req = ChatRequest::deterministic("s", "u", 16, "m");
        match gw.chat(&req).await {
            Err(GatewayError::RateLimitExhausted { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected rate-limit exhaustion, got {other:?}"),
        }
        assert_eq!(transport.total_calls(), 3);
    }

    #[tokio::test]
    async fn empty_completion_is_an_error() {
        let transport = CountingTransport::new(|_| {
            Ok(HttpResponse {
                status: 200,
                body: chat_body("  "),
            })
        });
        let gw = gateway_with(transport, test_config(0));
        let req = ChatRequest::deterministic("s", "u", 16, "m");
        assert!(matches!(
            gw.chat(&req).await,
            Err(GatewayError::EmptyCompletion)
        ));
    }

    #[tokio::test]
    async fn in_flight_requests_stay_under_the_configured_bound() {
        let transport =
            CountingTransport::with_delay(std::time::Duration::from_millis(15), |_| {
                Ok(HttpResponse {
                    status: 200,
                    body: chat_body("ok"),
                })
            });
        let mut cfg = test_config(0);
        cfg.max_in_flight = 2;
        let gw = Arc::new(gateway_with(Arc::clone(&transport), cfg));
        let mut handles = Vec::new();
        for i in 0..6 {
            let gw = Arc::clone(&gw);
            handles.push(tokio::spawn(async move {
                let req = ChatRequest::deterministic("s", format!("u{i}"), 16, "m");
                gw.chat(&req).await.unwrap();
            }));
        }
        for h in handles {
            h.await.unwrap();
        }
        assert_eq!(transport.total_calls(), 6);
        assert!(
            transport.max_observed_in_flight() <= 2,
            "saw {} concurrent requests",
            transport.max_observed_in_flight()
        );
    }

    #[tokio::test]
    async fn nli_sum_violation_is_a_protocol_error() {
        let transport = CountingTransport::new(|_| {
            Ok(HttpResponse {
                status: 200,
                body: json!({"contradiction": 0.5, "neutral": 0.6, "entailment": 0.2}).to_string(),
            })
        });
        let gw = gateway_with(transport, test_config(0));
        assert!(matches!(
            gw.nli("p", "h").await,
            Err(GatewayError::Protocol(_))
        ));
    }

    #[tokio::test]
    async fn embeddings_are_reordered_by_index_and_normalized() {
        let transport = CountingTransport::new(|_| {
            Ok(HttpResponse {
                status: 200,
                body: json!({"data": [
                    {"index": 1, "embedding": [0.0, 2.0]},
                    {"index": 0, "embedding": [3.0, 4.0]},
                ]})
                .to_string(),
            })
        });
        let gw = gateway_with(transport, test_config(0));
        let vs = gw.embed(&["a".into(), "b".into()]).await.unwrap();
        assert_eq!(vs[0].values, vec![0.6, 0.8]);
        assert_eq!(vs[1].values, vec![0.0, 1.0]);
    }
}

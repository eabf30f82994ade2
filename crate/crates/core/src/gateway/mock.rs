//! Deterministic offline backend. Never touches the network; every reply is
//! a pure function of (request, seed, fixtures), so repeated calls are
//! byte-identical and whole pipeline runs replay exactly.

use async_trait::async_trait;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    check_uniform_dimension, sha256_hex, validate_embed_inputs, validate_nli_inputs, ChatRequest,
    EmbeddingVector, Fixtures, GatewayError, InferenceGateway, NliVerdict,
};

pub const DEFAULT_MOCK_EMBEDDING_DIM: usize = 64;

/// Stateless, reentrant mock implementation of [`InferenceGateway`].
#[derive(Debug, Clone)]
pub struct MockGateway {
    seed: u64,
    embedding_dim: usize,
    fixtures: Fixtures,
}

impl MockGateway {
    pub fn new(seed: u64, fixtures: Fixtures) -> Self {
        Self {
            seed,
            embedding_dim: DEFAULT_MOCK_EMBEDDING_DIM,
            fixtures,
        }
    }

    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        self.embedding_dim = dim;
        self
    }

    fn seeded_digest(&self, parts: &[&str]) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        for part in parts {
            hasher.update([0x1f]);
            hasher.update(part.as_bytes());
        }
        hasher.finalize().into()
    }

    fn default_completion(&self, req: &ChatRequest) -> String {
        let digest = self.seeded_digest(&[&req.system_prompt, &req.user_content, &req.model_id]);
        format!("mock-completion {}", hex::encode(&digest[..6]))
    }

    /// Text → unit vector via a seeded hash expanded to pseudo-random values.
    /// Identical texts map to identical vectors; different seeds diverge.
    fn derive_embedding(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if let Some(values) = self.fixtures.embedding_override(text) {
            return EmbeddingVector::normalized(values.to_vec(), text);
        }
        let mut rng = ChaCha8Rng::from_seed(self.seeded_digest(&["embed", text]));
        let values: Vec<f64> = (0..self.embedding_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        EmbeddingVector::normalized(values, text)
    }
}

#[async_trait]
impl InferenceGateway for MockGateway {
    async fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        match self.fixtures.chat_response(req) {
            Some(scripted) => Ok(scripted.to_string()),
            None => Ok(self.default_completion(req)),
        }
    }

    async fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, GatewayError> {
        validate_embed_inputs(texts)?;
        let vectors = texts
            .iter()
            .map(|t| self.derive_embedding(t))
            .collect::<Result<Vec<_>, _>>()?;
        check_uniform_dimension(&vectors)?;
        Ok(vectors)
    }

    async fn nli(&self, premise: &str, hypothesis: &str) -> Result<NliVerdict, GatewayError> {
        validate_nli_inputs(premise, hypothesis)?;
        match self.fixtures.nli_verdict(premise, hypothesis) {
            Some(v) => NliVerdict::new(v.q_contra, v.q_neutral, v.q_entail),
            None => Ok(NliVerdict::uniform()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::fixtures::ChatFixture;
    use crate::gateway::PROBABILITY_TOLERANCE;

    fn scripted_gateway() -> MockGateway {
        let fixtures = Fixtures {
            chat: vec![ChatFixture {
                key: Some("extract-K-1".into()),
                user_contains: vec!["distribution shifts".into()],
                response: "CORE IDEAS:\n- shift-aware segmentation".into(),
                ..Default::default()
            }],
            ..Default::default()
        };
        MockGateway::new(42, fixtures)
    }

    #[tokio::test]
    async fn scripted_fixture_replays_exact_text() {
        let gw = scripted_gateway();
        let req = ChatRequest::deterministic(
            "extract",
            "a manuscript about distribution shifts",
            256,
            "m",
        );
        assert_eq!(
            gw.chat(&req).await.unwrap(),
            "CORE IDEAS:\n- shift-aware segmentation"
        );
    }

    #[tokio::test]
    async fn empty_user_content_is_a_precondition_error() {
        let gw = scripted_gateway();
        let req = ChatRequest::deterministic("sys", "", 16, "m");
        assert!(matches!(
            gw.chat(&req).await,
            Err(GatewayError::InvalidRequest(_))
        ));
    }

    #[tokio::test]
    async fn repeated_requests_are_byte_identical() {
        let gw = MockGateway::new(42, Fixtures::default());
        let req = ChatRequest::deterministic("sys", "anything unscripted", 16, "m");
        let a = gw.chat(&req).await.unwrap();
        let b = gw.chat(&req).await.unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("mock-completion "));
    }

    #[tokio::test]
    async fn identical_texts_embed_identically() {
        let gw = MockGateway::new(7, Fixtures::default());
        let vs = gw.embed(&["a".into(), "a".into()]).await.unwrap();
        assert_eq!(vs[0].values, vs[1].values);
        assert_eq!(vs[0].dim(), DEFAULT_MOCK_EMBEDDING_DIM);
    }

    #[tokio::test]
    async fn embeddings_are_unit_norm() {
        let gw = MockGateway::new(7, Fixtures::default());
        let vs = gw
            .embed(&["x".into(), "a longer text".into()])
            .await
            .unwrap();
        for v in vs {
            assert!((v.l2_norm() - 1.0).abs() <= PROBABILITY_TOLERANCE);
        }
    }

    #[tokio::test]
    async fn different_seeds_give_different_vectors() {
        let a = MockGateway::new(1, Fixtures::default());
        let b = MockGateway::new(2, Fixtures::default());
        let va = a.embed(&["x".into()]).await.unwrap();
        let vb = b.embed(&["x".into()]).await.unwrap();
        assert_ne!(va[0].values, vb[0].values);
    }

    #[tokio::test]
    async fn scripted_nli_pair_overrides_default() {
        let mut fixtures = Fixtures::default();
        fixtures.script_nli("same text", "same text", [0.01, 0.04, 0.95]);
        let gw = MockGateway::new(42, fixtures);
        let v = gw.nli("same text", "same text").await.unwrap();
        assert_eq!(
            (v.q_contra, v.q_neutral, v.q_entail),
            (0.01, 0.04, 0.95)
        );
    }

    #[tokio::test]
    async fn unscripted_nli_pair_defaults_to_uniform() {
        let gw = MockGateway::new(42, Fixtures::default());
        let v = gw.nli("p", "h").await.unwrap();
        assert!((v.q_contra - 1.0 / 3.0).abs() < 1e-12);
        assert!((v.q_neutral - 1.0 / 3.0).abs() < 1e-12);
        assert!((v.q_entail - 1.0 / 3.0).abs() < 1e-12);
    }

    #[tokio::test]
    async fn embedding_override_is_used_and_normalized() {
        let fixtures = Fixtures {
            embeddings: vec![crate::gateway::fixtures::EmbeddingFixture {
                text: "pinned".into(),
                values: vec![3.0, 4.0],
            }],
            ..Default::default()
        };
        let gw = MockGateway::new(42, fixtures);
        let vs = gw.embed(&["pinned".into()]).await.unwrap();
        assert_eq!(vs[0].values, vec![0.6, 0.8]);
    }
}

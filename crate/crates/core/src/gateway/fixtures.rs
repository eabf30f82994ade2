//! Fixture files for the mock backend and the fixture search backend.
//!
//! One JSON document scripts every offline surface:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "chat": [
//!     {
//!       "key": "extract-K-1",
//!       "user_contains": ["segmentation"],
//!       "system_contains": [],
//!       "user_sha256": null,
//!       "response": "CORE IDEAS:\n- ..."
//!     }
//!   ],
//!   "nli": [
//!     {
//!       "premise_sha256": "…64 hex chars…",
//!       "hypothesis_sha256": "…64 hex chars…",
//!       "verdict": [0.01, 0.04, 0.95]
//!     }
//!   ],
//!   "embeddings": [
//!     { "text": "relative contrastive loss", "values": [1.0, 0.0] }
//!   ],
//!   "search": {
//!     "responses": { "normalized query text": [ { "external_id": "...", "title": "...", ... } ] }
//!   }
//! }
//! ```
//!
//! Chat entries are tried in file order; the first entry whose conditions all
//! hold wins. Requests with no matching entry fall back to a seeded default.
//! NLI pairs are keyed by the SHA-256 of premise and hypothesis; unscripted
//! pairs default to the uniform distribution. Embedding overrides replace the
//! seeded-hash construction for exact text matches (values are normalized on
//! load). The `search` section cans scholarly-search results per normalized
//! query for fully offline retrieval.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{sha256_hex, ChatRequest, GatewayError, NliVerdict};
use crate::retrieval::PaperRecord;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed fixture file {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("unsupported fixture schema_version {0}, expected {expected}", expected = crate::SCHEMA_VERSION)]
    SchemaVersion(u32),
    #[error("fixture nli entry {0} has an invalid verdict: {1}")]
    BadVerdict(usize, GatewayError),
    #[error("fixture embedding entry {0} cannot be normalized: {1}")]
    BadEmbedding(usize, GatewayError),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ChatFixture {
    /// Label for humans and tests; not used for matching.
    #[serde(default)]
    pub key: Option<String>,
    /// Every listed substring must occur in the request's user content.
    #[serde(default)]
    pub user_contains: Vec<String>,
    /// Every listed substring must occur in the request's system prompt.
    #[serde(default)]
    pub system_contains: Vec<String>,
    /// Exact-match alternative: SHA-256 of the full user content.
    #[serde(default)]
    pub user_sha256: Option<String>,
    pub response: String,
}

impl ChatFixture {
    fn matches(&self, req: &ChatRequest) -> bool {
        if let Some(expected) = &self.user_sha256 {
            if sha256_hex(&req.user_content) != *expected {
                return false;
            }
        }
        self.user_contains
            .iter()
            .all(|s| req.user_content.contains(s))
            && self
                .system_contains
                .iter()
                .all(|s| req.system_prompt.contains(s))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliFixture {
    pub premise_sha256: String,
    pub hypothesis_sha256: String,
    /// `[contradiction, neutral, entailment]`
    pub verdict: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingFixture {
    pub text: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SearchFixtures {
    /// Normalized query text → canned records, already in API order.
    #[serde(default)]
    pub responses: HashMap<String, Vec<PaperRecord>>,
}

/// Parsed fixture document shared by the mock gateway and the fixture search
/// backend.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Fixtures {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub chat: Vec<ChatFixture>,
    #[serde(default)]
    pub nli: Vec<NliFixture>,
    #[serde(default)]
    pub embeddings: Vec<EmbeddingFixture>,
    #[serde(default)]
    pub search: SearchFixtures,
}

fn default_schema_version() -> u32 {
    crate::SCHEMA_VERSION
}

impl Fixtures {
    pub fn from_path(path: &Path) -> Result<Self, FixtureError> {
        let raw = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let fixtures: Fixtures =
            serde_json::from_str(&raw).map_err(|source| FixtureError::Parse {
                path: path.display().to_string(),
                source,
            })?;
        fixtures.validate()?;
        Ok(fixtures)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        if self.schema_version != crate::SCHEMA_VERSION {
            return Err(FixtureError::SchemaVersion(self.schema_version));
        }
        for (i, entry) in self.nli.iter().enumerate() {
            NliVerdict::new(entry.verdict[0], entry.verdict[1], entry.verdict[2])
                .map_err(|e| FixtureError::BadVerdict(i, e))?;
        }
        for (i, entry) in self.embeddings.iter().enumerate() {
            crate::gateway::EmbeddingVector::normalized(entry.values.clone(), &entry.text)
                .map_err(|e| FixtureError::BadEmbedding(i, e))?;
        }
        Ok(())
    }

    /// First chat entry matching the request, in file order.
    pub fn chat_response(&self, req: &ChatRequest) -> Option<&str> {
        self.chat
            .iter()
            .find(|f| f.matches(req))
            .map(|f| f.response.as_str())
    }

    pub fn nli_verdict(&self, premise: &str, hypothesis: &str) -> Option<NliVerdict> {
        let p = sha256_hex(premise);
        let h = sha256_hex(hypothesis);
        self.nli
            .iter()
            .find(|f| f.premise_sha256 == p && f.hypothesis_sha256 == h)
            .map(|f| NliVerdict {
                q_contra: f.verdict[0],
                q_neutral: f.verdict[1],
                q_entail: f.verdict[2],
            })
    }

    pub fn embedding_override(&self, text: &str) -> Option<&[f64]> {
        self.embeddings
            .iter()
            .find(|f| f.text == text)
            .map(|f| f.values.as_slice())
    }

    /// Convenience for building NLI fixtures in tests and demo corpora.
    pub fn script_nli(&mut self, premise: &str, hypothesis: &str, verdict: [f64; 3]) {
        self.nli.push(NliFixture {
            premise_sha256: sha256_hex(premise),
            hypothesis_sha256: sha256_hex(hypothesis),
            verdict,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> ChatRequest {
        ChatRequest::deterministic("system", user, 64, "m")
    }

    #[test]
    fn first_matching_chat_entry_wins() {
        let fixtures = Fixtures {
            chat: vec![
                ChatFixture {
                    key: Some("a".into()),
                    user_contains: vec!["alpha".into()],
                    response: "first".into(),
                    ..Default::default()
                },
                ChatFixture {
                    key: Some("b".into()),
                    user_contains: vec!["alpha".into(), "beta".into()],
                    response: "second".into(),
                    ..Default::default()
                },
            ],
            ..Default::default()
        };
        assert_eq!(fixtures.chat_response(&req("alpha beta")), Some("first"));
        assert_eq!(fixtures.chat_response(&req("beta only")), None);
    }

    #[test]
    fn sha_condition_must_match_exactly() {
        let fixtures = Fixtures {
            chat: vec![ChatFixture {
                user_sha256: Some(sha256_hex("exact body")),
                response: "hit".into(),
                ..Default::default()
            }],
            ..Default::default()
        };
        assert_eq!(fixtures.chat_response(&req("exact body")), Some("hit"));
        assert_eq!(fixtures.chat_response(&req("exact body!")), None);
    }

    #[test]
    fn invalid_verdict_rejected_at_load() {
        let mut fixtures = Fixtures::default();
        fixtures.script_nli("p", "h", [0.5, 0.6, 0.2]);
        assert!(matches!(
            fixtures.validate(),
            Err(FixtureError::BadVerdict(0, _))
        ));
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let fixtures = Fixtures {
            schema_version: 99,
            ..Default::default()
        };
        assert!(matches!(
            fixtures.validate(),
            Err(FixtureError::SchemaVersion(99))
        ));
    }
}

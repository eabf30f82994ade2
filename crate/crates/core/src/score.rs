//! The discrete novelty scale and the output grammar shared by every model
//! that emits a score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Discrete novelty score: -1 not novel, 0 limited, 1 moderate, 2 high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct NoveltyScore(i8);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScoreError {
    #[error("novelty score {0} out of range, expected -1, 0, 1 or 2")]
    OutOfRange(i64),
    #[error("missing `Novelty Score:` line in model output")]
    MissingScoreLine,
    #[error("unparsable novelty score in `{0}`")]
    Unparsable(String),
}

impl NoveltyScore {
    pub const NOT_NOVEL: NoveltyScore = NoveltyScore(-1);
    pub const LIMITED: NoveltyScore = NoveltyScore(0);
    pub const MODERATE: NoveltyScore = NoveltyScore(1);
    pub const HIGH: NoveltyScore = NoveltyScore(2);

    /// All classes in scale order. Index with [`NoveltyScore::class_index`].
    pub const ALL: [NoveltyScore; 4] = [
        Self::NOT_NOVEL,
        Self::LIMITED,
        Self::MODERATE,
        Self::HIGH,
    ];

    pub fn new(value: i64) -> Result<Self, ScoreError> {
        match value {
            -1..=2 => Ok(NoveltyScore(value as i8)),
            other => Err(ScoreError::OutOfRange(other)),
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// Position on the scale: -1 → 0, 0 → 1, 1 → 2, 2 → 3.
    pub fn class_index(self) -> usize {
        (self.0 + 1) as usize
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            -1 => "not novel",
            0 => "limited novelty",
            1 => "moderate novelty",
            _ => "high novelty",
        }
    }

    pub fn min(self, other: NoveltyScore) -> NoveltyScore {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }
}

impl TryFrom<i64> for NoveltyScore {
    type Error = ScoreError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        NoveltyScore::new(value)
    }
}

impl From<NoveltyScore> for i64 {
    fn from(score: NoveltyScore) -> i64 {
        score.0 as i64
    }
}

impl std::fmt::Display for NoveltyScore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A completion split into its score line and the free text that follows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredText {
    pub score: NoveltyScore,
    pub text: String,
}

/// Parses the documented output grammar: the first non-empty line must read
/// `Novelty Score: <int>` (case-insensitive, optional surrounding markup),
/// everything after it is the free-text body.
pub fn parse_scored_output(completion: &str) -> Result<ScoredText, ScoreError> {
    let mut lines = completion.lines();
    let mut header = None;
    let mut consumed = 0usize;
    for line in lines.by_ref() {
        consumed += line.len() + 1;
        if line.trim().is_empty() {
            continue;
        }
        header = Some(line);
        break;
    }
    let header = header.ok_or(ScoreError::MissingScoreLine)?;
    let trimmed = header.trim().trim_start_matches(['#', '*', '>']).trim();
    let lower = trimmed.to_ascii_lowercase();
    let rest = lower
        .strip_prefix("novelty score")
        .ok_or(ScoreError::MissingScoreLine)?;
    let rest = rest.trim_start().strip_prefix(':').unwrap_or(rest).trim();
    let number: String = rest
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '-' || *c == '+')
        .collect();
    let value: i64 = number
        .parse()
        .map_err(|_| ScoreError::Unparsable(header.to_string()))?;
    let score = NoveltyScore::new(value)?;
    let text = completion[consumed.min(completion.len())..]
        .trim()
        .to_string();
    Ok(ScoredText { score, text })
}

//! Structured knowledge extraction: maps full manuscript or candidate-paper
//! text to the five-field descriptor tuple (core ideas, methods,
//! contributions, data sources, experimental components) plus display
//! keywords.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{ChatRequest, GatewayError, InferenceGateway};
use crate::prompts;

/// Hard cap on a single descriptor; longer model output is clipped.
pub const MAX_DESCRIPTOR_CHARS: usize = 300;

/// The five knowledge fields, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeField {
    Ideas,
    Methods,
    Contributions,
    DataSources,
    ExperimentalComponents,
}

impl KnowledgeField {
    pub const ALL: [KnowledgeField; 5] = [
        KnowledgeField::Ideas,
        KnowledgeField::Methods,
        KnowledgeField::Contributions,
        KnowledgeField::DataSources,
        KnowledgeField::ExperimentalComponents,
    ];

    pub fn header(self) -> &'static str {
        match self {
            KnowledgeField::Ideas => "CORE IDEAS",
            KnowledgeField::Methods => "METHODS",
            KnowledgeField::Contributions => "CONTRIBUTIONS",
            KnowledgeField::DataSources => "DATA SOURCES",
            KnowledgeField::ExperimentalComponents => "EXPERIMENTAL COMPONENTS",
        }
    }
}

impl std::fmt::Display for KnowledgeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.header())
    }
}

/// The structured representation of one paper. Ideas and methods are
/// required; theory papers may legitimately lack data sources or
/// experimental components. Keywords only feed report rendering and never
/// enter retrieval or similarity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredKnowledge {
    pub ideas: Vec<String>,
    pub methods: Vec<String>,
    pub contributions: Vec<String>,
    pub data_sources: Vec<String>,
    pub experimental_components: Vec<String>,
    pub keywords: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("model output missing required section {0}")]
    MissingField(KnowledgeField),
    #[error("model output unparsable after {attempts} attempts: {last_error}")]
    Unparsable { attempts: u32, last_error: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl StructuredKnowledge {
    pub fn field(&self, field: KnowledgeField) -> &[String] {
        match field {
            KnowledgeField::Ideas => &self.ideas,
            KnowledgeField::Methods => &self.methods,
            KnowledgeField::Contributions => &self.contributions,
            KnowledgeField::DataSources => &self.data_sources,
            KnowledgeField::ExperimentalComponents => &self.experimental_components,
        }
    }

    fn field_mut(&mut self, field: KnowledgeField) -> &mut Vec<String> {
        match field {
            KnowledgeField::Ideas => &mut self.ideas,
            KnowledgeField::Methods => &mut self.methods,
            KnowledgeField::Contributions => &mut self.contributions,
            KnowledgeField::DataSources => &mut self.data_sources,
            KnowledgeField::ExperimentalComponents => &mut self.experimental_components,
        }
    }

    /// Total descriptor count across the five knowledge fields.
    pub fn descriptor_count(&self) -> usize {
        KnowledgeField::ALL
            .iter()
            .map(|f| self.field(*f).len())
            .sum()
    }

    /// All (field, descriptor) pairs in canonical order.
    pub fn descriptors(&self) -> impl Iterator<Item = (KnowledgeField, &str)> {
        KnowledgeField::ALL.into_iter().flat_map(move |f| {
            self.field(f).iter().map(move |d| (f, d.as_str()))
        })
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        if self.ideas.is_empty() {
            return Err(ExtractionError::MissingField(KnowledgeField::Ideas));
        }
        if self.methods.is_empty() {
            return Err(ExtractionError::MissingField(KnowledgeField::Methods));
        }
        Ok(())
    }
}

/// Trims, clips to the length bound, and drops empties and case-insensitive
/// duplicates while preserving first-seen order.
fn clean_descriptors(raw: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for item in raw {
        let mut d = item.trim().to_string();
        if d.is_empty() {
            continue;
        }
        if d.chars().count() > MAX_DESCRIPTOR_CHARS {
            d = d.chars().take(MAX_DESCRIPTOR_CHARS).collect();
        }
        let key = d.to_lowercase();
        if seen.insert(key) {
            out.push(d);
        }
    }
    out
}

/// Renders a tuple in the canonical labeled format the extraction prompt
/// demands. `parse_knowledge` inverts this exactly.
pub fn render_knowledge(k: &StructuredKnowledge) -> String {
    let mut out = String::new();
    let sections: [(&str, &[String]); 6] = [
        (KnowledgeField::Ideas.header(), &k.ideas),
        (KnowledgeField::Methods.header(), &k.methods),
        (KnowledgeField::Contributions.header(), &k.contributions),
        (KnowledgeField::DataSources.header(), &k.data_sources),
        (
            KnowledgeField::ExperimentalComponents.header(),
            &k.experimental_components,
        ),
        ("KEYWORDS", &k.keywords),
    ];
    for (header, items) in sections {
        out.push_str(header);
        out.push_str(":\n");
        for item in items {
            out.push_str("- ");
            out.push_str(item);
            out.push('\n');
        }
    }
    out
}

fn canonical_header(line: &str) -> Option<&'static str> {
    let normalized = line
        .trim()
        .trim_start_matches(['#', '*'])
        .trim()
        .trim_end_matches(':')
        .trim()
        .to_uppercase();
    match normalized.as_str() {
        "CORE IDEAS" | "IDEAS" => Some("CORE IDEAS"),
        "METHODS" | "METHOD" => Some("METHODS"),
        "CONTRIBUTIONS" | "CONTRIBUTION" => Some("CONTRIBUTIONS"),
        "DATA SOURCES" | "DATA" | "DATASETS" => Some("DATA SOURCES"),
        "EXPERIMENTAL COMPONENTS" | "EXPERIMENTS" => Some("EXPERIMENTAL COMPONENTS"),
        "KEYWORDS" => Some("KEYWORDS"),
        _ => None,
    }
}

fn strip_bullet(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    for marker in ["- ", "* ", "• "] {
        if let Some(rest) = trimmed.strip_prefix(marker) {
            return Some(rest.trim());
        }
    }
    // numbered bullets: "1. descriptor" / "2) descriptor"
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &trimmed[digits..];
        if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return Some(rest.trim());
        }
    }
    None
}

/// Parses model output into a tuple: a labeled-section scan keyed on the
/// canonical headers (tolerating case, markup, and bullet-style variation),
/// failing if core ideas or methods never appear.
pub fn parse_knowledge(model_output: &str) -> Result<StructuredKnowledge, ExtractionError> {
    let mut k = StructuredKnowledge::default();
    let mut current: Option<&'static str> = None;
    let mut raw: std::collections::HashMap<&'static str, Vec<String>> =
        std::collections::HashMap::new();

    for line in model_output.lines() {
        if let Some(header) = canonical_header(line) {
            current = Some(header);
            raw.entry(header).or_default();
            continue;
        }
        if let (Some(section), Some(item)) = (current, strip_bullet(line)) {
            raw.entry(section).or_default().push(item.to_string());
        }
    }

    for field in KnowledgeField::ALL {
        let items = raw.remove(field.header()).unwrap_or_default();
        *k.field_mut(field) = clean_descriptors(items);
    }
    k.keywords = clean_descriptors(raw.remove("KEYWORDS").unwrap_or_default());

    k.validate()?;
    Ok(k)
}

/// Runs the extraction prompt against the gateway and parses the result,
/// retrying the conversation twice on unparsable output.
pub async fn extract_knowledge(
    full_text: &str,
    gateway: &dyn InferenceGateway,
    model_id: &str,
) -> Result<StructuredKnowledge, ExtractionError> {
    if full_text.trim().is_empty() {
        return Err(ExtractionError::EmptyInput);
    }

    let mut last_error = String::new();
    for attempt in 0..=2u32 {
        let user_content = if attempt == 0 {
            full_text.to_string()
        } else {
            format!("{full_text}\n\n{}", prompts::RETRY_STRICT_FORMAT_NOTE)
        };
        let req = ChatRequest::deterministic(
            prompts::KNOWLEDGE_EXTRACTION_SYSTEM,
            user_content,
            prompts::EXTRACTION_MAX_TOKENS,
            model_id,
        );
        let completion = gateway.chat(&req).await?;
        match parse_knowledge(&completion) {
            Ok(k) => return Ok(k),
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(ExtractionError::Unparsable {
        attempts: 3,
        last_error,
    })
}

//! Uniform annotator abstraction: a remote completion endpoint, the
//! deterministic mock, and imported human ratings. Handles sampling
//! multiplicity, refusal/unparseable retries, and content-addressed caching.

pub mod cache;
pub mod human;
pub mod mock;
pub mod remote;

pub use cache::{cache_key, RawResponse, ResponseCache};
pub use human::import_human_ratings;
pub use mock::{MockProfile, ResponseStyle};

use std::path::PathBuf;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parsing::{parse_response, ParseOutcome, ParseResult, RefusalPatterns};
use crate::prompting::RenderedPrompt;
use crate::types::{DecodingParams, LikertScale, TaskKind, TaskSpec};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("network error after transport retries: {0}")]
    Network(String),
    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("annotator configuration error: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: value {value} is off the task's rating grid")]
    Scale {
        path: String,
        line: usize,
        value: String,
    },
    #[error("io error: {0}")]
    Io(String),
}

impl ProviderError {
    /// Transport problems are recorded as missing cells mid-run; everything
    /// else aborts.
    pub fn is_transport(&self) -> bool {
        matches!(self, ProviderError::Network(_) | ProviderError::Endpoint { .. })
    }
}

/// What kind of annotator a config block describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Remote,
    Mock,
    HumanImport,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_refusal_retries() -> u32 {
    3
}

fn default_unparseable_retries() -> u32 {
    2
}

fn default_parallelism() -> u32 {
    4
}

/// One annotator: identity, kind, decoding defaults, retry budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorConfig {
    pub id: String,
    pub kind: ProviderKind,
    /// remote only
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    /// name of the environment variable holding the bearer token
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub decoding: DecodingParams,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_refusal_retries")]
    pub max_retries_on_refusal: u32,
    #[serde(default = "default_unparseable_retries")]
    pub max_retries_on_unparseable: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism_limit: u32,
    /// answers sampled per question; falls back to the task default
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_override: Option<u32>,
    /// mock only
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockProfile>,
    /// human_import only: the ratings file
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

impl AnnotatorConfig {
    pub fn check(&self) -> Result<(), ProviderError> {
        self.decoding
            .check()
            .map_err(|e| ProviderError::Config(format!("annotator {}: {e}", self.id)))?;
        if self.parallelism_limit == 0 {
            return Err(ProviderError::Config(format!(
                "annotator {}: parallelism_limit must be positive",
                self.id
            )));
        }
        if self.samples_override == Some(0) {
            return Err(ProviderError::Config(format!(
                "annotator {}: samples_override must be positive",
                self.id
            )));
        }
        match self.kind {
            ProviderKind::Remote => {
                if self.endpoint_url.is_none() || self.model_name.is_none() {
                    return Err(ProviderError::Config(format!(
                        "annotator {}: remote kind requires endpoint_url and model_name",
                        self.id
                    )));
                }
            }
            ProviderKind::Mock => {
                if self.mock.is_none() {
                    return Err(ProviderError::Config(format!(
                        "annotator {}: mock kind requires a mock profile",
                        self.id
                    )));
                }
            }
            ProviderKind::HumanImport => {
                if self.file.is_none() {
                    return Err(ProviderError::Config(format!(
                        "annotator {}: human_import kind requires a ratings file",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn samples_for(&self, task: &TaskSpec) -> u32 {
        match self.kind {
            ProviderKind::HumanImport => 1,
            _ => self.samples_override.unwrap_or(task.samples_per_question),
        }
    }
}

enum Backend {
    Mock { profile: MockProfile, seed: u64 },
    Remote(remote::RemoteEndpoint),
}

/// A queryable annotator bound to its effective decoding parameters.
pub struct Provider {
    pub config: AnnotatorConfig,
    pub decoding: DecodingParams,
    backend: Backend,
}

impl Provider {
    /// Builds a sampler for a remote or mock annotator. `default_seed` seeds
    /// mock profiles that omit one; `temperature_override` is the sweep hook.
    pub fn new(
        config: &AnnotatorConfig,
        default_seed: u64,
        temperature_override: Option<f64>,
    ) -> Result<Self, ProviderError> {
        config.check()?;
        let mut decoding = config.decoding;
        if let Some(t) = temperature_override {
            decoding.temperature = t;
        }
        decoding
            .check()
            .map_err(|e| ProviderError::Config(format!("annotator {}: {e}", config.id)))?;
        let backend = match config.kind {
            ProviderKind::Mock => Backend::Mock {
                profile: config.mock.clone().expect("checked above"),
                seed: config.mock.as_ref().and_then(|m| m.seed).unwrap_or(default_seed),
            },
            ProviderKind::Remote => Backend::Remote(remote::RemoteEndpoint::new(
                config.endpoint_url.as_deref().expect("checked above"),
                config.model_name.as_deref().expect("checked above"),
                config.auth_env.as_deref(),
                Duration::from_secs(config.request_timeout_secs),
            )?),
            ProviderKind::HumanImport => {
                return Err(ProviderError::Config(format!(
                    "annotator {}: human_import annotators are merged from files, not sampled",
                    config.id
                )))
            }
        };
        Ok(Provider {
            config: config.clone(),
            decoding,
            backend,
        })
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    /// One response for (prompt, request_index): cache hit when present,
    /// otherwise generated and persisted before returning.
    pub fn request_one(
        &self,
        cache: &ResponseCache,
        prompt: &RenderedPrompt,
        slot: u32,
        request_index: u32,
        scale: &LikertScale,
    ) -> Result<RawResponse, ProviderError> {
        if let Some(hit) = cache.get(&prompt.content_hash, self.id(), request_index, &self.decoding)
        {
            return Ok(hit);
        }
        let text = match &self.backend {
            Backend::Mock { profile, seed } => mock::mock_response(
                profile,
                *seed,
                prompt,
                slot,
                request_index,
                &self.decoding,
                scale,
            ),
            Backend::Remote(endpoint) => endpoint.complete(&prompt.text, &self.decoding)?,
        };
        let response = RawResponse {
            content_hash: prompt.content_hash.clone(),
            annotator_id: self.id().to_string(),
            sample_index: request_index,
            decoding: self.decoding,
            text,
            timestamp_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        };
        cache.put(response.clone())?;
        Ok(response)
    }

    /// Exactly n sampled responses for the prompt (request indices 0..n).
    pub fn request_samples(
        &self,
        cache: &ResponseCache,
        prompt: &RenderedPrompt,
        n: u32,
        scale: &LikertScale,
    ) -> Result<Vec<RawResponse>, ProviderError> {
        (0..n)
            .map(|i| self.request_one(cache, prompt, i, i, scale))
            .collect()
    }
}

/// Outcome of one sample slot after retries.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub attribute_id: String,
    pub sample_index: u32,
    pub outcome: ParseOutcome,
    pub retry_count: u32,
    pub requests_made: u32,
    /// content-hash reference of the response that produced the outcome
    pub raw_ref: Option<String>,
    /// transport failure that ended the slot early, if any
    pub transport_error: Option<String>,
    /// every response this slot consumed, retries included, for the archive
    pub responses: Vec<RawResponse>,
}

/// Everything one (annotator, item) pass produced.
#[derive(Debug, Clone, Default)]
pub struct ItemAnnotation {
    pub outcomes: Vec<SlotOutcome>,
    /// attributes skipped because the item lacks their second field
    pub skipped_attributes: Vec<String>,
    pub requests_made: u32,
}

/// Queries every attribute of the task for one item: n samples per question,
/// refusal/unparseable slots re-requested within the retry budgets. Total
/// retries per slot never exceed max(refusal budget, unparseable budget).
/// Transport failures end the affected slot (recorded), not the run.
pub fn annotate_item(
    provider: &Provider,
    cache: &ResponseCache,
    store: &crate::prompting::TemplateStore,
    task: &TaskSpec,
    item: &crate::types::EvalItem,
    variant: crate::prompting::InstructionVariant,
    patterns: &RefusalPatterns,
) -> Result<ItemAnnotation, ProviderError> {
    let n = provider.config.samples_for(task);
    let mut annotation = ItemAnnotation::default();
    for attribute in &task.attributes {
        if attribute.requires_second_field {
            let second = task.second_field().map(|f| f.name.clone());
            let missing = second
                .as_ref()
                .map(|name| !item.fields.contains_key(name))
                .unwrap_or(true);
            if missing {
                annotation.skipped_attributes.push(attribute.id.clone());
                continue;
            }
        }
        let prompt = crate::prompting::render(store, task, item, attribute, variant)
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        for slot in 0..n {
            let slot_outcome = annotate_slot(
                provider,
                cache,
                &prompt,
                task.kind,
                &attribute.scale,
                slot,
                n,
                patterns,
            )?;
            annotation.requests_made += slot_outcome.requests_made;
            annotation.outcomes.push(slot_outcome);
        }
    }
    Ok(annotation)
}

#[allow(clippy::too_many_arguments)]
fn annotate_slot(
    provider: &Provider,
    cache: &ResponseCache,
    prompt: &RenderedPrompt,
    task_kind: TaskKind,
    scale: &LikertScale,
    slot: u32,
    n: u32,
    patterns: &RefusalPatterns,
) -> Result<SlotOutcome, ProviderError> {
    let refusal_budget = provider.config.max_retries_on_refusal;
    let unparseable_budget = provider.config.max_retries_on_unparseable;
    let total_cap = refusal_budget.max(unparseable_budget);

    let mut refusal_retries = 0u32;
    let mut unparseable_retries = 0u32;
    let mut requests_made = 0u32;
    let mut consumed: Vec<RawResponse> = Vec::new();
    let mut last_outcome: Option<ParseOutcome> = None;

    loop {
        let attempt = refusal_retries + unparseable_retries;
        let request_index = slot + attempt * n;
        let response = match provider.request_one(cache, prompt, slot, request_index, scale) {
            Ok(r) => r,
            Err(e) if e.is_transport() => {
                return Ok(SlotOutcome {
                    attribute_id: prompt.attribute_id.clone(),
                    sample_index: slot,
                    outcome: last_outcome.unwrap_or(ParseOutcome {
                        result: ParseResult::Unparseable,
                        trace: vec![],
                    }),
                    retry_count: attempt,
                    requests_made,
                    raw_ref: None,
                    transport_error: Some(e.to_string()),
                    responses: consumed,
                });
            }
            Err(e) => return Err(e),
        };
        requests_made += 1;
        consumed.push(response.clone());
        let outcome = parse_response(&response.text, task_kind, scale, patterns);
        let retry_allowed = |used: u32, budget: u32| used < budget && attempt < total_cap;
        match &outcome.result {
            ParseResult::Rating { .. } => {
                return Ok(SlotOutcome {
                    attribute_id: prompt.attribute_id.clone(),
                    sample_index: slot,
                    outcome,
                    retry_count: attempt,
                    requests_made,
                    raw_ref: Some(response.content_hash.clone()),
                    transport_error: None,
                    responses: consumed,
                });
            }
            ParseResult::Refusal { .. } if retry_allowed(refusal_retries, refusal_budget) => {
                refusal_retries += 1;
                last_outcome = Some(outcome);
            }
            ParseResult::Unparseable if retry_allowed(unparseable_retries, unparseable_budget) => {
                unparseable_retries += 1;
                last_outcome = Some(outcome);
            }
            _ => {
                return Ok(SlotOutcome {
                    attribute_id: prompt.attribute_id.clone(),
                    sample_index: slot,
                    outcome,
                    retry_count: attempt,
                    requests_made,
                    raw_ref: Some(response.content_hash.clone()),
                    transport_error: None,
                    responses: consumed,
                });
            }
        }
    }
}

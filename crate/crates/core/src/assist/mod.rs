// SPDX-License-Identifier: Apache-2.0

//! Optional chat-completion client for reviewing concept lists: filtering
//! missing concepts down to the ones that matter and matching concepts to
//! an external taxonomy.
//!
//! Nothing here touches the network unless an [`HttpTransport`] is built.
//! Tests drive [`AssistClient`] through a mock [`ChatTransport`].

mod http;
mod parse;
mod prompt;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Concept, ConceptId};

pub use http::HttpTransport;
pub use parse::{parse_category_mapping, parse_concept_ids};
pub use prompt::{format_concepts, render_prompt, Placeholder, PromptError, PromptTemplate, RenderedPrompt, Substitutions};

pub const DEFAULT_TOKEN_ENV_VAR: &str = "CGAPS_ASSIST_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssistConfig {
    pub endpoint_url: String,
    pub auth_token_env_var: String,
    pub model_name: String,
    pub max_concepts_per_request: usize,
    pub max_retries: u32,
    pub timeout_seconds: f64,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for AssistConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            auth_token_env_var: DEFAULT_TOKEN_ENV_VAR.to_string(),
            model_name: String::new(),
            max_concepts_per_request: 2000,
            max_retries: 3,
            timeout_seconds: 120.0,
            initial_backoff_ms: 500,
            max_in_flight: 4,
        }
    }
}

impl AssistConfig {
    pub fn validate(&self) -> Result<(), AssistError> {
        let bad = |m: &str| Err(AssistError::InvalidConfig(m.to_string()));
        if self.max_concepts_per_request == 0 {
            return bad("max_concepts_per_request must be at least 1");
        }
        if self.max_in_flight == 0 {
            return bad("max_in_flight must be at least 1");
        }
        if !(self.timeout_seconds.is_finite() && self.timeout_seconds > 0.0) {
            return bad("timeout_seconds must be positive");
        }
        Ok(())
    }

    pub fn chunk_count(&self, concepts: usize) -> usize {
        concepts.div_ceil(self.max_concepts_per_request)
    }
}

#[derive(Debug, Error)]
pub enum AssistError {
    #[error("environment variable {0} with the service token is not set")]
    AuthMissing(String),
    #[error("service unavailable after {attempts} attempt(s): {message}")]
    ServiceUnavailable { attempts: u32, message: String },
    #[error("could not parse service response")]
    UnparseableResponse { raw: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid assist config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth retrying: timeouts, refused connections, 429 and 5xx.
    Retryable(String),
    Fatal(String),
    /// The service answered but not in the chat-completion shape.
    Malformed(String),
}

/// One prompt in, the model's reply text out.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for &T {
    fn complete(&self, prompt: &str) -> Result<String, TransportError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FilterOutcome {
    pub ids: BTreeSet<ConceptId>,
    /// Returned ids that were not part of the request.
    pub discarded: usize,
    pub chunks: usize,
    /// Requests sent, retries included.
    pub requests: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaxonomyOutcome {
    pub matches: BTreeMap<String, Vec<ConceptId>>,
    pub discarded: usize,
    pub unknown_categories: BTreeSet<String>,
    pub chunks: usize,
    pub requests: usize,
}

pub struct AssistClient<T> {
    config: AssistConfig,
    transport: T,
    requests: AtomicUsize,
}

impl<T: ChatTransport> AssistClient<T> {
    pub fn new(config: AssistConfig, transport: T) -> Result<Self, AssistError> {
        config.validate()?;
        Ok(Self {
            config,
            transport,
            requests: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &AssistConfig {
        &self.config
    }

    fn send(&self, prompt: &str) -> Result<String, AssistError> {
        let mut attempt = 0u32;
        loop {
            self.requests.fetch_add(1, Ordering::Relaxed);
            attempt += 1;
            match self.transport.complete(prompt) {
                Ok(text) => return Ok(text),
                Err(TransportError::Malformed(raw)) => return Err(AssistError::UnparseableResponse { raw }),
                Err(TransportError::Fatal(message)) => {
                    return Err(AssistError::ServiceUnavailable { attempts: attempt, message })
                }
                Err(TransportError::Retryable(message)) => {
                    if attempt > self.config.max_retries {
                        return Err(AssistError::ServiceUnavailable { attempts: attempt, message });
                    }
                    let wait = self
                        .config
                        .initial_backoff_ms
                        .saturating_mul(1u64 << (attempt - 1).min(16));
                    log::warn!("assist request failed ({message}); retry {attempt} in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                }
            }
        }
    }

    /// Runs `job` over every chunk with at most `max_in_flight` running at
    /// once. Results come back in chunk order; the first failing chunk wins.
    fn run_chunks<'c, R, F>(&self, concepts: &'c [Concept], job: F) -> Result<Vec<R>, AssistError>
    where
        R: Send,
        F: Fn(&'c [Concept]) -> Result<R, AssistError> + Sync,
    {
        let chunks: Vec<&[Concept]> = if concepts.is_empty() {
            vec![concepts]
        } else {
            concepts.chunks(self.config.max_concepts_per_request).collect()
        };
        let slots: Mutex<Vec<Option<Result<R, AssistError>>>> = Mutex::new((0..chunks.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(chunks.len());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(chunk) = chunks.get(i) else { break };
                    let r = job(chunk);
                    slots.lock().expect("slot lock")[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|r| r.expect("every chunk ran"))
            .collect()
    }

    /// Asks which of `concepts` are relevant and returns the union over
    /// chunks. Ids outside the request are dropped.
    pub fn filter_concepts(
        &self,
        template: PromptTemplate,
        substitutions: &Substitutions,
        concepts: &[Concept],
    ) -> Result<FilterOutcome, AssistError> {
        for p in template.required() {
            if substitutions.get(p).is_none() {
                return Err(PromptError::MissingSubstitution(p).into());
            }
        }
        let before = self.requests.load(Ordering::Relaxed);
        let per_chunk = self.run_chunks(concepts, |chunk| {
            let prompt = render_prompt(template, substitutions, chunk)?;
            let reply = self.send(&prompt.text)?;
            let ids = parse_concept_ids(&reply).ok_or(AssistError::UnparseableResponse { raw: reply })?;
            let allowed: BTreeSet<ConceptId> = chunk.iter().map(|c| c.id).collect();
            let (kept, dropped): (Vec<_>, Vec<_>) = ids.into_iter().partition(|id| allowed.contains(id));
            Ok((kept, dropped.len()))
        })?;
        let mut out = FilterOutcome {
            chunks: per_chunk.len(),
            ..FilterOutcome::default()
        };
        for (kept, dropped) in per_chunk {
            out.ids.extend(kept);
            out.discarded += dropped;
        }
        if out.discarded > 0 {
            log::warn!("discarded {} id(s) that were not in the request", out.discarded);
        }
        out.requests = self.requests.load(Ordering::Relaxed) - before;
        Ok(out)
    }

    /// Matches concepts to each category of another framework, keeping at
    /// most `matching_limit` ids per category in response order.
    pub fn match_taxonomy(
        &self,
        framework_name: &str,
        categories: &[String],
        concepts: &[Concept],
        matching_limit: usize,
    ) -> Result<TaxonomyOutcome, AssistError> {
        let substitutions = Substitutions::new()
            .with(Placeholder::OtherFramework, framework_name)
            .with(Placeholder::OtherFrameworkConcepts, categories.join("\n"))
            .with(Placeholder::MatchingLimit, matching_limit.to_string());
        let before = self.requests.load(Ordering::Relaxed);
        let per_chunk = self.run_chunks(concepts, |chunk| {
            let prompt = render_prompt(PromptTemplate::TaxonomyMatching, &substitutions, chunk)?;
            let reply = self.send(&prompt.text)?;
            let mapping = parse_category_mapping(&reply).ok_or(AssistError::UnparseableResponse { raw: reply })?;
            let allowed: BTreeSet<ConceptId> = chunk.iter().map(|c| c.id).collect();
            Ok((mapping, allowed))
        })?;

        let known: BTreeSet<&str> = categories.iter().map(String::as_str).collect();
        let mut out = TaxonomyOutcome {
            matches: categories.iter().map(|c| (c.clone(), Vec::new())).collect(),
            chunks: per_chunk.len(),
            ..TaxonomyOutcome::default()
        };
        for (mapping, allowed) in per_chunk {
            for (category, ids) in mapping {
                if !known.contains(category.as_str()) {
                    out.unknown_categories.insert(category);
                    continue;
                }
                let slot = out.matches.get_mut(&category).expect("known category");
                for id in ids {
                    if allowed.contains(&id) {
                        slot.push(id);
                    } else {
                        out.discarded += 1;
                    }
                }
            }
        }
        for ids in out.matches.values_mut() {
            let mut unique = parse::dedup_in_order(ids.drain(..));
            unique.truncate(matching_limit);
            *ids = unique;
        }
        if out.discarded > 0 || !out.unknown_categories.is_empty() {
            log::warn!(
                "taxonomy matching discarded {} id(s) and {} unknown categor(ies)",
                out.discarded,
                out.unknown_categories.len()
            );
        }
        out.requests = self.requests.load(Ordering::Relaxed) - before;
        Ok(out)
    }
}

// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Concept;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTemplate {
    MissingCrossBenchmark,
    MissingPerBenchmark,
    TaxonomyMatching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Placeholder {
    #[serde(rename = "AVAILABLE_CONCEPTS")]
    AvailableConcepts,
    #[serde(rename = "BENCHMARK_NAME")]
    BenchmarkName,
    #[serde(rename = "BENCHMARK_DEFINITION")]
    BenchmarkDefinition,
    #[serde(rename = "OTHER_FRAMEWORK")]
    OtherFramework,
    #[serde(rename = "OTHER_FRAMEWORK_CONCEPTS")]
    OtherFrameworkConcepts,
    #[serde(rename = "MATCHING_LIMIT")]
    MatchingLimit,
}

impl Placeholder {
    pub const ALL: [Placeholder; 6] = [
        Placeholder::AvailableConcepts,
        Placeholder::BenchmarkName,
        Placeholder::BenchmarkDefinition,
        Placeholder::OtherFramework,
        Placeholder::OtherFrameworkConcepts,
        Placeholder::MatchingLimit,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Placeholder::AvailableConcepts => "<AVAILABLE_CONCEPTS>",
            Placeholder::BenchmarkName => "<BENCHMARK_NAME>",
            Placeholder::BenchmarkDefinition => "<BENCHMARK_DEFINITION>",
            Placeholder::OtherFramework => "<OTHER_FRAMEWORK>",
            Placeholder::OtherFrameworkConcepts => "<OTHER_FRAMEWORK_CONCEPTS>",
            Placeholder::MatchingLimit => "<MATCHING_LIMIT>",
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

const MISSING_CROSS_BENCHMARK: &str = "\
Below is a list of concepts in a large language model. Each concept has an ID and a description. \
Are any of these concepts *critical* to the evaluation of large language models? Such concepts \
generally span topics of safety (toxic language, harm, bias, etc.), performance (reasoning ability, \
math, coding, etc.), and metacognition (ability to reject responses, reasoning about instructions, \
etc.).  Choose from the list of concepts below. List all such relevant concepts. Do not summarize or \
group; list all concepts verbatim as they appear below if they are relevant.

LLM CONCEPTS:

<AVAILABLE_CONCEPTS>";

const MISSING_PER_BENCHMARK: &str = "\
Below is a list of concepts in a large language model. Each concept has an ID and a description. \
Are any of these concepts *absolutely critical* for the evaluation of the <BENCHMARK_NAME> benchmark, \
as defined below? Choose from the list of concepts below. List all such relevant concepts. Do not \
summarize or group; list all concepts verbatim as they appear below if they are relevant.

BENCHMARK DEFINITION:

<BENCHMARK_DEFINITION>

LLM CONCEPTS:

<AVAILABLE_CONCEPTS>";

const TAXONOMY_MATCHING: &str = "\
Below, there is (1) a list of Competency Gaps concepts and (2) a list of <OTHER_FRAMEWORK> categories.

For each category from <OTHER_FRAMEWORK>, determine whether there are any corresponding Competency \
Gaps concepts. If no relevant concepts exist, leave this blank.

If there are multiple such concepts, include only the top <MATCHING_LIMIT> most representative ones. \
Do not include more than <MATCHING_LIMIT> concepts per category.

(1) COMPETENCY GAPS CONCEPTS:

<AVAILABLE_CONCEPTS>

(2) <OTHER_FRAMEWORK> CONCEPTS:

<OTHER_FRAMEWORK_CONCEPTS>";

const LIST_INSTRUCTION: &str = "\n\nRespond with a JSON array of the numeric IDs of the relevant \
concepts, for example [12, 345]. Respond with [] if none are relevant.";

const MAPPING_INSTRUCTION: &str = "\n\nRespond with a JSON object that maps every <OTHER_FRAMEWORK> \
category name to a JSON array of the numeric IDs of its matching concepts, for example \
{\"Category name\": [12, 345]}. Use an empty array for a category without matches.";

impl PromptTemplate {
    pub fn body(self) -> &'static str {
        match self {
            PromptTemplate::MissingCrossBenchmark => MISSING_CROSS_BENCHMARK,
            PromptTemplate::MissingPerBenchmark => MISSING_PER_BENCHMARK,
            PromptTemplate::TaxonomyMatching => TAXONOMY_MATCHING,
        }
    }

    fn instruction(self) -> &'static str {
        match self {
            PromptTemplate::TaxonomyMatching => MAPPING_INSTRUCTION,
            _ => LIST_INSTRUCTION,
        }
    }

    /// Placeholders the caller must supply; the concept list is always filled
    /// from the `concepts` argument of [`render_prompt`].
    pub fn required(self) -> Vec<Placeholder> {
        Placeholder::ALL
            .into_iter()
            .filter(|&p| p != Placeholder::AvailableConcepts)
            .filter(|p| self.body().contains(p.token()))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitutions(BTreeMap<Placeholder, String>);

impl Substitutions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, placeholder: Placeholder, value: impl Into<String>) -> Self {
        self.0.insert(placeholder, value.into());
        self
    }

    pub fn get(&self, placeholder: Placeholder) -> Option<&str> {
        self.0.get(&placeholder).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("no substitution for {0}")]
    MissingSubstitution(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub text: String,
    pub concept_count: usize,
}

/// Formats concepts as one `(id) label` line each.
pub fn format_concepts(concepts: &[Concept]) -> String {
    let mut out = String::new();
    for (i, c) in concepts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("({}) {}", c.id, c.label));
    }
    out
}

pub fn render_prompt(
    template: PromptTemplate,
    substitutions: &Substitutions,
    concepts: &[Concept],
) -> Result<RenderedPrompt, PromptError> {
    for p in template.required() {
        if substitutions.get(p).is_none() {
            return Err(PromptError::MissingSubstitution(p));
        }
    }
    if concepts.is_empty() {
        log::warn!("rendering {template:?} prompt with an empty concept list");
    }
    let mut text = format!("{}{}", template.body(), template.instruction());
    // The concept list goes in last so labels that happen to contain a
    // placeholder token are left alone.
    for p in Placeholder::ALL {
        if p == Placeholder::AvailableConcepts {
            continue;
        }
        if let Some(value) = substitutions.get(p) {
            text = text.replace(p.token(), value);
        }
    }
    let text = text.replace(Placeholder::AvailableConcepts.token(), &format_concepts(concepts));
    Ok(RenderedPrompt {
        text,
        concept_count: concepts.len(),
    })
}

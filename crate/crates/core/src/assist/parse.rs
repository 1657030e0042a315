// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use crate::domain::ConceptId;

fn line_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:[-*•]\s*|\d+[.)]\s+)?\((\d+)\)").expect("valid pattern"))
}

fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn id_from_value(v: &Value) -> Option<ConceptId> {
    match v {
        Value::Number(n) => n.as_u64().and_then(|x| ConceptId::try_from(x).ok()),
        Value::String(s) => {
            let s = s.trim();
            s.parse().ok().or_else(|| {
                line_pattern()
                    .captures(s)
                    .and_then(|c| c[1].parse().ok())
            })
        }
        Value::Object(map) => ["id", "concept_id", "concept"]
            .iter()
            .find_map(|k| map.get(*k))
            .and_then(id_from_value),
        _ => None,
    }
}

fn ids_from_array(items: &[Value]) -> Option<Vec<ConceptId>> {
    items.iter().map(id_from_value).collect()
}

fn json_ids(text: &str) -> Option<Vec<ConceptId>> {
    match serde_json::from_str::<Value>(text).ok()? {
        Value::Array(items) => ids_from_array(&items),
        Value::Object(map) => ["ids", "concepts", "concept_ids"]
            .iter()
            .find_map(|k| map.get(*k))
            .and_then(Value::as_array)
            .and_then(|items| ids_from_array(items)),
        _ => None,
    }
}

fn embedded_array(text: &str) -> Option<&str> {
    let start = text.find('[')?;
    let end = text.rfind(']')?;
    (end > start).then(|| &text[start..=end])
}

/// Extracts concept ids in response order from a JSON id array or from
/// `(id) label` lines. `None` when neither shape is present.
pub fn parse_concept_ids(raw: &str) -> Option<Vec<ConceptId>> {
    let text = strip_fences(raw);
    if let Some(ids) = json_ids(text) {
        return Some(ids);
    }
    if let Some(ids) = embedded_array(text).and_then(json_ids) {
        return Some(ids);
    }
    let ids: Vec<ConceptId> = text
        .lines()
        .filter_map(|l| line_pattern().captures(l))
        .filter_map(|c| c[1].parse().ok())
        .collect();
    (!ids.is_empty()).then_some(ids)
}

/// Extracts a category to id-list mapping from a JSON object. A `null` or
/// empty value stands for a blank category.
pub fn parse_category_mapping(raw: &str) -> Option<Vec<(String, Vec<ConceptId>)>> {
    let text = strip_fences(raw);
    let value: Value = serde_json::from_str(text).ok().or_else(|| {
        let start = text.find('{')?;
        let end = text.rfind('}')?;
        (end > start).then(|| serde_json::from_str(&text[start..=end]).ok())?
    })?;
    let map = value.as_object()?;
    let mut out = Vec::with_capacity(map.len());
    for (category, v) in map {
        let ids = match v {
            Value::Null => Vec::new(),
            Value::Array(items) => ids_from_array(items)?,
            Value::String(s) if s.trim().is_empty() => Vec::new(),
            Value::String(s) => parse_concept_ids(s)?,
            _ => return None,
        };
        out.push((category.clone(), ids));
    }
    Some(out)
}

/// Drops repeated ids, keeping first occurrences in order.
pub(crate) fn dedup_in_order(ids: impl IntoIterator<Item = ConceptId>) -> Vec<ConceptId> {
    let mut seen = BTreeSet::new();
    ids.into_iter().filter(|id| seen.insert(*id)).collect()
}

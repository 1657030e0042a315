// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use thiserror::Error;

use crate::domain::{ConceptId, SparseActivations};

#[derive(Debug, Error, PartialEq)]
pub enum TokenSumError {
    #[error("token sequence is empty")]
    EmptyTokenSequence,
    #[error("token {token}: negative activation {value} for concept {concept}")]
    NegativeActivation { token: usize, concept: ConceptId, value: f64 },
    #[error("token {token}: non-finite activation for concept {concept}")]
    NonFiniteActivation { token: usize, concept: ConceptId },
}

/// Sums per-token sparse activations into one record's activation map.
///
/// For extraction adapters that see one sparse vector per token. Returns the
/// per-concept sums (exact zeros omitted) and the number of tokens.
pub fn sum_token_activations<T, I>(per_token: T) -> Result<(SparseActivations, u64), TokenSumError>
where
    T: IntoIterator<Item = I>,
    I: IntoIterator<Item = (ConceptId, f64)>,
{
    let mut sums: BTreeMap<ConceptId, f64> = BTreeMap::new();
    let mut tokens = 0usize;
    for (token, activations) in per_token.into_iter().enumerate() {
        tokens += 1;
        for (concept, value) in activations {
            if !value.is_finite() {
                return Err(TokenSumError::NonFiniteActivation { token, concept });
            }
            if value < 0.0 {
                return Err(TokenSumError::NegativeActivation { token, concept, value });
            }
            *sums.entry(concept).or_insert(0.0) += value;
        }
    }
    if tokens == 0 {
        return Err(TokenSumError::EmptyTokenSequence);
    }
    Ok((SparseActivations::from_pairs(sums), tokens as u64))
}

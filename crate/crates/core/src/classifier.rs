//! Turns entailment scores into one emotion prediction per instance:
//! hypotheses are rendered per label, scored, averaged, and the label with
//! the highest aggregated entailment probability wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, PromptCatalog, PromptType};
use crate::nli::{EntailmentScorer, NliError, NliResult};
use crate::text::nfc;

/// How a per-hypothesis entailment probability is read off an [`NliResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EntailmentNormalization {
    /// The entailment component of the three-class distribution.
    #[serde(rename = "three-class")]
    #[default]
    ThreeClassSoftmax,
    /// Entailment renormalized against contradiction only.
    #[serde(rename = "entail-contradict")]
    EntailVsContradict,
}

impl EntailmentNormalization {
    pub fn probability(self, result: &NliResult) -> f64 {
        match self {
            EntailmentNormalization::ThreeClassSoftmax => result.p_entail,
            EntailmentNormalization::EntailVsContradict => {
                let denom = result.p_entail + result.p_contradict;
                if denom == 0.0 {
                    // all mass on neutral: uniform over the two classes
                    0.5
                } else {
                    result.p_entail / denom
                }
            }
        }
    }
}

/// One classified instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub instance_id: String,
    /// Aggregated entailment probability per label; keys are exactly the
    /// label set handed to [`classify`].
    pub label_scores: BTreeMap<String, f64>,
    pub predicted: String,
    /// 6 for synonym-family prompt types, 1 otherwise.
    pub hypothesis_count: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("empty result list")]
    EmptyResults,
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("duplicate label `{0}` in label set")]
    DuplicateLabel(String),
    #[error("instance {instance_id}: {source}")]
    Catalog {
        instance_id: String,
        #[source]
        source: CatalogError,
    },
    #[error("instance {instance_id}: {source}")]
    Backend {
        instance_id: String,
        #[source]
        source: NliError,
    },
}

/// Arithmetic mean of `p_entail` over the results.
pub fn aggregate_label_score(results: &[NliResult]) -> Result<f64, ClassifierError> {
    if results.is_empty() {
        return Err(ClassifierError::EmptyResults);
    }
    Ok(results.iter().map(|r| r.p_entail).sum::<f64>() / results.len() as f64)
}

fn mean_probability(results: &[NliResult], normalization: EntailmentNormalization) -> f64 {
    results
        .iter()
        .map(|r| normalization.probability(r))
        .sum::<f64>()
        / results.len() as f64
}

/// Classifies one instance: the text is the premise (NFC-normalized, nothing
/// else), each label's hypotheses come from the catalog, and the prediction
/// is the argmax of the per-label mean entailment probabilities. Ties break
/// toward the lexicographically smallest label identifier.
#[allow(clippy::too_many_arguments)]
pub fn classify(
    scorer: &dyn EntailmentScorer,
    catalog: &PromptCatalog,
    instance_id: &str,
    text: &str,
    label_set: &[String],
    prompt_type: PromptType,
    prompt_language: &str,
    normalization: EntailmentNormalization,
) -> Result<Prediction, ClassifierError> {
    if label_set.is_empty() {
        return Err(ClassifierError::EmptyLabelSet);
    }
    let mut labels: Vec<&str> = label_set.iter().map(String::as_str).collect();
    labels.sort_unstable();
    if let Some(dup) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(ClassifierError::DuplicateLabel(dup[0].to_string()));
    }

    let premise = nfc(text);
    let mut label_scores = BTreeMap::new();
    let mut hypothesis_count = BTreeMap::new();
    for label in &labels {
        let hypotheses = catalog
            .render_hypotheses(prompt_type, prompt_language, label)
            .map_err(|source| ClassifierError::Catalog {
                instance_id: instance_id.to_string(),
                source,
            })?;
        let pairs: Vec<(String, String)> = hypotheses
            .into_iter()
            .map(|h| (premise.clone(), h))
            .collect();
        let results = scorer
            .score_batch(&pairs)
            .map_err(|source| ClassifierError::Backend {
                instance_id: instance_id.to_string(),
                source,
            })?;
        label_scores.insert(label.to_string(), mean_probability(&results, normalization));
        hypothesis_count.insert(label.to_string(), results.len());
    }

    let predicted = argmax_label(&label_scores).expect("non-empty label set");
    Ok(Prediction {
        instance_id: instance_id.to_string(),
        label_scores,
        predicted,
        hypothesis_count,
    })
}

/// Highest-scoring label; ties go to the lexicographically smallest
/// identifier. Strict `>` over the map's ascending key order does both.
pub fn argmax_label(label_scores: &BTreeMap<String, f64>) -> Option<String> {
    let mut predicted = None;
    let mut best = f64::NEG_INFINITY;
    for (label, score) in label_scores {
        if *score > best {
            best = *score;
            predicted = Some(label.clone());
        }
    }
    predicted
}

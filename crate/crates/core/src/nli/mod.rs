//! Entailment scoring: the scorer interface, the deterministic mock backend,
//! the external-process backend for real NLI checkpoints, and label-order
//! remapping between model output conventions.

mod cache;
mod external;

pub use cache::{cached_score, CacheError, CachingScorer, ScoreCache, ScoreKey};
pub use external::ExternalScorer;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::token_set;

/// Probabilities must sum to 1 within this tolerance.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Three-way probability distribution for one (premise, hypothesis) pair,
/// always in canonical (entail, neutral, contradict) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliResult {
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contradict: f64,
}

impl NliResult {
    pub fn new(p_entail: f64, p_neutral: f64, p_contradict: f64) -> Result<Self, NliError> {
        let result = NliResult {
            p_entail,
            p_neutral,
            p_contradict,
        };
        result.check()?;
        Ok(result)
    }

    /// Builds a result from probabilities in a model's own output order.
    pub fn from_raw(raw: [f64; 3], order: &LabelOrder) -> Result<Self, NliError> {
        let canonical = order.to_canonical(raw);
        NliResult::new(canonical[0], canonical[1], canonical[2])
    }

    pub fn check(&self) -> Result<(), NliError> {
        let probs = [self.p_entail, self.p_neutral, self.p_contradict];
        for p in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(NliError::InvalidDistribution {
                    probs,
                    reason: format!("probability {p} outside [0, 1]"),
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(NliError::InvalidDistribution {
                probs,
                reason: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(())
    }
}

/// The three NLI classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NliClass {
    #[serde(rename = "entail")]
    Entail,
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "contradict")]
    Contradict,
}

impl NliClass {
    fn canonical_index(self) -> usize {
        match self {
            NliClass::Entail => 0,
            NliClass::Neutral => 1,
            NliClass::Contradict => 2,
        }
    }
}

/// Which NLI class each model output index carries. Published checkpoints
/// disagree on this, so it is explicit per-model configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelOrder([NliClass; 3]);

impl LabelOrder {
    /// (entail, neutral, contradict), the order used throughout this crate.
    pub fn canonical() -> Self {
        LabelOrder([NliClass::Entail, NliClass::Neutral, NliClass::Contradict])
    }

    pub fn new(order: [NliClass; 3]) -> Result<Self, NliError> {
        let mut seen = [false; 3];
        for class in order {
            let idx = class.canonical_index();
            if seen[idx] {
                return Err(NliError::InvalidLabelOrder { order });
            }
            seen[idx] = true;
        }
        Ok(LabelOrder(order))
    }

    /// Reorders raw model outputs into canonical order.
    pub fn to_canonical(&self, raw: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, class) in self.0.iter().enumerate() {
            out[class.canonical_index()] = raw[i];
        }
        out
    }
}

impl<'de> Deserialize<'de> for LabelOrder {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let order = <[NliClass; 3]>::deserialize(deserializer)?;
        LabelOrder::new(order).map_err(serde::de::Error::custom)
    }
}

/// How a configured model is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    /// Deterministic token-overlap scorer, no model involved.
    #[serde(rename = "mock")]
    Mock,
    /// Child process speaking the line protocol documented on
    /// [`ExternalScorer`]; how real checkpoints plug in.
    #[serde(rename = "external")]
    External,
}

/// One row of the model roster: a short id, where the checkpoint lives, and
/// how to interpret its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub source: String,
    pub label_order: LabelOrder,
    pub backend: BackendKind,
    /// Command line for `backend = "external"`, e.g. `["python3", "wrap.py"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
}

#[derive(Debug, Error)]
pub enum NliError {
    #[error("empty {side} text")]
    EmptyInput { side: &'static str },
    #[error("invalid probability distribution {probs:?}: {reason}")]
    InvalidDistribution { probs: [f64; 3], reason: String },
    #[error("label order {order:?} is not a bijection over the three classes")]
    InvalidLabelOrder { order: [NliClass; 3] },
    #[error("backend `{model_id}` failed on premise {premise:?}, hypothesis {hypothesis:?}: {message}")]
    Backend {
        model_id: String,
        premise: String,
        hypothesis: String,
        message: String,
    },
    #[error("batch pair {index}: {source}")]
    Batch {
        index: usize,
        #[source]
        source: Box<NliError>,
    },
}

/// Uniform scoring interface over all backends. Implementations must be
/// deterministic within a process: same inputs, same outputs.
pub trait EntailmentScorer: Send + Sync {
    fn model_id(&self) -> &str;

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError>;

    /// Element i equals `score(pairs[i])`; order preserved; first failure is
    /// reported with its index.
    fn score_batch(&self, pairs: &[(String, String)]) -> Result<Vec<NliResult>, NliError> {
        pairs
            .iter()
            .enumerate()
            .map(|(index, (premise, hypothesis))| {
                self.score(premise, hypothesis)
                    .map_err(|source| NliError::Batch {
                        index,
                        source: Box::new(source),
                    })
            })
            .collect()
    }
}

fn reject_empty(premise: &str, hypothesis: &str) -> Result<(), NliError> {
    if premise.trim().is_empty() {
        return Err(NliError::EmptyInput { side: "premise" });
    }
    if hypothesis.trim().is_empty() {
        return Err(NliError::EmptyInput { side: "hypothesis" });
    }
    Ok(())
}

/// Token-overlap oracle scorer.
///
/// With J the Jaccard similarity of the lowercased whitespace-token sets,
/// the distribution is ((1+J)/3, (2−J)/6, (2−J)/6): uniform at J=0,
/// entailment monotone in J, always on the simplex.
pub fn mock_score(premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
    reject_empty(premise, hypothesis)?;
    let a = token_set(premise);
    let b = token_set(hypothesis);
    let intersection = a.intersection(&b).count() as f64;
    let union = a.union(&b).count() as f64;
    let jaccard = intersection / union;
    NliResult::new(
        (1.0 + jaccard) / 3.0,
        (2.0 - jaccard) / 6.0,
        (2.0 - jaccard) / 6.0,
    )
}

/// Deterministic scorer backed by [`mock_score`].
#[derive(Debug, Clone)]
pub struct MockScorer {
    id: String,
}

impl MockScorer {
    pub fn new(id: impl Into<String>) -> Self {
        MockScorer { id: id.into() }
    }
}

impl Default for MockScorer {
    fn default() -> Self {
        MockScorer::new("mock")
    }
}

impl EntailmentScorer for MockScorer {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
        mock_score(premise, hypothesis)
    }
}

/// Wrapper that counts scorer invocations; used to observe cache hits and
/// resume behaviour in tests and diagnostics.
pub struct CountingScorer<S> {
    inner: S,
    calls: AtomicUsize,
}

impl<S: EntailmentScorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        CountingScorer {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<S: EntailmentScorer> EntailmentScorer for CountingScorer<S> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.score(premise, hypothesis)
    }
}

impl<S: EntailmentScorer> EntailmentScorer for &S {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
        (**self).score(premise, hypothesis)
    }
}

impl fmt::Display for NliResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(e={:.4}, n={:.4}, c={:.4})",
            self.p_entail, self.p_neutral, self.p_contradict
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn mock_disjoint_tokens_is_uniform() {
        let r = mock_score("aardvark zebra", "cat dog").unwrap();
        assert_close(r.p_entail, 1.0 / 3.0);
        assert_close(r.p_neutral, 1.0 / 3.0);
        assert_close(r.p_contradict, 1.0 / 3.0);
    }

    #[test]
    fn mock_identical_texts() {
        let r = mock_score("I won in the lottery", "I won in the lottery").unwrap();
        assert_close(r.p_entail, 2.0 / 3.0);
        assert_close(r.p_neutral, 1.0 / 6.0);
        assert_close(r.p_contradict, 1.0 / 6.0);
    }

    #[test]
    fn mock_partial_overlap_hand_computed() {
        // tokens {a,b} vs {b,c}: J = 1/3
        let r = mock_score("a b", "b c").unwrap();
        assert_close(r.p_entail, 4.0 / 9.0);
        assert_close(r.p_neutral, 5.0 / 18.0);
        assert_close(r.p_contradict, 5.0 / 18.0);
    }

    #[test]
    fn mock_rejects_empty_and_whitespace_inputs() {
        assert!(matches!(
            mock_score("", "x"),
            Err(NliError::EmptyInput { side: "premise" })
        ));
        assert!(matches!(
            mock_score("x", "   "),
            Err(NliError::EmptyInput { side: "hypothesis" })
        ));
    }

    #[test]
    fn overlapping_hypothesis_scores_higher() {
        let premise = "I won in the lottery and I am happy";
        let joy = mock_score(premise, "This sentence expresses happy joy").unwrap();
        let anger = mock_score(premise, "This sentence expresses anger").unwrap();
        assert!(joy.p_entail > anger.p_entail);
    }

    #[test]
    fn label_order_remaps_to_canonical() {
        let order = LabelOrder::new([NliClass::Contradict, NliClass::Entail, NliClass::Neutral])
            .unwrap();
        let result = NliResult::from_raw([0.1, 0.7, 0.2], &order).unwrap();
        let canonical = NliResult::new(0.7, 0.2, 0.1).unwrap();
        assert_eq!(result, canonical);
    }

    #[test]
    fn label_order_rejects_repeats() {
        assert!(LabelOrder::new([NliClass::Entail, NliClass::Entail, NliClass::Neutral]).is_err());
    }

    #[test]
    fn model_spec_parses_and_validates_label_order() {
        let spec: ModelSpec = serde_json::from_str(
            r#"{"id": "mdeberta", "source": "MoritzLaurer/mDeBERTa-v3-base-mnli-xnli",
                "label_order": ["entail", "neutral", "contradict"], "backend": "external",
                "command": ["python3", "wrap.py"]}"#,
        )
        .unwrap();
        assert_eq!(spec.label_order, LabelOrder::canonical());
        let bad: Result<ModelSpec, _> = serde_json::from_str(
            r#"{"id": "x", "source": "y",
                "label_order": ["entail", "entail", "contradict"], "backend": "mock"}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn score_batch_preserves_order_and_indexes_failures() {
        let scorer = MockScorer::default();
        let pairs = vec![
            ("a b".to_string(), "b c".to_string()),
            ("x".to_string(), "x".to_string()),
        ];
        let batch = scorer.score_batch(&pairs).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch[0], scorer.score("a b", "b c").unwrap());
        assert_eq!(batch[1], scorer.score("x", "x").unwrap());
        assert!(scorer.score_batch(&[]).unwrap().is_empty());

        let bad = vec![
            ("ok".to_string(), "ok".to_string()),
            ("".to_string(), "y".to_string()),
        ];
        match scorer.score_batch(&bad).unwrap_err() {
            NliError::Batch { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn counting_scorer_counts() {
        let scorer = CountingScorer::new(MockScorer::default());
        scorer.score("a", "b").unwrap();
        scorer.score("a", "b").unwrap();
        assert_eq!(scorer.calls(), 2);
    }

    proptest! {
        #[test]
        fn mock_is_on_the_simplex(premise in "[a-d ]{1,16}[a-d]", hypothesis in "[a-d ]{1,16}[a-d]") {
            let r = mock_score(&premise, &hypothesis).unwrap();
            r.check().unwrap();
        }

        #[test]
        fn mock_is_symmetric(premise in "[a-d ]{1,16}[a-d]", hypothesis in "[a-d ]{1,16}[a-d]") {
            let ab = mock_score(&premise, &hypothesis).unwrap();
            let ba = mock_score(&hypothesis, &premise).unwrap();
            prop_assert_eq!(ab, ba);
        }

        #[test]
        fn remapped_permutation_matches_canonical(e in 0.0f64..1.0, n in 0.0f64..1.0, c in 0.0f64..1.0, perm in 0usize..6) {
            let total = e + n + c;
            prop_assume!(total > 1e-9);
            let (e, n, c) = (e / total, n / total, c / total);
            use NliClass::*;
            let orders = [
                [Entail, Neutral, Contradict],
                [Entail, Contradict, Neutral],
                [Neutral, Entail, Contradict],
                [Neutral, Contradict, Entail],
                [Contradict, Entail, Neutral],
                [Contradict, Neutral, Entail],
            ];
            let order = LabelOrder::new(orders[perm]).unwrap();
            // a backend emitting in `order` carries p(order[i]) at index i
            let canonical = [e, n, c];
            let raw = [
                canonical[orders[perm][0].canonical_index()],
                canonical[orders[perm][1].canonical_index()],
                canonical[orders[perm][2].canonical_index()],
            ];
            let remapped = NliResult::from_raw(raw, &order).unwrap();
            let direct = NliResult::new(e, n, c).unwrap();
            prop_assert_eq!(remapped, direct);
        }
    }
}

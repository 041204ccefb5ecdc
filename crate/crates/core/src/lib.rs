//! NLI-based zero-shot emotion classification across languages.
//!
//! The crate turns a labelled text corpus, a multilingual prompt catalog, and
//! an entailment scorer into per-instance emotion predictions, then evaluates
//! a (model × dataset × data language × prompt language × prompt type) grid
//! with macro-F1 aggregation and rank-consistency statistics.
//!
//! The pieces compose bottom-up:
//! - [`catalog`] loads and renders prompt templates and label verbalizations,
//! - [`nli`] scores (premise, hypothesis) pairs and caches results on disk,
//! - [`classifier`] averages entailment probabilities into one label per text,
//! - [`corpora`] ingests and subsamples the evaluation corpora,
//! - [`metrics`] computes macro-F1, grouped means, ranks, and Kendall's τ-b,
//! - [`runner`] enumerates the grid, executes it resumably, and emits reports.

pub mod catalog;
pub mod classifier;
pub mod corpora;
pub mod metrics;
pub mod nli;
pub mod runner;
pub mod text;

pub use catalog::{load_catalog, load_catalogs, PromptCatalog, PromptType, Verbalization};
pub use classifier::{classify, EntailmentNormalization, Prediction};
pub use corpora::{load_corpus, subsample, Corpus, CorpusName, Instance};
pub use metrics::{
    aggregate, kendall_tau_b, macro_f1, mean_pairwise_tau, rank_rows, EvaluationRecord,
    GroupField, Matrix, RankMatrix,
};
pub use nli::{EntailmentScorer, MockScorer, ModelSpec, NliResult, ScoreCache};
pub use runner::{enumerate_combinations, run, Combination, RunConfig, RunOptions};

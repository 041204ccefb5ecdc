//! Grid execution: enumerate (model × dataset × data language × prompt
//! language × prompt type) combinations, classify every corpus instance with
//! caching, persist one evaluation record per combination, and resume
//! cleanly over an interrupted store.

pub mod report;
mod store;

pub use store::{load_records, Manifest, ResultsStore, StoreError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::catalog::{load_catalogs, CatalogError, PromptCatalog, PromptType};
use crate::classifier::{classify, ClassifierError, EntailmentNormalization, Prediction};
use crate::corpora::{
    is_known_language, load_corpus, subsample, Corpus, CorpusError, CorpusName,
};
use crate::metrics::{macro_f1_with_policy, EvaluationRecord, MetricsError, ZeroDivisionPolicy};
use crate::nli::{
    BackendKind, CacheError, CachingScorer, EntailmentScorer, ExternalScorer, MockScorer,
    ModelSpec, NliError, ScoreCache,
};

/// One dataset with its per-language normal-form corpus files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: CorpusName,
    /// language code → normal-form CSV path.
    pub languages: BTreeMap<String, PathBuf>,
}

/// Which prompt languages each data language is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PromptLanguagePolicy {
    #[serde(rename = "english-only")]
    EnglishOnly,
    #[serde(rename = "translated-only")]
    TranslatedOnly,
    #[serde(rename = "both")]
    #[default]
    Both,
}

fn default_seed() -> u64 {
    42
}

fn default_subsample_max() -> usize {
    981
}

/// Full description of one evaluation run, parsed from a JSON file. Relative
/// paths are resolved against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    pub models: Vec<ModelSpec>,
    pub prompt_types: Vec<PromptType>,
    #[serde(default)]
    pub prompt_language_policy: PromptLanguagePolicy,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_subsample_max")]
    pub subsample_max: usize,
    pub catalogs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/cache.log`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_path: Option<PathBuf>,
    #[serde(default)]
    pub entailment_normalization: EntailmentNormalization,
    #[serde(default)]
    pub f1_zero_division: ZeroDivisionPolicy,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, RunnerError> {
        let bytes = std::fs::read(path).map_err(|source| RunnerError::ConfigIo {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config: RunConfig =
            serde_json::from_slice(&bytes).map_err(|source| RunnerError::ConfigParse {
                path: path.to_path_buf(),
                source,
            })?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for dataset in &mut self.datasets {
            for path in dataset.languages.values_mut() {
                resolve(path);
            }
        }
        for path in &mut self.catalogs {
            resolve(path);
        }
        resolve(&mut self.output_dir);
        if let Some(path) = &mut self.cache_path {
            resolve(path);
        }
    }

    pub fn cache_path(&self) -> PathBuf {
        self.cache_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("cache.log"))
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |message: String| Err(RunnerError::Config(message));
        if self.datasets.is_empty() {
            return bad("at least one dataset is required".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.prompt_types.is_empty() {
            return bad("at least one prompt type is required".into());
        }
        if self.catalogs.is_empty() {
            return bad("at least one catalog file is required".into());
        }
        let mut names = BTreeSet::new();
        for dataset in &self.datasets {
            if !names.insert(dataset.name) {
                return bad(format!("dataset `{}` listed twice", dataset.name));
            }
            if dataset.languages.is_empty() {
                return bad(format!("dataset `{}` has no languages", dataset.name));
            }
            for language in dataset.languages.keys() {
                if !is_known_language(language) {
                    return bad(format!(
                        "dataset `{}`: unknown language code `{language}`",
                        dataset.name
                    ));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for model in &self.models {
            if model.id.is_empty()
                || !model
                    .id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            {
                return bad(format!(
                    "model id `{}` must be non-empty and use only [A-Za-z0-9._-]",
                    model.id
                ));
            }
            if !ids.insert(model.id.as_str()) {
                return bad(format!("model id `{}` listed twice", model.id));
            }
            if model.backend == BackendKind::External && model.command.is_none() {
                return bad(format!(
                    "model `{}` uses the external backend but has no command",
                    model.id
                ));
            }
        }
        let mut types = BTreeSet::new();
        for prompt_type in &self.prompt_types {
            if !types.insert(*prompt_type) {
                return bad(format!("prompt type `{prompt_type}` listed twice"));
            }
        }
        if self.subsample_max < 1 {
            return bad("subsample_max must be at least 1".into());
        }
        Ok(())
    }
}

/// One cell of the evaluation grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Combination {
    pub model_id: String,
    pub dataset: CorpusName,
    pub data_language: String,
    pub prompt_language: String,
    pub prompt_type: PromptType,
}

impl Combination {
    /// Stable identifier, also the predictions file stem.
    pub fn id(&self) -> String {
        format!(
            "{}__{}__{}__{}__{}",
            self.dataset, self.data_language, self.model_id, self.prompt_type, self.prompt_language
        )
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("failed to read config {path}: {source}")]
    ConfigIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("catalog validation failed:\n{0}")]
    CatalogValidation(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Nli(#[from] NliError),
    #[error("no scorer available for model `{0}`")]
    UnknownModel(String),
    #[error("the configured grid is empty")]
    EmptyGrid,
}

/// Enumerates the grid in deterministic order: dataset, data language,
/// model, prompt type, prompt language, each ascending lexicographic.
/// English data is paired with English prompts only (the translated prompt
/// would be a duplicate), so under the `both` policy a dataset contributes
/// |models| × |prompt types| × Σ over languages of (1 if English else 2).
pub fn enumerate_combinations(config: &RunConfig) -> Result<Vec<Combination>, RunnerError> {
    let mut datasets: Vec<&DatasetConfig> = config.datasets.iter().collect();
    datasets.sort_by_key(|d| d.name);
    let mut model_ids: Vec<&str> = config.models.iter().map(|m| m.id.as_str()).collect();
    model_ids.sort_unstable();
    let mut prompt_types = config.prompt_types.clone();
    prompt_types.sort_unstable();

    let mut combinations = Vec::new();
    for dataset in datasets {
        for data_language in dataset.languages.keys() {
            let mut prompt_languages: Vec<&str> = match config.prompt_language_policy {
                PromptLanguagePolicy::EnglishOnly => vec!["en"],
                PromptLanguagePolicy::TranslatedOnly => vec![data_language.as_str()],
                PromptLanguagePolicy::Both => {
                    if data_language == "en" {
                        vec!["en"]
                    } else {
                        vec!["en", data_language.as_str()]
                    }
                }
            };
            prompt_languages.sort_unstable();
            for model_id in &model_ids {
                for prompt_type in &prompt_types {
                    for prompt_language in &prompt_languages {
                        combinations.push(Combination {
                            model_id: model_id.to_string(),
                            dataset: dataset.name,
                            data_language: data_language.clone(),
                            prompt_language: prompt_language.to_string(),
                            prompt_type: *prompt_type,
                        });
                    }
                }
            }
        }
    }
    if combinations.is_empty() {
        return Err(RunnerError::EmptyGrid);
    }
    Ok(combinations)
}

/// Run controls that are not part of the configuration proper.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Abandon the run (no finalization) after this many combinations have
    /// been committed by this process. Fault-injection aid: simulates a kill
    /// at a combination boundary.
    pub stop_after: Option<usize>,
}

/// What a run did.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub total_combinations: usize,
    pub completed: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
    pub output_dir: PathBuf,
}

/// Builds scorers for the configured models.
pub fn build_scorers(
    models: &[ModelSpec],
) -> Result<BTreeMap<String, Box<dyn EntailmentScorer>>, RunnerError> {
    let mut scorers: BTreeMap<String, Box<dyn EntailmentScorer>> = BTreeMap::new();
    for model in models {
        let scorer: Box<dyn EntailmentScorer> = match model.backend {
            BackendKind::Mock => Box::new(MockScorer::new(model.id.clone())),
            BackendKind::External => {
                let command = model.command.as_ref().ok_or_else(|| {
                    RunnerError::Config(format!("model `{}` has no command", model.id))
                })?;
                Box::new(ExternalScorer::spawn(
                    &model.id,
                    command,
                    model.label_order.clone(),
                )?)
            }
        };
        scorers.insert(model.id.clone(), scorer);
    }
    Ok(scorers)
}

/// Executes the grid with scorers built from the config.
pub fn run(config: &RunConfig, options: &RunOptions) -> Result<RunSummary, RunnerError> {
    let scorers = build_scorers(&config.models)?;
    let views: BTreeMap<String, &dyn EntailmentScorer> = scorers
        .iter()
        .map(|(id, s)| (id.clone(), s.as_ref()))
        .collect();
    run_with_scorers(config, options, &views)
}

/// Executes the grid with caller-supplied scorers (tests inject counting or
/// failing scorers here). Every configured model id must be present.
pub fn run_with_scorers(
    config: &RunConfig,
    options: &RunOptions,
    scorers: &BTreeMap<String, &dyn EntailmentScorer>,
) -> Result<RunSummary, RunnerError> {
    config.validate()?;
    for model in &config.models {
        if !scorers.contains_key(&model.id) {
            return Err(RunnerError::UnknownModel(model.id.clone()));
        }
    }

    let catalog = load_catalogs(&config.catalogs)?;
    let catalog_hashes = hash_catalogs(&config.catalogs)?;
    let config_hash = config_hash(config, &catalog_hashes);

    let mut warnings = Vec::new();
    let mut corpora: BTreeMap<(CorpusName, String), Corpus> = BTreeMap::new();
    for dataset in &config.datasets {
        for (language, path) in &dataset.languages {
            let load = load_corpus(dataset.name, language, path)?;
            warnings.extend(load.warnings);
            let sampled = subsample(&load.corpus, config.subsample_max, config.seed)?;
            corpora.insert((dataset.name, language.clone()), sampled);
        }
    }

    let combinations = enumerate_combinations(config)?;

    // every catalog entry a combination will touch must exist before any
    // scoring starts
    let mut required = BTreeSet::new();
    for combination in &combinations {
        let corpus = &corpora[&(combination.dataset, combination.data_language.clone())];
        for label in &corpus.label_set {
            required.insert((
                combination.prompt_language.clone(),
                combination.prompt_type,
                label.clone(),
            ));
        }
    }
    let required: Vec<(String, PromptType, String)> = required.into_iter().collect();
    let coverage = catalog.validate(&required);
    if !coverage.is_empty() {
        return Err(RunnerError::CatalogValidation(coverage.to_string()));
    }

    let mut store = ResultsStore::open(&config.output_dir, &config_hash, &catalog_hashes)?;
    let cache = Mutex::new(ScoreCache::open(&config.cache_path())?);

    let mut summary = RunSummary {
        total_combinations: combinations.len(),
        completed: 0,
        skipped: 0,
        failed: Vec::new(),
        stopped_early: false,
        warnings,
        output_dir: config.output_dir.clone(),
    };

    for combination in &combinations {
        let id = combination.id();
        if store.is_complete(&id) {
            summary.skipped += 1;
            continue;
        }
        let scorer = scorers[&combination.model_id];
        let caching = CachingScorer::new(scorer, &cache);
        let corpus = &corpora[&(combination.dataset, combination.data_language.clone())];
        match classify_combination(&caching, &catalog, corpus, combination, config) {
            Ok(predictions) => {
                let gold: Vec<String> =
                    corpus.instances.iter().map(|i| i.gold.clone()).collect();
                let predicted: Vec<String> =
                    predictions.iter().map(|p| p.predicted.clone()).collect();
                let f1 = macro_f1_with_policy(
                    &gold,
                    &predicted,
                    &corpus.label_set,
                    config.f1_zero_division,
                )?;
                let record = EvaluationRecord {
                    model_id: combination.model_id.clone(),
                    dataset: combination.dataset,
                    data_language: combination.data_language.clone(),
                    prompt_language: combination.prompt_language.clone(),
                    prompt_type: combination.prompt_type,
                    macro_f1: f1,
                    n_instances: corpus.instances.len(),
                };
                store.commit(&id, &record, corpus, &predictions)?;
                summary.completed += 1;
            }
            Err(error) => {
                // combination granularity: no record, no predictions, durable
                // failure marker, grid continues
                let message = error.to_string();
                store.mark_failed(&id, &message)?;
                summary.failed.push((id, message));
            }
        }
        if let Some(stop) = options.stop_after {
            if summary.completed >= stop {
                summary.stopped_early = true;
                return Ok(summary);
            }
        }
    }

    store.finalize(&combinations)?;
    Ok(summary)
}

fn classify_combination(
    scorer: &dyn EntailmentScorer,
    catalog: &PromptCatalog,
    corpus: &Corpus,
    combination: &Combination,
    config: &RunConfig,
) -> Result<Vec<Prediction>, ClassifierError> {
    corpus
        .instances
        .iter()
        .map(|instance| {
            classify(
                scorer,
                catalog,
                &instance.id,
                &instance.text,
                &corpus.label_set,
                combination.prompt_type,
                &combination.prompt_language,
                config.entailment_normalization,
            )
        })
        .collect()
}

fn hash_catalogs(paths: &[PathBuf]) -> Result<BTreeMap<String, String>, RunnerError> {
    let mut hashes = BTreeMap::new();
    for path in paths {
        let bytes = std::fs::read(path).map_err(|source| RunnerError::ConfigIo {
            path: path.clone(),
            source,
        })?;
        hashes.insert(
            path.display().to_string(),
            hex::encode(Sha256::digest(&bytes)),
        );
    }
    Ok(hashes)
}

/// Hash of the canonical config serialization chained with every catalog
/// file hash: changes when any config field or catalog byte changes.
fn config_hash(config: &RunConfig, catalog_hashes: &BTreeMap<String, String>) -> String {
    let canonical =
        serde_json::to_string(&serde_json::to_value(config).expect("config serializes"))
            .expect("value serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    for (path, hash) in catalog_hashes {
        hasher.update(path.as_bytes());
        hasher.update(hash.as_bytes());
    }
    hex::encode(hasher.finalize())
}

//! Durable results store.
//!
//! Layout under the output directory:
//! - `records.csv`: one evaluation record per completed combination
//! - `predictions/<combination>.csv`: per-instance prediction log
//! - `manifest.json`: config hash, catalog hashes, completion markers
//! - `cache.log`: score cache (managed by [`crate::nli::ScoreCache`])
//!
//! A combination is marked complete in the manifest only after its
//! predictions file and record row are durably on disk; on open, record rows
//! without a completion marker are dropped so interrupted commits never leak
//! into results.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PromptType;
use crate::classifier::Prediction;
use crate::corpora::{Corpus, CorpusName};
use crate::metrics::EvaluationRecord;

use super::Combination;

const RECORDS_HEADER: [&str; 7] = [
    "model_id",
    "dataset",
    "data_language",
    "prompt_language",
    "prompt_type",
    "macro_f1",
    "n_instances",
];

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(
        "store at {dir} was created with a different configuration \
         (manifest hash {existing}, current {current}); use a fresh output directory"
    )]
    ConfigMismatch {
        dir: PathBuf,
        existing: String,
        current: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub catalog_hashes: BTreeMap<String, String>,
    pub completed: BTreeSet<String>,
    pub failed: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ResultsStore {
    dir: PathBuf,
    manifest: Manifest,
}

impl ResultsStore {
    /// Opens or creates the store. An existing manifest must match the
    /// current config hash; stray record rows from interrupted commits are
    /// reconciled away.
    pub fn open(
        dir: &Path,
        config_hash: &str,
        catalog_hashes: &BTreeMap<String, String>,
    ) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir.join("predictions")).map_err(|source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        })?;

        let manifest_path = dir.join("manifest.json");
        let manifest = if manifest_path.exists() {
            let bytes = std::fs::read(&manifest_path).map_err(|source| StoreError::Io {
                path: manifest_path.clone(),
                source,
            })?;
            let manifest: Manifest =
                serde_json::from_slice(&bytes).map_err(|e| StoreError::Parse {
                    path: manifest_path.clone(),
                    message: e.to_string(),
                })?;
            if manifest.config_hash != config_hash {
                return Err(StoreError::ConfigMismatch {
                    dir: dir.to_path_buf(),
                    existing: manifest.config_hash,
                    current: config_hash.to_string(),
                });
            }
            manifest
        } else {
            Manifest {
                config_hash: config_hash.to_string(),
                catalog_hashes: catalog_hashes.clone(),
                completed: BTreeSet::new(),
                failed: BTreeMap::new(),
            }
        };

        let store = ResultsStore {
            dir: dir.to_path_buf(),
            manifest,
        };
        store.write_manifest()?;
        store.reconcile_records()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn records_path(&self) -> PathBuf {
        self.dir.join("records.csv")
    }

    pub fn predictions_path(&self, combination_id: &str) -> PathBuf {
        self.dir.join("predictions").join(format!("{combination_id}.csv"))
    }

    pub fn is_complete(&self, combination_id: &str) -> bool {
        self.manifest.completed.contains(combination_id)
    }

    /// Records a durable failure marker for the combination; it will be
    /// retried on the next run.
    pub fn mark_failed(&mut self, combination_id: &str, message: &str) -> Result<(), StoreError> {
        self.manifest
            .failed
            .insert(combination_id.to_string(), message.to_string());
        self.write_manifest()
    }

    /// Persists one finished combination: predictions file, record row, then
    /// the completion marker, in that order.
    pub fn commit(
        &mut self,
        combination_id: &str,
        record: &EvaluationRecord,
        corpus: &Corpus,
        predictions: &[Prediction],
    ) -> Result<(), StoreError> {
        self.write_predictions(combination_id, corpus, predictions)?;
        self.append_record(record)?;
        self.manifest.completed.insert(combination_id.to_string());
        self.manifest.failed.remove(combination_id);
        self.write_manifest()
    }

    /// Rewrites records.csv in the given combination order (completed rows
    /// only), making the file independent of commit interleaving.
    pub fn finalize(&mut self, order: &[Combination]) -> Result<(), StoreError> {
        let path = self.records_path();
        let records = if path.exists() {
            load_records(&path)?
        } else {
            Vec::new()
        };
        let by_id: BTreeMap<String, &EvaluationRecord> = records
            .iter()
            .map(|r| (record_combination_id(r), r))
            .collect();
        let mut buffer = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut buffer);
            writer
                .write_record(RECORDS_HEADER)
                .map_err(|e| csv_store_error(&path, e))?;
            for combination in order {
                let id = combination.id();
                if !self.manifest.completed.contains(&id) {
                    continue;
                }
                if let Some(record) = by_id.get(&id) {
                    write_record_row(&mut writer, record).map_err(|e| csv_store_error(&path, e))?;
                }
            }
            writer.flush().map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        }
        atomic_write(&path, &buffer)
    }

    fn write_predictions(
        &self,
        combination_id: &str,
        corpus: &Corpus,
        predictions: &[Prediction],
    ) -> Result<(), StoreError> {
        let path = self.predictions_path(combination_id);
        let mut buffer = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut buffer);
            let mut header = vec![
                "instance_id".to_string(),
                "text".to_string(),
                "gold".to_string(),
                "predicted".to_string(),
            ];
            header.extend(corpus.label_set.iter().map(|l| format!("score:{l}")));
            writer
                .write_record(&header)
                .map_err(|e| csv_store_error(&path, e))?;
            for (instance, prediction) in corpus.instances.iter().zip(predictions) {
                let mut row = vec![
                    instance.id.clone(),
                    instance.text.clone(),
                    instance.gold.clone(),
                    prediction.predicted.clone(),
                ];
                row.extend(
                    corpus
                        .label_set
                        .iter()
                        .map(|l| format!("{}", prediction.label_scores[l])),
                );
                writer
                    .write_record(&row)
                    .map_err(|e| csv_store_error(&path, e))?;
            }
            writer.flush().map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        }
        atomic_write(&path, &buffer)
    }

    fn append_record(&self, record: &EvaluationRecord) -> Result<(), StoreError> {
        let path = self.records_path();
        let fresh = !path.exists();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        let mut writer = csv::Writer::from_writer(file);
        if fresh {
            writer
                .write_record(RECORDS_HEADER)
                .map_err(|e| csv_store_error(&path, e))?;
        }
        write_record_row(&mut writer, record).map_err(|e| csv_store_error(&path, e))?;
        writer.flush().map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })?;
        let file = writer.into_inner().map_err(|e| StoreError::Io {
            path: path.clone(),
            source: std::io::Error::other(e.to_string()),
        })?;
        file.sync_all().map_err(|source| StoreError::Io {
            path: path.clone(),
            source,
        })
    }

    fn write_manifest(&self) -> Result<(), StoreError> {
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        bytes.push(b'\n');
        atomic_write(&path, &bytes)
    }

    /// Drops records.csv rows whose combination was never marked complete
    /// (a crash window between the record append and the manifest write).
    fn reconcile_records(&self) -> Result<(), StoreError> {
        let path = self.records_path();
        if !path.exists() {
            return Ok(());
        }
        let records = load_records(&path)?;
        let keep: Vec<&EvaluationRecord> = records
            .iter()
            .filter(|r| self.manifest.completed.contains(&record_combination_id(r)))
            .collect();
        if keep.len() == records.len() {
            return Ok(());
        }
        let mut buffer = Vec::new();
        {
            let mut writer = csv::Writer::from_writer(&mut buffer);
            writer
                .write_record(RECORDS_HEADER)
                .map_err(|e| csv_store_error(&path, e))?;
            for record in keep {
                write_record_row(&mut writer, record).map_err(|e| csv_store_error(&path, e))?;
            }
            writer.flush().map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        }
        atomic_write(&path, &buffer)
    }
}

fn csv_store_error(path: &Path, error: csv::Error) -> StoreError {
    StoreError::Parse {
        path: path.to_path_buf(),
        message: error.to_string(),
    }
}

fn write_record_row<W: std::io::Write>(
    writer: &mut csv::Writer<W>,
    record: &EvaluationRecord,
) -> Result<(), csv::Error> {
    writer.write_record([
        record.model_id.as_str(),
        record.dataset.as_str(),
        record.data_language.as_str(),
        record.prompt_language.as_str(),
        record.prompt_type.as_str(),
        &format!("{}", record.macro_f1),
        &format!("{}", record.n_instances),
    ])
}

/// The combination id a record belongs to (same scheme as
/// [`Combination::id`]).
pub fn record_combination_id(record: &EvaluationRecord) -> String {
    format!(
        "{}__{}__{}__{}__{}",
        record.dataset,
        record.data_language,
        record.model_id,
        record.prompt_type,
        record.prompt_language
    )
}

/// Reads a records.csv file back into evaluation records.
pub fn load_records(path: &Path) -> Result<Vec<EvaluationRecord>, StoreError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_store_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_store_error(path, e))?;
    if headers.iter().collect::<Vec<_>>() != RECORDS_HEADER {
        return Err(StoreError::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {headers:?}"),
        });
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_store_error(path, e))?;
        let parse = |message: String| StoreError::Parse {
            path: path.to_path_buf(),
            message: format!("row {}: {message}", i + 2),
        };
        records.push(EvaluationRecord {
            model_id: row[0].to_string(),
            dataset: CorpusName::from_str(&row[1]).map_err(|e| parse(e.to_string()))?,
            data_language: row[2].to_string(),
            prompt_language: row[3].to_string(),
            prompt_type: PromptType::from_str(&row[4]).map_err(|e| parse(e.to_string()))?,
            macro_f1: row[5]
                .parse::<f64>()
                .map_err(|e| parse(format!("bad macro_f1: {e}")))?,
            n_instances: row[6]
                .parse::<usize>()
                .map_err(|e| parse(format!("bad n_instances: {e}")))?,
        });
    }
    Ok(records)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("tmp");
    {
        let mut file = File::create(&tmp).map_err(io_err)?;
        file.write_all(bytes).map_err(io_err)?;
        file.sync_all().map_err(io_err)?;
    }
    std::fs::rename(&tmp, path).map_err(io_err)
}

//! Append-only score cache.
//!
//! One record per line: tab-separated NFC-normalized key fields (model id,
//! premise, hypothesis, with backslash/tab/newline escaped) followed by the
//! three probabilities as decimals with 9 significant digits. Results pass
//! through that codec before being returned, so a fresh score, its in-memory
//! cache hit, and the value re-read from disk are bit-identical.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use super::{EntailmentScorer, NliError, NliResult};
use crate::text::nfc;

/// Cache key; equality is byte equality after NFC normalization.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScoreKey {
    pub model_id: String,
    pub premise: String,
    pub hypothesis: String,
}

impl ScoreKey {
    pub fn new(model_id: &str, premise: &str, hypothesis: &str) -> Self {
        ScoreKey {
            model_id: nfc(model_id),
            premise: nfc(premise),
            hypothesis: nfc(hypothesis),
        }
    }
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt cache record at {path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Persistent score cache: one writer process, appends only, idempotent per
/// key. A torn final line (the record being written when a run was killed)
/// is discarded on open; damage anywhere else is an error.
#[derive(Debug)]
pub struct ScoreCache {
    path: PathBuf,
    entries: HashMap<ScoreKey, NliResult>,
    writer: BufWriter<File>,
}

impl ScoreCache {
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|source| CacheError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
            }
        }
        let io_err = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };

        let mut entries = HashMap::new();
        if path.exists() {
            let contents = std::fs::read_to_string(path).map_err(io_err)?;
            let mut offset = 0usize;
            for (i, line) in contents.split_inclusive('\n').enumerate() {
                let line_no = i + 1;
                let complete = line.ends_with('\n');
                let body = line.strip_suffix('\n').unwrap_or(line);
                match parse_record(body) {
                    Ok((key, result)) => {
                        if !complete {
                            // record fully written except the terminator; keep it
                            entries.insert(key, result);
                            offset += line.len();
                            break;
                        }
                        entries.insert(key, result);
                        offset += line.len();
                    }
                    Err(message) => {
                        if complete {
                            return Err(CacheError::Corrupt {
                                path: path.to_path_buf(),
                                line: line_no,
                                message,
                            });
                        }
                        // torn tail from an interrupted append: drop it
                        break;
                    }
                }
            }
            if offset < contents.len() {
                let file = OpenOptions::new().write(true).open(path).map_err(io_err)?;
                file.set_len(offset as u64).map_err(io_err)?;
            }
        }

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;
        Ok(ScoreCache {
            path: path.to_path_buf(),
            entries,
            writer: BufWriter::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &ScoreKey) -> Option<NliResult> {
        self.entries.get(key).copied()
    }

    /// Stores a result under `key`, returning the value as quantized by the
    /// on-disk codec. Re-inserting an existing key is a no-op returning the
    /// stored value.
    pub fn insert(&mut self, key: ScoreKey, result: NliResult) -> Result<NliResult, CacheError> {
        if let Some(existing) = self.entries.get(&key) {
            return Ok(*existing);
        }
        let quantized = quantize(result);
        let line = format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            escape(&key.model_id),
            escape(&key.premise),
            escape(&key.hypothesis),
            encode_prob(result.p_entail),
            encode_prob(result.p_neutral),
            encode_prob(result.p_contradict),
        );
        let io_err = |source| CacheError::Io {
            path: self.path.clone(),
            source,
        };
        self.writer.write_all(line.as_bytes()).map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        self.entries.insert(key, quantized);
        Ok(quantized)
    }
}

/// Looks `(scorer, premise, hypothesis)` up in the cache; on a miss, scores,
/// persists, and returns the stored value. Hits never invoke the scorer.
pub fn cached_score(
    cache: &Mutex<ScoreCache>,
    scorer: &dyn EntailmentScorer,
    premise: &str,
    hypothesis: &str,
) -> Result<NliResult, NliError> {
    let key = ScoreKey::new(scorer.model_id(), premise, hypothesis);
    if let Some(hit) = cache.lock().expect("cache lock poisoned").get(&key) {
        return Ok(hit);
    }
    let fresh = scorer.score(premise, hypothesis)?;
    let mut guard = cache.lock().expect("cache lock poisoned");
    guard.insert(key, fresh).map_err(|e| NliError::Backend {
        model_id: scorer.model_id().to_string(),
        premise: premise.to_string(),
        hypothesis: hypothesis.to_string(),
        message: e.to_string(),
    })
}

/// A scorer view that routes every call through [`cached_score`].
pub struct CachingScorer<'a> {
    scorer: &'a dyn EntailmentScorer,
    cache: &'a Mutex<ScoreCache>,
}

impl<'a> CachingScorer<'a> {
    pub fn new(scorer: &'a dyn EntailmentScorer, cache: &'a Mutex<ScoreCache>) -> Self {
        CachingScorer { scorer, cache }
    }
}

impl EntailmentScorer for CachingScorer<'_> {
    fn model_id(&self) -> &str {
        self.scorer.model_id()
    }

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
        cached_score(self.cache, self.scorer, premise, hypothesis)
    }
}

/// 9 significant decimal digits; re-read tolerance 1e-9.
fn encode_prob(p: f64) -> String {
    format!("{:.8e}", p)
}

fn quantize(result: NliResult) -> NliResult {
    NliResult {
        p_entail: encode_prob(result.p_entail).parse().unwrap(),
        p_neutral: encode_prob(result.p_neutral).parse().unwrap(),
        p_contradict: encode_prob(result.p_contradict).parse().unwrap(),
    }
}

fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for ch in field.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

fn unescape(field: &str) -> Result<String, String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("bad escape \\{other}")),
            None => return Err("trailing backslash".to_string()),
        }
    }
    Ok(out)
}

fn parse_record(line: &str) -> Result<(ScoreKey, NliResult), String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let model_id = unescape(fields[0])?;
    let premise = unescape(fields[1])?;
    let hypothesis = unescape(fields[2])?;
    let mut probs = [0.0f64; 3];
    for (i, raw) in fields[3..].iter().enumerate() {
        probs[i] = raw
            .parse::<f64>()
            .map_err(|e| format!("bad probability {raw:?}: {e}"))?;
    }
    let result = NliResult::new(probs[0], probs[1], probs[2]).map_err(|e| e.to_string())?;
    Ok((
        ScoreKey {
            model_id,
            premise,
            hypothesis,
        },
        result,
    ))
}

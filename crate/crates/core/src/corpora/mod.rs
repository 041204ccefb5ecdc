//! Evaluation corpora: ingestion of the normal-form delimited files,
//! EmoEvent filtering, and seeded subsampling.
//!
//! Normal form is one UTF-8 CSV per (corpus, language) with header
//! `id,text,label`; the adapters in [`convert`] map upstream distributions
//! into it.

pub mod convert;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language shorthands accepted on instances, sorted.
pub const LANGUAGE_CODES: [&str; 18] = [
    "bn", "de", "en", "es", "fr", "hi", "id", "it", "km", "ms", "my", "nl", "pt", "ro", "th",
    "tl", "vi", "zh",
];

pub fn is_known_language(code: &str) -> bool {
    LANGUAGE_CODES.binary_search(&code).is_ok()
}

/// The three evaluation corpora.
///
/// Variant order matches the lexicographic order of the string identifiers;
/// grid enumeration relies on the derived `Ord` for that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CorpusName {
    #[serde(rename = "deenisear")]
    DeEnIsear,
    #[serde(rename = "emoevent")]
    EmoEvent,
    #[serde(rename = "universal-joy")]
    UniversalJoy,
}

impl CorpusName {
    pub const ALL: [CorpusName; 3] = [
        CorpusName::DeEnIsear,
        CorpusName::EmoEvent,
        CorpusName::UniversalJoy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorpusName::DeEnIsear => "deenisear",
            CorpusName::EmoEvent => "emoevent",
            CorpusName::UniversalJoy => "universal-joy",
        }
    }

    /// Label-set size the loader validates against (mismatches warn, not fail).
    pub fn expected_label_count(self) -> usize {
        match self {
            CorpusName::DeEnIsear => 6,
            CorpusName::UniversalJoy => 7,
            CorpusName::EmoEvent => 7,
        }
    }
}

impl fmt::Display for CorpusName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorpusName {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CorpusName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownCorpus {
                name: s.to_string(),
            })
    }
}

/// One labelled text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    pub gold: String,
    pub language: String,
}

/// Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: CorpusName,
    pub language: String,
    /// Sorted ascending; inferred from the data.
    pub label_set: Vec<String>,
    pub instances: Vec<Instance>,
}

/// Load result: the corpus plus non-fatal validation findings.
#[derive(Debug, Clone)]
pub struct CorpusLoad {
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown corpus name `{name}`")]
    UnknownCorpus { name: String },
    #[error("unknown language code `{language}`")]
    UnknownLanguage { language: String },
    #[error("failed to read corpus file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: {message}")]
    BadRow {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: duplicate instance id `{id}`")]
    DuplicateId { path: PathBuf, id: String },
    #[error("corpus file {path} contains no instances")]
    Empty { path: PathBuf },
    #[error("subsample size must be at least 1")]
    BadSampleSize,
}

/// Loads a normal-form corpus file. EmoEvent rows labelled `other` and rows
/// with empty text are filtered out here, so counts reflect the evaluated
/// corpus. The label-set cardinality is checked against the corpus's
/// expected count; a mismatch is reported as a warning because the true
/// label set must be read from the data.
pub fn load_corpus(name: CorpusName, language: &str, path: &Path) -> Result<CorpusLoad, CorpusError> {
    if !is_known_language(language) {
        return Err(CorpusError::UnknownLanguage {
            language: language.to_string(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| map_csv_error(path, source))?;
    let headers = reader
        .headers()
        .map_err(|source| map_csv_error(path, source))?
        .clone();
    let expected = ["id", "text", "label"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CorpusError::BadHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut raw = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|source| map_csv_error(path, source))?;
        let row = i + 2; // header is line 1
        if record.len() != 3 {
            return Err(CorpusError::BadRow {
                path: path.to_path_buf(),
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        raw.push(Instance {
            id: record[0].to_string(),
            text: record[1].to_string(),
            gold: record[2].to_string(),
            language: language.to_string(),
        });
    }
    if raw.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }

    let instances = match name {
        CorpusName::EmoEvent => filter_emoevent(raw),
        _ => {
            for (i, instance) in raw.iter().enumerate() {
                if instance.text.trim().is_empty() {
                    return Err(CorpusError::BadRow {
                        path: path.to_path_buf(),
                        row: i + 2,
                        message: "empty text".to_string(),
                    });
                }
                if instance.gold.is_empty() {
                    return Err(CorpusError::BadRow {
                        path: path.to_path_buf(),
                        row: i + 2,
                        message: "empty label".to_string(),
                    });
                }
            }
            raw
        }
    };
    if instances.is_empty() {
        return Err(CorpusError::Empty {
            path: path.to_path_buf(),
        });
    }

    let mut seen = BTreeSet::new();
    for instance in &instances {
        if !seen.insert(instance.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                id: instance.id.clone(),
            });
        }
    }

    let label_set: Vec<String> = instances
        .iter()
        .map(|i| i.gold.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut warnings = Vec::new();
    if label_set.len() != name.expected_label_count() {
        warnings.push(format!(
            "{name}/{language}: expected {} labels, found {} ({})",
            name.expected_label_count(),
            label_set.len(),
            label_set.join(", ")
        ));
    }

    Ok(CorpusLoad {
        corpus: Corpus {
            name,
            language: language.to_string(),
            label_set,
            instances,
        },
        warnings,
    })
}

fn map_csv_error(path: &Path, source: csv::Error) -> CorpusError {
    if let csv::ErrorKind::Io(_) = source.kind() {
        if let csv::ErrorKind::Io(io) = source.into_kind() {
            return CorpusError::Io {
                path: path.to_path_buf(),
                source: io,
            };
        }
        unreachable!()
    }
    CorpusError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Drops rows labelled `other` and rows whose text is empty or
/// whitespace-only; everything else passes through unchanged.
pub fn filter_emoevent(raw: Vec<Instance>) -> Vec<Instance> {
    raw.into_iter()
        .filter(|i| i.gold != "other" && !i.text.trim().is_empty())
        .collect()
}

/// Uniform random subsample of at most `n` instances, preserving original
/// relative order. The label set stays that of the parent corpus: candidate
/// labels must not depend on the random draw (classes the sample lost fall
/// under the macro-F1 zero-division policy).
///
/// Algorithm (pinned for cross-implementation reproducibility): shuffle the
/// index list with a ChaCha8 generator seeded via `seed_from_u64(seed)`,
/// keep the first `n` indices, re-sort them ascending. Identity when the
/// corpus already has at most `n` instances.
pub fn subsample(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if n < 1 {
        return Err(CorpusError::BadSampleSize);
    }
    if corpus.instances.len() <= n {
        return Ok(corpus.clone());
    }
    let mut indices: Vec<usize> = (0..corpus.instances.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(n);
    indices.sort_unstable();
    let instances: Vec<Instance> = indices
        .into_iter()
        .map(|i| corpus.instances[i].clone())
        .collect();
    Ok(Corpus {
        name: corpus.name,
        language: corpus.language.clone(),
        label_set: corpus.label_set.clone(),
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures/corpora")
            .join(name)
    }

    fn toy_corpus(count: usize) -> Corpus {
        let instances: Vec<Instance> = (0..count)
            .map(|i| Instance {
                id: format!("t-{i:04}"),
                text: format!("text {i}"),
                gold: if i % 2 == 0 { "joy" } else { "anger" }.to_string(),
                language: "en".to_string(),
            })
            .collect();
        Corpus {
            name: CorpusName::UniversalJoy,
            language: "en".to_string(),
            label_set: vec!["anger".to_string(), "joy".to_string()],
            instances,
        }
    }

    #[test]
    fn corpus_name_order_is_lexicographic() {
        let ids: Vec<&str> = CorpusName::ALL.iter().map(|n| n.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        let mut by_ord = CorpusName::ALL;
        by_ord.sort();
        assert_eq!(by_ord, CorpusName::ALL);
    }

    #[test]
    fn loads_toy_fixture() {
        let load = load_corpus(CorpusName::UniversalJoy, "en", &fixture("toy_en.csv")).unwrap();
        assert_eq!(load.corpus.instances.len(), 4);
        assert_eq!(load.corpus.label_set, vec!["anger", "joy"]);
        // 2 labels instead of the expected 7 warns but does not fail
        assert_eq!(load.warnings.len(), 1);
    }

    #[test]
    fn emoevent_filtering_drops_other_and_empty() {
        let load = load_corpus(CorpusName::EmoEvent, "en", &fixture("emoevent_sample.csv")).unwrap();
        assert_eq!(load.corpus.instances.len(), 8);
        assert!(load.corpus.instances.iter().all(|i| i.gold != "other"));
        assert!(load
            .corpus
            .instances
            .iter()
            .all(|i| !i.text.trim().is_empty()));
    }

    #[test]
    fn filter_emoevent_unit_cases() {
        let mk = |id: &str, text: &str, gold: &str| Instance {
            id: id.to_string(),
            text: text.to_string(),
            gold: gold.to_string(),
            language: "es".to_string(),
        };
        let raw = vec![
            mk("1", "hola", "joy"),
            mk("2", "x", "other"),
            mk("3", "   ", "joy"),
            mk("4", "", "anger"),
        ];
        let kept = filter_emoevent(raw.clone());
        assert_eq!(kept, vec![raw[0].clone()]);
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "id,text,label\n").unwrap();
        assert!(matches!(
            load_corpus(CorpusName::UniversalJoy, "en", &path),
            Err(CorpusError::Empty { .. })
        ));
    }

    #[test]
    fn unknown_language_rejected() {
        assert!(matches!(
            load_corpus(CorpusName::UniversalJoy, "xx", &fixture("toy_en.csv")),
            Err(CorpusError::UnknownLanguage { .. })
        ));
    }

    #[test]
    fn wrong_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "text,label\nfoo,joy\n").unwrap();
        assert!(matches!(
            load_corpus(CorpusName::UniversalJoy, "en", &path),
            Err(CorpusError::BadHeader { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csv");
        std::fs::write(&path, "id,text,label\na,foo,joy\na,bar,anger\n").unwrap();
        assert!(matches!(
            load_corpus(CorpusName::UniversalJoy, "en", &path),
            Err(CorpusError::DuplicateId { .. })
        ));
    }

    #[test]
    fn load_round_trips_awkward_text_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tricky.csv");
        let text = "comma, \"quotes\" and\nnewline";
        let mut writer = csv::Writer::from_path(&path).unwrap();
        writer.write_record(["id", "text", "label"]).unwrap();
        writer.write_record(["a", text, "joy"]).unwrap();
        writer.flush().unwrap();
        let load = load_corpus(CorpusName::UniversalJoy, "en", &path).unwrap();
        assert_eq!(load.corpus.instances[0].text, text);
    }

    #[test]
    fn subsample_caps_at_n() {
        let corpus = toy_corpus(2000);
        let sampled = subsample(&corpus, 981, 42).unwrap();
        assert_eq!(sampled.instances.len(), 981);
    }

    #[test]
    fn subsample_below_n_is_identity() {
        let corpus = toy_corpus(500);
        let sampled = subsample(&corpus, 981, 42).unwrap();
        assert_eq!(sampled, corpus);
    }

    #[test]
    fn subsample_keeps_the_parent_label_set() {
        // even when the draw loses a label's only instances, the candidate
        // label set must not change
        let mut corpus = toy_corpus(50);
        for instance in corpus.instances.iter_mut() {
            instance.gold = "joy".to_string();
        }
        corpus.instances[0].gold = "anger".to_string();
        let sampled = subsample(&corpus, 10, 42).unwrap();
        assert_eq!(sampled.label_set, corpus.label_set);
    }

    #[test]
    fn subsample_is_deterministic() {
        let corpus = toy_corpus(100);
        let a = subsample(&corpus, 30, 7).unwrap();
        let b = subsample(&corpus, 30, 7).unwrap();
        let ids = |c: &Corpus| c.instances.iter().map(|i| i.id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        let c = subsample(&corpus, 30, 8).unwrap();
        assert_ne!(ids(&a), ids(&c));
    }

    #[test]
    fn subsample_rejects_zero() {
        assert!(matches!(
            subsample(&toy_corpus(3), 0, 42),
            Err(CorpusError::BadSampleSize)
        ));
    }

    proptest! {
        #[test]
        fn subsample_ids_are_an_ordered_subset(count in 1usize..120, n in 1usize..120, seed in 0u64..64) {
            let corpus = toy_corpus(count);
            let sampled = subsample(&corpus, n, seed).unwrap();
            prop_assert_eq!(sampled.instances.len(), count.min(n));
            // subset, no duplicates, original relative order
            let original_ids: Vec<&str> =
                corpus.instances.iter().map(|i| i.id.as_str()).collect();
            let mut cursor = 0usize;
            for instance in &sampled.instances {
                let pos = original_ids[cursor..]
                    .iter()
                    .position(|id| *id == instance.id);
                prop_assert!(pos.is_some(), "id {} out of order or duplicated", instance.id);
                cursor += pos.unwrap() + 1;
            }
            // idempotent once at or below n
            let again = subsample(&sampled, n, seed).unwrap();
            prop_assert_eq!(again, sampled);
        }
    }
}

//! Multilingual prompt catalog: templates and label verbalizations.
//!
//! A catalog maps (language, prompt type) to a hypothesis template and
//! (language, emotion) to the surface forms that fill it: the emotion name,
//! a dictionary-style definition, and exactly six synonyms. Translated
//! catalogs are ingested as data files; no translation happens in code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Placeholder that every template pattern must contain exactly once.
pub const SLOT: &str = "{verbalization}";

/// Number of synonyms required per emotion in every catalog language.
pub const SYNONYM_COUNT: usize = 6;

/// The seven hypothesis template shapes.
///
/// Variant declaration order matches the lexicographic order of the string
/// identifiers; grid enumeration relies on the derived `Ord` for that.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptType {
    #[serde(rename = "emo-name")]
    EmoName,
    #[serde(rename = "emo-s")]
    EmoS,
    #[serde(rename = "expr-emo")]
    ExprEmo,
    #[serde(rename = "expr-s")]
    ExprS,
    #[serde(rename = "feels-emo")]
    FeelsEmo,
    #[serde(rename = "feels-s")]
    FeelsS,
    #[serde(rename = "wn-def")]
    WnDef,
}

impl PromptType {
    pub const ALL: [PromptType; 7] = [
        PromptType::EmoName,
        PromptType::EmoS,
        PromptType::ExprEmo,
        PromptType::ExprS,
        PromptType::FeelsEmo,
        PromptType::FeelsS,
        PromptType::WnDef,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptType::EmoName => "emo-name",
            PromptType::EmoS => "emo-s",
            PromptType::ExprEmo => "expr-emo",
            PromptType::ExprS => "expr-s",
            PromptType::FeelsEmo => "feels-emo",
            PromptType::FeelsS => "feels-s",
            PromptType::WnDef => "wn-def",
        }
    }

    /// True for the synonym family: these render six hypotheses per label,
    /// everything else renders one.
    pub fn uses_synonyms(self) -> bool {
        matches!(
            self,
            PromptType::EmoS | PromptType::ExprS | PromptType::FeelsS
        )
    }

    /// The non-synonym prompt type that shares this type's phrasing, if any.
    pub fn synonym_base(self) -> Option<PromptType> {
        match self {
            PromptType::EmoS => Some(PromptType::EmoName),
            PromptType::ExprS => Some(PromptType::ExprEmo),
            PromptType::FeelsS => Some(PromptType::FeelsEmo),
            _ => None,
        }
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptType {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| CatalogError::UnknownPromptType {
                value: s.to_string(),
            })
    }
}

/// Surface forms for one emotion in one catalog language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalization {
    pub emotion: String,
    pub name: String,
    pub synonyms: Vec<String>,
    pub definition: String,
}

/// One hypothesis template for a (language, prompt type) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub prompt_type: PromptType,
    pub language: String,
    pub pattern: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read catalog file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse catalog file {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown prompt type `{value}`")]
    UnknownPromptType { value: String },
    #[error("catalog schema violation at {key_path}: {message}")]
    Schema { key_path: String, message: String },
    #[error("conflicting catalog entry {key_path}: defined by more than one file")]
    MergeConflict { key_path: String },
    #[error("missing catalog template for ({language}, {prompt_type})")]
    MissingTemplate {
        language: String,
        prompt_type: PromptType,
    },
    #[error("missing catalog verbalization for ({language}, {emotion})")]
    MissingVerbalization { language: String, emotion: String },
}

/// Immutable after load; safe to share across threads for reads.
#[derive(Debug, Clone, Default)]
pub struct PromptCatalog {
    templates: BTreeMap<(String, PromptType), PromptTemplate>,
    verbalizations: BTreeMap<(String, String), Verbalization>,
}

impl PromptCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Languages that appear in either the template or verbalization maps.
    pub fn languages(&self) -> BTreeSet<String> {
        self.templates
            .keys()
            .map(|(lang, _)| lang.clone())
            .chain(self.verbalizations.keys().map(|(lang, _)| lang.clone()))
            .collect()
    }

    pub fn template(&self, language: &str, prompt_type: PromptType) -> Option<&PromptTemplate> {
        self.templates
            .get(&(language.to_string(), prompt_type))
    }

    pub fn verbalization(&self, language: &str, emotion: &str) -> Option<&Verbalization> {
        self.verbalizations
            .get(&(language.to_string(), emotion.to_string()))
    }

    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    /// Inserts a template, enforcing the single-slot pattern invariant.
    pub fn insert_template(
        &mut self,
        language: &str,
        prompt_type: PromptType,
        pattern: &str,
    ) -> Result<(), CatalogError> {
        check_pattern(language, prompt_type, pattern)?;
        self.templates.insert(
            (language.to_string(), prompt_type),
            PromptTemplate {
                prompt_type,
                language: language.to_string(),
                pattern: pattern.to_string(),
            },
        );
        Ok(())
    }

    /// Inserts a verbalization, enforcing the six-synonym invariant.
    pub fn insert_verbalization(
        &mut self,
        language: &str,
        verbalization: Verbalization,
    ) -> Result<(), CatalogError> {
        check_verbalization(language, &verbalization)?;
        self.verbalizations.insert(
            (language.to_string(), verbalization.emotion.clone()),
            verbalization,
        );
        Ok(())
    }

    /// Renders the hypothesis strings for one (prompt type, language, emotion)
    /// triple: six strings (one per synonym, in catalog file order) for the
    /// synonym family, one string otherwise.
    pub fn render_hypotheses(
        &self,
        prompt_type: PromptType,
        language: &str,
        emotion: &str,
    ) -> Result<Vec<String>, CatalogError> {
        let template =
            self.template(language, prompt_type)
                .ok_or_else(|| CatalogError::MissingTemplate {
                    language: language.to_string(),
                    prompt_type,
                })?;
        let verb =
            self.verbalization(language, emotion)
                .ok_or_else(|| CatalogError::MissingVerbalization {
                    language: language.to_string(),
                    emotion: emotion.to_string(),
                })?;
        let fillers: Vec<&str> = match prompt_type {
            PromptType::EmoName | PromptType::ExprEmo | PromptType::FeelsEmo => {
                vec![verb.name.as_str()]
            }
            PromptType::WnDef => vec![verb.definition.as_str()],
            PromptType::EmoS | PromptType::ExprS | PromptType::FeelsS => {
                verb.synonyms.iter().map(String::as_str).collect()
            }
        };
        Ok(fillers
            .into_iter()
            .map(|filler| template.pattern.replacen(SLOT, filler, 1))
            .collect())
    }

    /// Checks that every required (language, prompt type, emotion) triple is
    /// renderable. Failures are report content, never errors.
    pub fn validate(&self, required: &[(String, PromptType, String)]) -> ValidationReport {
        let mut problems = BTreeSet::new();
        for (language, prompt_type, emotion) in required {
            if self.template(language, *prompt_type).is_none() {
                problems.insert(ValidationProblem::MissingTemplate {
                    language: language.clone(),
                    prompt_type: *prompt_type,
                });
            }
            if self.verbalization(language, emotion).is_none() {
                problems.insert(ValidationProblem::MissingVerbalization {
                    language: language.clone(),
                    emotion: emotion.clone(),
                });
            }
        }
        ValidationReport {
            problems: problems.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ValidationProblem {
    MissingTemplate {
        language: String,
        prompt_type: PromptType,
    },
    MissingVerbalization {
        language: String,
        emotion: String,
    },
}

impl fmt::Display for ValidationProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationProblem::MissingTemplate {
                language,
                prompt_type,
            } => write!(f, "missing template ({language}, {prompt_type})"),
            ValidationProblem::MissingVerbalization { language, emotion } => {
                write!(f, "missing verbalization ({language}, {emotion})")
            }
        }
    }
}

/// Outcome of [`PromptCatalog::validate`]: empty iff every required triple
/// renders.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub problems: Vec<ValidationProblem>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.problems.is_empty() {
            return write!(f, "catalog complete");
        }
        writeln!(f, "{} catalog problem(s):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

fn check_pattern(
    language: &str,
    prompt_type: PromptType,
    pattern: &str,
) -> Result<(), CatalogError> {
    let slots = pattern.matches(SLOT).count();
    if slots != 1 {
        return Err(CatalogError::Schema {
            key_path: format!("templates.{language}.{prompt_type}"),
            message: format!("pattern must contain exactly one {SLOT} slot, found {slots}"),
        });
    }
    Ok(())
}

fn check_verbalization(language: &str, verb: &Verbalization) -> Result<(), CatalogError> {
    let emotion = &verb.emotion;
    if verb.synonyms.len() != SYNONYM_COUNT {
        return Err(CatalogError::Schema {
            key_path: format!("({language}, {emotion}).synonyms"),
            message: format!(
                "expected exactly {SYNONYM_COUNT} synonyms, found {}",
                verb.synonyms.len()
            ),
        });
    }
    if verb.name.is_empty() {
        return Err(CatalogError::Schema {
            key_path: format!("({language}, {emotion}).name"),
            message: "must be non-empty".to_string(),
        });
    }
    if verb.definition.is_empty() {
        return Err(CatalogError::Schema {
            key_path: format!("({language}, {emotion}).definition"),
            message: "must be non-empty".to_string(),
        });
    }
    if let Some(idx) = verb.synonyms.iter().position(String::is_empty) {
        return Err(CatalogError::Schema {
            key_path: format!("({language}, {emotion}).synonyms[{idx}]"),
            message: "must be non-empty".to_string(),
        });
    }
    Ok(())
}

/// On-disk schema: `templates` is language → prompt type → pattern,
/// `verbalizations` is language → emotion → surface forms.
#[derive(Debug, Deserialize)]
struct CatalogFile {
    #[serde(default)]
    templates: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    verbalizations: BTreeMap<String, BTreeMap<String, VerbalizationEntry>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerbalizationEntry {
    name: String,
    definition: String,
    synonyms: Vec<String>,
}

/// Loads a single catalog file, enforcing all catalog invariants.
pub fn load_catalog(path: &Path) -> Result<PromptCatalog, CatalogError> {
    let mut catalog = PromptCatalog::new();
    merge_file(&mut catalog, path)?;
    Ok(catalog)
}

/// Loads several catalog files merged left-to-right. A key defined by more
/// than one file is a conflict, even when the values agree.
pub fn load_catalogs(paths: &[PathBuf]) -> Result<PromptCatalog, CatalogError> {
    let mut catalog = PromptCatalog::new();
    for path in paths {
        merge_file(&mut catalog, path)?;
    }
    Ok(catalog)
}

fn merge_file(catalog: &mut PromptCatalog, path: &Path) -> Result<(), CatalogError> {
    let bytes = std::fs::read(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: CatalogFile =
        serde_json::from_slice(&bytes).map_err(|source| CatalogError::Parse {
            path: path.to_path_buf(),
            source,
        })?;

    for (language, by_type) in file.templates {
        for (type_id, pattern) in by_type {
            let prompt_type =
                PromptType::from_str(&type_id).map_err(|_| CatalogError::Schema {
                    key_path: format!("templates.{language}.{type_id}"),
                    message: "unknown prompt type".to_string(),
                })?;
            if catalog.template(&language, prompt_type).is_some() {
                return Err(CatalogError::MergeConflict {
                    key_path: format!("templates.{language}.{prompt_type}"),
                });
            }
            catalog.insert_template(&language, prompt_type, &pattern)?;
        }
    }
    for (language, by_emotion) in file.verbalizations {
        for (emotion, entry) in by_emotion {
            if catalog.verbalization(&language, &emotion).is_some() {
                return Err(CatalogError::MergeConflict {
                    key_path: format!("verbalizations.{language}.{emotion}"),
                });
            }
            catalog.insert_verbalization(
                &language,
                Verbalization {
                    emotion: emotion.clone(),
                    name: entry.name,
                    synonyms: entry.synonyms,
                    definition: entry.definition,
                },
            )?;
        }
    }
    Ok(())
}

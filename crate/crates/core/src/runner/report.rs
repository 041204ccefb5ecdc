//! Report emission: pure views over a results store.
//!
//! Every table is recomputed from `records.csv` (prediction dumps read the
//! per-combination prediction logs); nothing is re-scored. Files are UTF-8
//! CSV with `#` provenance comment lines ahead of the header row. Missing
//! cells render as "—" and are also listed as `# gap:` lines.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PromptType;
use crate::corpora::CorpusName;
use crate::metrics::{
    aggregate, mean_pairwise_tau_rows, rank_rows, EvaluationRecord, GroupField, Matrix,
    MetricsError,
};

use super::store::load_records;
use super::{Manifest, StoreError};

pub const MISSING_CELL: &str = "—";

/// What to emit; parsed from the report spec JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSpec {
    pub outputs: Vec<ReportOutput>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReportOutput {
    /// English vs translated prompts per data language (integer percent
    /// cells; English data has no translated row entry).
    PromptLanguageComparison { dataset: CorpusName },
    /// Model × prompt-language class, English data excluded (two-decimal
    /// cells).
    ModelPromptLanguage { dataset: CorpusName },
    /// Data language × prompt type under English prompts; values plus ranks.
    PromptTypeByLanguage { dataset: CorpusName },
    /// Model × prompt type, English data excluded; values plus ranks.
    ModelByPromptType { dataset: CorpusName },
    /// Mean pairwise Kendall τ-b over the rows of one of the two rank
    /// matrices, plus a leave-one-row-out breakdown.
    TauConsistency {
        dataset: CorpusName,
        axis: TauAxis,
    },
    /// Per-instance predictions under the English and the translated prompt.
    PredictionDump {
        dataset: CorpusName,
        data_language: String,
        model: String,
        prompt_type: PromptType,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauAxis {
    #[serde(rename = "prompt-type-by-language")]
    PromptTypeByLanguage,
    #[serde(rename = "model-by-prompt-type")]
    ModelByPromptType,
}

impl TauAxis {
    fn as_str(self) -> &'static str {
        match self {
            TauAxis::PromptTypeByLanguage => "prompt-type-by-language",
            TauAxis::ModelByPromptType => "model-by-prompt-type",
        }
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("failed to read report spec {path}: {source}")]
    SpecIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse report spec {path}: {source}")]
    SpecParse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("store at {0} has no manifest.json (not a results store?)")]
    NoManifest(PathBuf),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One emitted file plus any gaps found while producing it.
#[derive(Debug, Clone)]
pub struct EmittedFile {
    pub path: PathBuf,
    pub gaps: Vec<String>,
}

pub fn load_report_spec(path: &Path) -> Result<ReportSpec, ReportError> {
    let bytes = std::fs::read(path).map_err(|source| ReportError::SpecIo {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_slice(&bytes).map_err(|source| ReportError::SpecParse {
        path: path.to_path_buf(),
        source,
    })
}

/// Emits every requested output into `out_dir` (default: `<store>/reports`).
pub fn report(
    store_dir: &Path,
    spec: &ReportSpec,
    out_dir: Option<&Path>,
) -> Result<Vec<EmittedFile>, ReportError> {
    let manifest_path = store_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(ReportError::NoManifest(store_dir.to_path_buf()));
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(&manifest_path).map_err(
        |source| ReportError::Io {
            path: manifest_path.clone(),
            source,
        },
    )?)
    .map_err(|e| ReportError::Store(StoreError::Parse {
        path: manifest_path.clone(),
        message: e.to_string(),
    }))?;

    let records = load_records(&store_dir.join("records.csv"))?;
    let out_dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| store_dir.join("reports"));
    std::fs::create_dir_all(&out_dir).map_err(|source| ReportError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let mut emitted = Vec::new();
    for output in &spec.outputs {
        match output {
            ReportOutput::PromptLanguageComparison { dataset } => {
                let slice: Vec<EvaluationRecord> = records
                    .iter()
                    .filter(|r| r.dataset == *dataset)
                    .cloned()
                    .collect();
                let path = out_dir.join(format!("prompt-language-comparison__{dataset}.csv"));
                let mut comments = provenance_comments(
                    "prompt-language-comparison",
                    *dataset,
                    &manifest,
                    slice.len(),
                );
                comments.push("# cell format: integer percent, rounded half away from zero".into());
                if slice.is_empty() {
                    emitted.push(emit_empty(&path, comments, dataset)?);
                    continue;
                }
                let matrix = aggregate(
                    &slice,
                    GroupField::PromptLanguageClass,
                    GroupField::DataLanguage,
                    &[GroupField::Model, GroupField::PromptType],
                )?;
                emitted.push(emit_matrix(&path, comments, &matrix, |v| {
                    format!("{:.0}", v * 100.0)
                })?);
            }
            ReportOutput::ModelPromptLanguage { dataset } => {
                let slice: Vec<EvaluationRecord> = records
                    .iter()
                    .filter(|r| r.dataset == *dataset && r.data_language != "en")
                    .cloned()
                    .collect();
                let path = out_dir.join(format!("model-prompt-language__{dataset}.csv"));
                let mut comments =
                    provenance_comments("model-prompt-language", *dataset, &manifest, slice.len());
                comments.push("# English data excluded; cell format: two decimals".into());
                if slice.is_empty() {
                    emitted.push(emit_empty(&path, comments, dataset)?);
                    continue;
                }
                let matrix = aggregate(
                    &slice,
                    GroupField::Model,
                    GroupField::PromptLanguageClass,
                    &[GroupField::PromptType, GroupField::DataLanguage],
                )?;
                emitted.push(emit_matrix(&path, comments, &matrix, |v| format!("{v:.2}"))?);
            }
            ReportOutput::PromptTypeByLanguage { dataset } => {
                let slice: Vec<EvaluationRecord> = records
                    .iter()
                    .filter(|r| r.dataset == *dataset && r.prompt_language == "en")
                    .cloned()
                    .collect();
                emitted.extend(emit_heatmap(
                    &out_dir,
                    "prompt-type-by-language",
                    *dataset,
                    &manifest,
                    &slice,
                    GroupField::DataLanguage,
                    GroupField::PromptType,
                    &[GroupField::Model],
                    "English prompts only",
                )?);
            }
            ReportOutput::ModelByPromptType { dataset } => {
                let slice: Vec<EvaluationRecord> = records
                    .iter()
                    .filter(|r| r.dataset == *dataset && r.data_language != "en")
                    .cloned()
                    .collect();
                emitted.extend(emit_heatmap(
                    &out_dir,
                    "model-by-prompt-type",
                    *dataset,
                    &manifest,
                    &slice,
                    GroupField::Model,
                    GroupField::PromptType,
                    &[GroupField::DataLanguage, GroupField::PromptLanguage],
                    "English data excluded",
                )?);
            }
            ReportOutput::TauConsistency { dataset, axis } => {
                emitted.push(emit_tau(
                    &out_dir, *dataset, *axis, &manifest, &records,
                )?);
            }
            ReportOutput::PredictionDump {
                dataset,
                data_language,
                model,
                prompt_type,
            } => {
                emitted.push(emit_prediction_dump(
                    store_dir,
                    &out_dir,
                    *dataset,
                    data_language,
                    model,
                    *prompt_type,
                    &manifest,
                )?);
            }
        }
    }
    Ok(emitted)
}

fn provenance_comments(
    kind: &str,
    dataset: CorpusName,
    manifest: &Manifest,
    n_records: usize,
) -> Vec<String> {
    vec![
        format!("# report: {kind}"),
        format!("# dataset: {dataset}"),
        format!("# records: {n_records}"),
        format!("# config-hash: {}", manifest.config_hash),
    ]
}

fn emit_empty(
    path: &Path,
    mut comments: Vec<String>,
    dataset: &CorpusName,
) -> Result<EmittedFile, ReportError> {
    let gap = format!("no records for dataset {dataset}");
    comments.push(format!("# gap: {gap}"));
    write_lines(path, &comments)?;
    Ok(EmittedFile {
        path: path.to_path_buf(),
        gaps: vec![gap],
    })
}

fn emit_matrix(
    path: &Path,
    mut comments: Vec<String>,
    matrix: &Matrix,
    format_value: impl Fn(f64) -> String,
) -> Result<EmittedFile, ReportError> {
    comments.push(format!(
        "# rows: {}, cols: {}, average-over: {}",
        matrix.provenance.rows,
        matrix.provenance.cols,
        matrix
            .provenance
            .average_over
            .iter()
            .map(|f| f.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    ));
    let mut gaps = Vec::new();
    for (ri, row_key) in matrix.row_keys.iter().enumerate() {
        for (ci, col_key) in matrix.col_keys.iter().enumerate() {
            if matrix.cell(ri, ci).mean.is_none() {
                gaps.push(format!("({row_key}, {col_key}) has no records"));
            }
        }
        comments.push(format!(
            "# counts: {row_key},{}",
            matrix.cells[ri]
                .iter()
                .map(|c| c.count.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    for gap in &gaps {
        comments.push(format!("# gap: {gap}"));
    }

    let mut lines = comments;
    lines.push(csv_line(
        std::iter::once(matrix.provenance.rows.to_string())
            .chain(matrix.col_keys.iter().cloned()),
    ));
    for (ri, row_key) in matrix.row_keys.iter().enumerate() {
        lines.push(csv_line(std::iter::once(row_key.clone()).chain(
            matrix.cells[ri].iter().map(|cell| match cell.mean {
                Some(v) => format_value(v),
                None => MISSING_CELL.to_string(),
            }),
        )));
    }
    write_lines(path, &lines)?;
    Ok(EmittedFile {
        path: path.to_path_buf(),
        gaps,
    })
}

#[allow(clippy::too_many_arguments)]
fn emit_heatmap(
    out_dir: &Path,
    kind: &str,
    dataset: CorpusName,
    manifest: &Manifest,
    slice: &[EvaluationRecord],
    rows: GroupField,
    cols: GroupField,
    average_over: &[GroupField],
    note: &str,
) -> Result<Vec<EmittedFile>, ReportError> {
    let values_path = out_dir.join(format!("{kind}__{dataset}.values.csv"));
    let ranks_path = out_dir.join(format!("{kind}__{dataset}.ranks.csv"));
    let mut comments = provenance_comments(kind, dataset, manifest, slice.len());
    comments.push(format!("# {note}"));
    if slice.is_empty() {
        let values = emit_empty(&values_path, comments.clone(), &dataset)?;
        let ranks = emit_empty(&ranks_path, comments, &dataset)?;
        return Ok(vec![values, ranks]);
    }
    let matrix = aggregate(slice, rows, cols, average_over)?;
    let values = emit_matrix(&values_path, comments.clone(), &matrix, |v| format!("{v}"))?;

    // rank only the dense rows; gap-note the rest
    let mut gaps = Vec::new();
    let dense_rows: Vec<usize> = (0..matrix.row_keys.len())
        .filter(|ri| {
            let dense = matrix.dense_row(*ri).is_some();
            if !dense {
                gaps.push(format!(
                    "row {} has missing cells and was not ranked",
                    matrix.row_keys[*ri]
                ));
            }
            dense
        })
        .collect();
    let sub = Matrix {
        row_keys: dense_rows
            .iter()
            .map(|ri| matrix.row_keys[*ri].clone())
            .collect(),
        col_keys: matrix.col_keys.clone(),
        cells: dense_rows.iter().map(|ri| matrix.cells[*ri].clone()).collect(),
        provenance: matrix.provenance.clone(),
    };
    comments.push("# rank 1 = highest value; ties break by column key".into());
    for gap in &gaps {
        comments.push(format!("# gap: {gap}"));
    }
    let mut lines = comments;
    lines.push(csv_line(
        std::iter::once(rows.to_string()).chain(matrix.col_keys.iter().cloned()),
    ));
    if !sub.row_keys.is_empty() {
        let ranked = rank_rows(&sub)?;
        for (ri, row_key) in ranked.row_keys.iter().enumerate() {
            lines.push(csv_line(std::iter::once(row_key.clone()).chain(
                ranked.ranks[ri].iter().map(|r| r.to_string()),
            )));
        }
    }
    write_lines(&ranks_path, &lines)?;
    Ok(vec![
        values,
        EmittedFile {
            path: ranks_path,
            gaps,
        },
    ])
}

fn emit_tau(
    out_dir: &Path,
    dataset: CorpusName,
    axis: TauAxis,
    manifest: &Manifest,
    records: &[EvaluationRecord],
) -> Result<EmittedFile, ReportError> {
    let (slice, rows, cols, average_over): (Vec<EvaluationRecord>, _, _, Vec<GroupField>) =
        match axis {
            TauAxis::PromptTypeByLanguage => (
                records
                    .iter()
                    .filter(|r| r.dataset == dataset && r.prompt_language == "en")
                    .cloned()
                    .collect(),
                GroupField::DataLanguage,
                GroupField::PromptType,
                vec![GroupField::Model],
            ),
            TauAxis::ModelByPromptType => (
                records
                    .iter()
                    .filter(|r| r.dataset == dataset && r.data_language != "en")
                    .cloned()
                    .collect(),
                GroupField::Model,
                GroupField::PromptType,
                vec![GroupField::DataLanguage, GroupField::PromptLanguage],
            ),
        };
    let path = out_dir.join(format!("tau-consistency__{dataset}__{}.csv", axis.as_str()));
    let mut comments = provenance_comments("tau-consistency", dataset, manifest, slice.len());
    comments.push(format!("# axis: {}", axis.as_str()));
    if slice.is_empty() {
        return emit_empty(&path, comments, &dataset);
    }

    let matrix = aggregate(&slice, rows, cols, &average_over)?;
    let mut gaps = Vec::new();
    let mut dense: Vec<(String, Vec<f64>)> = Vec::new();
    for (ri, row_key) in matrix.row_keys.iter().enumerate() {
        match matrix.dense_row(ri) {
            Some(values) => dense.push((row_key.clone(), values)),
            None => gaps.push(format!("row {row_key} has missing cells and was skipped")),
        }
    }
    for gap in &gaps {
        comments.push(format!("# gap: {gap}"));
    }

    let mut lines = comments;
    lines.push("scope,omitted_row,tau,n_rows".to_string());
    let tau_cell = |rows: &[Vec<f64>]| match mean_pairwise_tau_rows(rows) {
        Ok(tau) => Ok(format!("{tau:.4}")),
        Err(MetricsError::NoDefinedPairs) | Err(MetricsError::TooFewRows { .. }) => {
            Ok(MISSING_CELL.to_string())
        }
        Err(other) => Err(other),
    };
    let all_rows: Vec<Vec<f64>> = dense.iter().map(|(_, v)| v.clone()).collect();
    lines.push(csv_line(
        [
            "all".to_string(),
            String::new(),
            tau_cell(&all_rows)?,
            all_rows.len().to_string(),
        ]
        .into_iter(),
    ));
    for (omit, _) in dense.iter() {
        let remaining: Vec<Vec<f64>> = dense
            .iter()
            .filter(|(key, _)| key != omit)
            .map(|(_, v)| v.clone())
            .collect();
        lines.push(csv_line(
            [
                "leave-one-out".to_string(),
                omit.clone(),
                tau_cell(&remaining)?,
                remaining.len().to_string(),
            ]
            .into_iter(),
        ));
    }
    write_lines(&path, &lines)?;
    Ok(EmittedFile { path, gaps })
}

fn emit_prediction_dump(
    store_dir: &Path,
    out_dir: &Path,
    dataset: CorpusName,
    data_language: &str,
    model: &str,
    prompt_type: PromptType,
    manifest: &Manifest,
) -> Result<EmittedFile, ReportError> {
    let combination_id = |prompt_language: &str| {
        format!("{dataset}__{data_language}__{model}__{prompt_type}__{prompt_language}")
    };
    let english = read_prediction_log(store_dir, &combination_id("en"))?;
    let translated = if data_language == "en" {
        None
    } else {
        read_prediction_log(store_dir, &combination_id(data_language))?
    }
    .map(|rows| {
        rows.into_iter()
            .map(|row| (row.instance_id.clone(), row))
            .collect::<BTreeMap<_, _>>()
    });

    let path = out_dir.join(format!(
        "prediction-dump__{dataset}__{data_language}__{model}__{prompt_type}.csv"
    ));
    let mut comments = provenance_comments("prediction-dump", dataset, manifest, 0);
    comments.push(format!(
        "# data-language: {data_language}, model: {model}, prompt-type: {prompt_type}"
    ));
    let mut gaps = Vec::new();
    if english.is_none() {
        gaps.push(format!(
            "no predictions for combination {}",
            combination_id("en")
        ));
    }
    if data_language != "en" && translated.is_none() {
        gaps.push(format!(
            "no predictions for combination {}",
            combination_id(data_language)
        ));
    }
    if data_language == "en" {
        comments.push("# English data: translated-prompt column is structurally absent".into());
    }
    for gap in &gaps {
        comments.push(format!("# gap: {gap}"));
    }

    let mut lines = comments;
    lines.push("instance_id,text,gold,english_prompt_pred,translated_prompt_pred".to_string());
    if let Some(rows) = &english {
        for row in rows {
            let translated_pred = translated
                .as_ref()
                .and_then(|m| m.get(&row.instance_id))
                .map(|r| r.predicted.clone())
                .unwrap_or_else(|| MISSING_CELL.to_string());
            lines.push(csv_line(
                [
                    row.instance_id.clone(),
                    row.text.clone(),
                    row.gold.clone(),
                    row.predicted.clone(),
                    translated_pred,
                ]
                .into_iter(),
            ));
        }
    }
    write_lines(&path, &lines)?;
    Ok(EmittedFile { path, gaps })
}

struct PredictionRow {
    instance_id: String,
    text: String,
    gold: String,
    predicted: String,
}

fn read_prediction_log(
    store_dir: &Path,
    combination_id: &str,
) -> Result<Option<Vec<PredictionRow>>, ReportError> {
    let path = store_dir
        .join("predictions")
        .join(format!("{combination_id}.csv"));
    if !path.exists() {
        return Ok(None);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&path)
        .map_err(|e| {
            ReportError::Store(StoreError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })
        })?;
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            ReportError::Store(StoreError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })
        })?;
        rows.push(PredictionRow {
            instance_id: row[0].to_string(),
            text: row[1].to_string(),
            gold: row[2].to_string(),
            predicted: row[3].to_string(),
        });
    }
    Ok(Some(rows))
}

fn csv_line(fields: impl Iterator<Item = String>) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer
        .write_record(fields.collect::<Vec<_>>())
        .expect("in-memory CSV write");
    let bytes = writer.into_inner().expect("in-memory CSV flush");
    String::from_utf8(bytes)
        .expect("CSV output is UTF-8")
        .trim_end_matches('\n')
        .to_string()
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), ReportError> {
    let mut contents = lines.join("\n");
    contents.push('\n');
    std::fs::write(path, contents).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a prompt type off a report-spec-style string (CLI convenience).
pub fn parse_prompt_type(s: &str) -> Result<PromptType, String> {
    PromptType::from_str(s).map_err(|e| e.to_string())
}

//! Macro-F1, grouped mean matrices, within-row ranks, and tie-corrected
//! Kendall rank correlation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PromptType;
use crate::corpora::CorpusName;

/// One evaluated grid combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model_id: String,
    pub dataset: CorpusName,
    pub data_language: String,
    pub prompt_language: String,
    pub prompt_type: PromptType,
    pub macro_f1: f64,
    pub n_instances: usize,
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("label `{label}` in {which} is not in the label set")]
    UnknownLabel { label: String, which: &'static str },
    #[error("duplicate label `{0}` in label set")]
    DuplicateLabel(String),
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("Kendall's tau is undefined: all values tied in one argument")]
    Degenerate,
    #[error("need at least {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("no row pair has a defined tau")]
    NoDefinedPairs,
    #[error("row and column grouping fields must differ")]
    SameGroupingField,
    #[error("field {field} varies across records but is not a grouping or averaging field")]
    UnaggregatedField { field: GroupField },
    #[error("missing cell ({row}, {col})")]
    MissingCell { row: String, col: String },
}

/// F1 contribution of a class absent from both gold and predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZeroDivisionPolicy {
    /// Count the class as F1 = 0 (the common library default).
    #[serde(rename = "count-as-zero")]
    #[default]
    CountAsZero,
    /// Leave the class out of the macro average.
    #[serde(rename = "exclude-absent")]
    ExcludeAbsent,
}

/// Unweighted mean over `label_set` of per-class F1 = 2·tp / (2·tp + fp + fn),
/// with the 0/0 case resolved by [`ZeroDivisionPolicy::CountAsZero`].
pub fn macro_f1<S: AsRef<str>>(gold: &[S], pred: &[S], label_set: &[S]) -> Result<f64, MetricsError> {
    macro_f1_with_policy(gold, pred, label_set, ZeroDivisionPolicy::CountAsZero)
}

pub fn macro_f1_with_policy<S: AsRef<str>>(
    gold: &[S],
    pred: &[S],
    label_set: &[S],
    policy: ZeroDivisionPolicy,
) -> Result<f64, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            left: gold.len(),
            right: pred.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut index: HashMap<&str, usize> = HashMap::with_capacity(label_set.len());
    for (i, label) in label_set.iter().enumerate() {
        if index.insert(label.as_ref(), i).is_some() {
            return Err(MetricsError::DuplicateLabel(label.as_ref().to_string()));
        }
    }
    let lookup = |label: &S, which: &'static str| {
        index
            .get(label.as_ref())
            .copied()
            .ok_or_else(|| MetricsError::UnknownLabel {
                label: label.as_ref().to_string(),
                which,
            })
    };

    let mut tp = vec![0usize; label_set.len()];
    let mut fp = vec![0usize; label_set.len()];
    let mut fn_ = vec![0usize; label_set.len()];
    for (g, p) in gold.iter().zip(pred.iter()) {
        let gi = lookup(g, "gold")?;
        let pi = lookup(p, "pred")?;
        if gi == pi {
            tp[gi] += 1;
        } else {
            fn_[gi] += 1;
            fp[pi] += 1;
        }
    }

    let mut sum = 0.0;
    let mut contributing = 0usize;
    for i in 0..label_set.len() {
        let denom = 2 * tp[i] + fp[i] + fn_[i];
        if denom == 0 {
            match policy {
                ZeroDivisionPolicy::CountAsZero => contributing += 1,
                ZeroDivisionPolicy::ExcludeAbsent => {}
            }
            continue;
        }
        sum += 2.0 * tp[i] as f64 / denom as f64;
        contributing += 1;
    }
    if contributing == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(sum / contributing as f64)
}

/// Grouping axes over [`EvaluationRecord`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupField {
    #[serde(rename = "model")]
    Model,
    #[serde(rename = "dataset")]
    Dataset,
    #[serde(rename = "data-language")]
    DataLanguage,
    #[serde(rename = "prompt-language")]
    PromptLanguage,
    /// `english` vs `translated`, derived from the concrete prompt language.
    #[serde(rename = "prompt-language-class")]
    PromptLanguageClass,
    #[serde(rename = "prompt-type")]
    PromptType,
}

impl GroupField {
    pub fn key_of(self, record: &EvaluationRecord) -> String {
        match self {
            GroupField::Model => record.model_id.clone(),
            GroupField::Dataset => record.dataset.as_str().to_string(),
            GroupField::DataLanguage => record.data_language.clone(),
            GroupField::PromptLanguage => record.prompt_language.clone(),
            GroupField::PromptLanguageClass => {
                if record.prompt_language == "en" {
                    "english".to_string()
                } else {
                    "translated".to_string()
                }
            }
            GroupField::PromptType => record.prompt_type.as_str().to_string(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            GroupField::Model => "model",
            GroupField::Dataset => "dataset",
            GroupField::DataLanguage => "data-language",
            GroupField::PromptLanguage => "prompt-language",
            GroupField::PromptLanguageClass => "prompt-language-class",
            GroupField::PromptType => "prompt-type",
        }
    }
}

impl fmt::Display for GroupField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mean and record count of one matrix cell; `mean` is `None` when no record
/// matched (rendered as "—" downstream).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: Option<f64>,
    pub count: usize,
}

/// How a matrix was produced, carried into emitted files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rows: GroupField,
    pub cols: GroupField,
    pub average_over: Vec<GroupField>,
    pub n_records: usize,
}

/// Dense grid of grouped macro-F1 means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub row_keys: Vec<String>,
    pub col_keys: Vec<String>,
    /// Row-major, `row_keys.len() × col_keys.len()`.
    pub cells: Vec<Vec<Cell>>,
    pub provenance: Provenance,
}

impl Matrix {
    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row][col]
    }

    /// Values of one row; `None` if any cell is missing.
    pub fn dense_row(&self, row: usize) -> Option<Vec<f64>> {
        self.cells[row].iter().map(|c| c.mean).collect()
    }
}

/// Same shape as the source matrix plus a 1-based rank per cell; each row is
/// a permutation of 1..=ncols, rank 1 being the highest value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMatrix {
    pub row_keys: Vec<String>,
    pub col_keys: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub ranks: Vec<Vec<usize>>,
}

/// Groups records by (rows, cols) and takes the unweighted mean of macro-F1
/// in every cell. Any field that is neither a grouping axis nor listed in
/// `average_over` must be constant across the records (PromptLanguage and
/// PromptLanguageClass cover each other).
pub fn aggregate(
    records: &[EvaluationRecord],
    rows: GroupField,
    cols: GroupField,
    average_over: &[GroupField],
) -> Result<Matrix, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if rows == cols {
        return Err(MetricsError::SameGroupingField);
    }
    let covered = |field: GroupField| {
        let directly = rows == field || cols == field || average_over.contains(&field);
        if directly {
            return true;
        }
        // the class axis is derived from the concrete prompt language
        let language_like = [GroupField::PromptLanguage, GroupField::PromptLanguageClass];
        if language_like.contains(&field) {
            return language_like
                .iter()
                .any(|f| rows == *f || cols == *f || average_over.contains(f));
        }
        false
    };
    for field in [
        GroupField::Model,
        GroupField::Dataset,
        GroupField::DataLanguage,
        GroupField::PromptLanguage,
        GroupField::PromptType,
    ] {
        if covered(field) {
            continue;
        }
        let distinct: BTreeSet<String> = records.iter().map(|r| field.key_of(r)).collect();
        if distinct.len() > 1 {
            return Err(MetricsError::UnaggregatedField { field });
        }
    }

    let row_keys: Vec<String> = records
        .iter()
        .map(|r| rows.key_of(r))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col_keys: Vec<String> = records
        .iter()
        .map(|r| cols.key_of(r))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for record in records {
        let ri = row_keys.binary_search(&rows.key_of(record)).expect("row key");
        let ci = col_keys.binary_search(&cols.key_of(record)).expect("col key");
        let entry = sums.entry((ri, ci)).or_insert((0.0, 0));
        entry.0 += record.macro_f1;
        entry.1 += 1;
    }

    let cells: Vec<Vec<Cell>> = (0..row_keys.len())
        .map(|ri| {
            (0..col_keys.len())
                .map(|ci| match sums.get(&(ri, ci)) {
                    Some((sum, count)) => Cell {
                        mean: Some(sum / *count as f64),
                        count: *count,
                    },
                    None => Cell {
                        mean: None,
                        count: 0,
                    },
                })
                .collect()
        })
        .collect();

    Ok(Matrix {
        row_keys,
        col_keys,
        cells,
        provenance: Provenance {
            rows,
            cols,
            average_over: average_over.to_vec(),
            n_records: records.len(),
        },
    })
}

/// Ranks every row of a dense matrix: rank 1 is the highest value, ties are
/// resolved toward the lexicographically smaller column key.
pub fn rank_rows(matrix: &Matrix) -> Result<RankMatrix, MetricsError> {
    let mut values = Vec::with_capacity(matrix.row_keys.len());
    let mut ranks = Vec::with_capacity(matrix.row_keys.len());
    for (ri, row_key) in matrix.row_keys.iter().enumerate() {
        let row = matrix.dense_row(ri).ok_or_else(|| {
            let ci = matrix.cells[ri]
                .iter()
                .position(|c| c.mean.is_none())
                .expect("missing cell");
            MetricsError::MissingCell {
                row: row_key.clone(),
                col: matrix.col_keys[ci].clone(),
            }
        })?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| {
            row[b]
                .partial_cmp(&row[a])
                .expect("finite values")
                .then_with(|| matrix.col_keys[a].cmp(&matrix.col_keys[b]))
        });
        let mut row_ranks = vec![0usize; row.len()];
        for (rank, col) in order.into_iter().enumerate() {
            row_ranks[col] = rank + 1;
        }
        values.push(row);
        ranks.push(row_ranks);
    }
    Ok(RankMatrix {
        row_keys: matrix.row_keys.clone(),
        col_keys: matrix.col_keys.clone(),
        values,
        ranks,
    })
}

/// Tie-corrected Kendall rank correlation:
/// τ-b = (C − D) / √((C + D + Tx)(C + D + Ty)) with Tx/Ty the pairs tied
/// only in x / only in y. Computed here via the sign-product sum and
/// group-count tie formulas; the exhaustive pair-classification route lives
/// in the test oracle.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricsError::TooFewRows {
            needed: 2,
            found: x.len(),
        });
    }
    for (i, v) in x.iter().chain(y.iter()).enumerate() {
        if !v.is_finite() {
            return Err(MetricsError::NonFinite(i % x.len()));
        }
    }

    let n = x.len();
    let total_pairs = (n * (n - 1) / 2) as f64;

    // concordant minus discordant via sign products
    let sign = |d: f64| -> i64 {
        if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut sign_sum = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            sign_sum += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }

    // tied pairs from equal-value group sizes
    let tied_pairs = |values: &[f64]| {
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut pairs = 0f64;
        let mut run = 1usize;
        for i in 1..sorted.len() {
            if sorted[i] == sorted[i - 1] {
                run += 1;
            } else {
                pairs += (run * (run - 1) / 2) as f64;
                run = 1;
            }
        }
        pairs + (run * (run - 1) / 2) as f64
    };
    let ties_x = tied_pairs(x);
    let ties_y = tied_pairs(y);

    let denom = (total_pairs - ties_x) * (total_pairs - ties_y);
    if denom <= 0.0 {
        return Err(MetricsError::Degenerate);
    }
    Ok((sign_sum as f64 / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Unweighted mean of τ-b over all unordered row pairs, skipping pairs where
/// τ is undefined.
pub fn mean_pairwise_tau(matrix: &Matrix) -> Result<f64, MetricsError> {
    let rows: Vec<Vec<f64>> = (0..matrix.row_keys.len())
        .map(|ri| {
            matrix.dense_row(ri).ok_or_else(|| MetricsError::MissingCell {
                row: matrix.row_keys[ri].clone(),
                col: String::new(),
            })
        })
        .collect::<Result<_, _>>()?;
    mean_pairwise_tau_rows(&rows)
}

pub fn mean_pairwise_tau_rows(rows: &[Vec<f64>]) -> Result<f64, MetricsError> {
    if rows.len() < 2 {
        return Err(MetricsError::TooFewRows {
            needed: 2,
            found: rows.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            match kendall_tau_b(&rows[i], &rows[j]) {
                Ok(tau) => {
                    sum += tau;
                    count += 1;
                }
                Err(MetricsError::Degenerate) => {}
                Err(other) => return Err(other),
            }
        }
    }
    if count == 0 {
        return Err(MetricsError::NoDefinedPairs);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    fn record(
        model: &str,
        language: &str,
        prompt_language: &str,
        prompt_type: PromptType,
        f1: f64,
    ) -> EvaluationRecord {
        EvaluationRecord {
            model_id: model.to_string(),
            dataset: CorpusName::UniversalJoy,
            data_language: language.to_string(),
            prompt_language: prompt_language.to_string(),
            prompt_type,
            macro_f1: f1,
            n_instances: 10,
        }
    }

    #[test]
    fn macro_f1_perfect_prediction() {
        let gold = s(&["joy", "anger", "joy"]);
        let labels = s(&["anger", "joy"]);
        assert_eq!(macro_f1(&gold, &gold.clone(), &labels).unwrap(), 1.0);
    }

    #[test]
    fn macro_f1_hand_computed_confusion() {
        let gold = s(&["joy", "joy", "anger"]);
        let pred = s(&["joy", "anger", "anger"]);
        let labels = s(&["joy", "anger"]);
        let f1 = macro_f1(&gold, &pred, &labels).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12, "{f1}");
    }

    #[test]
    fn macro_f1_totally_wrong_is_zero() {
        let gold = s(&["joy", "joy"]);
        let pred = s(&["anger", "anger"]);
        let labels = s(&["anger", "joy"]);
        assert_eq!(macro_f1(&gold, &pred, &labels).unwrap(), 0.0);
    }

    #[test]
    fn macro_f1_absent_class_policies_differ() {
        // `fear` appears in neither gold nor pred
        let gold = s(&["joy", "anger"]);
        let pred = s(&["joy", "anger"]);
        let labels = s(&["anger", "fear", "joy"]);
        let counted =
            macro_f1_with_policy(&gold, &pred, &labels, ZeroDivisionPolicy::CountAsZero).unwrap();
        let excluded =
            macro_f1_with_policy(&gold, &pred, &labels, ZeroDivisionPolicy::ExcludeAbsent)
                .unwrap();
        assert!((counted - 2.0 / 3.0).abs() < 1e-12);
        assert!((excluded - 1.0).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_rejects_bad_inputs() {
        let labels = s(&["a", "b"]);
        assert!(matches!(
            macro_f1(&s(&["a"]), &s(&["a", "b"]), &labels),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            macro_f1::<String>(&[], &[], &labels),
            Err(MetricsError::EmptyInput)
        ));
        assert!(matches!(
            macro_f1(&s(&["c"]), &s(&["a"]), &labels),
            Err(MetricsError::UnknownLabel { which: "gold", .. })
        ));
        assert!(matches!(
            macro_f1(&s(&["a"]), &s(&["c"]), &labels),
            Err(MetricsError::UnknownLabel { which: "pred", .. })
        ));
    }

    #[test]
    fn kendall_identity_and_reversal() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let rev = [4.0, 3.0, 2.0, 1.0];
        assert_eq!(kendall_tau_b(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&x, &rev).unwrap(), -1.0);
    }

    #[test]
    fn kendall_single_swap_is_one_third() {
        let tau = kendall_tau_b(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap();
        assert!((tau - 1.0 / 3.0).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn kendall_matches_published_reference_values() {
        // frozen outputs of scipy.stats.kendalltau / commons-math on the
        // same vectors
        let tau = kendall_tau_b(&[12.0, 2.0, 1.0, 12.0, 2.0], &[1.0, 4.0, 7.0, 1.0, 0.0]).unwrap();
        assert!((tau - -0.4714045207910316).abs() < 1e-12, "{tau}");

        let tau = kendall_tau_b(
            &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
            &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0],
        )
        .unwrap();
        assert!((tau - 0.8006407690254358).abs() < 1e-12, "{tau}");

        let x = [
            12.0, 14.0, 14.0, 17.0, 19.0, 19.0, 19.0, 19.0, 19.0, 20.0, 21.0, 21.0, 21.0, 21.0,
            21.0, 22.0, 23.0, 24.0, 24.0, 24.0, 26.0, 26.0, 27.0,
        ];
        let y = [
            11.0, 4.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0,
            4.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ];
        let tau = kendall_tau_b(&x, &y).unwrap();
        assert!((tau - -0.3762015410475098).abs() < 1e-12, "{tau}");
    }

    #[test]
    fn kendall_degenerate_and_error_cases() {
        assert!(matches!(
            kendall_tau_b(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(MetricsError::Degenerate)
        ));
        assert!(matches!(
            kendall_tau_b(&[1.0], &[1.0]),
            Err(MetricsError::TooFewRows { .. })
        ));
        assert!(matches!(
            kendall_tau_b(&[1.0, 2.0], &[1.0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn aggregate_single_record_is_its_value() {
        let records = vec![record("m1", "de", "en", PromptType::EmoName, 0.42)];
        let matrix = aggregate(
            &records,
            GroupField::Model,
            GroupField::DataLanguage,
            &[GroupField::PromptType],
        )
        .unwrap();
        assert_eq!(matrix.row_keys, vec!["m1"]);
        assert_eq!(matrix.col_keys, vec!["de"]);
        assert_eq!(matrix.cell(0, 0).mean, Some(0.42));
        assert_eq!(matrix.cell(0, 0).count, 1);
    }

    #[test]
    fn aggregate_cell_mean_is_unweighted() {
        let records = vec![
            record("m1", "de", "en", PromptType::EmoName, 0.2),
            record("m1", "de", "en", PromptType::ExprEmo, 0.4),
        ];
        let matrix = aggregate(
            &records,
            GroupField::Model,
            GroupField::DataLanguage,
            &[GroupField::PromptType],
        )
        .unwrap();
        let cell = matrix.cell(0, 0);
        assert!((cell.mean.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(cell.count, 2);
    }

    #[test]
    fn aggregate_missing_cells_are_none_with_count_zero() {
        // no translated prompt for English data
        let records = vec![
            record("m1", "en", "en", PromptType::EmoName, 0.5),
            record("m1", "de", "en", PromptType::EmoName, 0.4),
            record("m1", "de", "de", PromptType::EmoName, 0.3),
        ];
        let matrix = aggregate(
            &records,
            GroupField::PromptLanguageClass,
            GroupField::DataLanguage,
            &[GroupField::Model, GroupField::PromptType],
        )
        .unwrap();
        assert_eq!(matrix.row_keys, vec!["english", "translated"]);
        assert_eq!(matrix.col_keys, vec!["de", "en"]);
        let en_translated = matrix.cell(1, 1);
        assert_eq!(en_translated.mean, None);
        assert_eq!(en_translated.count, 0);
    }

    #[test]
    fn aggregate_rejects_varying_unlisted_field() {
        let records = vec![
            record("m1", "de", "en", PromptType::EmoName, 0.5),
            record("m2", "de", "en", PromptType::EmoName, 0.4),
        ];
        let err = aggregate(
            &records,
            GroupField::PromptLanguageClass,
            GroupField::DataLanguage,
            &[GroupField::PromptType],
        )
        .unwrap_err();
        assert!(matches!(
            err,
            MetricsError::UnaggregatedField {
                field: GroupField::Model
            }
        ));
    }

    #[test]
    fn aggregate_transposes_cleanly() {
        let records = vec![
            record("m1", "de", "en", PromptType::EmoName, 0.1),
            record("m1", "es", "en", PromptType::EmoName, 0.2),
            record("m2", "de", "en", PromptType::EmoName, 0.3),
            record("m2", "es", "en", PromptType::EmoName, 0.4),
        ];
        let a = aggregate(
            &records,
            GroupField::Model,
            GroupField::DataLanguage,
            &[GroupField::PromptType],
        )
        .unwrap();
        let b = aggregate(
            &records,
            GroupField::DataLanguage,
            GroupField::Model,
            &[GroupField::PromptType],
        )
        .unwrap();
        assert_eq!(a.row_keys, b.col_keys);
        assert_eq!(a.col_keys, b.row_keys);
        for ri in 0..a.row_keys.len() {
            for ci in 0..a.col_keys.len() {
                assert_eq!(a.cell(ri, ci), b.cell(ci, ri));
            }
        }
    }

    #[test]
    fn rank_rows_basic_and_ties() {
        let records = vec![
            record("m1", "de", "en", PromptType::EmoName, 0.30),
            record("m1", "de", "en", PromptType::ExprEmo, 0.10),
            record("m1", "de", "en", PromptType::FeelsEmo, 0.20),
        ];
        let matrix = aggregate(
            &records,
            GroupField::DataLanguage,
            GroupField::PromptType,
            &[GroupField::Model],
        )
        .unwrap();
        let ranked = rank_rows(&matrix).unwrap();
        // columns sorted: emo-name, expr-emo, feels-emo
        assert_eq!(ranked.ranks[0], vec![1, 3, 2]);

        let tied = vec![
            record("m1", "de", "en", PromptType::EmoName, 0.5),
            record("m1", "de", "en", PromptType::ExprEmo, 0.5),
            record("m1", "de", "en", PromptType::FeelsEmo, 0.5),
        ];
        let matrix = aggregate(
            &tied,
            GroupField::DataLanguage,
            GroupField::PromptType,
            &[GroupField::Model],
        )
        .unwrap();
        let ranked = rank_rows(&matrix).unwrap();
        // all equal: ranks follow column-key order
        assert_eq!(ranked.ranks[0], vec![1, 2, 3]);
    }

    #[test]
    fn rank_rows_rejects_missing_cells() {
        let records = vec![
            record("m1", "en", "en", PromptType::EmoName, 0.5),
            record("m1", "de", "en", PromptType::EmoName, 0.4),
            record("m1", "de", "de", PromptType::EmoName, 0.3),
        ];
        let matrix = aggregate(
            &records,
            GroupField::PromptLanguageClass,
            GroupField::DataLanguage,
            &[GroupField::Model, GroupField::PromptType],
        )
        .unwrap();
        assert!(matches!(
            rank_rows(&matrix),
            Err(MetricsError::MissingCell { .. })
        ));
    }

    #[test]
    fn mean_pairwise_tau_identical_rows_is_one() {
        let rows = vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6], vec![0.0, 0.5, 0.9]];
        assert!((mean_pairwise_tau_rows(&rows).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_pairwise_tau_two_rows_equals_their_tau() {
        let rows = vec![vec![0.1, 0.3, 0.2], vec![0.9, 0.1, 0.5]];
        let direct = kendall_tau_b(&rows[0], &rows[1]).unwrap();
        assert_eq!(mean_pairwise_tau_rows(&rows).unwrap(), direct);
    }

    #[test]
    fn mean_pairwise_tau_three_rows_brute_forced() {
        let rows = vec![
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.4, 0.3, 0.2, 0.1],
            vec![0.2, 0.1, 0.4, 0.3],
        ];
        let expected = (kendall_tau_b(&rows[0], &rows[1]).unwrap()
            + kendall_tau_b(&rows[0], &rows[2]).unwrap()
            + kendall_tau_b(&rows[1], &rows[2]).unwrap())
            / 3.0;
        assert_eq!(mean_pairwise_tau_rows(&rows).unwrap(), expected);
    }

    #[test]
    fn mean_pairwise_tau_skips_degenerate_pairs() {
        let rows = vec![
            vec![1.0, 1.0, 1.0],
            vec![0.1, 0.2, 0.3],
            vec![0.3, 0.2, 0.1],
        ];
        // pairs with the constant row are undefined; the remaining pair is -1
        assert_eq!(mean_pairwise_tau_rows(&rows).unwrap(), -1.0);
        assert!(matches!(
            mean_pairwise_tau_rows(&rows[..1]),
            Err(MetricsError::TooFewRows { .. })
        ));
        let all_constant = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(
            mean_pairwise_tau_rows(&all_constant),
            Err(MetricsError::NoDefinedPairs)
        ));
    }

    proptest! {
        #[test]
        fn macro_f1_invariant_under_pair_permutation(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
            seed in 0u64..32,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let labels = s(&["a", "b", "c", "d"]);
            let gold: Vec<String> = pairs.iter().map(|(g, _)| labels[*g].clone()).collect();
            let pred: Vec<String> = pairs.iter().map(|(_, p)| labels[*p].clone()).collect();
            let base = macro_f1(&gold, &pred, &labels).unwrap();
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let gold2: Vec<String> = shuffled.iter().map(|(g, _)| labels[*g].clone()).collect();
            let pred2: Vec<String> = shuffled.iter().map(|(_, p)| labels[*p].clone()).collect();
            let permuted = macro_f1(&gold2, &pred2, &labels).unwrap();
            prop_assert!((base - permuted).abs() < 1e-12);
        }

        #[test]
        fn macro_f1_invariant_under_relabeling_bijection(
            pairs in proptest::collection::vec((0usize..4, 0usize..4), 1..40),
        ) {
            let labels = s(&["a", "b", "c", "d"]);
            let renamed = s(&["w", "x", "y", "z"]);
            let gold: Vec<String> = pairs.iter().map(|(g, _)| labels[*g].clone()).collect();
            let pred: Vec<String> = pairs.iter().map(|(_, p)| labels[*p].clone()).collect();
            let gold2: Vec<String> = pairs.iter().map(|(g, _)| renamed[*g].clone()).collect();
            let pred2: Vec<String> = pairs.iter().map(|(_, p)| renamed[*p].clone()).collect();
            let a = macro_f1(&gold, &pred, &labels).unwrap();
            let b = macro_f1(&gold2, &pred2, &renamed).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn kendall_is_symmetric_and_monotone_invariant(
            x in proptest::collection::vec(-10.0f64..10.0, 2..12),
            scale in 0.1f64..4.0,
        ) {
            let y: Vec<f64> = x.iter().rev().cloned().collect();
            match (kendall_tau_b(&x, &y), kendall_tau_b(&y, &x)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(MetricsError::Degenerate), Err(MetricsError::Degenerate)) => {}
                other => prop_assert!(false, "asymmetric outcome {other:?}"),
            }
            // strictly increasing transform of either argument
            let x_scaled: Vec<f64> = x.iter().map(|v| v * scale + 1.0).collect();
            match (kendall_tau_b(&x, &y), kendall_tau_b(&x_scaled, &y)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
                (Err(MetricsError::Degenerate), Err(MetricsError::Degenerate)) => {}
                other => prop_assert!(false, "transform changed definedness {other:?}"),
            }
        }

        #[test]
        fn ranks_are_permutations_and_monotone_invariant(
            row in proptest::collection::vec(0.0f64..1.0, 7),
            scale in 0.1f64..4.0,
        ) {
            let records: Vec<EvaluationRecord> = PromptType::ALL
                .iter()
                .zip(&row)
                .map(|(pt, f1)| record("m1", "de", "en", *pt, *f1))
                .collect();
            let matrix = aggregate(
                &records,
                GroupField::DataLanguage,
                GroupField::PromptType,
                &[GroupField::Model],
            ).unwrap();
            let ranked = rank_rows(&matrix).unwrap();
            let mut sorted = ranked.ranks[0].clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (1..=7).collect::<Vec<_>>());

            let transformed: Vec<EvaluationRecord> = PromptType::ALL
                .iter()
                .zip(&row)
                .map(|(pt, f1)| record("m1", "de", "en", *pt, *f1 * scale))
                .collect();
            let matrix2 = aggregate(
                &transformed,
                GroupField::DataLanguage,
                GroupField::PromptType,
                &[GroupField::Model],
            ).unwrap();
            let ranked2 = rank_rows(&matrix2).unwrap();
            prop_assert_eq!(ranked.ranks, ranked2.ranks);
        }
    }
}

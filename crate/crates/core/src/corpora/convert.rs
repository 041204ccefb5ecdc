//! One-time converters from the upstream corpus distributions to the
//! normal-form `id,text,label` CSV.
//!
//! Upstream shapes handled:
//! - deenisear: tab-separated, columns `Sentence` and `Prior_Emotion`
//! - universal-joy: comma-separated, columns `text` and `emotion`
//!   (an optional `language` column is filtered when `--language` is given)
//! - emoevent: tab-separated, columns `tweet` and `emotion`
//!
//! Labels are lowercased; rows are otherwise passed through untouched
//! (EmoEvent's `other`/empty-text rows are dropped at load time, not here).
//! Generated ids are `<corpus>[-<language>]-<row>` with the 1-based data row
//! number of the raw file, so converted ids are stable.

use std::path::Path;

use super::{CorpusError, CorpusName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvertSummary {
    pub rows_read: usize,
    pub rows_written: usize,
}

struct Adapter {
    delimiter: u8,
    text_column: &'static str,
    label_column: &'static str,
}

fn adapter_for(name: CorpusName) -> Adapter {
    match name {
        CorpusName::DeEnIsear => Adapter {
            delimiter: b'\t',
            text_column: "Sentence",
            label_column: "Prior_Emotion",
        },
        CorpusName::UniversalJoy => Adapter {
            delimiter: b',',
            text_column: "text",
            label_column: "emotion",
        },
        CorpusName::EmoEvent => Adapter {
            delimiter: b'\t',
            text_column: "tweet",
            label_column: "emotion",
        },
    }
}

pub fn convert(
    name: CorpusName,
    language: Option<&str>,
    input: &Path,
    output: &Path,
) -> Result<ConvertSummary, CorpusError> {
    let adapter = adapter_for(name);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(adapter.delimiter)
        .flexible(true)
        .from_path(input)
        .map_err(|source| super::map_csv_error(input, source))?;
    let headers = reader
        .headers()
        .map_err(|source| super::map_csv_error(input, source))?
        .clone();
    let column = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                path: input.to_path_buf(),
                column: name.to_string(),
            })
    };
    let text_idx = column(adapter.text_column)?;
    let label_idx = column(adapter.label_column)?;
    let language_idx = headers.iter().position(|h| h == "language");

    let mut writer = csv::Writer::from_path(output).map_err(|source| CorpusError::Csv {
        path: output.to_path_buf(),
        source,
    })?;
    writer
        .write_record(["id", "text", "label"])
        .map_err(|source| CorpusError::Csv {
            path: output.to_path_buf(),
            source,
        })?;

    let mut rows_read = 0usize;
    let mut rows_written = 0usize;
    for record in reader.records() {
        let record = record.map_err(|source| super::map_csv_error(input, source))?;
        rows_read += 1;
        if let (Some(wanted), Some(idx)) = (language, language_idx) {
            if record.get(idx).map(str::trim) != Some(wanted) {
                continue;
            }
        }
        let text = record.get(text_idx).unwrap_or_default();
        let label = record
            .get(label_idx)
            .unwrap_or_default()
            .trim()
            .to_lowercase();
        let id = match language {
            Some(lang) => format!("{}-{}-{:06}", name.as_str(), lang, rows_read),
            None => format!("{}-{:06}", name.as_str(), rows_read),
        };
        writer
            .write_record([id.as_str(), text, label.as_str()])
            .map_err(|source| CorpusError::Csv {
                path: output.to_path_buf(),
                source,
            })?;
        rows_written += 1;
    }
    writer.flush().map_err(|source| CorpusError::Io {
        path: output.to_path_buf(),
        source,
    })?;
    if rows_written == 0 {
        return Err(CorpusError::Empty {
            path: input.to_path_buf(),
        });
    }
    Ok(ConvertSummary {
        rows_read,
        rows_written,
    })
}

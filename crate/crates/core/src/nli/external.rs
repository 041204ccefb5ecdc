//! Child-process scorer: how real NLI checkpoints plug into the grid without
//! bundling an ML runtime.
//!
//! Protocol, one request per line on the child's stdin:
//!
//! ```text
//! <premise>\t<hypothesis>\n
//! ```
//!
//! with backslash, tab, CR, and LF escaped as `\\`, `\t`, `\r`, `\n`. The
//! child answers one line of three whitespace-separated probabilities in its
//! own output order, which is remapped through the model's `label_order`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::{EntailmentScorer, LabelOrder, NliError, NliResult};

pub struct ExternalScorer {
    model_id: String,
    label_order: LabelOrder,
    io: Mutex<ChildIo>,
}

struct ChildIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalScorer {
    /// Spawns `command` once; the child is expected to keep serving requests
    /// until its stdin closes.
    pub fn spawn(
        model_id: &str,
        command: &[String],
        label_order: LabelOrder,
    ) -> Result<Self, NliError> {
        let backend_err = |message: String| NliError::Backend {
            model_id: model_id.to_string(),
            premise: String::new(),
            hypothesis: String::new(),
            message,
        };
        let (program, args) = command
            .split_first()
            .ok_or_else(|| backend_err("empty command".to_string()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| backend_err(format!("failed to spawn {program}: {e}")))?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| backend_err("child stdin unavailable".to_string()))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| backend_err("child stdout unavailable".to_string()))?;
        Ok(ExternalScorer {
            model_id: model_id.to_string(),
            label_order,
            io: Mutex::new(ChildIo {
                child,
                stdin,
                stdout: BufReader::new(stdout),
            }),
        })
    }
}

impl EntailmentScorer for ExternalScorer {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&self, premise: &str, hypothesis: &str) -> Result<NliResult, NliError> {
        super::reject_empty(premise, hypothesis)?;
        let backend_err = |message: String| NliError::Backend {
            model_id: self.model_id.clone(),
            premise: premise.to_string(),
            hypothesis: hypothesis.to_string(),
            message,
        };

        let mut io = self.io.lock().expect("external scorer lock poisoned");
        let request = format!("{}\t{}\n", escape(premise), escape(hypothesis));
        io.stdin
            .write_all(request.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| backend_err(format!("write failed: {e}")))?;

        let mut line = String::new();
        let n = io
            .stdout
            .read_line(&mut line)
            .map_err(|e| backend_err(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(backend_err("child closed stdout".to_string()));
        }
        let probs: Vec<f64> = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| backend_err(format!("bad response {line:?}: {e}")))?;
        if probs.len() != 3 {
            return Err(backend_err(format!(
                "expected 3 probabilities, got {} in {line:?}",
                probs.len()
            )));
        }
        NliResult::from_raw([probs[0], probs[1], probs[2]], &self.label_order)
    }
}

impl Drop for ExternalScorer {
    fn drop(&mut self) {
        if let Ok(mut io) = self.io.lock() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
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

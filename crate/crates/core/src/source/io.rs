//! Text model format:
//!
//! ```text
//! PAS-MODEL 1
//! alphabet 16
//! memory 1
//! <A probabilities for context 0>
//! ...
//! ```
//! Rows are in context-index order; values use shortest round-trip notation.

use super::{ConditionalModel, TableModel};
use crate::error::{Error, Result};
use std::path::Path;

pub const MODEL_MAGIC: &str = "PAS-MODEL 1";

pub fn write_model(model: &TableModel) -> String {
    let a = model.alphabet_size();
    let mut out = format!("{MODEL_MAGIC}\nalphabet {a}\nmemory {}\n", model.memory());
    for row in model.probs().chunks(a) {
        let line: Vec<String> = row.iter().map(|p| format!("{p:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_model(text: &str) -> Result<TableModel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(MODEL_MAGIC) {
        return Err(Error::Format(format!("missing '{MODEL_MAGIC}' header")));
    }
    let mut field = |name: &str| -> Result<usize> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("missing '{name}' line")))?;
        line.strip_prefix(name)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Format(format!("bad '{name}' line: {line}")))
    };
    let alphabet = field("alphabet")?;
    let memory = field("memory")?;
    let mut probs = Vec::new();
    for line in lines {
        for tok in line.split_whitespace() {
            probs.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad probability '{tok}'")))?,
            );
        }
    }
    TableModel::new(alphabet, memory, probs)
}

pub fn save_model(model: &TableModel, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TableModel> {
    read_model(&std::fs::read_to_string(path)?)
}

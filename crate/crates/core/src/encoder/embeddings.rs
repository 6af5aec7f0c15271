use std::path::Path;

use super::vocab::Vocabulary;
use crate::diffkit::ParamTensor;
use crate::error::{Error, Result};

/// Overwrites rows of `table` for tokens listed in a text file of
/// `token v1 … vd` lines. Returns the number of rows replaced.
pub fn load_pretrained_embeddings(path: &Path, vocab: &Vocabulary, table: &mut ParamTensor) -> Result<usize> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dim = table.shape()[1];
    let mut replaced = 0;
    for (i, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != dim {
            return Err(Error::Validation(format!(
                "embedding dimension {} at line {} does not match configured {dim}",
                values.len(),
                i + 1
            )));
        }
        if vocab.contains(token) {
            table.row_mut(vocab.id(token)).copy_from_slice(&values);
            replaced += 1;
        }
    }
    Ok(replaced)
}

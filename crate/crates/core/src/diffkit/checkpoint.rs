//! Parameter checkpoints: a JSON document with a format-version header and
//! one entry per named group holding its shape and row-major values.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::Parameterized;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKPOINT_FORMAT: &str = "mailintent-params";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointGroup {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub groups: Vec<CheckpointGroup>,
}

impl Checkpoint {
    pub fn capture<P: Parameterized + ?Sized>(model: &P) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            groups: model
                .params()
                .iter()
                .map(|p| CheckpointGroup {
                    name: p.name().to_string(),
                    shape: p.shape().to_vec(),
                    values: p.values.clone(),
                })
                .collect(),
        }
    }

    /// Copies values into `model`; names and shapes must match in order.
    pub fn restore<P: Parameterized + ?Sized>(&self, model: &mut P) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let mut params = model.params_mut();
        if params.len() != self.groups.len() {
            return Err(Error::shape(
                format!("{} groups", params.len()),
                format!("{} groups", self.groups.len()),
            ));
        }
        for (p, g) in params.iter_mut().zip(&self.groups) {
            if p.name() != g.name || p.shape() != g.shape.as_slice() || g.values.len() != p.len() {
                return Err(Error::shape(
                    format!("{} {:?}", p.name(), p.shape()),
                    format!("{} {:?}", g.name, g.shape),
                ));
            }
            p.values.copy_from_slice(&g.values);
        }
        Ok(())
    }
}

pub fn save_checkpoint<P: Parameterized + ?Sized>(path: &Path, model: &P) -> Result<()> {
    let text = serde_json::to_string(&Checkpoint::capture(model))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<P: Parameterized + ?Sized>(path: &Path, model: &mut P) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)?;
    ckpt.restore(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkit::Linear;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_and_restore_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = Linear::init("fc", 4, 3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        save_checkpoint(&path, &layer).unwrap();
        let mut other = Linear::zeros("fc", 4, 3);
        load_checkpoint(&path, &mut other).unwrap();
        assert_eq!(layer, other);

        let mut wrong = Linear::zeros("fc", 3, 3);
        assert!(load_checkpoint(&path, &mut wrong).is_err());
    }
}

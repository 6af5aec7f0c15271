use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::spec::{CorpusSource, ExperimentSpec};
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT: &str = "mailintent-manifest";

/// Git-style object hash of a blob (`blob <len>\0<bytes>`), using SHA-256.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// SHA-256 of the spec's canonical JSON encoding.
pub fn config_hash(spec: &ExperimentSpec) -> Result<String> {
    let json = serde_json::to_vec(spec)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub hash: String,
}

/// Everything needed to rerun an experiment and check its inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub spec: ExperimentSpec,
}

fn input_files(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    let CorpusSource::Files { dir, weak_labels } = &spec.corpus else {
        return Ok(Vec::new());
    };
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    files.extend(weak_labels.iter().cloned());
    Ok(files)
}

fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        hash: git_blob_hash(&bytes),
    })
}

impl Manifest {
    pub fn new(spec: &ExperimentSpec) -> Result<Self> {
        let inputs = input_files(spec)?
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Manifest {
            format: MANIFEST_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(spec)?,
            seeds: spec.seeds.clone(),
            inputs,
            spec: spec.clone(),
        })
    }

    /// Checks the config hash, the seeds and every input hash.
    pub fn verify(&self) -> Result<()> {
        if self.format != MANIFEST_FORMAT {
            return Err(Error::Validation(format!("not a manifest: {:?}", self.format)));
        }
        if config_hash(&self.spec)? != self.config_hash {
            return Err(Error::Validation("config hash does not match the recorded spec".into()));
        }
        if self.seeds != self.spec.seeds {
            return Err(Error::Validation("manifest seeds differ from the spec".into()));
        }
        for input in &self.inputs {
            let now = digest_file(&input.path)?;
            if now.hash != input.hash {
                return Err(Error::Validation(format!(
                    "{} changed since the manifest was written",
                    input.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_follows_the_git_object_layout() {
        let expected = hex::encode(Sha256::digest(b"blob 5\0hello"));
        assert_eq!(git_blob_hash(b"hello"), expected);
        assert_eq!(
            git_blob_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn roundtrip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("messages.jsonl"), "x\n").unwrap();
        let mut spec = ExperimentSpec::benchmark();
        spec.set("corpus_dir", dir.path().to_str().unwrap()).unwrap();
        let m = Manifest::new(&spec).unwrap();
        assert_eq!(m.inputs.len(), 1);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        back.verify().unwrap();
        std::fs::write(dir.path().join("messages.jsonl"), "y\n").unwrap();
        assert!(back.verify().is_err());
    }

    #[test]
    fn hash_depends_on_the_settings() {
        let a = ExperimentSpec::benchmark();
        let mut b = a.clone();
        b.seeds = vec![1];
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
    }
}

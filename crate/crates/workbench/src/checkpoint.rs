//! Checkpoint directories: a JSON manifest plus little-endian f32 blobs.
//!
//! ```text
//! <dir>/checkpoint.json   vocabulary hash, hyperparameters, tensor shapes, progress
//! <dir>/params.bin        current parameters
//! <dir>/best.bin          parameters with the best eval loss so far
//! <dir>/adam_m.bin        optimizer first moments
//! <dir>/adam_v.bin        optimizer second moments
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rrn_core::harness::{TrainConfig, TrainState};
use rrn_core::kb::Vocabulary;
use rrn_core::rrn::{AdamState, Hyperparams, Rrn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::{read_text, write_text};
use crate::{Result, WorkbenchError};

pub const MANIFEST_FILE: &str = "checkpoint.json";
const FORMAT: u32 = 1;
const BLOBS: [&str; 4] = ["params.bin", "best.bin", "adam_m.bin", "adam_v.bin"];

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// SHA-256 over the ordered class and relation names.
pub fn vocabulary_hash(vocab: &Vocabulary) -> String {
    let mut h = Sha256::new();
    for c in vocab.classes() {
        h.update(b"class\t");
        h.update(c.as_bytes());
        h.update(b"\n");
    }
    for r in vocab.relations() {
        h.update(b"relation\t");
        h.update(r.as_bytes());
        h.update(b"\n");
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: u32,
    pub vocabulary_hash: String,
    pub classes: Vec<String>,
    pub relations: Vec<String>,
    pub hyperparams: Hyperparams,
    pub train: TrainConfig,
    pub num_parameters: usize,
    pub tensors: Vec<TensorShape>,
    /// Completed epochs.
    pub epoch: u64,
    pub adam_step: u64,
    pub best_eval_score: Option<f64>,
    pub epochs_since_best: usize,
    pub blobs: Vec<BlobEntry>,
}

fn to_bytes(xs: &[f32]) -> Vec<u8> {
    xs.iter().flat_map(|x| x.to_le_bytes()).collect()
}

fn from_bytes(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn bad(dir: &Path, message: impl Into<String>) -> WorkbenchError {
    WorkbenchError::Checkpoint { path: dir.to_path_buf(), message: message.into() }
}

/// Writes the training state; the manifest goes last so a half-written
/// directory never passes [`load`].
pub fn save(dir: &Path, vocab: &Vocabulary, state: &TrainState, train: &TrainConfig) -> Result<CheckpointManifest> {
    let io = |path: PathBuf| move |source| WorkbenchError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let arrays = [&state.model.params, &state.best_params, &state.adam.m, &state.adam.v];
    let mut blobs = Vec::new();
    for (file, xs) in BLOBS.iter().zip(arrays) {
        let bytes = to_bytes(xs);
        let path = dir.join(file);
        fs::write(&path, &bytes).map_err(io(path.clone()))?;
        blobs.push(BlobEntry { file: file.to_string(), sha256: hex(&Sha256::digest(&bytes)) });
    }
    let manifest = CheckpointManifest {
        format: FORMAT,
        vocabulary_hash: vocabulary_hash(vocab),
        classes: vocab.classes().to_vec(),
        relations: vocab.relations().to_vec(),
        hyperparams: state.model.hp,
        train: *train,
        num_parameters: state.model.params.len(),
        tensors: state
            .model
            .layout()
            .tensors()
            .iter()
            .map(|t| TensorShape { name: t.name.clone(), rows: t.rows, cols: t.cols })
            .collect(),
        epoch: state.epoch,
        adam_step: state.adam.step,
        best_eval_score: state.best_eval_score,
        epochs_since_best: state.epochs_since_best,
        blobs,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| WorkbenchError::Json { path: path.clone(), source })?;
    write_text(&path, &(json + "\n"))?;
    Ok(manifest)
}

pub fn exists(dir: &Path) -> bool {
    dir.join(MANIFEST_FILE).is_file()
}

pub fn read_manifest(dir: &Path) -> Result<CheckpointManifest> {
    let path = dir.join(MANIFEST_FILE);
    serde_json::from_str(&read_text(&path)?).map_err(|source| WorkbenchError::Json { path, source })
}

/// Loads a checkpoint for `vocab`, refusing it if the vocabulary hash differs.
pub fn load(dir: &Path, vocab: &Vocabulary) -> Result<(CheckpointManifest, TrainState)> {
    let manifest = read_manifest(dir)?;
    if manifest.format != FORMAT {
        return Err(bad(dir, format!("unsupported format version {}", manifest.format)));
    }
    let found = vocabulary_hash(vocab);
    if found != manifest.vocabulary_hash {
        return Err(WorkbenchError::VocabularyMismatch { expected: manifest.vocabulary_hash.clone(), found });
    }
    let mut arrays = Vec::new();
    for (want, entry) in BLOBS.iter().zip(&manifest.blobs) {
        if entry.file != *want {
            return Err(bad(dir, format!("expected blob {want}, found {}", entry.file)));
        }
        let path = dir.join(want);
        let bytes = fs::read(&path).map_err(|source| WorkbenchError::Io { path: path.clone(), source })?;
        if hex(&Sha256::digest(&bytes)) != entry.sha256 {
            return Err(bad(dir, format!("{want} does not match its recorded digest")));
        }
        if bytes.len() != manifest.num_parameters * 4 {
            return Err(bad(dir, format!("{want} holds {} bytes, expected {}", bytes.len(), manifest.num_parameters * 4)));
        }
        arrays.push(from_bytes(&bytes));
    }
    if arrays.len() != BLOBS.len() {
        return Err(bad(dir, "manifest lists too few blobs"));
    }
    let v = arrays.pop().expect("four blobs");
    let m = arrays.pop().expect("four blobs");
    let best_params = arrays.pop().expect("four blobs");
    let params = arrays.pop().expect("four blobs");
    let model = Rrn::from_params(vocab, manifest.hyperparams, params)?;
    let shapes_match = model.layout().tensors().len() == manifest.tensors.len()
        && model
            .layout()
            .tensors()
            .iter()
            .zip(&manifest.tensors)
            .all(|(a, b)| a.name == b.name && a.rows == b.rows && a.cols == b.cols);
    if !shapes_match {
        return Err(bad(dir, "tensor shapes do not match the model layout"));
    }
    let state = TrainState {
        model,
        adam: AdamState { m, v, step: manifest.adam_step },
        epoch: manifest.epoch,
        best_eval_score: manifest.best_eval_score,
        best_params,
        epochs_since_best: manifest.epochs_since_best,
    };
    Ok((manifest, state))
}

/// Shorthand for the best model of a checkpoint.
pub fn load_best(dir: &Path, vocab: &Vocabulary) -> Result<Rrn<f32>> {
    Ok(load(dir, vocab)?.1.best_model())
}

//! Checkpoints: a JSON manifest plus a flat little-endian f32 blob.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::params::{Architecture, ModelParams};
use crate::error::{Error, Result};

pub const FORMAT: &str = "maskfocus-checkpoint-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub architecture: Architecture,
    pub n_colors: usize,
    pub n_tokens: usize,
    pub prompt_len: usize,
    pub seed: u64,
    pub step: u64,
    /// Blob file name, relative to the manifest.
    pub blob: String,
    pub n_params: usize,
    pub tensors: Vec<TensorEntry>,
}

/// Paths of the manifest and blob for a checkpoint stem such as `out/theta`.
pub fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn manifest_for(params: &ModelParams, seed: u64, step: u64, blob: String) -> Manifest {
    let arch = params.arch().clone();
    Manifest {
        format: FORMAT.into(),
        n_colors: arch.n_colors,
        n_tokens: arch.n_tokens(),
        prompt_len: arch.prompt_len,
        architecture: arch,
        seed,
        step,
        blob,
        n_params: params.len(),
        tensors: params.specs().iter().map(|s| TensorEntry { name: s.name.clone(), shape: [s.rows, s.cols] }).collect(),
    }
}

/// Write `<stem>.json` and `<stem>.bin`; returns the manifest path.
pub fn save_checkpoint(params: &ModelParams, stem: &Path, seed: u64, step: u64) -> Result<PathBuf> {
    let (json, bin) = checkpoint_paths(stem);
    if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let blob_name = bin.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
    let manifest = manifest_for(params, seed, step, blob_name);
    let bytes: Vec<u8> = params.as_slice().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(json)
}

/// Load a checkpoint from its manifest path (or its stem).
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Manifest)> {
    let json = if path.extension().is_some_and(|e| e == "json") { path.to_path_buf() } else { path.with_extension("json") };
    let text = fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", json.display())))?;
    if manifest.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", manifest.format)));
    }
    let arch = &manifest.architecture;
    if manifest.n_colors != arch.n_colors || manifest.n_tokens != arch.n_tokens() || manifest.prompt_len != arch.prompt_len {
        return Err(Error::Checkpoint("manifest sizes disagree with architecture".into()));
    }
    let blob = json.parent().unwrap_or(Path::new(".")).join(&manifest.blob);
    let bytes = fs::read(&blob).map_err(|e| Error::io(&blob, e))?;
    if bytes.len() != manifest.n_params * 4 {
        return Err(Error::Checkpoint(format!("blob has {} bytes, expected {}", bytes.len(), manifest.n_params * 4)));
    }
    let data: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let params = ModelParams::from_flat(arch.clone(), data).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let expected: Vec<TensorEntry> =
        params.specs().iter().map(|s| TensorEntry { name: s.name.clone(), shape: [s.rows, s.cols] }).collect();
    if expected != manifest.tensors {
        return Err(Error::Checkpoint("tensor list does not match the architecture layout".into()));
    }
    if !params.is_finite() {
        return Err(Error::Checkpoint("non-finite parameter values".into()));
    }
    Ok((params, manifest))
}

/// Round every parameter through f32, matching what a save/load cycle yields.
pub fn quantize_f32(params: &mut ModelParams) {
    params.as_mut_slice().iter_mut().for_each(|v| *v = *v as f32 as f64);
}

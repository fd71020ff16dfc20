use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use autodiff::Tensor;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::ParamSet;

pub const CKPT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub learnable: bool,
}

/// Manifest half of a checkpoint directory; tensor data lives in raw
/// little-endian f64 files (`params.bin`, `adam_m.bin`, `adam_v.bin`)
/// concatenated in manifest order.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub stage: String,
    pub config: TrainConfig,
    pub epochs_done: usize,
    pub rng_seed: u64,
    pub adam_step: u64,
    pub params: Vec<ParamEntry>,
}

fn write_f64(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

fn read_f64(path: &Path, expect_len: usize) -> Result<Vec<f64>> {
    let mut f = fs::File::open(path)
        .map_err(|_| Error::Checkpoint(format!("missing file {}", path.display())))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != expect_len * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: expected {} f64 values, found {} bytes",
            path.display(),
            expect_len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn save(
    dir: &Path,
    stage: &str,
    params: &ParamSet,
    adam: Option<&Adam>,
    config: &TrainConfig,
    epochs_done: usize,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let entries: Vec<ParamEntry> = params
        .iter()
        .map(|p| ParamEntry {
            name: p.name().to_string(),
            shape: p.shape(),
            learnable: p.learnable(),
        })
        .collect();
    let mut flat = Vec::new();
    for p in params.iter() {
        flat.extend_from_slice(p.value().data());
    }
    write_f64(&dir.join("params.bin"), &flat)?;

    let (adam_step, m_flat, v_flat) = match adam {
        Some(a) => {
            let mut m_flat = Vec::new();
            let mut v_flat = Vec::new();
            for p in params.learnable() {
                let n = p.numel();
                match a.m.get(p.name()) {
                    Some(m) => m_flat.extend_from_slice(m),
                    None => m_flat.extend(std::iter::repeat(0.0).take(n)),
                }
                match a.v.get(p.name()) {
                    Some(v) => v_flat.extend_from_slice(v),
                    None => v_flat.extend(std::iter::repeat(0.0).take(n)),
                }
            }
            (a.step_count, m_flat, v_flat)
        }
        None => (0, Vec::new(), Vec::new()),
    };
    write_f64(&dir.join("adam_m.bin"), &m_flat)?;
    write_f64(&dir.join("adam_v.bin"), &v_flat)?;

    let meta = CheckpointMeta {
        format_version: CKPT_VERSION,
        stage: stage.to_string(),
        config: config.clone(),
        epochs_done,
        rng_seed: config.seed,
        adam_step,
        params: entries,
    };
    fs::write(
        dir.join("checkpoint.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let path = dir.join("checkpoint.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::Checkpoint(format!("missing file {}", path.display())))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format_version != CKPT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unknown checkpoint version {}",
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Load a checkpoint into an already-constructed parameter registry whose
/// census must match exactly, plus (optionally) optimizer moments.
pub fn load(
    dir: &Path,
    expect_stage: &str,
    params: &ParamSet,
    adam: Option<&mut Adam>,
) -> Result<CheckpointMeta> {
    let meta = read_meta(dir)?;
    if meta.stage != expect_stage {
        return Err(Error::Checkpoint(format!(
            "stage tag mismatch: checkpoint is '{}', expected '{}'",
            meta.stage, expect_stage
        )));
    }
    if meta.params.len() != params.len() {
        return Err(Error::Checkpoint(format!(
            "parameter census mismatch: checkpoint has {}, model has {}",
            meta.params.len(),
            params.len()
        )));
    }
    let total: usize = meta.params.iter().map(|e| e.shape.iter().product::<usize>()).sum();
    let flat = read_f64(&dir.join("params.bin"), total)?;
    let mut offset = 0;
    for (entry, p) in meta.params.iter().zip(params.iter()) {
        if entry.name != p.name() || entry.shape != p.shape() {
            return Err(Error::Checkpoint(format!(
                "parameter mismatch at {}: checkpoint has {} {:?}",
                p.name(),
                entry.name,
                entry.shape
            )));
        }
        let n: usize = entry.shape.iter().product();
        let data = flat[offset..offset + n].to_vec();
        offset += n;
        let t = if entry.learnable {
            Tensor::param(data, &entry.shape)
        } else {
            Tensor::new(data, &entry.shape)
        }
        .map_err(Error::Autodiff)?;
        p.set(t);
    }

    if let Some(adam) = adam {
        let learn_total: usize = params.learnable().map(|p| p.numel()).sum();
        let m_flat = read_f64(&dir.join("adam_m.bin"), learn_total)?;
        let v_flat = read_f64(&dir.join("adam_v.bin"), learn_total)?;
        let mut offset = 0;
        for p in params.learnable() {
            let n = p.numel();
            adam.m
                .insert(p.name().to_string(), m_flat[offset..offset + n].to_vec());
            adam.v
                .insert(p.name().to_string(), v_flat[offset..offset + n].to_vec());
            offset += n;
        }
        adam.step_count = meta.adam_step;
    }
    Ok(meta)
}

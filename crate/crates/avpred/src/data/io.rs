use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::synth::{SceneSpec, Sequence, AUDIO_F, AUDIO_T};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct SampleEntry {
    pub dir: String,
    pub spec: SceneSpec,
    pub frames_shape: Vec<usize>,
    pub audio_shape: Vec<usize>,
    pub flows_shape: Vec<usize>,
}

/// On-disk layout: `manifest.json` plus `sample_<idx>/{frames,audio,flow}.bin`
/// holding little-endian f32 in row-major order; the manifest is authoritative
/// for shapes.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub split: String,
    pub count: usize,
    pub dtype: String,
    pub samples: Vec<SampleEntry>,
}

fn write_f32(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

fn read_f32(path: &Path, expect_len: usize) -> Result<Vec<f64>> {
    let mut f = fs::File::open(path)
        .map_err(|_| Error::Dataset(format!("missing file {}", path.display())))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != expect_len * 4 {
        return Err(Error::Dataset(format!(
            "{}: expected {} bytes for {} f32 values, found {}",
            path.display(),
            expect_len * 4,
            expect_len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Write samples then commit the manifest last.
pub fn write_dataset(samples: &[Sequence], dir: &Path, split: &str) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let name = format!("sample_{i}");
        let sdir = dir.join(&name);
        fs::create_dir_all(&sdir)?;
        write_f32(&sdir.join("frames.bin"), &s.frames)?;
        write_f32(&sdir.join("audio.bin"), &s.audio)?;
        write_f32(&sdir.join("flow.bin"), &s.flows)?;
        let sp = &s.spec;
        entries.push(SampleEntry {
            dir: name,
            spec: sp.clone(),
            frames_shape: vec![sp.t_total, sp.channels, sp.height, sp.width],
            audio_shape: vec![sp.t_total, AUDIO_F, AUDIO_T],
            flows_shape: vec![sp.t_total, 2, sp.height, sp.width],
        });
    }
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        split: split.to_string(),
        count: samples.len(),
        dtype: "f32le".to_string(),
        samples: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .map_err(|_| Error::Dataset(format!("missing file {}", path.display())))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Dataset(format!(
            "unknown format version {} (expected {})",
            manifest.format_version, FORMAT_VERSION
        )));
    }
    if manifest.samples.len() != manifest.count {
        return Err(Error::Dataset(format!(
            "manifest count {} does not match {} sample entries",
            manifest.count,
            manifest.samples.len()
        )));
    }
    Ok(manifest)
}

fn read_entry(dir: &Path, e: &SampleEntry) -> Result<Sequence> {
    let sdir = dir.join(&e.dir);
    let frames = read_f32(&sdir.join("frames.bin"), e.frames_shape.iter().product())?;
    let audio = read_f32(&sdir.join("audio.bin"), e.audio_shape.iter().product())?;
    let flows = read_f32(&sdir.join("flow.bin"), e.flows_shape.iter().product())?;
    Ok(Sequence {
        spec: e.spec.clone(),
        frames,
        audio,
        flows,
    })
}

/// Load every sample listed in the manifest, validating byte lengths.
pub fn read_dataset(dir: &Path) -> Result<Vec<Sequence>> {
    let manifest = read_manifest(dir)?;
    manifest
        .samples
        .iter()
        .map(|e| read_entry(dir, e))
        .collect()
}

/// Load a single sample by index.
pub fn read_sample(dir: &Path, index: usize) -> Result<Sequence> {
    let manifest = read_manifest(dir)?;
    let entry = manifest.samples.get(index).ok_or_else(|| {
        Error::Dataset(format!(
            "sample {index} out of range ({} samples)",
            manifest.count
        ))
    })?;
    read_entry(dir, entry)
}


//! On-disk formats: dataset files, feature tensors, weight bundles and CSV
//! exports.
//!
//! All binary payloads are little-endian. Dataset matrices are stored as f32
//! pairs to halve file size; weights stay f64 because training resumes from
//! them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scene::{DatasetManifest, LabeledSample};
use crate::waveform::{PulseMatrix, RadarConfig};

/// Magic bytes opening every dataset file.
pub const DATASET_MAGIC: &[u8; 8] = b"AWSPDS01";

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Write samples as magic + u32 count/Q/L + per sample (u8 label, Q·L f32
/// pairs row-major), with the manifest as a sibling `<path>.json`.
pub fn write_dataset(
    path: &Path,
    samples: &[LabeledSample],
    manifest: &DatasetManifest,
) -> Result<()> {
    if samples.is_empty() {
        return Err(CoreError::parameter("refusing to write an empty dataset"));
    }
    let q = samples[0].matrix.num_pulses();
    let l = samples[0].matrix.fast_len();
    if samples.iter().any(|s| s.matrix.num_pulses() != q || s.matrix.fast_len() != l) {
        return Err(CoreError::dimension("all samples must share one matrix shape"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATASET_MAGIC)?;
    write_u32(&mut w, samples.len() as u32)?;
    write_u32(&mut w, q as u32)?;
    write_u32(&mut w, l as u32)?;
    for s in samples {
        w.write_all(&[s.label])?;
        for z in s.matrix.data.iter() {
            w.write_all(&(z.re as f32).to_le_bytes())?;
            w.write_all(&(z.im as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(manifest_path(path), json)?;
    Ok(())
}

/// Sibling manifest path: `<path>.json`.
pub fn manifest_path(dataset: &Path) -> std::path::PathBuf {
    let mut os = dataset.as_os_str().to_owned();
    os.push(".json");
    std::path::PathBuf::from(os)
}

/// Read a dataset file back; the matrices carry `config` as their nominal
/// radar configuration (per-sample draws live in the manifest).
pub fn read_dataset(path: &Path, config: &RadarConfig) -> Result<Vec<LabeledSample>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(CoreError::config("not a dataset file: bad magic"));
    }
    let count = read_u32(&mut r)? as usize;
    let q = read_u32(&mut r)? as usize;
    let l = read_u32(&mut r)? as usize;
    if q == 0 || l == 0 || count == 0 {
        return Err(CoreError::config("dataset header has a zero dimension"));
    }
    let mut samples = Vec::with_capacity(count);
    let mut buf = vec![0u8; q * l * 8];
    for _ in 0..count {
        let mut label = [0u8; 1];
        r.read_exact(&mut label)?;
        r.read_exact(&mut buf)?;
        let mut data = Array2::zeros((q, l));
        for (i, z) in data.iter_mut().enumerate() {
            let re = f32::from_le_bytes(buf[8 * i..8 * i + 4].try_into().unwrap());
            let im = f32::from_le_bytes(buf[8 * i + 4..8 * i + 8].try_into().unwrap());
            *z = Complex64::new(re as f64, im as f64);
        }
        samples.push(LabeledSample {
            matrix: PulseMatrix { data, config: config.clone() },
            label: label[0],
        });
    }
    Ok(samples)
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let json = std::fs::read_to_string(manifest_path(path))?;
    Ok(serde_json::from_str(&json)?)
}

/// Channel-order manifest written next to a feature tensor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub channels: Vec<String>,
    pub height: usize,
    pub width: usize,
}

/// Write a (C, H, W) feature tensor: u32 C, H, W then f32 values
/// channel-major, with the channel-order manifest as sibling JSON.
pub fn write_features(path: &Path, tensor: &Array3<f64>, channels: &[String]) -> Result<()> {
    let (c, h, w) = tensor.dim();
    if channels.len() != c {
        return Err(CoreError::dimension("channel manifest length must equal C"));
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_u32(&mut out, c as u32)?;
    write_u32(&mut out, h as u32)?;
    write_u32(&mut out, w as u32)?;
    for v in tensor.iter() {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()?;
    let manifest = FeatureManifest { channels: channels.to_vec(), height: h, width: w };
    std::fs::write(manifest_path(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Array3<f64>> {
    let mut r = BufReader::new(File::open(path)?);
    let c = read_u32(&mut r)? as usize;
    let h = read_u32(&mut r)? as usize;
    let w = read_u32(&mut r)? as usize;
    let mut buf = vec![0u8; c * h * w * 4];
    r.read_exact(&mut buf)?;
    let values: Vec<f64> = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Array3::from_shape_vec((c, h, w), values)
        .map_err(|e| CoreError::dimension(format!("feature tensor shape: {e}")))
}

/// One tensor entry in a weights bundle manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub byte_offset: usize,
    pub dtype: String,
}

/// Weights bundle manifest: names, shapes and offsets into the blob.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub tensors: Vec<TensorEntry>,
}

/// Write named f64 tensors as a JSON manifest at `path` plus an adjacent
/// `<path>.bin` little-endian blob.
pub fn write_weights(path: &Path, tensors: &[(String, Vec<usize>, Vec<f64>)]) -> Result<()> {
    let mut manifest = WeightsManifest { tensors: Vec::with_capacity(tensors.len()) };
    let mut blob: Vec<u8> = Vec::new();
    for (name, shape, values) in tensors {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(CoreError::dimension(format!(
                "tensor {name}: shape {shape:?} holds {expected} values, got {}",
                values.len()
            )));
        }
        manifest.tensors.push(TensorEntry {
            name: name.clone(),
            shape: shape.clone(),
            byte_offset: blob.len(),
            dtype: "f64".to_string(),
        });
        for v in values {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    std::fs::write(blob_path(path), blob)?;
    Ok(())
}

pub fn blob_path(manifest: &Path) -> std::path::PathBuf {
    let mut os = manifest.as_os_str().to_owned();
    os.push(".bin");
    std::path::PathBuf::from(os)
}

/// Read a weights bundle back as (name, shape, values) triples in manifest
/// order.
pub fn read_weights(path: &Path) -> Result<Vec<(String, Vec<usize>, Vec<f64>)>> {
    let manifest: WeightsManifest = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let blob = std::fs::read(blob_path(path))?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for t in &manifest.tensors {
        if t.dtype != "f64" {
            return Err(CoreError::config(format!("tensor {}: unsupported dtype {}", t.name, t.dtype)));
        }
        let count: usize = t.shape.iter().product();
        let end = t.byte_offset + count * 8;
        if end > blob.len() {
            return Err(CoreError::config(format!("tensor {} overruns the blob", t.name)));
        }
        let values: Vec<f64> = blob[t.byte_offset..end]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        out.push((t.name.clone(), t.shape.clone(), values));
    }
    Ok(out)
}

/// Loss curve as CSV rows `epoch,mean_loss`.
pub fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,mean_loss")?;
    for (i, l) in losses.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, l)?;
    }
    w.flush()?;
    Ok(())
}

/// Write an integer matrix (confusion counts) as CSV.
pub fn write_confusion_csv(path: &Path, confusion: &Array2<usize>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in confusion.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Detection/probability profiles as CSV rows `t,prob,accumulated`.
pub fn write_profile_csv(path: &Path, prob: &[f64], accumulated: &[f64]) -> Result<()> {
    if prob.len() != accumulated.len() {
        return Err(CoreError::dimension("profile columns must share one length"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,prob,accumulated")?;
    for (t, (p, a)) in prob.iter().zip(accumulated).enumerate() {
        writeln!(w, "{t},{p},{a}")?;
    }
    w.flush()?;
    Ok(())
}

//! On-disk formats.
//!
//! Trial file (`.semg`), little-endian:
//! `"SEMG"`, version `u32 = 1`, `c`, `T`, label, subject, repetition (all
//! `u32`), then `c·T` `f64` samples in row-major (channel-major) order.
//!
//! Point file (`.semp`), little-endian:
//! `"SEMP"`, version `u32 = 1`, `c`, label, subject, repetition (all `u32`),
//! then the `c(c+1)/2` lower-triangular `f64` entries packed row by row.
//!
//! A JSON [`Manifest`] lists trial and/or point files (paths relative to the
//! manifest) with dataset-level metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledManifoldSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::manifold::{packed_len, CholeskyPoint};
use crate::signal::{ChannelTrial, TrialPoint};

pub const TRIAL_MAGIC: [u8; 4] = *b"SEMG";
pub const POINT_MAGIC: [u8; 4] = *b"SEMP";
pub const FORMAT_VERSION: u32 = 1;

const TRIAL_HEADER_LEN: usize = 4 + 6 * 4;
const POINT_HEADER_LEN: usize = 4 + 5 * 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub sampling_rate_hz: f64,
    #[serde(default)]
    pub gesture_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<String>,
}

impl Manifest {
    pub fn new(name: impl Into<String>, sampling_rate_hz: f64) -> Self {
        Self {
            name: name.into(),
            sampling_rate_hz,
            gesture_names: Vec::new(),
            trials: Vec::new(),
            points: Vec::new(),
        }
    }

    /// Same dataset metadata, no file lists.
    pub fn metadata_only(&self) -> Self {
        Self {
            trials: Vec::new(),
            points: Vec::new(),
            ..self.clone()
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Resolves a manifest entry relative to the manifest's directory.
pub fn resolve(manifest_path: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format!("truncated file ({} bytes)", self.bytes.len())),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("size overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn header(&mut self, magic: [u8; 4]) -> std::result::Result<(), String> {
        if self.take(4)? != magic {
            return Err(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(&magic)
            ));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format!("unsupported version {version}"));
        }
        Ok(())
    }

    fn finish(&self) -> std::result::Result<(), String> {
        if self.pos != self.bytes.len() {
            return Err(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            ));
        }
        Ok(())
    }
}

pub fn encode_trial(trial: &ChannelTrial) -> Vec<u8> {
    let (c, t) = (trial.channels(), trial.samples());
    let mut out = Vec::with_capacity(TRIAL_HEADER_LEN + 8 * c * t);
    out.extend_from_slice(&TRIAL_MAGIC);
    for v in [
        FORMAT_VERSION,
        c as u32,
        t as u32,
        trial.label,
        trial.subject,
        trial.repetition,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..c {
        for j in 0..t {
            out.extend_from_slice(&trial.data()[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_trial(bytes: &[u8]) -> std::result::Result<ChannelTrial, String> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(TRIAL_MAGIC)?;
    let c = r.u32()? as usize;
    let t = r.u32()? as usize;
    let (label, subject, repetition) = (r.u32()?, r.u32()?, r.u32()?);
    let values = r.f64s(c.checked_mul(t).ok_or("size overflow")?)?;
    r.finish()?;
    ChannelTrial::new(Matrix::from_row_slice(c, t, &values), label, subject, repetition)
        .map_err(|e| e.to_string())
}

pub fn encode_point(point: &TrialPoint) -> Vec<u8> {
    let c = point.point.dim();
    let mut out = Vec::with_capacity(POINT_HEADER_LEN + 8 * packed_len(c));
    out.extend_from_slice(&POINT_MAGIC);
    for v in [
        FORMAT_VERSION,
        c as u32,
        point.label,
        point.subject,
        point.repetition,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in point.point.packed() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_point(bytes: &[u8]) -> std::result::Result<TrialPoint, String> {
    let mut r = Reader { bytes, pos: 0 };
    r.header(POINT_MAGIC)?;
    let c = r.u32()? as usize;
    let (label, subject, repetition) = (r.u32()?, r.u32()?, r.u32()?);
    let values = r.f64s(packed_len(c))?;
    r.finish()?;
    let point = CholeskyPoint::from_packed(c, &values).map_err(|e| e.to_string())?;
    Ok(TrialPoint {
        point,
        label,
        subject,
        repetition,
    })
}

pub fn write_trial(path: &Path, trial: &ChannelTrial) -> Result<()> {
    fs::write(path, encode_trial(trial)).map_err(|e| Error::io(path, e))
}

pub fn read_trial(path: &Path) -> Result<ChannelTrial> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_trial(&bytes).map_err(|m| Error::format(path, m))
}

pub fn write_point(path: &Path, point: &TrialPoint) -> Result<()> {
    fs::write(path, encode_point(point)).map_err(|e| Error::io(path, e))
}

pub fn read_point(path: &Path) -> Result<TrialPoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_point(&bytes).map_err(|m| Error::format(path, m))
}

/// Reads a CSV trial fixture: one row per channel, one column per sample,
/// no header.
pub fn read_csv_trial(path: &Path, label: u32, subject: u32, repetition: u32) -> Result<ChannelTrial> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(path, format!("row {}: {e}", line + 1)))?;
        rows.push(row);
    }
    let t = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != t) {
        return Err(Error::format(path, format!("row {} has a different length", bad + 1)));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    ChannelTrial::new(Matrix::from_row_slice(rows.len(), t, &flat), label, subject, repetition)
        .map_err(|e| e.with_context(path.display().to_string()))
}

/// Name of the manifest inside a point-store directory.
pub const STORE_MANIFEST: &str = "manifest.json";

/// Writes `set` as one point file per item plus a manifest; returns the
/// manifest path. Re-running over the same directory rewrites the same files.
pub fn save_point_store(dir: &Path, meta: &Manifest, set: &LabeledManifoldSet) -> Result<PathBuf> {
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir).map_err(|e| Error::io(&points_dir, e))?;
    let mut manifest = meta.metadata_only();
    for i in 0..set.len() {
        let rel = format!("points/{i:06}.semp");
        let item = TrialPoint {
            point: set.points()[i].clone(),
            label: set.labels()[i],
            subject: set.subjects()[i],
            repetition: set.repetitions()[i],
        };
        write_point(&dir.join(&rel), &item)?;
        manifest.points.push(rel);
    }
    let path = dir.join(STORE_MANIFEST);
    write_manifest(&path, &manifest)?;
    Ok(path)
}

/// Writes `trials/{i:06}.semg` plus a trial manifest in `dir`; returns the manifest path.
pub fn save_trial_store(meta: &Manifest, trials: &[ChannelTrial], dir: &Path) -> Result<PathBuf> {
    let trial_dir = dir.join("trials");
    fs::create_dir_all(&trial_dir).map_err(|e| Error::io(&trial_dir, e))?;
    let mut manifest = meta.metadata_only();
    for (i, trial) in trials.iter().enumerate() {
        let rel = format!("trials/{i:06}.semg");
        write_trial(&dir.join(&rel), trial)?;
        manifest.trials.push(rel);
    }
    let path = dir.join(STORE_MANIFEST);
    write_manifest(&path, &manifest)?;
    Ok(path)
}

/// Accepts either a store directory or the path of its manifest.
pub fn load_point_store(path: &Path) -> Result<(Manifest, LabeledManifoldSet)> {
    let manifest_path = if path.is_dir() {
        path.join(STORE_MANIFEST)
    } else {
        path.to_path_buf()
    };
    let manifest = read_manifest(&manifest_path)?;
    if manifest.points.is_empty() {
        return Err(Error::format(&manifest_path, "manifest lists no point files"));
    }
    let mut set = LabeledManifoldSet::default();
    for entry in &manifest.points {
        let p = resolve(&manifest_path, entry);
        let item = read_point(&p)?;
        set.push(item.point, item.label, item.subject, item.repetition)
            .map_err(|e| e.with_context(p.display().to_string()))?;
    }
    Ok((manifest, set))
}

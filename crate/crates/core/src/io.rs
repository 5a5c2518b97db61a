//! Flat binary persistence for datasets and weight vectors.
//!
//! Layout (little endian): 32-byte header `b"TMIX0001"`, `d: u64`, `n: u64`,
//! `flags: u64`; then `n * d` f64 values row-major; then, when
//! [`FLAG_LABELLED`] is set, `n` label bytes and `n` group bytes (both i8,
//! +1/-1). Metadata lives in a JSON sidecar next to the binary file.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Serialize};

use crate::error::{Result, TmixError};
use crate::generative::{Dataset, DatasetSidecar};
use crate::params::Group;

pub const MAGIC: &[u8; 8] = b"TMIX0001";
pub const HEADER_LEN: usize = 32;
pub const FLAG_LABELLED: u64 = 1;

/// Raw contents of a TMIX file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub d: usize,
    pub n: usize,
    pub flags: u64,
    pub values: Vec<f64>,
    pub labels: Vec<i8>,
    pub groups: Vec<i8>,
}

pub fn encode(raw: &RawMatrix) -> Result<Vec<u8>> {
    if raw.values.len() != raw.n * raw.d {
        return Err(TmixError::DimensionMismatch {
            expected: raw.n * raw.d,
            got: raw.values.len(),
        });
    }
    let labelled = raw.flags & FLAG_LABELLED != 0;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * raw.values.len() + 2 * raw.n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(raw.d as u64).to_le_bytes());
    out.extend_from_slice(&(raw.n as u64).to_le_bytes());
    out.extend_from_slice(&raw.flags.to_le_bytes());
    for v in &raw.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if labelled {
        if raw.labels.len() != raw.n || raw.groups.len() != raw.n {
            return Err(TmixError::Format("label/group arrays must have n entries".into()));
        }
        out.extend(raw.labels.iter().map(|&l| l as u8));
        out.extend(raw.groups.iter().map(|&g| g as u8));
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<RawMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(TmixError::Format("missing TMIX0001 header".into()));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let d = word(8) as usize;
    let n = word(16) as usize;
    let flags = word(24);
    let labelled = flags & FLAG_LABELLED != 0;
    let body = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| TmixError::Format("size overflow".into()))?;
    let expected = HEADER_LEN + body + if labelled { 2 * n } else { 0 };
    if bytes.len() != expected {
        return Err(TmixError::Format(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..HEADER_LEN + body]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let (labels, groups) = if labelled {
        let tail = &bytes[HEADER_LEN + body..];
        (
            tail[..n].iter().map(|&b| b as i8).collect(),
            tail[n..].iter().map(|&b| b as i8).collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(RawMatrix {
        d,
        n,
        flags,
        values,
        labels,
        groups,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_with_sidecar<T: Serialize>(path: &Path, raw: &RawMatrix, meta: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(raw)?)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_with_sidecar<T: DeserializeOwned>(path: &Path) -> Result<(RawMatrix, T)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let raw = decode(&bytes)?;
    let meta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    Ok((raw, meta))
}

pub fn save_dataset(path: &Path, data: &Dataset, teacher_seed: Option<u64>) -> Result<()> {
    let raw = RawMatrix {
        d: data.d,
        n: data.n(),
        flags: FLAG_LABELLED,
        values: data.inputs.clone(),
        labels: data.labels.clone(),
        groups: data.groups.iter().map(|g| g.as_i8()).collect(),
    };
    let meta = DatasetSidecar {
        generative: data.meta,
        seed: data.seed,
        teacher_seed,
    };
    write_with_sidecar(path, &raw, &meta)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (raw, meta): (RawMatrix, DatasetSidecar) = read_with_sidecar(path)?;
    if raw.flags & FLAG_LABELLED == 0 {
        return Err(TmixError::Format("file has no label/group arrays".into()));
    }
    Ok(Dataset {
        d: raw.d,
        inputs: raw.values,
        labels: raw.labels,
        groups: raw.groups.into_iter().map(Group::from_sign).collect(),
        meta: meta.generative,
        seed: meta.seed,
    })
}

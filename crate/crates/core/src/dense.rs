//! Dense weight files: little-endian f32 values with a JSON sidecar
//! `<file>.json` holding `{"dims": [...]}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SztError};
use crate::tensor::numel;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseMeta {
    pub dims: Vec<usize>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_dense(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let meta: DenseMeta = serde_json::from_slice(&fs::read(sidecar_path(path))?)
        .map_err(|e| SztError::Format(format!("bad sidecar for {}: {e}", path.display())))?;
    let bytes = fs::read(path)?;
    let n = numel(&meta.dims)?;
    if bytes.len() != 4 * n {
        return Err(SztError::Format(format!("{} holds {} bytes, dims {:?} need {}", path.display(), bytes.len(), meta.dims, 4 * n)));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Ok((meta.dims, values))
}

/// Values are narrowed to f32.
pub fn write_dense(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    let n = numel(dims)?;
    if n != values.len() {
        return Err(SztError::ShapeMismatch(format!("dims {dims:?} describe {n} values, got {}", values.len())));
    }
    let bytes: Vec<u8> = values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    fs::write(path, bytes)?;
    let meta = serde_json::to_vec(&DenseMeta { dims: dims.to_vec() }).map_err(|e| SztError::Format(e.to_string()))?;
    fs::write(sidecar_path(path), meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_f32() {
        let dir = std::env::temp_dir().join(format!("szt-dense-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("w.f32");
        write_dense(&path, &[2, 2], &[0.5, -1.25, 3.0, 0.0]).unwrap();
        let (dims, v) = read_dense(&path).unwrap();
        assert_eq!(dims, vec![2, 2]);
        assert_eq!(v, vec![0.5, -1.25, 3.0, 0.0]);
        fs::write(&path, [0u8; 3]).unwrap();
        assert!(matches!(read_dense(&path), Err(SztError::Format(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}

//! Parameter checkpoints: one line of compact JSON describing the tensors,
//! then their values as little-endian `f64`, concatenated in header order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: String,
    pub names: Vec<String>,
    pub shapes: Vec<(usize, usize)>,
    pub seed: u64,
    pub epoch: usize,
}

pub fn encode(header: &CheckpointHeader, tensors: &[&Matrix]) -> Result<Vec<u8>> {
    if header.shapes.len() != tensors.len()
        || header.shapes.iter().zip(tensors).any(|(s, t)| *s != t.shape())
    {
        return Err(Error::Config("checkpoint header does not match tensors".into()));
    }
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    for t in tensors {
        out.extend(t.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Matrix>)> {
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Config("checkpoint has no header line".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[..split])?;
    let mut rest = &bytes[split + 1..];
    let mut tensors = Vec::with_capacity(header.shapes.len());
    for &(r, c) in &header.shapes {
        let len = r * c * 8;
        if rest.len() < len {
            return Err(Error::Config("checkpoint truncated".into()));
        }
        tensors.push(Matrix::from_le_bytes(r, c, &rest[..len])?);
        rest = &rest[len..];
    }
    if !rest.is_empty() {
        return Err(Error::Config("trailing bytes after checkpoint tensors".into()));
    }
    Ok((header, tensors))
}

pub fn save(path: impl AsRef<Path>, header: &CheckpointHeader, tensors: &[&Matrix]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(header, tensors)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<(CheckpointHeader, Vec<Matrix>)> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.5]]);
        let b = Matrix::from_rows(&[[-0.25]]);
        let header = CheckpointHeader {
            model: "test".into(),
            names: vec!["a".into(), "b".into()],
            shapes: vec![(2, 2), (1, 1)],
            seed: 3,
            epoch: 7,
        };
        let bytes = encode(&header, &[&a, &b]).unwrap();
        let (h, t) = decode(&bytes).unwrap();
        assert_eq!(h, header);
        assert_eq!(t, vec![a, b]);
    }

    #[test]
    fn mismatched_header_rejected() {
        let a = Matrix::zeros(2, 2);
        let header = CheckpointHeader {
            model: "x".into(),
            names: vec!["a".into()],
            shapes: vec![(1, 2)],
            seed: 0,
            epoch: 0,
        };
        assert!(encode(&header, &[&a]).is_err());
    }
}

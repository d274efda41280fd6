//! `LSNN1` parameter files.
//!
//! Layout (little-endian): magic `LSNN1`, `u32` layer count `L`, `L+1` `u32`
//! dims, `u8` activation code, then per layer the `out × in` weights
//! (row-major) followed by `out` biases as `f32`, then a `u32` CRC32 of every
//! preceding byte.

use std::path::Path;

use super::mlp::{Activation, MlpParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"LSNN1";

#[derive(Debug, thiserror::Error)]
pub enum ParamFileError {
    #[error("not a parameter file (bad magic bytes)")]
    BadMagic,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("layer {layer}: declared {expected} values, file holds {found}")]
    LayerSize {
        layer: usize,
        expected: usize,
        found: usize,
    },
}

pub fn params_to_bytes(params: &MlpParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + params.param_bytes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(params.layer_count() as u32).to_le_bytes());
    for &d in params.layer_dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(params.activation().code());
    for (w, b) in params.weights().iter().zip(params.biases()) {
        for &v in w.iter().chain(b) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Option<&[u8]> {
        let s = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn params_from_bytes(bytes: &[u8]) -> std::result::Result<MlpParams, ParamFileError> {
    if bytes.len() >= MAGIC.len() && &bytes[..MAGIC.len()] != MAGIC {
        return Err(ParamFileError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 {
        return Err(ParamFileError::ChecksumMismatch {
            stored: 0,
            computed: crc32fast::hash(bytes),
        });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ParamFileError::ChecksumMismatch { stored, computed });
    }
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len(),
    };
    let header = |what: &str| ParamFileError::CorruptHeader(what.to_string());
    let layers = r.u32().ok_or_else(|| header("missing layer count"))? as usize;
    if layers == 0 || layers > 1024 {
        return Err(header(&format!("implausible layer count {layers}")));
    }
    let mut dims = Vec::with_capacity(layers + 1);
    for _ in 0..=layers {
        let d = r.u32().ok_or_else(|| header("missing layer dims"))? as usize;
        if d == 0 {
            return Err(header("zero-width layer"));
        }
        dims.push(d);
    }
    let code = r.take(1).ok_or_else(|| header("missing activation code"))?[0];
    let activation = Activation::from_code(code).ok_or_else(|| header(&format!("unknown activation code {code}")))?;
    let mut weights = Vec::with_capacity(layers);
    let mut biases = Vec::with_capacity(layers);
    for l in 0..layers {
        let (i, o) = (dims[l], dims[l + 1]);
        let expected = i.checked_mul(o).and_then(|v| v.checked_add(o)).ok_or_else(|| header("layer size overflows"))?;
        let available = r.remaining() / 4;
        if available < expected {
            return Err(ParamFileError::LayerSize {
                layer: l,
                expected,
                found: available,
            });
        }
        let raw = r.take(4 * expected).expect("length checked");
        let vals: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        weights.push(vals[..i * o].to_vec());
        biases.push(vals[i * o..].to_vec());
    }
    if r.remaining() != 0 {
        let last = layers - 1;
        let expected = dims[last] * dims[last + 1] + dims[last + 1];
        return Err(ParamFileError::LayerSize {
            layer: last,
            expected,
            found: expected + r.remaining() / 4,
        });
    }
    MlpParams::from_parts(dims, activation, weights, biases)
        .map_err(|e| ParamFileError::CorruptHeader(e.to_string()))
}

pub fn save_params(params: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, params_to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(params_from_bytes(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MlpParams {
        let mut p = MlpParams::init(&[5, 7, 3], Activation::Tanh, 77).unwrap();
        for (k, b) in p.biases_mut().iter_mut().flatten().enumerate() {
            *b = f64::from((k as f32) * 0.125 - 0.3);
        }
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.lsnn");
        save_params(&p, &path).unwrap();
        let q = load_params(&path).unwrap();
        assert_eq!(q.layer_dims(), p.layer_dims());
        for (a, b) in p.weights().iter().chain(p.biases()).flatten().zip(q.weights().iter().chain(q.biases()).flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(params_to_bytes(&q), std::fs::read(&path).unwrap());
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let bytes = params_to_bytes(&sample());
        for cut in [bytes.len() - 1, bytes.len() - 10, 20, 7] {
            assert!(matches!(
                params_from_bytes(&bytes[..cut]),
                Err(ParamFileError::ChecksumMismatch { .. })
            ));
        }
    }

    #[test]
    fn mismatched_dims_name_the_layer() {
        let p = sample();
        let mut bytes = params_to_bytes(&p);
        // declare 8 hidden units instead of 7: layer 0 then needs 48 values
        let off = MAGIC.len() + 4 + 4;
        bytes[off..off + 4].copy_from_slice(&8u32.to_le_bytes());
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        match params_from_bytes(&bytes) {
            Err(ParamFileError::LayerSize { layer, expected, .. }) => {
                assert_eq!(layer, 1);
                assert_eq!(expected, 8 * 3 + 3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = Error::from(params_from_bytes(&bytes).unwrap_err());
        assert!(err.to_string().contains("layer 1"));
    }

    #[test]
    fn bad_magic_and_header() {
        assert!(matches!(params_from_bytes(b"NOPE!0000"), Err(ParamFileError::BadMagic)));
        let mut bytes = params_to_bytes(&sample());
        bytes[MAGIC.len()..MAGIC.len() + 4].copy_from_slice(&0u32.to_le_bytes());
        let body_len = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..body_len]);
        bytes[body_len..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(params_from_bytes(&bytes), Err(ParamFileError::CorruptHeader(_))));
    }
}

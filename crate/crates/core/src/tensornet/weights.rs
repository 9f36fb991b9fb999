//! Binary weights format:
//!
//! ```text
//! "DFNW" | u32 version = 1 | u32 tensor count |
//!     per tensor: u32 rank | u32 dims[rank] | f32 data[prod(dims)]
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use super::{Network, Tensor, TensorError};

pub const MAGIC: &[u8; 4] = b"DFNW";
pub const VERSION: u32 = 1;

pub fn save_weights(net: &Network<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + net.parameter_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.params().len() as u32).to_le_bytes());
    for p in net.params() {
        out.extend_from_slice(&(p.shape().len() as u32).to_le_bytes());
        for &d in p.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], TensorError> {
        let end = self.pos.checked_add(n).ok_or(TensorError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(TensorError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TensorError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses a weights file into a copy of `template`, whose architecture must
/// match the stored tensor shapes exactly.
pub fn load_weights(template: &Network<f32>, bytes: &[u8]) -> Result<Network<f32>, TensorError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| TensorError::BadMagic)? != MAGIC {
        return Err(TensorError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(TensorError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    if count != template.params().len() {
        return Err(TensorError::TensorCount {
            expected: template.params().len(),
            actual: count,
        });
    }
    let mut tensors = Vec::with_capacity(count);
    for (i, expected) in template.params().iter().enumerate() {
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(TensorError::ParamShape {
                tensor: i,
                expected: expected.shape().to_vec(),
                actual: vec![rank],
            });
        }
        let dims = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if dims != expected.shape() {
            return Err(TensorError::ParamShape {
                tensor: i,
                expected: expected.shape().to_vec(),
                actual: dims,
            });
        }
        let n = expected.len();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor::from_vec(&dims, data)?);
    }
    if r.pos != bytes.len() {
        return Err(TensorError::TrailingBytes(bytes.len() - r.pos));
    }
    let mut net = template.clone();
    net.set_params(tensors)?;
    Ok(net)
}

pub fn write_weights_file(net: &Network<f32>, path: &Path) -> Result<(), TensorError> {
    std::fs::write(path, save_weights(net)).map_err(|e| TensorError::Io(e.to_string()))
}

pub fn read_weights_file(template: &Network<f32>, path: &Path) -> Result<Network<f32>, TensorError> {
    let bytes = std::fs::read(path).map_err(|e| TensorError::Io(format!("{}: {e}", path.display())))?;
    load_weights(template, &bytes)
}

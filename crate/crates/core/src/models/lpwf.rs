//! LPWF: little-endian binary weight files for dense networks.
//!
//! Layout:
//!
//! ```text
//! 0..4    magic "LPWF"
//! 4..8    version u32 = 1
//! 8       role u8 (0 = generator, 1 = classifier)
//! 9..13   input_width u32
//! 13..17  output_width u32
//! 17..21  image height u32
//! 21..25  image width u32
//! 25..29  layer_count u32
//! then per layer: kind u8 (1 dense, 2 relu, 3 tanh, 4 sigmoid, 5 softmax);
//! dense layers continue with rows u32, cols u32, rows*cols f32 weights
//! (row-major), rows f32 biases.
//! ```
//!
//! No padding and no trailing bytes. Parameters are widened to f64 on load,
//! which is exact, so save -> load -> save reproduces the file.

use std::path::Path;

use super::{Dense, Layer, NetworkModel, Role};
use crate::error::{ProbeError, Result};

pub const MAGIC: &[u8; 4] = b"LPWF";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 29;

const KIND_DENSE: u8 = 1;
const KIND_RELU: u8 = 2;
const KIND_TANH: u8 = 3;
const KIND_SIGMOID: u8 = 4;
const KIND_SOFTMAX: u8 = 5;

/// Serializes a validated model. Identical models give identical bytes.
pub fn to_bytes(model: &NetworkModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::with_capacity(encoded_len(model));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(match model.role() {
        Role::Generator => 0,
        Role::Classifier => 1,
    });
    let (h, w) = model.image_shape();
    for v in [
        model.input_width(),
        model.output_width(),
        h,
        w,
        model.layers().len(),
    ] {
        out.extend_from_slice(&to_u32(v)?.to_le_bytes());
    }
    for layer in model.layers() {
        match layer {
            Layer::Dense(d) => {
                out.push(KIND_DENSE);
                out.extend_from_slice(&to_u32(d.rows())?.to_le_bytes());
                out.extend_from_slice(&to_u32(d.cols())?.to_le_bytes());
                for &v in d.weights().iter().chain(d.bias()) {
                    let narrow = v as f32;
                    if !narrow.is_finite() {
                        return Err(ProbeError::Validation(format!(
                            "parameter {v} does not fit in f32"
                        )));
                    }
                    out.extend_from_slice(&narrow.to_le_bytes());
                }
            }
            Layer::Relu => out.push(KIND_RELU),
            Layer::Tanh => out.push(KIND_TANH),
            Layer::Sigmoid => out.push(KIND_SIGMOID),
            Layer::Softmax => out.push(KIND_SOFTMAX),
        }
    }
    Ok(out)
}

/// Exact file size the encoder will produce.
pub fn encoded_len(model: &NetworkModel) -> usize {
    HEADER_LEN
        + model
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => 1 + 8 + 4 * (d.rows() * d.cols() + d.rows()),
                _ => 1,
            })
            .sum::<usize>()
}

pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(model)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkModel> {
    from_bytes(&std::fs::read(path)?)
}

fn to_u32(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| ProbeError::Validation(format!("{v} exceeds u32")))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(ProbeError::Format {
            offset,
            message: message.into(),
        })
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        match self.bytes.len().checked_sub(self.pos) {
            Some(left) if left >= n => {
                let s = &self.bytes[self.pos..self.pos + n];
                self.pos += n;
                Ok(s)
            }
            _ => self.fail(self.pos, format!("truncated while reading {what}")),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let Some(len) = count.checked_mul(4) else {
            return self.fail(start, format!("{what} count overflows"));
        };
        let raw = self.take(len, what)?;
        let values: Vec<f64> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return self.fail(start + 4 * i, format!("non-finite value in {what}"));
        }
        Ok(values)
    }
}

/// Parses an LPWF buffer and validates the resulting network.
pub fn from_bytes(bytes: &[u8]) -> Result<NetworkModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.fail(0, "bad magic, expected \"LPWF\"");
    }
    let version = r.u32("version")?;
    if version != VERSION as usize {
        return r.fail(4, format!("unsupported version {version}"));
    }
    let role = match r.u8("role")? {
        0 => Role::Generator,
        1 => Role::Classifier,
        other => return r.fail(8, format!("unknown role byte {other}")),
    };
    let input_width = r.u32("input width")?;
    let output_width = r.u32("output width")?;
    let height = r.u32("image height")?;
    let width = r.u32("image width")?;
    let count = r.u32("layer count")?;

    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let at = r.pos;
        let layer = match r.u8("layer kind")? {
            KIND_DENSE => {
                let rows = r.u32("dense rows")?;
                let cols = r.u32("dense cols")?;
                let Some(n) = rows.checked_mul(cols) else {
                    return r.fail(at, "dense size overflows");
                };
                let weights = r.f32s(n, "dense weights")?;
                let bias = r.f32s(rows, "dense bias")?;
                Layer::Dense(Dense::new(rows, cols, weights, bias)?)
            }
            KIND_RELU => Layer::Relu,
            KIND_TANH => Layer::Tanh,
            KIND_SIGMOID => Layer::Sigmoid,
            KIND_SOFTMAX => Layer::Softmax,
            other => return r.fail(at, format!("unknown layer kind {other}")),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return r.fail(r.pos, format!("{} trailing bytes", bytes.len() - r.pos));
    }
    NetworkModel::new(role, input_width, output_width, (height, width), layers)
}

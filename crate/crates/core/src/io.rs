//! On-disk formats.
//!
//! All integers are unsigned 32-bit little-endian.
//!
//! | file     | layout                                                          |
//! |----------|-----------------------------------------------------------------|
//! | features | `"HSF1"`, `n`, `d`, then `n·d` f32 LE, sample-major              |
//! | labels   | `"HSL1"`, `n`, then `n` u32 class ids                            |
//! | codes    | `"HSB1"`, `n`, `L`, then `n·⌈L/8⌉` packed bytes (see [`crate::index`]) |
//!
//! Models are JSON documents; layer payloads are base64 of little-endian
//! f64 values, weights row-major.

use std::fs;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{bytes_per_code, PackedCodes};
use crate::network::{Activation, Layer, Network};
use crate::numerics::Matrix;
use crate::trainer::TrainConfig;

pub const FEATURE_MAGIC: &[u8; 4] = b"HSF1";
pub const LABEL_MAGIC: &[u8; 4] = b"HSL1";
pub const CODE_MAGIC: &[u8; 4] = b"HSB1";

pub const MODEL_FORMAT: &str = "hashnet-model";
pub const MODEL_VERSION: u32 = 1;

fn format_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Cursor over a file image that reports errors with byte offsets.
struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader {
            path,
            bytes,
            pos: 0,
        }
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != expected {
            return Err(format_err(
                self.path,
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format_err(
                self.path,
                self.bytes.len() as u64,
                format!(
                    "truncated {what}: need {len} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    /// `count · width` payload bytes, or a truncation error.
    fn payload(&mut self, count: usize, width: usize, what: &str) -> Result<(usize, &'a [u8])> {
        let len = count
            .checked_mul(width)
            .ok_or_else(|| format_err(self.path, self.pos as u64, "declared size overflows"))?;
        let start = self.pos;
        Ok((start, self.take(len, what)?))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err(
                self.path,
                self.pos as u64,
                format!(
                    "{} trailing bytes after payload",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        Ok(())
    }
}

fn header_u32(value: usize, what: &str) -> Result<[u8; 4]> {
    u32::try_from(value)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::invalid(format!("{what} {value} does not fit in 32 bits")))
}

/// Reads an HSF1 file into an `n × d` matrix.
pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    decode_features(path, &read_file(path)?)
}

pub fn decode_features(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let mut r = Reader::new(path, bytes);
    r.magic(FEATURE_MAGIC)?;
    let n = r.u32("sample count")? as usize;
    let d = r.u32("feature dimension")? as usize;
    let (start, payload) = r.payload(n.saturating_mul(d), 4, "feature payload")?;
    r.finish()?;
    let mut data = Vec::with_capacity(n * d);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(
                path,
                (start + 4 * i) as u64,
                format!(
                    "non-finite feature value {v} (sample {}, dim {})",
                    i / d,
                    i % d
                ),
            ));
        }
        data.push(v as f64);
    }
    Matrix::new(n, d, data)
}

/// Writes an `n × d` matrix as HSF1 (values rounded to f32).
pub fn write_features(path: impl AsRef<Path>, x: &Matrix) -> Result<()> {
    write_file(path.as_ref(), &encode_features(x)?)
}

pub fn encode_features(x: &Matrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + 4 * x.as_slice().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&header_u32(x.rows(), "sample count")?);
    out.extend_from_slice(&header_u32(x.cols(), "feature dimension")?);
    for &v in x.as_slice() {
        let v = v as f32;
        if !v.is_finite() {
            return Err(Error::invalid("cannot store non-finite features"));
        }
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u32>> {
    let path = path.as_ref();
    decode_labels(path, &read_file(path)?)
}

pub fn decode_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u32>> {
    let mut r = Reader::new(path, bytes);
    r.magic(LABEL_MAGIC)?;
    let n = r.u32("label count")? as usize;
    let (_, payload) = r.payload(n, 4, "label payload")?;
    r.finish()?;
    Ok(payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[u32]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + 4 * labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&header_u32(labels.len(), "label count")?);
    for l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    write_file(path.as_ref(), &out)
}

pub fn read_codes(path: impl AsRef<Path>) -> Result<PackedCodes> {
    let path = path.as_ref();
    decode_codes(path, &read_file(path)?)
}

pub fn decode_codes(path: &Path, bytes: &[u8]) -> Result<PackedCodes> {
    let mut r = Reader::new(path, bytes);
    r.magic(CODE_MAGIC)?;
    let n = r.u32("code count")? as usize;
    let bits_offset = r.pos as u64;
    let bits = r.u32("code length")? as usize;
    if bits == 0 {
        return Err(format_err(
            path,
            bits_offset,
            "code length must be at least 1",
        ));
    }
    let (start, payload) = r.payload(n, bytes_per_code(bits), "code payload")?;
    r.finish()?;
    PackedCodes::from_payload(n, bits, payload.to_vec())
        .map_err(|e| format_err(path, start as u64, e.to_string()))
}

pub fn encode_codes(codes: &PackedCodes) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + codes.payload().len());
    out.extend_from_slice(CODE_MAGIC);
    out.extend_from_slice(&header_u32(codes.len(), "code count")?);
    out.extend_from_slice(&header_u32(codes.bits(), "code length")?);
    out.extend_from_slice(codes.payload());
    Ok(out)
}

pub fn write_codes(path: impl AsRef<Path>, codes: &PackedCodes) -> Result<()> {
    write_file(path.as_ref(), &encode_codes(codes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: String,
    pub bias: String,
}

/// JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub bits: usize,
    pub layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainConfig>,
}

fn encode_f64s(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn decode_f64s(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(text)
        .map_err(|e| Error::invalid(format!("{what}: invalid base64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::invalid(format!(
            "{what}: {} bytes, expected {}",
            bytes.len(),
            expected * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite value")));
    }
    Ok(values)
}

impl ModelFile {
    pub fn from_network(network: &Network, training: Option<TrainConfig>) -> Self {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            bits: network.code_length(),
            layers: network
                .layers()
                .iter()
                .map(|l| LayerRecord {
                    in_dim: l.in_dim(),
                    out_dim: l.out_dim(),
                    activation: l.activation,
                    weights: encode_f64s(l.weights.as_slice()),
                    bias: encode_f64s(&l.bias),
                })
                .collect(),
            training,
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        if self.format != MODEL_FORMAT {
            return Err(Error::invalid(format!(
                "unknown model format {:?}",
                self.format
            )));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let w = decode_f64s(
                    &rec.weights,
                    rec.in_dim * rec.out_dim,
                    &format!("layer {i} weights"),
                )?;
                let b = decode_f64s(&rec.bias, rec.out_dim, &format!("layer {i} bias"))?;
                Layer::new(Matrix::new(rec.out_dim, rec.in_dim, w)?, b, rec.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        let net = Network::new(layers)?;
        if net.code_length() != self.bits {
            return Err(Error::invalid(format!(
                "model declares {} bits but its output layer has {}",
                self.bits,
                net.code_length()
            )));
        }
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }
}

pub fn save_model(
    path: impl AsRef<Path>,
    network: &Network,
    training: Option<TrainConfig>,
) -> Result<()> {
    write_file(
        path.as_ref(),
        ModelFile::from_network(network, training)
            .to_json()
            .as_bytes(),
    )
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(Network, ModelFile)> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    let doc: ModelFile = serde_json::from_slice(&bytes).map_err(|e| {
        // serde_json reports line/column; map back to a byte offset.
        let offset = line_col_offset(&bytes, e.line(), e.column());
        format_err(path, offset, format!("invalid model JSON: {e}"))
    })?;
    let net = doc
        .to_network()
        .map_err(|e| format_err(path, 0, e.to_string()))?;
    Ok((net, doc))
}

fn line_col_offset(bytes: &[u8], line: usize, column: usize) -> u64 {
    let mut current = 1;
    let mut offset = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if current == line {
            offset = i;
            break;
        }
        if b == b'\n' {
            current += 1;
        }
    }
    (offset + column.saturating_sub(1)) as u64
}

/// Appends `.log` to the model path: the default training-log location.
pub fn default_log_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

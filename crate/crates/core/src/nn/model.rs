//! Model files and tensor blobs.
//!
//! A model is a JSON document whose layers reference weight blobs by path,
//! relative to the document. A blob is
//!
//! ```text
//! "HMFX" | l: u32 | s: u32 | d: u32 | ndim: u32 | dims: u32 × ndim | raw: i128 × Π dims
//! ```
//!
//! all little-endian, with raw fixed-point values at scale `2^d`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ring::RingParams;

use super::layers::{LayerSpec, BN_EPS, POLY_BOUND};
use super::tensor::Tensor;
use super::NnError;

pub const BLOB_MAGIC: &[u8; 4] = b"HMFX";
const IDX_UBYTE: u8 = 0x08;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlobHeader {
    pub l: u32,
    pub s: u32,
    pub d: u32,
}

pub fn encode_blob(t: &Tensor, params: &RingParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + 4 * t.shape.len() + 16 * t.len());
    out.extend_from_slice(BLOB_MAGIC);
    for v in [params.l, params.s, params.d, t.shape.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &dim in &t.shape {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_blob(bytes: &[u8]) -> Result<(BlobHeader, Tensor), NnError> {
    let bad = |why: &str| NnError::Model(format!("bad blob: {why}"));
    if bytes.len() < 20 || &bytes[..4] != BLOB_MAGIC {
        return Err(bad("missing header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let header = BlobHeader {
        l: word(4),
        s: word(8),
        d: word(12),
    };
    let ndim = word(16) as usize;
    let body = 20 + 4 * ndim;
    if bytes.len() < body {
        return Err(bad("truncated shape"));
    }
    let shape: Vec<usize> = (0..ndim).map(|k| word(20 + 4 * k) as usize).collect();
    let count: usize = shape.iter().product();
    if bytes.len() != body + 16 * count {
        return Err(bad(&format!("expected {count} values")));
    }
    let data = bytes[body..]
        .chunks_exact(16)
        .map(|c| i128::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, Tensor::new(shape, data)?))
}

pub fn write_blob(path: &Path, t: &Tensor, params: &RingParams) -> Result<(), NnError> {
    fs::write(path, encode_blob(t, params)).map_err(|source| io_err(path, source))
}

pub fn read_blob(path: &Path) -> Result<(BlobHeader, Tensor), NnError> {
    let bytes = fs::read(path).map_err(|source| io_err(path, source))?;
    decode_blob(&bytes)
}

fn io_err(path: &Path, source: std::io::Error) -> NnError {
    NnError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Images from an unsigned-byte IDX file, scaled to `[0, 1]` at `2^d`. Each
/// image keeps the file's trailing dimensions, with a leading channel axis
/// for two-dimensional images.
pub fn decode_idx(bytes: &[u8], params: &RingParams) -> Result<Vec<Tensor>, NnError> {
    let bad = |why: &str| NnError::Model(format!("bad idx: {why}"));
    if bytes.len() < 4 || bytes[0] != 0 || bytes[1] != 0 {
        return Err(bad("missing magic"));
    }
    if bytes[2] != IDX_UBYTE {
        return Err(bad("only unsigned-byte data is supported"));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 || bytes.len() < 4 + 4 * ndim {
        return Err(bad("truncated dimensions"));
    }
    let dims: Vec<usize> = (0..ndim)
        .map(|k| u32::from_be_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize)
        .collect();
    let per: usize = dims[1..].iter().product();
    let body = &bytes[4 + 4 * ndim..];
    if body.len() != dims[0] * per {
        return Err(bad(&format!("expected {} bytes of data", dims[0] * per)));
    }
    let mut shape = dims[1..].to_vec();
    if shape.len() == 2 {
        shape.insert(0, 1);
    }
    let one = 1i128 << params.d;
    body.chunks(per.max(1))
        .take(dims[0])
        .map(|img| {
            let data = img.iter().map(|&p| (p as i128 * one + 127) / 255).collect();
            Tensor::new(shape.clone(), data)
        })
        .collect()
}

pub fn read_idx(path: &Path, params: &RingParams) -> Result<Vec<Tensor>, NnError> {
    let bytes = fs::read(path).map_err(|source| io_err(path, source))?;
    decode_idx(&bytes, params)
}

/// IDX bytes for `count` images of `rows × cols` pixels.
pub fn encode_idx(pixels: &[u8], count: usize, rows: usize, cols: usize) -> Vec<u8> {
    let mut out = vec![0, 0, IDX_UBYTE, 3];
    for v in [count, rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

/// A validated model with its expected input shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    l: u32,
    s: u32,
    d: u32,
    input_shape: Vec<usize>,
    layers: Vec<LayerFile>,
}

fn one() -> usize {
    1
}

fn default_eps() -> f64 {
    BN_EPS
}

fn default_bound() -> f64 {
    POLY_BOUND
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LayerFile {
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        weights: String,
        #[serde(default)]
        bias: Option<String>,
        #[serde(default)]
        public: bool,
    },
    Fc {
        out_features: usize,
        weights: String,
        #[serde(default)]
        bias: Option<String>,
        #[serde(default)]
        public: bool,
    },
    Avgpool {
        window: usize,
    },
    Maxpool {
        window: usize,
    },
    Bn {
        gamma: f64,
        beta: f64,
        mean: String,
        var: String,
        #[serde(default = "default_eps")]
        eps: f64,
    },
    ReluPoly {
        coeffs: Vec<i64>,
        #[serde(default = "default_bound")]
        bound: f64,
    },
}

impl Model {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self, NnError> {
        super::layers::validate(&layers, &input_shape)?;
        Ok(Self { input_shape, layers })
    }

    /// Loads a model document and its blobs; every blob must use `params`.
    pub fn load(path: &Path, params: &RingParams) -> Result<Self, NnError> {
        let text = fs::read_to_string(path).map_err(|source| io_err(path, source))?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|source| NnError::Json {
            path: path.display().to_string(),
            source,
        })?;
        if (file.l, file.s, file.d) != (params.l, params.s, params.d) {
            return Err(NnError::Model(format!(
                "model uses l={} s={} d={}, session uses l={} s={} d={}",
                file.l, file.s, file.d, params.l, params.s, params.d
            )));
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        let blob = |name: &str| -> Result<Vec<i128>, NnError> {
            let (h, t) = read_blob(&dir.join(name))?;
            if h.d != params.d {
                return Err(NnError::Model(format!("{name} has scale 2^{}, expected 2^{}", h.d, params.d)));
            }
            Ok(t.data)
        };
        let opt = |name: &Option<String>| name.as_deref().map(blob).transpose().map(Option::unwrap_or_default);
        let layers = file
            .layers
            .iter()
            .map(|l| {
                Ok(match l {
                    LayerFile::Conv {
                        out_channels,
                        kernel,
                        stride,
                        weights,
                        bias,
                        public,
                    } => LayerSpec::Conv {
                        out_channels: *out_channels,
                        kernel: *kernel,
                        stride: *stride,
                        weights: blob(weights)?,
                        bias: opt(bias)?,
                        public: *public,
                    },
                    LayerFile::Fc {
                        out_features,
                        weights,
                        bias,
                        public,
                    } => LayerSpec::Fc {
                        out_features: *out_features,
                        weights: blob(weights)?,
                        bias: opt(bias)?,
                        public: *public,
                    },
                    LayerFile::Avgpool { window } => LayerSpec::AvgPool { window: *window },
                    LayerFile::Maxpool { window } => LayerSpec::MaxPool { window: *window },
                    LayerFile::Bn {
                        gamma,
                        beta,
                        mean,
                        var,
                        eps,
                    } => LayerSpec::BatchNorm {
                        gamma: *gamma,
                        beta: *beta,
                        mean: blob(mean)?,
                        var: blob(var)?,
                        eps: *eps,
                    },
                    LayerFile::ReluPoly { coeffs, bound } => LayerSpec::ReluPoly {
                        coeffs: coeffs.iter().map(|&c| c as i128).collect(),
                        bound: *bound,
                    },
                })
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        Self::new(file.input_shape, layers)
    }

    /// Writes `<dir>/<name>.json` plus one blob per parameter array.
    pub fn save(&self, dir: &Path, name: &str, params: &RingParams) -> Result<PathBuf, NnError> {
        fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;
        let put = |tag: String, data: &[i128]| -> Result<String, NnError> {
            let file = format!("{name}.{tag}.bin");
            write_blob(&dir.join(&file), &Tensor::new(vec![data.len()], data.to_vec())?, params)?;
            Ok(file)
        };
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            layers.push(match l {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    weights,
                    bias,
                    public,
                } => LayerFile::Conv {
                    out_channels: *out_channels,
                    kernel: *kernel,
                    stride: *stride,
                    weights: put(format!("{i}.w"), weights)?,
                    bias: if bias.is_empty() { None } else { Some(put(format!("{i}.b"), bias)?) },
                    public: *public,
                },
                LayerSpec::Fc {
                    out_features,
                    weights,
                    bias,
                    public,
                } => LayerFile::Fc {
                    out_features: *out_features,
                    weights: put(format!("{i}.w"), weights)?,
                    bias: if bias.is_empty() { None } else { Some(put(format!("{i}.b"), bias)?) },
                    public: *public,
                },
                LayerSpec::AvgPool { window } => LayerFile::Avgpool { window: *window },
                LayerSpec::MaxPool { window } => LayerFile::Maxpool { window: *window },
                LayerSpec::BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                    eps,
                } => LayerFile::Bn {
                    gamma: *gamma,
                    beta: *beta,
                    mean: put(format!("{i}.mean"), mean)?,
                    var: put(format!("{i}.var"), var)?,
                    eps: *eps,
                },
                LayerSpec::ReluPoly { coeffs, bound } => LayerFile::ReluPoly {
                    coeffs: coeffs
                        .iter()
                        .map(|&c| i64::try_from(c).map_err(|_| NnError::Model(format!("coefficient {c} exceeds 64 bits"))))
                        .collect::<Result<_, _>>()?,
                    bound: *bound,
                },
            });
        }
        let file = ModelFile {
            l: params.l,
            s: params.s,
            d: params.d,
            input_shape: self.input_shape.clone(),
            layers,
        };
        let path = dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(&file).map_err(|source| NnError::Json {
            path: path.display().to_string(),
            source,
        })?;
        fs::write(&path, text).map_err(|source| io_err(&path, source))?;
        Ok(path)
    }
}

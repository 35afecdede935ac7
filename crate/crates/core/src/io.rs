//! File formats.
//!
//! Level functions are stored in quotient index order: `x` first (component 1
//! fastest), then `y`, then `z`, so `index = flat(x) + p^{nd}·flat(y) +
//! p^{2nd}·z`.
//!
//! * JSON: `{"p":3,"d":1,"n":1,"data":[[re,im],...]}`.
//! * Binary: magic `HVTF`, then `p`, `d`, `n` as little-endian `u32`, then
//!   one `(re, im)` pair of little-endian `f64` per point.
//!
//! Fourier coefficients use JSON only:
//! `{"p","d","n","coefficients":[{"label":{...},"matrix":[[[re,im],...],...]}]}`
//! with labels in enumeration order.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dual::RepLabel;
use crate::error::{Error, Result};
use crate::fourier::FourierCoefficients;
use crate::group::{Heisenberg, LevelFunction};
use crate::padic::{DualScalar, Prime};

const MAGIC: &[u8; 4] = b"HVTF";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Binary,
}

impl Format {
    /// Sniffs the magic bytes.
    pub fn detect(bytes: &[u8]) -> Format {
        if bytes.starts_with(MAGIC) {
            Format::Binary
        } else {
            Format::Json
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FunctionJson {
    p: u64,
    d: usize,
    n: u32,
    data: Vec<[f64; 2]>,
}

/// Label as `{"xi":[..],"eta":[..],"lambda":"a/p^K","dim":N}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelJson {
    pub xi: Vec<String>,
    pub eta: Vec<String>,
    pub lambda: String,
    #[serde(default)]
    pub dim: Option<usize>,
}

impl LabelJson {
    pub fn from_label(l: &RepLabel) -> Self {
        LabelJson {
            xi: l.xi().iter().map(|v| v.to_string()).collect(),
            eta: l.eta().iter().map(|v| v.to_string()).collect(),
            lambda: l.lambda().to_string(),
            dim: Some(l.dim()),
        }
    }

    pub fn to_label(&self, p: Prime) -> Result<RepLabel> {
        let parse = |v: &[String], field: &str| {
            v.iter()
                .map(|s| DualScalar::parse(p, s).map_err(|e| Error::InvalidLabel(format!("{field}: {e}"))))
                .collect::<Result<Vec<_>>>()
        };
        let lambda = DualScalar::parse(p, &self.lambda).map_err(|e| Error::InvalidLabel(format!("lambda: {e}")))?;
        let label = RepLabel::new(parse(&self.xi, "xi")?, parse(&self.eta, "eta")?, lambda)?;
        if let Some(dim) = self.dim {
            if dim != label.dim() {
                return Err(Error::InvalidLabel(format!("dim: {dim} does not match {}", label.dim())));
            }
        }
        Ok(label)
    }
}

#[derive(Serialize, Deserialize)]
struct CoefficientJson {
    label: LabelJson,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct FourierJson {
    p: u64,
    d: usize,
    n: u32,
    coefficients: Vec<CoefficientJson>,
}

fn format_err(e: impl std::fmt::Display) -> Error {
    Error::Format(e.to_string())
}

pub fn function_to_json(f: &LevelFunction) -> String {
    let ctx = f.ctx();
    let doc = FunctionJson {
        p: ctx.p(),
        d: ctx.d(),
        n: ctx.level(),
        data: f.data().iter().map(|c| [c.re, c.im]).collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

pub fn function_from_json(s: &str) -> Result<LevelFunction> {
    let doc: FunctionJson = serde_json::from_str(s).map_err(format_err)?;
    let ctx = Heisenberg::new(doc.p, doc.d, doc.n)?;
    LevelFunction::new(ctx, doc.data.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
}

pub fn write_function_binary(f: &LevelFunction, mut w: impl Write) -> Result<()> {
    let ctx = f.ctx();
    let mut buf = Vec::with_capacity(16 + 16 * f.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(ctx.p() as u32).to_le_bytes());
    buf.extend_from_slice(&(ctx.d() as u32).to_le_bytes());
    buf.extend_from_slice(&ctx.level().to_le_bytes());
    for c in f.data() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    w.write_all(&buf).map_err(format_err)
}

pub fn read_function_binary(mut r: impl Read) -> Result<LevelFunction> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(format_err)?;
    function_from_binary(&bytes)
}

pub fn function_from_binary(bytes: &[u8]) -> Result<LevelFunction> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("binary level function must start with HVTF and a 12-byte header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let ctx = Heisenberg::new(word(0) as u64, word(1) as usize, word(2))?;
    let body = &bytes[16..];
    if body.len() % 16 != 0 {
        return Err(Error::Format("binary payload is not a whole number of complex doubles".into()));
    }
    let data = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    LevelFunction::new(ctx, data)
}

/// Reads either format.
pub fn function_from_bytes(bytes: &[u8]) -> Result<LevelFunction> {
    match Format::detect(bytes) {
        Format::Binary => function_from_binary(bytes),
        Format::Json => function_from_json(std::str::from_utf8(bytes).map_err(format_err)?),
    }
}

pub fn function_to_bytes(f: &LevelFunction, format: Format) -> Vec<u8> {
    match format {
        Format::Json => function_to_json(f).into_bytes(),
        Format::Binary => {
            let mut out = Vec::new();
            write_function_binary(f, &mut out).expect("writing to a Vec");
            out
        }
    }
}

pub fn coefficients_to_json(c: &FourierCoefficients) -> String {
    let ctx = c.ctx();
    let doc = FourierJson {
        p: ctx.p(),
        d: ctx.d(),
        n: ctx.level(),
        coefficients: c
            .iter()
            .map(|(l, m)| CoefficientJson {
                label: LabelJson::from_label(l),
                matrix: (0..m.nrows()).map(|r| (0..m.ncols()).map(|k| [m[(r, k)].re, m[(r, k)].im]).collect()).collect(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("serializable")
}

pub fn coefficients_from_json(s: &str) -> Result<FourierCoefficients> {
    let doc: FourierJson = serde_json::from_str(s).map_err(format_err)?;
    let ctx = Heisenberg::new(doc.p, doc.d, doc.n)?;
    let mut labels = Vec::with_capacity(doc.coefficients.len());
    let mut matrices = Vec::with_capacity(doc.coefficients.len());
    for (i, c) in doc.coefficients.into_iter().enumerate() {
        let l = c.label.to_label(ctx.prime())?;
        let k = l.dim();
        if c.matrix.len() != k || c.matrix.iter().any(|r| r.len() != k) {
            return Err(Error::Format(format!("coefficients[{i}].matrix must be {k}x{k}")));
        }
        matrices.push(DMatrix::from_fn(k, k, |r, col| Complex64::new(c.matrix[r][col][0], c.matrix[r][col][1])));
        labels.push(l);
    }
    FourierCoefficients::new(ctx, labels, matrices)
}

/// `true` when the bytes look like a coefficient file rather than a function.
pub fn is_coefficient_json(bytes: &[u8]) -> bool {
    serde_json::from_slice::<serde_json::Value>(bytes).is_ok_and(|v| v.get("coefficients").is_some())
}

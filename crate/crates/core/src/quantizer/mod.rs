//! Group-wise quantization of tensor payloads, compression rate and
//! roundtrip fidelity.

mod wire;

use std::fmt;
use std::str::FromStr;

use half::f16;
use num_complex::Complex32;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensors::{fidelity, round_to_half, DenseTensor, Mode, Precision, TensorError};

pub use self::wire::{decode, encode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantError {
    #[error("non-finite value {0} cannot be quantized")]
    NonFinite(f32),
    #[error("corrupt payload: {0}")]
    Corrupt(String),
    #[error("unknown quantization scheme `{0}`")]
    UnknownScheme(String),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, QuantError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuantKind {
    Float2Half,
    Float2Int8,
    Float2Int4,
}

impl QuantKind {
    fn code_bits(self) -> usize {
        match self {
            QuantKind::Float2Half => 16,
            QuantKind::Float2Int8 => 8,
            QuantKind::Float2Int4 => 4,
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            QuantKind::Float2Half => 0,
            QuantKind::Float2Int8 => 1,
            QuantKind::Float2Int4 => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(QuantKind::Float2Half),
            1 => Some(QuantKind::Float2Int8),
            2 => Some(QuantKind::Float2Int4),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    EntireTensor,
    GroupSize(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantScheme {
    pub kind: QuantKind,
    pub q_min: f64,
    pub q_max: f64,
    pub exp: f64,
    pub group: Grouping,
    pub round: bool,
}

impl QuantScheme {
    pub fn half() -> Self {
        QuantScheme {
            kind: QuantKind::Float2Half,
            q_min: -65504.0,
            q_max: 65504.0,
            exp: 1.0,
            group: Grouping::EntireTensor,
            round: false,
        }
    }

    pub fn int8() -> Self {
        QuantScheme {
            kind: QuantKind::Float2Int8,
            q_min: -128.0,
            q_max: 127.0,
            exp: 0.2,
            group: Grouping::EntireTensor,
            round: true,
        }
    }

    pub fn int4(group: usize) -> Self {
        QuantScheme {
            kind: QuantKind::Float2Int4,
            q_min: 0.0,
            q_max: 15.0,
            exp: 1.0,
            group: Grouping::GroupSize(group),
            round: true,
        }
    }

    /// Integer scheme with explicit parameters. Codes must fit the kind's width.
    pub fn custom(kind: QuantKind, q_min: f64, q_max: f64, exp: f64, group: Grouping) -> Result<Self> {
        let s = QuantScheme { kind, q_min, q_max, exp, group, round: kind != QuantKind::Float2Half };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if let Grouping::GroupSize(0) = self.group {
            return Err(QuantError::InvalidScheme("group size must be positive".into()));
        }
        if !(self.exp > 0.0 && self.exp.is_finite()) || !(self.q_max > self.q_min) {
            return Err(QuantError::InvalidScheme(format!("exp {} range [{}, {}]", self.exp, self.q_min, self.q_max)));
        }
        let (lo, hi) = match self.kind {
            QuantKind::Float2Half => return Ok(()),
            QuantKind::Float2Int8 => (-128.0, 127.0),
            QuantKind::Float2Int4 => (0.0, 15.0),
        };
        if self.q_min < lo || self.q_max > hi || self.q_min.fract() != 0.0 || self.q_max.fract() != 0.0 {
            return Err(QuantError::InvalidScheme(format!(
                "range [{}, {}] does not fit {:?} codes",
                self.q_min, self.q_max, self.kind
            )));
        }
        Ok(())
    }

    fn group_len(&self, n_reals: usize) -> usize {
        match self.group {
            Grouping::EntireTensor => n_reals.max(1),
            Grouping::GroupSize(g) => g,
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.group) {
            (QuantKind::Float2Half, _) => write!(f, "half"),
            (QuantKind::Float2Int8, Grouping::EntireTensor) => write!(f, "int8"),
            (QuantKind::Float2Int8, Grouping::GroupSize(g)) => write!(f, "int8:{g}"),
            (QuantKind::Float2Int4, Grouping::GroupSize(g)) => write!(f, "int4:{g}"),
            (QuantKind::Float2Int4, Grouping::EntireTensor) => write!(f, "int4:entire"),
        }
    }
}

impl FromStr for QuantScheme {
    type Err = QuantError;

    /// Accepts `half`, `int8` and `int4:<group>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "half" => Ok(QuantScheme::half()),
            None if s == "int8" => Ok(QuantScheme::int8()),
            Some(("int4", g)) => {
                let g: usize = g.parse().map_err(|_| QuantError::UnknownScheme(s.to_string()))?;
                let scheme = QuantScheme::int4(g);
                scheme.validate()?;
                Ok(scheme)
            }
            _ => Err(QuantError::UnknownScheme(s.to_string())),
        }
    }
}

/// Quantized payload. Complex data is flattened to interleaved re/im reals.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedTensor {
    pub scheme: QuantScheme,
    pub modes: Vec<Mode>,
    pub precision: Precision,
    pub scales: Vec<f32>,
    pub zeros: Vec<f32>,
    pub payload: Vec<u8>,
}

impl QuantizedTensor {
    pub fn n_reals(&self) -> usize {
        2 * self.modes.iter().map(|m| m.dim).product::<usize>()
    }

    pub fn n_groups(&self) -> usize {
        self.n_reals().div_ceil(self.scheme.group_len(self.n_reals()))
    }

    pub fn payload_len(scheme: &QuantScheme, n_reals: usize) -> usize {
        (n_reals * scheme.kind.code_bits()).div_ceil(8)
    }

    /// Quantized bytes: scales, zeros and payload.
    pub fn nbytes(&self) -> usize {
        4 * (self.scales.len() + self.zeros.len()) + self.payload.len()
    }

    /// Code `i` of the payload.
    fn code(&self, i: usize) -> f64 {
        match self.scheme.kind {
            QuantKind::Float2Half => {
                f16::from_bits(u16::from_le_bytes([self.payload[2 * i], self.payload[2 * i + 1]])).to_f64()
            }
            QuantKind::Float2Int8 => self.payload[i] as i8 as f64,
            QuantKind::Float2Int4 => {
                let byte = self.payload[i / 2];
                (if i % 2 == 0 { byte & 0x0f } else { byte >> 4 }) as f64
            }
        }
    }
}

fn signed_pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(e)
    }
}

fn interleaved(t: &DenseTensor) -> Result<Vec<f32>> {
    let mut reals = Vec::with_capacity(2 * t.len());
    for z in t.data() {
        for v in [z.re, z.im] {
            if !v.is_finite() {
                return Err(QuantError::NonFinite(v));
            }
            reals.push(v);
        }
    }
    Ok(reals)
}

/// Group-wise forward map. A constant group stores `scale = 0` and the
/// constant itself as `zero`, so it dequantizes exactly.
pub fn quantize(t: &DenseTensor, s: &QuantScheme) -> Result<QuantizedTensor> {
    s.validate()?;
    let reals = interleaved(t)?;
    let n = reals.len();
    let mut q = QuantizedTensor {
        scheme: *s,
        modes: t.modes().to_vec(),
        precision: t.precision(),
        scales: Vec::new(),
        zeros: Vec::new(),
        payload: vec![0u8; QuantizedTensor::payload_len(s, n)],
    };
    if s.kind == QuantKind::Float2Half {
        for (i, &x) in reals.iter().enumerate() {
            let bits = f16::from_f64(round_to_half(x as f64)).to_bits().to_le_bytes();
            q.payload[2 * i..2 * i + 2].copy_from_slice(&bits);
        }
        q.scales.push(1.0);
        q.zeros.push(0.0);
        return Ok(q);
    }
    let mut codes: Vec<i32> = Vec::with_capacity(n);
    for group in reals.chunks(s.group_len(n)) {
        let transformed: Vec<f64> = group.iter().map(|&x| signed_pow(x as f64, s.exp)).collect();
        let hi = transformed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = transformed.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi == lo {
            q.scales.push(0.0);
            q.zeros.push(group[0]);
            codes.extend(std::iter::repeat_n(s.q_min as i32, group.len()));
            continue;
        }
        let scale = ((s.q_max - s.q_min) / (hi - lo)) as f32;
        let zero = ((s.q_min * hi - s.q_max * lo) / (hi - lo)) as f32;
        q.scales.push(scale);
        q.zeros.push(zero);
        for v in transformed {
            let c = v * scale as f64 + zero as f64;
            let c = if s.round { c.round_ties_even() } else { c };
            codes.push(c.clamp(s.q_min, s.q_max) as i32);
        }
    }
    match s.kind {
        QuantKind::Float2Int8 => {
            for (b, c) in q.payload.iter_mut().zip(&codes) {
                *b = *c as i8 as u8;
            }
        }
        QuantKind::Float2Int4 => {
            let pad = s.q_min as u8;
            for (k, b) in q.payload.iter_mut().enumerate() {
                let lo = codes[2 * k] as u8;
                let hi = codes.get(2 * k + 1).map(|&c| c as u8).unwrap_or(pad);
                *b = lo | hi << 4;
            }
        }
        QuantKind::Float2Half => unreachable!("handled above"),
    }
    Ok(q)
}

/// Inverse map: `y = signed_pow((code - zero) / scale, 1 / exp)`.
pub fn dequantize(q: &QuantizedTensor) -> Result<DenseTensor> {
    let n = q.n_reals();
    let groups = if q.scheme.kind == QuantKind::Float2Half { 1 } else { q.n_groups() };
    if q.payload.len() != QuantizedTensor::payload_len(&q.scheme, n) || q.scales.len() != groups || q.zeros.len() != groups {
        return Err(QuantError::Corrupt(format!(
            "{} payload bytes and {} groups for {} reals",
            q.payload.len(),
            q.scales.len(),
            n
        )));
    }
    let g = q.scheme.group_len(n);
    let inv = 1.0 / q.scheme.exp;
    let reals: Vec<f32> = (0..n)
        .map(|i| {
            let code = q.code(i);
            if q.scheme.kind == QuantKind::Float2Half {
                return code as f32;
            }
            let (scale, zero) = (q.scales[i / g] as f64, q.zeros[i / g] as f64);
            if scale == 0.0 {
                return zero as f32;
            }
            signed_pow((code - zero) / scale, inv) as f32
        })
        .collect();
    let data = reals.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
    let t = DenseTensor::new(q.modes.clone(), data, Precision::C64)?;
    Ok(if q.precision == Precision::C64 { t } else { t.to_precision(q.precision) })
}

/// `(bytes(scales) + bytes(zeros) + bytes(payload)) / bytes(float32 original)`, in percent.
pub fn compression_rate(q: &QuantizedTensor) -> f64 {
    100.0 * q.nbytes() as f64 / (4 * q.n_reals()) as f64
}

/// Fidelity between `t` and its quantize-dequantize roundtrip.
pub fn roundtrip_fidelity(t: &DenseTensor, s: &QuantScheme) -> Result<f64> {
    let back = dequantize(&quantize(t, s)?)?;
    Ok(fidelity(t, &back)?)
}

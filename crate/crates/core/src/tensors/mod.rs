//! Dense complex tensors, index permutation, pairwise einsum and the
//! complex-as-real rewrite used for complex-half contraction.

mod einsum;
mod half;
mod layout;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use self::einsum::{
    einsum_complex_as_real, einsum_pair, einsum_real, pad_b_real_imag, EinsumSpec, RealTensor, IMAG_PAIR_LABEL,
    REAL_IMAG_LABEL,
};
pub(crate) use self::einsum::batched_gemm;
pub use self::half::{round_to_half, round_to_half_f32};
pub use self::layout::{row_major_strides, MultiIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("mode `{0}` has zero extent")]
    ZeroDim(Label),
    #[error("duplicate mode label `{0}`")]
    DuplicateLabel(Label),
    #[error("unknown mode label `{0}`")]
    UnknownLabel(Label),
    #[error("data length {got} does not match shape product {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("extent mismatch on shared label `{label}`: {left} vs {right}")]
    DimMismatch { label: Label, left: usize, right: usize },
    #[error("output label `{0}` appears in neither input")]
    DanglingOutput(Label),
    #[error("einsum is not a pure pairwise contraction: {0}")]
    NotPureContraction(String),
    #[error("precision mismatch between operands ({0:?} vs {1:?})")]
    PrecisionMismatch(Precision, Precision),
    #[error("value {0} is not representable in binary16")]
    NotHalfRepresentable(f32),
    #[error("index {index} out of range for mode `{label}` of extent {dim}")]
    IndexOutOfRange { label: Label, index: usize, dim: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("similarity undefined for a zero-norm tensor")]
    ZeroNorm,
    #[error("malformed einsum equation `{0}`")]
    BadEquation(String),
    #[error("reserved label `{0}` used by an operand")]
    ReservedLabel(Label),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Opaque mode identifier. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: impl AsRef<str>) -> Self {
        Label(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label(Arc::from(s))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Label::from(String::deserialize(d)?))
    }
}

/// Builds a label list from string literals.
pub fn labels<const N: usize>(names: [&str; N]) -> Vec<Label> {
    names.iter().map(|n| Label::new(n)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub label: Label,
    pub dim: usize,
}

impl Mode {
    pub fn new(label: impl Into<Label>, dim: usize) -> Self {
        Mode { label: label.into(), dim }
    }
}

/// Storage precision. `CHalf` values are kept in `f32` slots but every
/// component is exactly representable in binary16.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    C64,
    CHalf,
}

impl Precision {
    /// Bytes per complex element.
    pub fn complex_bytes(self) -> u64 {
        match self {
            Precision::C64 => 8,
            Precision::CHalf => 4,
        }
    }

    pub(crate) fn finish(self, v: Complex64) -> Complex32 {
        match self {
            Precision::C64 => Complex32::new(v.re as f32, v.im as f32),
            Precision::CHalf => Complex32::new(
                round_to_half(v.re) as f32,
                round_to_half(v.im) as f32,
            ),
        }
    }
}

/// Multi-mode complex array, row-major in mode order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    modes: Vec<Mode>,
    data: Vec<Complex32>,
    precision: Precision,
}

pub(crate) fn check_modes(modes: &[Mode]) -> Result<usize> {
    let mut seen = HashSet::with_capacity(modes.len());
    let mut len = 1usize;
    for m in modes {
        if m.dim == 0 {
            return Err(TensorError::ZeroDim(m.label.clone()));
        }
        if !seen.insert(&m.label) {
            return Err(TensorError::DuplicateLabel(m.label.clone()));
        }
        len *= m.dim;
    }
    Ok(len)
}

impl DenseTensor {
    pub fn new(modes: Vec<Mode>, data: Vec<Complex32>, precision: Precision) -> Result<Self> {
        let len = check_modes(&modes)?;
        if data.len() != len {
            return Err(TensorError::DataLength { expected: len, got: data.len() });
        }
        if precision == Precision::CHalf {
            for z in &data {
                for c in [z.re, z.im] {
                    if round_to_half_f32(c) != c && !c.is_nan() {
                        return Err(TensorError::NotHalfRepresentable(c));
                    }
                }
            }
        }
        Ok(DenseTensor { modes, data, precision })
    }

    /// Unchecked constructor for kernels that already know the layout is valid.
    pub(crate) fn from_parts(modes: Vec<Mode>, data: Vec<Complex32>, precision: Precision) -> Self {
        debug_assert_eq!(modes.iter().map(|m| m.dim).product::<usize>(), data.len());
        DenseTensor { modes, data, precision }
    }

    pub fn scalar(value: Complex32) -> Self {
        DenseTensor { modes: Vec::new(), data: vec![value], precision: Precision::C64 }
    }

    pub fn zeros(modes: Vec<Mode>, precision: Precision) -> Result<Self> {
        let len = check_modes(&modes)?;
        Ok(DenseTensor { modes, data: vec![Complex32::new(0.0, 0.0); len], precision })
    }

    pub fn from_fn(
        modes: Vec<Mode>,
        precision: Precision,
        mut f: impl FnMut(&[usize]) -> Complex32,
    ) -> Result<Self> {
        let len = check_modes(&modes)?;
        let dims: Vec<usize> = modes.iter().map(|m| m.dim).collect();
        let mut data = Vec::with_capacity(len);
        let mut idx = MultiIndex::new(&dims);
        for _ in 0..len {
            data.push(precision.finish(f(idx.get()).into_c64()));
            idx.advance();
        }
        Ok(DenseTensor { modes, data, precision })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn labels(&self) -> Vec<Label> {
        self.modes.iter().map(|m| m.label.clone()).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn rank(&self) -> usize {
        self.modes.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex32> {
        self.data
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Storage size in bytes at the tensor's precision.
    pub fn nbytes(&self) -> u64 {
        self.data.len() as u64 * self.precision.complex_bytes()
    }

    pub fn position(&self, label: &Label) -> Option<usize> {
        self.modes.iter().position(|m| &m.label == label)
    }

    pub fn dim_of(&self, label: &Label) -> Option<usize> {
        self.position(label).map(|p| self.modes[p].dim)
    }

    pub fn get(&self, index: &[usize]) -> Option<Complex32> {
        if index.len() != self.modes.len() {
            return None;
        }
        let mut off = 0;
        for (i, m) in index.iter().zip(&self.modes) {
            if *i >= m.dim {
                return None;
            }
            off = off * m.dim + i;
        }
        Some(self.data[off])
    }

    /// Converts to the requested precision, rounding to binary16 when needed.
    pub fn to_precision(&self, precision: Precision) -> DenseTensor {
        let data = match precision {
            Precision::C64 => self.data.clone(),
            Precision::CHalf => self
                .data
                .iter()
                .map(|z| Complex32::new(round_to_half_f32(z.re), round_to_half_f32(z.im)))
                .collect(),
        };
        DenseTensor { modes: self.modes.clone(), data, precision }
    }

    /// Renames one mode.
    pub fn relabel(mut self, from: &Label, to: impl Into<Label>) -> Result<Self> {
        let p = self.position(from).ok_or_else(|| TensorError::UnknownLabel(from.clone()))?;
        self.modes[p].label = to.into();
        check_modes(&self.modes)?;
        Ok(self)
    }

    /// Reorders the modes. See [`permute`].
    pub fn permuted(&self, order: &[Label]) -> Result<DenseTensor> {
        permute(self, order)
    }

    /// Fixes the given modes to single indices and drops them.
    pub fn fix(&self, assignment: &[(Label, usize)]) -> Result<DenseTensor> {
        let strides = row_major_strides(&self.dims());
        let mut base = 0usize;
        let mut fixed = vec![false; self.modes.len()];
        for (label, value) in assignment {
            let p = self.position(label).ok_or_else(|| TensorError::UnknownLabel(label.clone()))?;
            if *value >= self.modes[p].dim {
                return Err(TensorError::IndexOutOfRange {
                    label: label.clone(),
                    index: *value,
                    dim: self.modes[p].dim,
                });
            }
            if fixed[p] {
                return Err(TensorError::DuplicateLabel(label.clone()));
            }
            fixed[p] = true;
            base += value * strides[p];
        }
        let kept: Vec<usize> = (0..self.modes.len()).filter(|p| !fixed[*p]).collect();
        let modes: Vec<Mode> = kept.iter().map(|&p| self.modes[p].clone()).collect();
        let dims: Vec<usize> = modes.iter().map(|m| m.dim).collect();
        let src_strides: Vec<usize> = kept.iter().map(|&p| strides[p]).collect();
        let data = layout::gather_strided(&self.data, base, &dims, &src_strides);
        Ok(DenseTensor { modes, data, precision: self.precision })
    }

    /// Inverse of [`DenseTensor::fix`]: builds a tensor over `modes` from
    /// blocks, each covering one assignment of the modes it lacks. Positions
    /// not covered by any block are zero.
    pub fn assemble(
        modes: Vec<Mode>,
        precision: Precision,
        blocks: &[(Vec<(Label, usize)>, &DenseTensor)],
    ) -> Result<DenseTensor> {
        let mut out = DenseTensor::zeros(modes, precision)?;
        for (assignment, block) in blocks {
            out.write_block(assignment, block)?;
        }
        Ok(out)
    }

    /// Writes `block` into the slice selected by `assignment`.
    pub fn write_block(&mut self, assignment: &[(Label, usize)], block: &DenseTensor) -> Result<()> {
        let strides = row_major_strides(&self.dims());
        let mut base = 0usize;
        let mut fixed = vec![false; self.modes.len()];
        for (label, value) in assignment {
            let p = self.position(label).ok_or_else(|| TensorError::UnknownLabel(label.clone()))?;
            if *value >= self.modes[p].dim {
                return Err(TensorError::IndexOutOfRange {
                    label: label.clone(),
                    index: *value,
                    dim: self.modes[p].dim,
                });
            }
            fixed[p] = true;
            base += value * strides[p];
        }
        // Block modes may come in any order; map each onto the destination stride.
        let free: Vec<usize> = (0..self.modes.len()).filter(|p| !fixed[*p]).collect();
        if free.len() != block.rank() {
            return Err(TensorError::ShapeMismatch(format!(
                "block of rank {} for a slot of rank {}",
                block.rank(),
                free.len()
            )));
        }
        let mut dst_strides = Vec::with_capacity(block.rank());
        for m in block.modes() {
            let p = self.position(&m.label).ok_or_else(|| TensorError::UnknownLabel(m.label.clone()))?;
            if fixed[p] || self.modes[p].dim != m.dim {
                return Err(TensorError::ShapeMismatch(format!("block mode `{}` does not fit", m.label)));
            }
            dst_strides.push(strides[p]);
        }
        layout::scatter_strided(&mut self.data, base, &block.dims(), &dst_strides, &block.data);
        Ok(())
    }

    /// Elementwise sum, accumulated in `f32` then rounded to the tensor precision.
    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        let other = if other.modes == self.modes { other.clone() } else { permute(other, &self.labels())? };
        if other.modes != self.modes {
            return Err(TensorError::ShapeMismatch("addition of differently shaped tensors".into()));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| self.precision.finish((a + b).into_c64()))
            .collect();
        Ok(DenseTensor { modes: self.modes.clone(), data, precision: self.precision })
    }

    /// Multiplies every element by `c`.
    pub fn scale(&self, c: Complex32) -> DenseTensor {
        let data = self.data.iter().map(|z| self.precision.finish((z * c).into_c64())).collect();
        DenseTensor { modes: self.modes.clone(), data, precision: self.precision }
    }

    /// Permutes `labels` to the front and fuses them into one mode named `fused`.
    pub fn fuse_leading(&self, labels: &[Label], fused: impl Into<Label>) -> Result<DenseTensor> {
        let mut order: Vec<Label> = labels.to_vec();
        for m in &self.modes {
            if !labels.contains(&m.label) {
                order.push(m.label.clone());
            }
        }
        let p = permute(self, &order)?;
        let lead: usize = p.modes[..labels.len()].iter().map(|m| m.dim).product();
        let mut modes = vec![Mode::new(fused, lead)];
        modes.extend_from_slice(&p.modes[labels.len()..]);
        check_modes(&modes)?;
        Ok(DenseTensor { modes, data: p.data, precision: p.precision })
    }

    /// SHA-256 over modes and little-endian component bytes.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for m in &self.modes {
            h.update(m.label.as_str().as_bytes());
            h.update((m.dim as u64).to_le_bytes());
        }
        for z in &self.data {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Squared Frobenius norm in `f64`.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.into_c64().norm_sqr()).sum()
    }
}

pub(crate) trait IntoC64 {
    fn into_c64(self) -> Complex64;
}

impl IntoC64 for Complex32 {
    fn into_c64(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }
}

/// Returns `t` with its modes reordered to `order`.
pub fn permute(t: &DenseTensor, order: &[Label]) -> Result<DenseTensor> {
    if order.len() != t.modes.len() {
        for l in order {
            if t.position(l).is_none() {
                return Err(TensorError::UnknownLabel(l.clone()));
            }
        }
        return Err(TensorError::ShapeMismatch(format!(
            "permutation of length {} for a rank-{} tensor",
            order.len(),
            t.rank()
        )));
    }
    let mut perm = Vec::with_capacity(order.len());
    let mut seen = vec![false; order.len()];
    for l in order {
        let p = t.position(l).ok_or_else(|| TensorError::UnknownLabel(l.clone()))?;
        if seen[p] {
            return Err(TensorError::DuplicateLabel(l.clone()));
        }
        seen[p] = true;
        perm.push(p);
    }
    if perm.iter().enumerate().all(|(i, p)| i == *p) {
        return Ok(t.clone());
    }
    let src_strides = row_major_strides(&t.dims());
    let modes: Vec<Mode> = perm.iter().map(|&p| t.modes[p].clone()).collect();
    let dims: Vec<usize> = modes.iter().map(|m| m.dim).collect();
    let strides: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let data = layout::gather_strided(&t.data, 0, &dims, &strides);
    Ok(DenseTensor { modes, data, precision: t.precision })
}

/// Squared normalized inner product `|<b, r>|^2 / (|b|^2 |r|^2)`.
pub fn fidelity(benchmark: &DenseTensor, result: &DenseTensor) -> Result<f64> {
    let result = if result.modes == benchmark.modes {
        result.clone()
    } else {
        permute(result, &benchmark.labels())?
    };
    if result.modes != benchmark.modes {
        return Err(TensorError::ShapeMismatch("fidelity of differently shaped tensors".into()));
    }
    fidelity_slices(benchmark.data(), result.data())
}

pub(crate) fn fidelity_slices(benchmark: &[Complex32], result: &[Complex32]) -> Result<f64> {
    let (mut dot, mut nb, mut nr) = (Complex64::new(0.0, 0.0), 0.0f64, 0.0f64);
    for (b, r) in benchmark.iter().zip(result) {
        let (b, r) = (b.into_c64(), r.into_c64());
        dot += b.conj() * r;
        nb += b.norm_sqr();
        nr += r.norm_sqr();
    }
    if nb == 0.0 || nr == 0.0 {
        return Err(TensorError::ZeroNorm);
    }
    Ok((dot.norm_sqr() / (nb * nr)).min(1.0))
}

// Tensor literal: {"modes":[{"label":..,"dim":..}], "data":[[re,im],..], "precision":"c64"}
#[derive(Serialize, Deserialize)]
struct TensorLiteral {
    modes: Vec<Mode>,
    data: Vec<[f32; 2]>,
    #[serde(default = "default_precision")]
    precision: Precision,
}

fn default_precision() -> Precision {
    Precision::C64
}

impl Serialize for DenseTensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorLiteral {
            modes: self.modes.clone(),
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
            precision: self.precision,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DenseTensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let lit = TensorLiteral::deserialize(d)?;
        let data = lit.data.into_iter().map(|[re, im]| Complex32::new(re, im)).collect();
        DenseTensor::new(lit.modes, data, lit.precision).map_err(serde::de::Error::custom)
    }
}

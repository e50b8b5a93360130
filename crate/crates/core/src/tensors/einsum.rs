use std::collections::BTreeSet;
use std::fmt;
use std::ops::Add;

use num_complex::{Complex32, Complex64};

use super::{check_modes, permute, round_to_half, DenseTensor, Label, Mode, Precision, Result, TensorError};
use super::layout::{gather_strided, row_major_strides};

/// Mode appended last on the real view of `A` (0 = real, 1 = imaginary) and
/// contracted against the matching trailing mode of the padded `B`.
pub const REAL_IMAG_LABEL: &str = "__reim";
/// Leading mode of the padded `B`; survives as the real/imaginary selector of the output.
pub const IMAG_PAIR_LABEL: &str = "__cplx";

/// Pairwise einsum `in_a, in_b -> out` restricted to pure contractions:
/// the reduced labels are exactly the labels shared by both inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EinsumSpec {
    pub in_a: Vec<Label>,
    pub in_b: Vec<Label>,
    pub out: Vec<Label>,
    /// Shared labels, sorted. The sort fixes the summation order.
    pub reduce: Vec<Label>,
}

fn no_duplicates(seq: &[Label]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in seq {
        if !seen.insert(l) {
            return Err(TensorError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

impl EinsumSpec {
    pub fn new(in_a: Vec<Label>, in_b: Vec<Label>, out: Vec<Label>) -> Result<Self> {
        no_duplicates(&in_a)?;
        no_duplicates(&in_b)?;
        no_duplicates(&out)?;
        let a: BTreeSet<&Label> = in_a.iter().collect();
        let b: BTreeSet<&Label> = in_b.iter().collect();
        let reduce: Vec<Label> = a.intersection(&b).map(|l| (*l).clone()).collect();
        for l in &out {
            if reduce.contains(l) {
                return Err(TensorError::NotPureContraction(format!(
                    "shared label `{l}` kept in the output (batched einsum)"
                )));
            }
            if !a.contains(l) && !b.contains(l) {
                return Err(TensorError::DanglingOutput(l.clone()));
            }
        }
        Ok(EinsumSpec { in_a, in_b, out, reduce })
    }

    /// Contraction of `in_a` with `in_b` keeping every unshared label,
    /// `A`'s free labels first.
    pub fn pairwise(in_a: &[Label], in_b: &[Label]) -> Result<Self> {
        let out = in_a
            .iter()
            .filter(|l| !in_b.contains(l))
            .chain(in_b.iter().filter(|l| !in_a.contains(l)))
            .cloned()
            .collect();
        EinsumSpec::new(in_a.to_vec(), in_b.to_vec(), out)
    }

    /// Parses `"a1a2,b1->a2b1"`. A label is one letter followed by optional digits.
    pub fn parse(equation: &str) -> Result<Self> {
        let eq = equation.replace('→', "->");
        let bad = || TensorError::BadEquation(equation.to_string());
        let (inputs, out) = eq.split_once("->").ok_or_else(bad)?;
        let (a, b) = inputs.split_once(',').ok_or_else(bad)?;
        let tok = |s: &str| -> Result<Vec<Label>> {
            let mut labels = Vec::new();
            let mut cur = String::new();
            for ch in s.trim().chars() {
                if ch.is_ascii_alphabetic() {
                    if !cur.is_empty() {
                        labels.push(Label::from(std::mem::take(&mut cur)));
                    }
                    cur.push(ch);
                } else if ch.is_ascii_digit() && !cur.is_empty() {
                    cur.push(ch);
                } else if !ch.is_whitespace() {
                    return Err(bad());
                }
            }
            if !cur.is_empty() {
                labels.push(Label::from(cur));
            }
            Ok(labels)
        };
        EinsumSpec::new(tok(a)?, tok(b)?, tok(out)?)
    }
}

impl fmt::Display for EinsumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Label]| v.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(" ");
        write!(f, "{},{}->{}", join(&self.in_a), join(&self.in_b), join(&self.out))
    }
}

trait Elem: Copy + Send + Sync {
    type Acc: Copy + Add<Output = Self::Acc>;
    fn zero() -> Self::Acc;
    fn mul(a: Self, b: Self) -> Self::Acc;
}

impl Elem for f32 {
    type Acc = f64;
    fn zero() -> f64 {
        0.0
    }
    #[inline]
    fn mul(a: f32, b: f32) -> f64 {
        a as f64 * b as f64
    }
}

impl Elem for Complex32 {
    type Acc = Complex64;
    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn mul(a: Complex32, b: Complex32) -> Complex64 {
        let (ar, ai, br, bi) = (a.re as f64, a.im as f64, b.re as f64, b.im as f64);
        Complex64::new(ar * br - ai * bi, ar * bi + ai * br)
    }
}

/// Output of the generic kernel: modes in `(free_a, free_b)` order.
struct Contracted<A> {
    modes: Vec<Mode>,
    data: Vec<A>,
}

fn contract<T: Elem>(
    spec: &EinsumSpec,
    a: &[T],
    a_modes: &[Mode],
    b: &[T],
    b_modes: &[Mode],
) -> Result<Contracted<T::Acc>> {
    let same_set = |spec_side: &[Label], modes: &[Mode]| {
        spec_side.len() == modes.len() && spec_side.iter().all(|l| modes.iter().any(|m| &m.label == l))
    };
    if !same_set(&spec.in_a, a_modes) || !same_set(&spec.in_b, b_modes) {
        return Err(TensorError::ShapeMismatch(format!("operands do not match equation {spec}")));
    }
    let dim_in = |modes: &[Mode], l: &Label| modes.iter().find(|m| &m.label == l).map(|m| m.dim);
    for l in &spec.reduce {
        let (da, db) = (dim_in(a_modes, l).unwrap(), dim_in(b_modes, l).unwrap());
        if da != db {
            return Err(TensorError::DimMismatch { label: l.clone(), left: da, right: db });
        }
    }
    // Labels found in one input only and absent from the output must be
    // trivial (extent 1); anything else would be a hidden reduction.
    let mut free_a = Vec::new();
    let mut free_b = Vec::new();
    for (modes, free) in [(a_modes, &mut free_a), (b_modes, &mut free_b)] {
        for m in modes {
            if spec.reduce.contains(&m.label) {
                continue;
            }
            if spec.out.contains(&m.label) {
                free.push(m.clone());
            } else if m.dim != 1 {
                return Err(TensorError::NotPureContraction(format!(
                    "label `{}` is summed without being shared",
                    m.label
                )));
            }
        }
    }

    let k_dims: Vec<usize> = spec.reduce.iter().map(|l| dim_in(a_modes, l).unwrap()).collect();
    let k: usize = k_dims.iter().product();
    let view = |data: &[T], modes: &[Mode], lead: &[Mode]| -> Vec<T> {
        let strides = row_major_strides(&modes.iter().map(|m| m.dim).collect::<Vec<_>>());
        let pos = |l: &Label| modes.iter().position(|m| &m.label == l).unwrap();
        let mut dims = Vec::new();
        let mut st = Vec::new();
        for m in lead {
            dims.push(m.dim);
            st.push(strides[pos(&m.label)]);
        }
        for (l, d) in spec.reduce.iter().zip(&k_dims) {
            dims.push(*d);
            st.push(strides[pos(l)]);
        }
        gather_strided(data, 0, &dims, &st)
    };
    let a_mat = view(a, a_modes, &free_a);
    let b_mat = view(b, b_modes, &free_b);
    let m: usize = free_a.iter().map(|m| m.dim).product();
    let n: usize = free_b.iter().map(|m| m.dim).product();

    let mut data = Vec::with_capacity(m * n);
    for row in a_mat.chunks_exact(k) {
        for col in b_mat.chunks_exact(k) {
            let mut acc = T::zero();
            for (x, y) in row.iter().zip(col) {
                acc = acc + T::mul(*x, *y);
            }
            data.push(acc);
        }
    }
    let mut modes = free_a;
    modes.extend(free_b);
    Ok(Contracted { modes, data })
}

fn check_output_order(spec: &EinsumSpec, modes: &[Mode]) -> Result<()> {
    for l in &spec.out {
        if !modes.iter().any(|m| &m.label == l) {
            return Err(TensorError::DanglingOutput(l.clone()));
        }
    }
    Ok(())
}

/// `C[out] = sum over shared labels of A[in_a] * B[in_b]`, accumulated in
/// `f64` and rounded once to the operands' precision.
pub fn einsum_pair(spec: &EinsumSpec, a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.precision != b.precision {
        return Err(TensorError::PrecisionMismatch(a.precision, b.precision));
    }
    let c = contract(spec, &a.data, &a.modes, &b.data, &b.modes)?;
    check_output_order(spec, &c.modes)?;
    let p = a.precision;
    let raw = DenseTensor::from_parts(c.modes, c.data.into_iter().map(|z| p.finish(z)).collect(), p);
    permute(&raw, &spec.out)
}

/// Batched matrix product over row-major blocks: for each pair `(i, j)` of
/// `pairs`, `a[i]` is `m x k`, `b[j]` is `n x k` and the output block is
/// `m x n`, reduced over `k` in the same order as [`einsum_pair`].
pub(crate) fn batched_gemm(
    a: &[Complex32],
    b: &[Complex32],
    pairs: impl Iterator<Item = (usize, usize)>,
    (m, n, k): (usize, usize, usize),
    precision: Precision,
) -> Vec<Complex32> {
    let mut out = Vec::new();
    for (i, j) in pairs {
        let a_blk = &a[i * m * k..(i + 1) * m * k];
        let b_blk = &b[j * n * k..(j + 1) * n * k];
        for row in a_blk.chunks_exact(k) {
            for col in b_blk.chunks_exact(k) {
                let mut acc = <Complex32 as Elem>::zero();
                for (x, y) in row.iter().zip(col) {
                    acc = acc + <Complex32 as Elem>::mul(*x, *y);
                }
                out.push(precision.finish(acc));
            }
        }
    }
    out
}

/// Real-valued tensor used by the complex-as-real rewrite.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor {
    modes: Vec<Mode>,
    data: Vec<f32>,
    precision: Precision,
}

impl RealTensor {
    pub fn new(modes: Vec<Mode>, data: Vec<f32>, precision: Precision) -> Result<Self> {
        let len = check_modes(&modes)?;
        if len != data.len() {
            return Err(TensorError::DataLength { expected: len, got: data.len() });
        }
        Ok(RealTensor { modes, data, precision })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> Vec<Label> {
        self.modes.iter().map(|m| m.label.clone()).collect()
    }

    /// Interprets a trailing extent-2 mode as (real, imaginary).
    pub fn into_complex(self) -> Result<DenseTensor> {
        match self.modes.last() {
            Some(m) if m.dim == 2 => {}
            _ => return Err(TensorError::ShapeMismatch("no trailing real/imaginary mode".into())),
        }
        let mut modes = self.modes;
        modes.pop();
        let data = self.data.chunks_exact(2).map(|p| Complex32::new(p[0], p[1])).collect();
        Ok(DenseTensor::from_parts(modes, data, self.precision))
    }

    fn permuted(&self, order: &[Label]) -> RealTensor {
        let strides = row_major_strides(&self.dims());
        let pos: Vec<usize> = order
            .iter()
            .map(|l| self.modes.iter().position(|m| &m.label == l).unwrap())
            .collect();
        let modes: Vec<Mode> = pos.iter().map(|&p| self.modes[p].clone()).collect();
        let dims: Vec<usize> = modes.iter().map(|m| m.dim).collect();
        let st: Vec<usize> = pos.iter().map(|&p| strides[p]).collect();
        RealTensor { data: gather_strided(&self.data, 0, &dims, &st), modes, precision: self.precision }
    }
}

impl DenseTensor {
    /// Real view with the interleaved (real, imaginary) pair as a trailing extent-2 mode.
    pub fn real_view(&self) -> RealTensor {
        let mut modes = self.modes.clone();
        modes.push(Mode::new(REAL_IMAG_LABEL, 2));
        let data = self.data.iter().flat_map(|z| [z.re, z.im]).collect();
        RealTensor { modes, data, precision: self.precision }
    }
}

/// Real einsum with the same summation and rounding rules as [`einsum_pair`].
pub fn einsum_real(spec: &EinsumSpec, a: &RealTensor, b: &RealTensor) -> Result<RealTensor> {
    if a.precision != b.precision {
        return Err(TensorError::PrecisionMismatch(a.precision, b.precision));
    }
    let c = contract(spec, &a.data, &a.modes, &b.data, &b.modes)?;
    check_output_order(spec, &c.modes)?;
    let data = c
        .data
        .into_iter()
        .map(|x| match a.precision {
            Precision::C64 => x as f32,
            Precision::CHalf => round_to_half(x) as f32,
        })
        .collect();
    let raw = RealTensor { modes: c.modes, data, precision: a.precision };
    Ok(raw.permuted(&spec.out))
}

/// Rewrites complex `b` as a real tensor with a new leading extent-2 mode and
/// a new trailing extent-2 mode: slice 0 holds `(Re b, -Im b)`, slice 1 holds
/// `(Im b, Re b)`.
pub fn pad_b_real_imag(b: &DenseTensor) -> RealTensor {
    let n = b.data.len();
    let mut data = vec![0.0f32; 4 * n];
    for (i, z) in b.data.iter().enumerate() {
        data[2 * i] = z.re;
        data[2 * i + 1] = -z.im;
        data[2 * n + 2 * i] = z.im;
        data[2 * n + 2 * i + 1] = z.re;
    }
    let mut modes = Vec::with_capacity(b.modes.len() + 2);
    modes.push(Mode::new(IMAG_PAIR_LABEL, 2));
    modes.extend(b.modes.iter().cloned());
    modes.push(Mode::new(REAL_IMAG_LABEL, 2));
    RealTensor { modes, data, precision: b.precision }
}

/// Complex contraction executed as one real contraction: `A` gains a
/// trailing real/imaginary mode, `B` is replaced by [`pad_b_real_imag`], and
/// the result's trailing mode is read back as the complex pair.
pub fn einsum_complex_as_real(spec: &EinsumSpec, a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    if a.precision != b.precision {
        return Err(TensorError::PrecisionMismatch(a.precision, b.precision));
    }
    for l in a.modes.iter().chain(&b.modes).map(|m| &m.label) {
        if l.as_str() == REAL_IMAG_LABEL || l.as_str() == IMAG_PAIR_LABEL {
            return Err(TensorError::ReservedLabel(l.clone()));
        }
    }
    let reim = Label::new(REAL_IMAG_LABEL);
    let pair = Label::new(IMAG_PAIR_LABEL);
    let mut in_a = spec.in_a.clone();
    in_a.push(reim.clone());
    let mut in_b = vec![pair.clone()];
    in_b.extend(spec.in_b.iter().cloned());
    in_b.push(reim);
    let mut out = spec.out.clone();
    out.push(pair);
    let real_spec = EinsumSpec::new(in_a, in_b, out)?;
    einsum_real(&real_spec, &a.real_view(), &pad_b_real_imag(b))?.into_complex()
}

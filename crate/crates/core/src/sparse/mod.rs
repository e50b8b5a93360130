//! Batched contraction of many tensor pairs selected by index lists: the
//! direct gather path, the padded 2-d index path and chunked execution.
//!
//! `A` carries a leading mode of extent `m_a`, `B` a leading mode of extent
//! `m_b`, and both share the contracted mode `f`. The output is
//! `C[n, free(A), free(B)]` with `C[n] = A[index_a[n]] x B[index_b[n]]`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{BufferPool, ClusterError};
use crate::planner::StepType;
use crate::tensors::{batched_gemm, DenseTensor, Label, Mode, Precision, TensorError};

#[derive(Debug, Error)]
pub enum SparseError {
    #[error("invalid batch spec: {0}")]
    InvalidSpec(String),
    #[error("{side} index {value} at position {position} is out of range 0..{bound}")]
    IndexOutOfRange { side: &'static str, position: usize, value: usize, bound: usize },
    #[error("memory budget of {budget} bytes is below the smallest chunk working set of {needed} bytes")]
    BudgetTooSmall { budget: u64, needed: u64 },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

pub type Result<T> = std::result::Result<T, SparseError>;

/// Label of the occurrence mode of the padding tensor.
pub const SLOT_LABEL: &str = "#slot";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBatchSpec {
    pub index_a: Vec<usize>,
    pub index_b: Vec<usize>,
    pub m_a: usize,
    pub m_b: usize,
    pub contracted: Label,
    /// Label of the output batch mode.
    pub batch_label: Label,
}

impl SparseBatchSpec {
    pub fn new(
        index_a: Vec<usize>,
        index_b: Vec<usize>,
        m_a: usize,
        m_b: usize,
        contracted: impl Into<Label>,
    ) -> Result<Self> {
        let spec = SparseBatchSpec { index_a, index_b, m_a, m_b, contracted: contracted.into(), batch_label: Label::new("n") };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_batch_label(mut self, label: impl Into<Label>) -> Self {
        self.batch_label = label.into();
        self
    }

    pub fn m_n(&self) -> usize {
        self.index_a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.index_a.len() != self.index_b.len() {
            return Err(SparseError::InvalidSpec(format!(
                "index lengths differ: {} vs {}",
                self.index_a.len(),
                self.index_b.len()
            )));
        }
        if self.index_a.is_empty() {
            return Err(SparseError::InvalidSpec("empty batch".into()));
        }
        for (side, index, bound) in [("A", &self.index_a, self.m_a), ("B", &self.index_b, self.m_b)] {
            if let Some((position, &value)) = index.iter().enumerate().find(|(_, &v)| v >= bound) {
                return Err(SparseError::IndexOutOfRange { side, position, value, bound });
            }
        }
        Ok(())
    }

    fn pairs(&self, range: Range<usize>) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.index_a[range.clone()].iter().copied().zip(self.index_b[range].iter().copied())
    }
}

/// `m_a x m_r` table; row `i` lists the `index_b` values paired with the
/// occurrences of `i` in `index_a`, in order, padded with -1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedIndex {
    pub m_a: usize,
    pub m_r: usize,
    pub table: Vec<i64>,
}

impl PaddedIndex {
    pub fn get(&self, row: usize, slot: usize) -> Option<usize> {
        let v = self.table[row * self.m_r + slot];
        (v >= 0).then_some(v as usize)
    }

    /// Row of the flattened `(i, slot)` outer modes holding output `n`.
    pub fn flat_rows(index_a: &[usize], m_r: usize, m_a: usize) -> Vec<usize> {
        let mut seen = vec![0usize; m_a];
        index_a
            .iter()
            .map(|&i| {
                let k = seen[i];
                seen[i] += 1;
                i * m_r + k
            })
            .collect()
    }
}

pub fn build_padded_index(spec: &SparseBatchSpec) -> PaddedIndex {
    let mut count = vec![0usize; spec.m_a];
    for &i in &spec.index_a {
        count[i] += 1;
    }
    let m_r = count.iter().copied().max().unwrap_or(0);
    let mut table = vec![-1i64; spec.m_a * m_r];
    for (row, &j) in PaddedIndex::flat_rows(&spec.index_a, m_r, spec.m_a).into_iter().zip(&spec.index_b) {
        table[row] = j as i64;
    }
    PaddedIndex { m_a: spec.m_a, m_r, table }
}

/// Operands permuted to `[lead, free..., f]`, viewed as `rows x (m|n) x k`.
struct Operands {
    a: DenseTensor,
    b: DenseTensor,
    a_lead: Mode,
    b_lead: Mode,
    free_a: Vec<Mode>,
    free_b: Vec<Mode>,
    m: usize,
    n: usize,
    k: usize,
    precision: Precision,
}

fn arrange(t: &DenseTensor, extent: usize, f: &Label, side: &str) -> Result<(DenseTensor, Mode, Vec<Mode>)> {
    let lead = t
        .modes()
        .first()
        .cloned()
        .ok_or_else(|| SparseError::InvalidSpec(format!("{side} has no leading mode")))?;
    if lead.dim != extent {
        return Err(SparseError::InvalidSpec(format!(
            "leading mode of {side} has extent {}, spec says {extent}",
            lead.dim
        )));
    }
    if &lead.label == f || t.position(f).is_none() {
        return Err(SparseError::InvalidSpec(format!("{side} lacks a non-leading mode `{f}`")));
    }
    let free: Vec<Mode> = t.modes()[1..].iter().filter(|m| &m.label != f).cloned().collect();
    let mut order = vec![lead.label.clone()];
    order.extend(free.iter().map(|m| m.label.clone()));
    order.push(f.clone());
    Ok((t.permuted(&order)?, lead, free))
}

impl Operands {
    fn new(a: &DenseTensor, b: &DenseTensor, spec: &SparseBatchSpec) -> Result<Self> {
        spec.validate()?;
        if a.precision() != b.precision() {
            return Err(TensorError::PrecisionMismatch(a.precision(), b.precision()).into());
        }
        let f = &spec.contracted;
        let (ka, kb) = (a.dim_of(f), b.dim_of(f));
        if let (Some(left), Some(right)) = (ka, kb) {
            if left != right {
                return Err(TensorError::DimMismatch { label: f.clone(), left, right }.into());
            }
        }
        let (pa, a_lead, free_a) = arrange(a, spec.m_a, f, "A")?;
        let (pb, b_lead, free_b) = arrange(b, spec.m_b, f, "B")?;
        Ok(Operands {
            m: free_a.iter().map(|m| m.dim).product(),
            n: free_b.iter().map(|m| m.dim).product(),
            k: a.dim_of(f).expect("checked"),
            precision: a.precision(),
            a: pa,
            b: pb,
            a_lead,
            b_lead,
            free_a,
            free_b,
        })
    }

    fn output_modes(&self, batch: &Label, rows: usize) -> Vec<Mode> {
        let mut modes = vec![Mode::new(batch.clone(), rows)];
        modes.extend(self.free_a.iter().cloned());
        modes.extend(self.free_b.iter().cloned());
        modes
    }

    fn row_bytes(&self) -> (u64, u64, u64) {
        let e = self.precision.complex_bytes();
        ((self.m * self.k) as u64 * e, (self.n * self.k) as u64 * e, (self.m * self.n) as u64 * e)
    }

    fn contract(&self, spec: &SparseBatchSpec, range: Range<usize>) -> Vec<num_complex::Complex32> {
        batched_gemm(self.a.data(), self.b.data(), spec.pairs(range), (self.m, self.n, self.k), self.precision)
    }
}

/// Direct path: each output row is the contraction of the indexed slices.
pub fn gather_contract(a: &DenseTensor, b: &DenseTensor, spec: &SparseBatchSpec) -> Result<DenseTensor> {
    let ops = Operands::new(a, b, spec)?;
    let data = ops.contract(spec, 0..spec.m_n());
    Ok(DenseTensor::new(ops.output_modes(&spec.batch_label, spec.m_n()), data, ops.precision)?)
}

fn padding_from(ops: &Operands, index: &PaddedIndex) -> Result<DenseTensor> {
    let row = ops.n * ops.k;
    let mut data = vec![num_complex::Complex32::new(0.0, 0.0); index.m_a * index.m_r * row];
    for (dst, &j) in data.chunks_exact_mut(row).zip(&index.table) {
        if j >= 0 {
            let j = j as usize;
            dst.copy_from_slice(&ops.b.data()[j * row..(j + 1) * row]);
        }
    }
    let mut modes = vec![Mode::new(ops.b_lead.label.clone(), index.m_a), Mode::new(SLOT_LABEL, index.m_r)];
    modes.extend(ops.free_b.iter().cloned());
    modes.push(Mode::new(ops.b.modes().last().expect("f is present").label.clone(), ops.k));
    Ok(DenseTensor::new(modes, data, ops.precision)?)
}

/// Builds `B_P[i, slot, free(B), f]` from the rows of `B` named by the
/// padded index; -1 entries become zero blocks.
pub fn padding_tensor(a: &DenseTensor, b: &DenseTensor, spec: &SparseBatchSpec) -> Result<(DenseTensor, PaddedIndex)> {
    let ops = Operands::new(a, b, spec)?;
    let index = build_padded_index(spec);
    Ok((padding_from(&ops, &index)?, index))
}

/// Padded path: `C_P = A x B_P` batched over the leading mode of `A`, then
/// the valid rows of the flattened `(i, slot)` modes are extracted.
pub fn padded_contract(a: &DenseTensor, b: &DenseTensor, spec: &SparseBatchSpec) -> Result<DenseTensor> {
    let ops = Operands::new(a, b, spec)?;
    let index = build_padded_index(spec);
    let bp = padding_from(&ops, &index)?;
    let cp = batched_gemm(ops.a.data(), bp.data(), (0..spec.m_a).map(|i| (i, i)), (ops.m, index.m_r * ops.n, ops.k), ops.precision);
    let mut modes = vec![ops.a_lead.clone()];
    modes.extend(ops.free_a.iter().cloned());
    modes.push(Mode::new(SLOT_LABEL, index.m_r));
    modes.extend(ops.free_b.iter().cloned());
    let cp = DenseTensor::new(modes, cp, ops.precision)?;
    let mut order = vec![ops.a_lead.label.clone(), Label::new(SLOT_LABEL)];
    order.extend(ops.free_a.iter().chain(&ops.free_b).map(|m| m.label.clone()));
    let flat = cp.permuted(&order)?;
    let row = ops.m * ops.n;
    let mut data = Vec::with_capacity(spec.m_n() * row);
    for r in PaddedIndex::flat_rows(&spec.index_a, index.m_r, spec.m_a) {
        data.extend_from_slice(&flat.data()[r * row..(r + 1) * row]);
    }
    Ok(DenseTensor::new(ops.output_modes(&spec.batch_label, spec.m_n()), data, ops.precision)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChunkedOutput {
    pub tensor: DenseTensor,
    pub chunks: usize,
    pub rows_per_chunk: usize,
    pub working_set_bytes: u64,
}

/// Bytes resident while one chunk of `rows` outputs runs: the gathered `A`
/// rows, all of `B` and the output rows.
fn working_set(ops: &Operands, rows: usize) -> u64 {
    let (ra, _, rc) = ops.row_bytes();
    rows as u64 * (ra + rc) + ops.b.nbytes()
}

/// Runs the direct path in the fewest power-of-two chunks whose working set
/// fits `mem_budget`, drawing every buffer from the pool's split fragments.
pub fn chunked_execute(
    a: &DenseTensor,
    b: &DenseTensor,
    spec: &SparseBatchSpec,
    mem_budget: u64,
    pool: &mut BufferPool,
) -> Result<ChunkedOutput> {
    let ops = Operands::new(a, b, spec)?;
    let m_n = spec.m_n();
    let max_chunks = m_n.next_power_of_two();
    let chunks = std::iter::successors(Some(1usize), |c| Some(c * 2))
        .take_while(|&c| c <= max_chunks)
        .find(|&c| working_set(&ops, m_n.div_ceil(c)) <= mem_budget)
        .ok_or(SparseError::BudgetTooSmall { budget: mem_budget, needed: working_set(&ops, 1) })?;
    let rows_per_chunk = m_n.div_ceil(chunks);
    let (ra, _, rc) = ops.row_bytes();

    let b_handle = pool.alloc(StepType::Split, ops.b.nbytes())?;
    let mut data = Vec::with_capacity(m_n * ops.m * ops.n);
    for j in 0..chunks {
        let range = j * m_n / chunks..(j + 1) * m_n / chunks;
        if range.is_empty() {
            continue;
        }
        let rows = range.len() as u64;
        let a_handle = pool.alloc(StepType::Split, rows * ra)?;
        let c_handle = pool.alloc(StepType::Split, rows * rc)?;
        data.extend(ops.contract(spec, range));
        pool.release(a_handle);
        pool.release(c_handle);
    }
    pool.release(b_handle);
    let tensor = DenseTensor::new(ops.output_modes(&spec.batch_label, m_n), data, ops.precision)?;
    Ok(ChunkedOutput { tensor, chunks, rows_per_chunk, working_set_bytes: working_set(&ops, rows_per_chunk) })
}

/// Working set of a single unchunked run, for sizing budgets.
pub fn full_working_set(a: &DenseTensor, b: &DenseTensor, spec: &SparseBatchSpec) -> Result<u64> {
    let ops = Operands::new(a, b, spec)?;
    Ok(working_set(&ops, spec.m_n()))
}

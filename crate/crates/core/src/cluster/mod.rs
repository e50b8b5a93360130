//! Simulated multi-node execution: sharded stem tensors, hybrid all-to-all
//! communication with optional quantization, stem buffer management,
//! recomputation and the analytic time and energy models.

mod buffers;
mod dist;
mod hybrid;
mod report;
mod spec;

use thiserror::Error;

use crate::planner::{PlannerError, StepType};
use crate::quantizer::QuantError;
use crate::tensors::TensorError;

pub use self::buffers::{BufferHandle, BufferPool, PoolEvent, PoolOp};
pub use self::dist::{DistTensor, Partition, Traffic};
pub use self::hybrid::{hybrid_execute, recompute_execute, RecomputeConfig};
pub use self::report::{CommKind, RecomputeSummary, RunReport, TraceRow};
pub use self::spec::{model_all2all_time, model_energy, ClusterSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("invalid cluster spec: {0}")]
    InvalidSpec(String),
    #[error("all-to-all needs at least 2 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("plan and cluster do not match: {0}")]
    Incompatible(String),
    #[error("a shard of {bytes} bytes exceeds device memory of {device_mem} bytes")]
    ShardOverflow { bytes: u64, device_mem: u64 },
    #[error("partition modes exhausted: {0}")]
    PartitionExhausted(String),
    #[error("{step_type:?} allocation of {requested} bytes exceeds the {available} bytes available")]
    BufferOverflow { step_type: StepType, requested: u64, available: u64 },
    #[error("recomputation precondition violated: {0}")]
    Recompute(String),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Quant(#[from] QuantError),
}

pub type Result<T> = std::result::Result<T, ClusterError>;

//! Contraction planning: trees and their cost, greedy and annealed search
//! under a memory limit, slicing, stem detection and partition modes.

mod anneal;
mod exec;
mod greedy;
mod plan;
mod slicing;
mod stem;
mod topology;
mod tree;

use thiserror::Error;

pub use self::anneal::{anneal_search, anneal_topology, SearchConfig, SearchOutcome};
pub use self::exec::{contract_subtask, contract_tree};
pub use self::greedy::greedy_tree;
pub use self::plan::{plan_network, Plan};
pub use self::slicing::{slice, slice_to_fit, SlicePlan};
pub use self::stem::{assign_parallel_modes, find_stem, StemAnnotation, StepType};
pub use self::topology::Topology;
pub use self::tree::{cost, cost_sliced, node_costs, ContractionTree, CostModel, NodeCost};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("inconsistent network: {0}")]
    InconsistentNetwork(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("memory limit of {limit_bytes} bytes is below the largest input ({needed_bytes} bytes)")]
    MemoryTooSmall { limit_bytes: u64, needed_bytes: u64 },
    #[error("infeasible memory limit: {0}")]
    Infeasible(String),
    #[error("slice budget {0} is not a power of two")]
    NotPowerOfTwo(u64),
    #[error("slicing {requested} edges requested but only {available} closed edges exist")]
    BudgetExceedsEdges { requested: usize, available: usize },
    #[error("no feasible partition: {0}")]
    ParallelInfeasible(String),
    #[error("malformed plan JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Tensor(#[from] crate::tensors::TensorError),
}

pub type Result<T> = std::result::Result<T, PlannerError>;

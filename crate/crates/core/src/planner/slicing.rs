use serde::{Deserialize, Serialize};

use super::topology::{contains, edges_of, Topology};
use super::tree::{ContractionTree, NodeSets};
use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::tensors::Label;

/// Fixed (broken) edges; subtask `i` fixes them to the row-major digits of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlicePlan {
    pub sliced_edges: Vec<Label>,
    pub dims: Vec<usize>,
}

impl SlicePlan {
    pub fn none() -> Self {
        SlicePlan { sliced_edges: Vec::new(), dims: Vec::new() }
    }

    pub fn from_edges(net: &TensorNetworkGraph, edges: Vec<Label>) -> Result<Self> {
        let dims = edges
            .iter()
            .map(|l| net.dim_of(l).ok_or_else(|| PlannerError::InconsistentNetwork(format!("unknown edge `{l}`"))))
            .collect::<Result<_>>()?;
        Ok(SlicePlan { sliced_edges: edges, dims })
    }

    pub fn n_subtasks(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn assignment(&self, subtask: usize) -> Vec<(Label, usize)> {
        let mut rest = subtask;
        let mut out = vec![(Label::new(""), 0); self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = (self.sliced_edges[k].clone(), rest % self.dims[k]);
            rest /= self.dims[k];
        }
        out
    }

    pub fn assignments(&self) -> impl Iterator<Item = Vec<(Label, usize)>> + '_ {
        (0..self.n_subtasks()).map(|i| self.assignment(i))
    }

    /// The network with every sliced edge fixed per `assignment`.
    pub fn subnetwork(&self, net: &TensorNetworkGraph, assignment: &[(Label, usize)]) -> Result<TensorNetworkGraph> {
        let tensors = net
            .tensors
            .iter()
            .map(|t| {
                let fixed: Vec<(Label, usize)> =
                    assignment.iter().filter(|(l, _)| t.position(l).is_some()).cloned().collect();
                if fixed.is_empty() {
                    Ok(t.clone())
                } else {
                    t.fix(&fixed)
                }
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(TensorNetworkGraph::new(tensors, net.open_legs.clone()))
    }
}

/// Picks the next edge to slice: the closed dim-2 edge whose removal gives
/// the smallest largest tensor, then the fewest flops, then the smallest
/// label. With `focus`, only edges of currently largest tensors compete.
fn best_edge(topo: &Topology, sets: &NodeSets, tree: &ContractionTree, mask: &[u64], focus: bool) -> Option<usize> {
    let n = tree.n_nodes();
    let sizes: Vec<f64> = (0..n).map(|v| topo.size(sets.set(v), mask)).collect();
    let biggest = sizes.iter().cloned().fold(0.0, f64::max);
    let mut candidates: Vec<usize> = (0..topo.n_edges())
        .filter(|&e| topo.dim(e) == 2 && !topo.is_open(e) && !contains(mask, e))
        .collect();
    if focus {
        candidates.retain(|&e| (0..n).any(|v| sizes[v] == biggest && contains(sets.set(v), e)));
    }
    let words = topo.words();
    let mut union = vec![0u64; words];
    let mut best: Option<(f64, f64, usize)> = None;
    let mut trial = mask.to_vec();
    for e in candidates {
        trial[e / 64] |= 1 << (e % 64);
        let mut max_size = 0.0f64;
        let mut flops = 0.0;
        for v in 0..n {
            max_size = max_size.max(topo.size(sets.set(v), &trial));
            if let Some([l, r]) = tree.children(v) {
                for k in 0..words {
                    union[k] = sets.set(l)[k] | sets.set(r)[k];
                }
                flops += topo.size(&union, &trial);
            }
        }
        trial[e / 64] &= !(1 << (e % 64));
        let better = match best {
            None => true,
            // edges arrive in label order, so strict comparison keeps the smallest label on ties
            Some((m, f, _)) => max_size < m || (max_size == m && flops < f),
        };
        if better {
            best = Some((max_size, flops, e));
        }
    }
    best.map(|b| b.2)
}

/// Slices until every tensor has at most `cap_elements` elements. Fails once
/// more than `max_sliced` edges would be needed.
pub fn slice_to_fit(
    topo: &Topology,
    tree: &ContractionTree,
    cap_elements: f64,
    max_sliced: usize,
) -> Result<Vec<Label>> {
    let zero = vec![0u64; topo.words()];
    let sets = NodeSets::compute(topo, tree, &zero)?;
    let mut mask = zero;
    let mut sliced = Vec::new();
    loop {
        let biggest = (0..tree.n_nodes()).map(|v| topo.size(sets.set(v), &mask)).fold(0.0, f64::max);
        if biggest <= cap_elements {
            return Ok(sliced);
        }
        if sliced.len() >= max_sliced {
            return Err(PlannerError::Infeasible(format!(
                "largest tensor still has {biggest} elements after slicing {max_sliced} edges"
            )));
        }
        let e = best_edge(topo, &sets, tree, &mask, true)
            .ok_or_else(|| PlannerError::Infeasible(format!("no edge left to slice; largest tensor has {biggest} elements")))?;
        mask[e / 64] |= 1 << (e % 64);
        sliced.push(topo.label(e).clone());
    }
}

/// Slices `log2(budget_subtasks)` edges, chosen greedily.
pub fn slice(net: &TensorNetworkGraph, tree: &ContractionTree, budget_subtasks: usize) -> Result<SlicePlan> {
    if !budget_subtasks.is_power_of_two() {
        return Err(PlannerError::NotPowerOfTwo(budget_subtasks as u64));
    }
    let k = budget_subtasks.trailing_zeros() as usize;
    let topo = Topology::from_network(net)?;
    let zero = vec![0u64; topo.words()];
    let sets = NodeSets::compute(&topo, tree, &zero)?;
    let available = (0..topo.n_edges()).filter(|&e| topo.dim(e) == 2 && !topo.is_open(e)).count();
    if k > available {
        return Err(PlannerError::BudgetExceedsEdges { requested: k, available });
    }
    let mut mask = zero;
    let mut edges = Vec::with_capacity(k);
    for _ in 0..k {
        let e = best_edge(&topo, &sets, tree, &mask, false).expect("enough edges checked above");
        mask[e / 64] |= 1 << (e % 64);
        edges.push(topo.label(e).clone());
    }
    debug_assert_eq!(edges_of(&mask).count(), k);
    SlicePlan::from_edges(net, edges)
}

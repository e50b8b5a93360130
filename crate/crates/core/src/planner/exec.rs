use super::slicing::SlicePlan;
use super::tree::ContractionTree;
use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::tensors::{einsum_pair, DenseTensor, EinsumSpec};

/// Contracts one (already sliced) network along `tree`; the result is
/// ordered by the network's open legs.
pub fn contract_subtask(net: &TensorNetworkGraph, tree: &ContractionTree) -> Result<DenseTensor> {
    if tree.n_leaves() != net.tensors.len() {
        return Err(PlannerError::InvalidTree(format!(
            "tree has {} leaves, network {}",
            tree.n_leaves(),
            net.tensors.len()
        )));
    }
    let mut slots: Vec<Option<DenseTensor>> = net.tensors.iter().cloned().map(Some).collect();
    slots.resize(tree.n_nodes(), None);
    for v in tree.internal_nodes() {
        let [l, r] = tree.children(v).expect("internal node");
        let a = slots[l].take().expect("post-order evaluation");
        let b = slots[r].take().expect("post-order evaluation");
        let spec = EinsumSpec::pairwise(&a.labels(), &b.labels())?;
        slots[v] = Some(einsum_pair(&spec, &a, &b)?);
    }
    let root = slots[tree.root()].take().expect("root computed");
    Ok(root.permuted(&net.open_legs)?)
}

/// Sums the subtask results over every slice assignment, in assignment order.
pub fn contract_tree(net: &TensorNetworkGraph, tree: &ContractionTree, slices: &SlicePlan) -> Result<DenseTensor> {
    let mut total: Option<DenseTensor> = None;
    for assignment in slices.assignments() {
        let part = contract_subtask(&slices.subnetwork(net, &assignment)?, tree)?;
        total = Some(match total {
            None => part,
            Some(acc) => acc.add(&part)?,
        });
    }
    total.ok_or_else(|| PlannerError::InvalidTree("no subtasks".into()))
}

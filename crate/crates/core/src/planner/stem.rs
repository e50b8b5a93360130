use serde::{Deserialize, Serialize};

use super::tree::{ContractionTree, NodeCost};
use super::{PlannerError, Result};
use crate::cluster::ClusterSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepType {
    Stem,
    Split,
    Common,
}

/// The dominant leaf-to-root path of a tree and the type of every step.
#[derive(Clone, Debug, PartialEq)]
pub struct StemAnnotation {
    /// Node ids from a leaf up to the root.
    pub path: Vec<usize>,
    /// Indexed by `node - n_leaves`.
    pub step_types: Vec<StepType>,
    pub n_leaves: usize,
    pub n_inter: u32,
    pub n_intra: u32,
}

impl StemAnnotation {
    pub fn step_type(&self, node: usize) -> Option<StepType> {
        node.checked_sub(self.n_leaves).and_then(|k| self.step_types.get(k).copied())
    }

    pub fn mark_split(&mut self, node: usize) {
        if let Some(k) = node.checked_sub(self.n_leaves) {
            self.step_types[k] = StepType::Split;
        }
    }

    pub fn on_path(&self, node: usize) -> bool {
        self.path.contains(&node)
    }

    pub fn split_steps(&self) -> Vec<usize> {
        self.nodes_of(StepType::Split)
    }

    pub fn nodes_of(&self, kind: StepType) -> Vec<usize> {
        (0..self.step_types.len())
            .filter(|&k| self.step_types[k] == kind)
            .map(|k| k + self.n_leaves)
            .collect()
    }
}

/// Follows the heaviest root-to-leaf path, where a path weighs the sum of
/// its nodes' flops; ties go to the left child. A path step is `Stem` when
/// the path child is the larger input, everything else is `Common`.
pub fn find_stem(tree: &ContractionTree, costs: &[NodeCost]) -> StemAnnotation {
    let n = tree.n_nodes();
    let mut heaviest = vec![0.0f64; n];
    for v in tree.internal_nodes() {
        let [l, r] = tree.children(v).expect("internal node");
        heaviest[v] = costs[v].flops + heaviest[l].max(heaviest[r]);
    }
    let mut down = vec![tree.root()];
    while let Some([l, r]) = tree.children(*down.last().expect("non-empty")) {
        down.push(if heaviest[r] > heaviest[l] { r } else { l });
    }
    down.reverse();
    let mut step_types = vec![StepType::Common; tree.n_leaves() - 1];
    for w in down.windows(2) {
        let (child, node) = (w[0], w[1]);
        let [l, r] = tree.children(node).expect("path parent is internal");
        let other = if l == child { r } else { l };
        if costs[child].elements >= costs[other].elements {
            step_types[node - tree.n_leaves()] = StepType::Stem;
        }
    }
    StemAnnotation { path: down, step_types, n_leaves: tree.n_leaves(), n_inter: 0, n_intra: 0 }
}

/// Smallest shard count `2^(N_inter + N_intra)` for which the largest stem
/// tensor fits `device_mem`, filling devices within a node before nodes.
pub fn assign_parallel_modes(
    stem: &StemAnnotation,
    costs: &[NodeCost],
    cluster: &ClusterSpec,
    device_mem: u64,
    dtype_bytes: u64,
) -> Result<(u32, u32)> {
    let largest = stem
        .path
        .iter()
        .map(|&v| &costs[v])
        .max_by(|a, b| a.elements.cmp(&b.elements).then(b.node.cmp(&a.node)))
        .expect("path is never empty");
    let bytes = largest.elements as u128 * dtype_bytes as u128;
    let mut k = 0u32;
    while bytes > (device_mem as u128) << k {
        k += 1;
    }
    let binary_rank = largest.modes.iter().filter(|m| m.dim == 2).count() as u32;
    if k > binary_rank {
        return Err(PlannerError::ParallelInfeasible(format!(
            "stem tensor of {bytes} bytes needs {k} partition modes but has {binary_rank}"
        )));
    }
    let max_intra = usize::BITS - 1 - cluster.devices_per_node.leading_zeros();
    let n_intra = k.min(max_intra);
    let n_inter = k - n_intra;
    if 1usize << n_inter > cluster.nodes {
        return Err(PlannerError::ParallelInfeasible(format!(
            "needs {} nodes, cluster has {}",
            1usize << n_inter,
            cluster.nodes
        )));
    }
    Ok((n_inter, n_intra))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::TensorNetworkGraph;
    use crate::planner::topology::Topology;
    use crate::planner::tree::node_costs;
    use crate::tensors::{DenseTensor, Mode, Precision};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_costs(n: usize) -> (ContractionTree, Vec<NodeCost>) {
        let tensors = (0..n)
            .map(|k| {
                DenseTensor::zeros(vec![Mode::new(format!("e{k}"), 2), Mode::new(format!("e{}", k + 1), 2)], Precision::C64)
                    .unwrap()
            })
            .collect();
        let net = TensorNetworkGraph::new(tensors, vec!["e0".into(), format!("e{n}").into()]);
        let tree = ContractionTree::left_deep(n);
        let costs = node_costs(&tree, &Topology::from_network(&net).unwrap(), &[]).unwrap();
        (tree, costs)
    }

    fn synthetic_costs(tree: &ContractionTree, flops: &[f64]) -> Vec<NodeCost> {
        (0..tree.n_nodes())
            .map(|v| NodeCost { node: v, modes: vec![Mode::new("x", 2)], elements: 2, flops: flops[v] })
            .collect()
    }

    #[test]
    fn left_deep_spine() {
        let (tree, costs) = chain_costs(5);
        let stem = find_stem(&tree, &costs);
        assert_eq!(stem.path, vec![0, 5, 6, 7, 8]);
        assert_eq!(stem.nodes_of(StepType::Stem), vec![5, 6, 7, 8]);
    }

    #[test]
    fn balanced_tie_goes_left() {
        let tree = ContractionTree::new(4, vec![[0, 1], [2, 3], [4, 5]]).unwrap();
        let stem = find_stem(&tree, &synthetic_costs(&tree, &[0.0, 0.0, 0.0, 0.0, 8.0, 8.0, 16.0]));
        assert_eq!(stem.path, vec![0, 4, 6]);
        assert_eq!(stem.path.len(), 3);
        assert_eq!(stem.step_type(5), Some(StepType::Common));
    }

    #[test]
    fn split_marking() {
        let (tree, costs) = chain_costs(3);
        let mut stem = find_stem(&tree, &costs);
        stem.mark_split(4);
        assert_eq!(stem.split_steps(), vec![4]);
        assert_eq!(stem.step_type(0), None);
    }

    fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> ContractionTree {
        let mut live: Vec<usize> = (0..n).collect();
        let mut merges = Vec::new();
        while live.len() > 1 {
            let a = live.swap_remove(rng.random_range(0..live.len()));
            let b = live.swap_remove(rng.random_range(0..live.len()));
            merges.push([a, b]);
            live.push(n + merges.len() - 1);
        }
        ContractionTree::new(n, merges).unwrap()
    }

    #[test]
    fn heaviest_path_by_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(2..=12);
            let tree = random_tree(n, &mut rng);
            let flops: Vec<f64> =
                (0..tree.n_nodes()).map(|v| if v < n { 0.0 } else { rng.random_range(1..100) as f64 }).collect();
            let stem = find_stem(&tree, &synthetic_costs(&tree, &flops));
            let parents = tree.parents();
            let path_flops = |leaf: usize| {
                let mut total = 0.0;
                let mut v = parents[leaf];
                while let Some(p) = v {
                    total += flops[p];
                    v = parents[p];
                }
                total
            };
            let ours = path_flops(stem.path[0]);
            let total: f64 = flops.iter().sum();
            for leaf in 0..n {
                assert!(ours >= path_flops(leaf));
            }
            for v in tree.internal_nodes() {
                if flops[v] > 0.5 * total {
                    assert!(stem.on_path(v));
                }
            }
            assert_eq!(*stem.path.last().unwrap(), tree.root());
        }
    }

    #[test]
    fn parallel_mode_arithmetic() {
        let stem = StemAnnotation { path: vec![0], step_types: vec![], n_leaves: 1, n_inter: 0, n_intra: 0 };
        let modes: Vec<Mode> = (0..10).map(|i| Mode::new(format!("m{i}"), 2)).collect();
        let costs = vec![NodeCost { node: 0, modes, elements: 1 << 10, flops: 0.0 }];
        let (inter, intra) = assign_parallel_modes(&stem, &costs, &ClusterSpec::new(4, 8), 1 << 8, 1).unwrap();
        assert_eq!(inter + intra, 2);
        assert_eq!((inter, intra), (0, 2));
        assert_eq!(assign_parallel_modes(&stem, &costs, &ClusterSpec::new(1, 1), 1 << 10, 1).unwrap(), (0, 0));
        assert_eq!(assign_parallel_modes(&stem, &costs, &ClusterSpec::new(2, 2), 1 << 8, 1).unwrap(), (1, 1));
        assert!(assign_parallel_modes(&stem, &costs, &ClusterSpec::new(1, 2), 1 << 8, 1).is_err());
        assert!(assign_parallel_modes(&stem, &costs, &ClusterSpec::new(1 << 12, 1), 1, 8).is_err());
    }
}

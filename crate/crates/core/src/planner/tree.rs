use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::topology::Topology;
use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::tensors::{Label, Mode};

/// Binary contraction schedule. Leaves `0..n` are network tensor ids;
/// internal nodes are numbered `n..2n-1` in left-first post-order, so every
/// child id is smaller than its parent's and the root is the last node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionTree {
    n_leaves: usize,
    children: Vec<[usize; 2]>,
}

impl ContractionTree {
    /// Builds a tree from merge pairs in SSA form: merge `k` creates node
    /// `n_leaves + k` from two earlier, not yet merged nodes.
    pub fn new(n_leaves: usize, merges: Vec<[usize; 2]>) -> Result<Self> {
        if n_leaves == 0 {
            return Err(PlannerError::InvalidTree("no leaves".into()));
        }
        if merges.len() + 1 != n_leaves {
            return Err(PlannerError::InvalidTree(format!("{} merges for {} leaves", merges.len(), n_leaves)));
        }
        let mut used = vec![false; 2 * n_leaves - 1];
        for (k, pair) in merges.iter().enumerate() {
            let id = n_leaves + k;
            if pair[0] == pair[1] {
                return Err(PlannerError::InvalidTree(format!("node {id} merges {} with itself", pair[0])));
            }
            for &c in pair {
                if c >= id || used[c] {
                    return Err(PlannerError::InvalidTree(format!("node {c} cannot be merged into {id}")));
                }
                used[c] = true;
            }
        }
        let raw = ContractionTree { n_leaves, children: merges };
        Ok(raw.canonical())
    }

    /// `((0,1),2),...` chain.
    pub fn left_deep(n_leaves: usize) -> Self {
        let merges = (1..n_leaves)
            .map(|k| if k == 1 { [0, 1] } else { [n_leaves + k - 2, k] })
            .collect();
        ContractionTree::new(n_leaves, merges).expect("chain is valid")
    }

    fn canonical(&self) -> Self {
        let mut merges = Vec::with_capacity(self.children.len());
        let mut stack = vec![(self.root(), false)];
        let mut new_id = vec![usize::MAX; self.n_nodes()];
        while let Some((node, expanded)) = stack.pop() {
            match self.children(node) {
                None => new_id[node] = node,
                Some([l, r]) if expanded => {
                    new_id[node] = self.n_leaves + merges.len();
                    merges.push([new_id[l], new_id[r]]);
                }
                Some([l, r]) => {
                    stack.push((node, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
            }
        }
        ContractionTree { n_leaves: self.n_leaves, children: merges }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn n_nodes(&self) -> usize {
        2 * self.n_leaves - 1
    }

    pub fn root(&self) -> usize {
        self.n_nodes() - 1
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    pub fn children(&self, node: usize) -> Option<[usize; 2]> {
        node.checked_sub(self.n_leaves).map(|k| self.children[k])
    }

    pub fn internal_nodes(&self) -> std::ops::Range<usize> {
        self.n_leaves..self.n_nodes()
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut p = vec![None; self.n_nodes()];
        for node in self.internal_nodes() {
            for c in self.children[node - self.n_leaves] {
                p[c] = Some(node);
            }
        }
        p
    }

    /// Leaf ids under `node`, left to right.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            match self.children(n) {
                None => out.push(n),
                Some([l, r]) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
        out
    }

    /// Nested-array form: a leaf is its id, an internal node `[left, right]`.
    pub fn to_nested(&self) -> Value {
        fn go(t: &ContractionTree, node: usize) -> Value {
            match t.children(node) {
                None => Value::from(node),
                Some([l, r]) => Value::Array(vec![go(t, l), go(t, r)]),
            }
        }
        go(self, self.root())
    }

    pub fn from_nested(v: &Value) -> Result<Self> {
        fn go(v: &Value, leaves: &mut Vec<usize>, merges: &mut Vec<[Node; 2]>) -> Result<Node> {
            match v {
                Value::Number(n) => {
                    let id = n.as_u64().ok_or_else(|| PlannerError::InvalidTree(format!("bad leaf `{n}`")))? as usize;
                    leaves.push(id);
                    Ok(Node::Leaf(id))
                }
                Value::Array(items) if items.len() == 2 => {
                    let l = go(&items[0], leaves, merges)?;
                    let r = go(&items[1], leaves, merges)?;
                    merges.push([l, r]);
                    Ok(Node::Internal(merges.len() - 1))
                }
                other => Err(PlannerError::InvalidTree(format!("unexpected tree element `{other}`"))),
            }
        }
        #[derive(Clone, Copy)]
        enum Node {
            Leaf(usize),
            Internal(usize),
        }
        let (mut leaves, mut merges) = (Vec::new(), Vec::new());
        go(v, &mut leaves, &mut merges)?;
        let n = leaves.len();
        let mut sorted = leaves.clone();
        sorted.sort_unstable();
        if sorted.iter().enumerate().any(|(i, &l)| i != l) {
            return Err(PlannerError::InvalidTree("leaves are not a permutation of 0..n".into()));
        }
        let id = |x: Node| match x {
            Node::Leaf(l) => l,
            Node::Internal(k) => n + k,
        };
        ContractionTree::new(n, merges.into_iter().map(|[a, b]| [id(a), id(b)]).collect())
    }
}

/// Per-node edge sets with cached sizes, computed bottom-up.
#[derive(Clone, Debug)]
pub(crate) struct NodeSets {
    words: usize,
    sets: Vec<u64>,
    pub size: Vec<f64>,
    /// Product of dims over the union of both children's edges; 0 for leaves.
    pub union: Vec<f64>,
}

impl NodeSets {
    pub fn compute(topo: &Topology, tree: &ContractionTree, mask: &[u64]) -> Result<Self> {
        if tree.n_leaves() != topo.n_leaves() {
            return Err(PlannerError::InvalidTree(format!(
                "tree has {} leaves, network {}",
                tree.n_leaves(),
                topo.n_leaves()
            )));
        }
        let w = topo.words();
        let n = tree.n_nodes();
        let mut sets = vec![0u64; n * w];
        let mut size = vec![0.0; n];
        let mut union = vec![0.0; n];
        let mut tmp = vec![0u64; w];
        for node in 0..n {
            match tree.children(node) {
                None => sets[node * w..(node + 1) * w].copy_from_slice(topo.leaf_set(node)),
                Some([l, r]) => {
                    for k in 0..w {
                        let (a, b) = (sets[l * w + k], sets[r * w + k]);
                        sets[node * w + k] = a ^ b;
                        tmp[k] = a | b;
                    }
                    union[node] = topo.size(&tmp, mask);
                }
            }
            size[node] = topo.size(&sets[node * w..(node + 1) * w], mask);
        }
        let root = &sets[(n - 1) * w..];
        if root != topo.open_set() {
            return Err(PlannerError::InvalidTree("root modes differ from the open legs".into()));
        }
        Ok(NodeSets { words: w, sets, size, union })
    }

    pub fn set(&self, node: usize) -> &[u64] {
        &self.sets[node * self.words..(node + 1) * self.words]
    }
}

/// Time and space complexity of a (possibly sliced) contraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Total real FLOPs over all subtasks, 8 per complex multiply-add.
    pub flops: f64,
    /// Largest tensor of one subtask, leaves included.
    pub max_elements: u64,
    pub dtype_bytes: u64,
    /// `ceil(log2(max_elements))`.
    pub treewidth: u32,
    pub subtasks: u64,
}

impl CostModel {
    pub fn max_bytes(&self) -> u64 {
        self.max_elements * self.dtype_bytes
    }

    pub fn flops_per_subtask(&self) -> f64 {
        self.flops / self.subtasks as f64
    }
}

/// One node of a costed tree.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeCost {
    pub node: usize,
    pub modes: Vec<Mode>,
    pub elements: u64,
    pub flops: f64,
}

fn dtype_bytes_of(net: &TensorNetworkGraph) -> u64 {
    net.tensors.first().map(|t| t.precision().complex_bytes()).unwrap_or(8)
}

/// Unsliced cost of `tree` over `net`.
pub fn cost(tree: &ContractionTree, net: &TensorNetworkGraph) -> Result<CostModel> {
    let topo = Topology::from_network(net)?;
    cost_sliced(tree, &topo, &[], dtype_bytes_of(net))
}

/// Cost with the `sliced` edges fixed; flops are summed over every subtask.
pub fn cost_sliced(tree: &ContractionTree, topo: &Topology, sliced: &[Label], dtype_bytes: u64) -> Result<CostModel> {
    let mask = topo.mask_of(sliced)?;
    let sets = NodeSets::compute(topo, tree, &mask)?;
    Ok(cost_from_sets(topo, &sets, &mask, dtype_bytes))
}

pub(crate) fn cost_from_sets(topo: &Topology, sets: &NodeSets, mask: &[u64], dtype_bytes: u64) -> CostModel {
    let subtasks = super::topology::edges_of(mask).map(|e| topo.dim(e) as u64).product::<u64>();
    let per_task: f64 = sets.union.iter().sum::<f64>() * 8.0;
    let max_elements = sets.size.iter().cloned().fold(1.0, f64::max).round() as u64;
    CostModel {
        flops: per_task * subtasks as f64,
        max_elements,
        dtype_bytes,
        treewidth: (max_elements as f64).log2().ceil() as u32,
        subtasks,
    }
}

/// Per-node labels, element counts and flops (per subtask).
pub fn node_costs(tree: &ContractionTree, topo: &Topology, sliced: &[Label]) -> Result<Vec<NodeCost>> {
    let mask = topo.mask_of(sliced)?;
    let sets = NodeSets::compute(topo, tree, &mask)?;
    Ok((0..tree.n_nodes())
        .map(|node| {
            let mut set = sets.set(node).to_vec();
            for (s, m) in set.iter_mut().zip(&mask) {
                *s &= !m;
            }
            NodeCost {
                node,
                modes: topo.set_labels(&set).into_iter().map(|l| {
                    let d = topo.dim(topo.edge_index(&l).expect("label from this topology"));
                    Mode::new(l, d)
                }).collect(),
                elements: sets.size[node].round() as u64,
                flops: sets.union[node] * 8.0,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::{DenseTensor, Precision};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeSet, HashMap};

    fn t(modes: &[(&str, usize)]) -> DenseTensor {
        DenseTensor::zeros(modes.iter().map(|(l, d)| Mode::new(*l, *d)).collect(), Precision::C64).unwrap()
    }

    fn chain(n: usize) -> TensorNetworkGraph {
        let tensors = (0..n).map(|k| t(&[(&format!("e{k}"), 2), (&format!("e{}", k + 1), 2)])).collect();
        TensorNetworkGraph::new(tensors, vec![Label::new("e0"), Label::new(format!("e{n}"))])
    }

    #[test]
    fn single_matmul_cost() {
        let net = TensorNetworkGraph::new(vec![t(&[("i", 2), ("j", 2)]), t(&[("j", 2), ("k", 2)])], vec!["i".into(), "k".into()]);
        let c = cost(&ContractionTree::left_deep(2), &net).unwrap();
        assert_eq!(c.flops, 64.0);
        assert_eq!(c.max_elements, 4);
        assert_eq!(c.treewidth, 2);
        assert_eq!(c.max_bytes(), 32);
    }

    #[test]
    fn chain_is_additive() {
        for n in 2..8 {
            let c = cost(&ContractionTree::left_deep(n), &chain(n)).unwrap();
            assert_eq!(c.flops, 64.0 * (n - 1) as f64);
        }
    }

    #[test]
    fn canonical_numbering_and_nested_roundtrip() {
        let t = ContractionTree::new(4, vec![[2, 3], [0, 1], [5, 4]]).unwrap();
        // post-order renumbering puts [0,1] first
        assert_eq!(t.children(4), Some([0, 1]));
        assert_eq!(t.children(5), Some([2, 3]));
        assert_eq!(t.to_nested(), serde_json::json!([[0, 1], [2, 3]]));
        assert_eq!(ContractionTree::from_nested(&t.to_nested()).unwrap(), t);
        assert_eq!(t.leaves_under(6), vec![0, 1, 2, 3]);
        assert!(ContractionTree::new(3, vec![[0, 1], [0, 2]]).is_err());
        assert!(ContractionTree::from_nested(&serde_json::json!([0, [0, 1]])).is_err());
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

    fn random_network(rng: &mut ChaCha8Rng, n: usize) -> TensorNetworkGraph {
        let mut modes: Vec<Vec<(String, usize)>> = vec![Vec::new(); n];
        let mut k = 0;
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.5) {
                    let d = rng.random_range(2..4);
                    modes[a].push((format!("x{k}"), d));
                    modes[b].push((format!("x{k}"), d));
                    k += 1;
                }
            }
        }
        let mut open = Vec::new();
        for (a, m) in modes.iter_mut().enumerate() {
            if rng.random_bool(0.3) {
                m.push((format!("o{a}"), 2));
                open.push(Label::new(format!("o{a}")));
            }
        }
        let tensors = modes
            .iter()
            .map(|m| DenseTensor::zeros(m.iter().map(|(l, d)| Mode::new(l.as_str(), *d)).collect(), Precision::C64).unwrap())
            .collect();
        TensorNetworkGraph::new(tensors, open)
    }

    /// Independent recount: walks the tree recursively with label sets.
    fn recount(tree: &ContractionTree, net: &TensorNetworkGraph) -> (f64, u64) {
        let dims: HashMap<Label, usize> =
            net.tensors.iter().flat_map(|t| t.modes().iter().map(|m| (m.label.clone(), m.dim))).collect();
        fn walk(
            tree: &ContractionTree,
            node: usize,
            net: &TensorNetworkGraph,
            dims: &HashMap<Label, usize>,
            acc: &mut (f64, u64),
        ) -> BTreeSet<Label> {
            let set: BTreeSet<Label> = match tree.children(node) {
                None => net.tensors[node].labels().into_iter().collect(),
                Some([l, r]) => {
                    let a = walk(tree, l, net, dims, acc);
                    let b = walk(tree, r, net, dims, acc);
                    let union: f64 = a.union(&b).map(|x| dims[x] as f64).product();
                    acc.0 += 8.0 * union;
                    a.symmetric_difference(&b).cloned().collect()
                }
            };
            let size: u64 = set.iter().map(|x| dims[x] as u64).product();
            acc.1 = acc.1.max(size);
            set
        }
        let mut acc = (0.0, 1);
        walk(tree, tree.root(), net, &dims, &mut acc);
        acc
    }

    #[test]
    fn cost_matches_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let net = random_network(&mut rng, 6);
            let tree = random_tree(6, &mut rng);
            let c = cost(&tree, &net).unwrap();
            let (flops, max_el) = recount(&tree, &net);
            assert_eq!(c.flops, flops);
            assert_eq!(c.max_elements, max_el);
        }
    }

    #[test]
    fn node_costs_follow_union_minus_reduce() {
        let net = chain(3);
        let topo = Topology::from_network(&net).unwrap();
        let nodes = node_costs(&ContractionTree::left_deep(3), &topo, &[]).unwrap();
        assert_eq!(nodes[3].modes, vec![Mode::new("e0", 2), Mode::new("e2", 2)]);
        assert_eq!(nodes[4].modes, vec![Mode::new("e0", 2), Mode::new("e3", 2)]);
        let sliced = node_costs(&ContractionTree::left_deep(3), &topo, &[Label::new("e1")]).unwrap();
        assert_eq!(sliced[0].modes, vec![Mode::new("e0", 2)]);
        assert_eq!(sliced[3].flops, 8.0 * 4.0);
    }
}

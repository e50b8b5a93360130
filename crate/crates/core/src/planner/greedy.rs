use std::collections::BTreeSet;

use super::topology::{edges_of, Topology};
use super::tree::ContractionTree;
use super::Result;

/// Greedy pairing: repeatedly merges the connected pair minimizing
/// `size(out) - size(a) - size(b)`; ties go to the smallest id pair.
/// Disconnected components are finally joined smallest first.
pub fn greedy_tree(topo: &Topology) -> Result<ContractionTree> {
    let n = topo.n_leaves();
    let w = topo.words();
    let zero = vec![0u64; w];
    let mut sets: Vec<Vec<u64>> = (0..n).map(|i| topo.leaf_set(i).to_vec()).collect();
    let mut sizes: Vec<f64> = sets.iter().map(|s| topo.size(s, &zero)).collect();
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); topo.n_edges()];
    for (i, s) in sets.iter().enumerate() {
        for e in edges_of(s) {
            owners[e].push(i);
        }
    }
    let mut live: BTreeSet<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut out = vec![0u64; w];
    while live.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for own in &owners {
            if let [a, b] = own[..] {
                let (a, b) = (a.min(b), a.max(b));
                for k in 0..w {
                    out[k] = sets[a][k] ^ sets[b][k];
                }
                let score = topo.size(&out, &zero) - sizes[a] - sizes[b];
                let better = match best {
                    None => true,
                    Some((s, x, y)) => score < s || (score == s && (a, b) < (x, y)),
                };
                if better {
                    best = Some((score, a, b));
                }
            }
        }
        let (a, b) = match best {
            Some((_, a, b)) => (a, b),
            None => {
                let mut by_size: Vec<usize> = live.iter().cloned().collect();
                by_size.sort_by(|&x, &y| sizes[x].total_cmp(&sizes[y]).then(x.cmp(&y)));
                (by_size[0].min(by_size[1]), by_size[0].max(by_size[1]))
            }
        };
        let id = sets.len();
        let merged: Vec<u64> = (0..w).map(|k| sets[a][k] ^ sets[b][k]).collect();
        for own in owners.iter_mut() {
            own.retain(|&x| x != a && x != b);
        }
        for e in edges_of(&merged) {
            owners[e].push(id);
        }
        sizes.push(topo.size(&merged, &zero));
        sets.push(merged);
        live.remove(&a);
        live.remove(&b);
        live.insert(id);
        merges.push([a, b]);
    }
    ContractionTree::new(n, merges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::TensorNetworkGraph;
    use crate::planner::cost;
    use crate::tensors::{DenseTensor, Mode, Precision};

    fn t(modes: &[(&str, usize)]) -> DenseTensor {
        DenseTensor::zeros(modes.iter().map(|(l, d)| Mode::new(*l, *d)).collect(), Precision::C64).unwrap()
    }

    #[test]
    fn contracts_cheapest_pair_first() {
        // a-b share a big edge, b-c a small one; merging a,b first shrinks the most
        let net = TensorNetworkGraph::new(
            vec![t(&[("x", 8), ("o", 2)]), t(&[("x", 8), ("y", 2)]), t(&[("y", 2), ("p", 2)])],
            vec!["o".into(), "p".into()],
        );
        let topo = Topology::from_network(&net).unwrap();
        let tree = greedy_tree(&topo).unwrap();
        assert_eq!(tree.children(3), Some([0, 1]));
        assert_eq!(cost(&tree, &net).unwrap().flops, 8.0 * (32.0 + 8.0));
    }

    #[test]
    fn joins_disconnected_components() {
        let net = TensorNetworkGraph::new(vec![t(&[("a", 2)]), t(&[("b", 2)]), t(&[])], vec!["a".into(), "b".into()]);
        let topo = Topology::from_network(&net).unwrap();
        let tree = greedy_tree(&topo).unwrap();
        assert_eq!(tree.n_leaves(), 3);
        assert!(cost(&tree, &net).is_ok());
        let single = TensorNetworkGraph::new(vec![t(&[("a", 2)])], vec!["a".into()]);
        let tree = greedy_tree(&Topology::from_network(&single).unwrap()).unwrap();
        assert_eq!(tree.n_nodes(), 1);
    }
}

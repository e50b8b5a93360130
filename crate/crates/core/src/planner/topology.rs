use std::collections::BTreeMap;

use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::tensors::Label;

/// Edge structure of a network: every mode label becomes an edge index
/// (sorted by label) and every tensor a bitset over edges.
#[derive(Clone, Debug)]
pub struct Topology {
    labels: Vec<Label>,
    dims: Vec<usize>,
    words: usize,
    leaves: Vec<u64>,
    open: Vec<u64>,
    open_legs: Vec<Label>,
}

impl Topology {
    pub fn from_network(net: &TensorNetworkGraph) -> Result<Self> {
        let mut seen: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
        for t in &net.tensors {
            for m in t.modes() {
                let e = seen.entry(m.label.clone()).or_insert((m.dim, 0));
                if e.0 != m.dim {
                    return Err(PlannerError::InconsistentNetwork(format!("edge `{}` has mismatched dims", m.label)));
                }
                e.1 += 1;
            }
        }
        for l in &net.open_legs {
            match seen.get(l) {
                Some((_, 1)) => {}
                Some(_) => return Err(PlannerError::InconsistentNetwork(format!("open leg `{l}` is shared"))),
                None => return Err(PlannerError::InconsistentNetwork(format!("open leg `{l}` is absent"))),
            }
        }
        for (l, (_, count)) in &seen {
            if *count > 2 {
                return Err(PlannerError::InconsistentNetwork(format!("edge `{l}` joins {count} tensors")));
            }
            if *count == 1 && !net.open_legs.contains(l) {
                return Err(PlannerError::InconsistentNetwork(format!("dangling edge `{l}`")));
            }
        }
        let labels: Vec<Label> = seen.keys().cloned().collect();
        let dims: Vec<usize> = seen.values().map(|v| v.0).collect();
        let words = labels.len().div_ceil(64).max(1);
        let mut topo = Topology {
            labels,
            dims,
            words,
            leaves: vec![0; words * net.tensors.len()],
            open: vec![0; words],
            open_legs: net.open_legs.clone(),
        };
        for (i, t) in net.tensors.iter().enumerate() {
            for m in t.modes() {
                let e = topo.edge_index(&m.label).expect("label collected above");
                topo.leaves[i * words + e / 64] |= 1 << (e % 64);
            }
        }
        for l in &net.open_legs {
            let e = topo.edge_index(l).expect("open legs checked above");
            topo.open[e / 64] |= 1 << (e % 64);
        }
        Ok(topo)
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len() / self.words
    }

    pub fn n_edges(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_index(&self, label: &Label) -> Option<usize> {
        self.labels.binary_search(label).ok()
    }

    pub fn label(&self, edge: usize) -> &Label {
        &self.labels[edge]
    }

    pub fn dim(&self, edge: usize) -> usize {
        self.dims[edge]
    }

    pub fn open_legs(&self) -> &[Label] {
        &self.open_legs
    }

    pub fn is_open(&self, edge: usize) -> bool {
        self.open[edge / 64] >> (edge % 64) & 1 == 1
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }

    pub(crate) fn leaf_set(&self, leaf: usize) -> &[u64] {
        &self.leaves[leaf * self.words..(leaf + 1) * self.words]
    }

    pub(crate) fn open_set(&self) -> &[u64] {
        &self.open
    }

    /// Product of dims over the edges of `set` not in `mask`.
    pub(crate) fn size(&self, set: &[u64], mask: &[u64]) -> f64 {
        let mut acc = 1.0;
        for (w, (&s, &m)) in set.iter().zip(mask).enumerate() {
            let mut bits = s & !m;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                acc *= self.dims[w * 64 + b] as f64;
                bits &= bits - 1;
            }
        }
        acc
    }

    /// Edge labels of `set`, in edge order.
    pub(crate) fn set_labels(&self, set: &[u64]) -> Vec<Label> {
        edges_of(set).map(|e| self.labels[e].clone()).collect()
    }

    pub(crate) fn mask_of(&self, labels: &[Label]) -> Result<Vec<u64>> {
        let mut mask = vec![0u64; self.words];
        for l in labels {
            let e = self.edge_index(l).ok_or_else(|| PlannerError::InconsistentNetwork(format!("unknown edge `{l}`")))?;
            mask[e / 64] |= 1 << (e % 64);
        }
        Ok(mask)
    }
}

pub(crate) fn edges_of(set: &[u64]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().flat_map(|(w, &word)| {
        let mut bits = word;
        std::iter::from_fn(move || {
            if bits == 0 {
                return None;
            }
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            Some(w * 64 + b)
        })
    })
}

pub(crate) fn contains(set: &[u64], edge: usize) -> bool {
    set[edge / 64] >> (edge % 64) & 1 == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::{DenseTensor, Mode, Precision};

    fn t(modes: &[(&str, usize)]) -> DenseTensor {
        DenseTensor::zeros(modes.iter().map(|(l, d)| Mode::new(*l, *d)).collect(), Precision::C64).unwrap()
    }

    #[test]
    fn builds_sets() {
        let net = TensorNetworkGraph::new(vec![t(&[("i", 2), ("j", 3)]), t(&[("j", 3), ("k", 2)])], vec!["i".into(), "k".into()]);
        let topo = Topology::from_network(&net).unwrap();
        assert_eq!(topo.n_leaves(), 2);
        assert_eq!(topo.n_edges(), 3);
        let j = topo.edge_index(&"j".into()).unwrap();
        assert!(contains(topo.leaf_set(0), j) && contains(topo.leaf_set(1), j));
        assert!(!topo.is_open(j));
        assert_eq!(topo.size(topo.leaf_set(0), &[0]), 6.0);
        assert_eq!(edges_of(topo.leaf_set(1)).count(), 2);
    }

    #[test]
    fn rejects_bad_networks() {
        let dangling = TensorNetworkGraph::new(vec![t(&[("i", 2)])], vec![]);
        assert!(Topology::from_network(&dangling).is_err());
        let triple = TensorNetworkGraph::new(vec![t(&[("i", 2)]), t(&[("i", 2)]), t(&[("i", 2)])], vec![]);
        assert!(Topology::from_network(&triple).is_err());
        let mismatch = TensorNetworkGraph::new(vec![t(&[("i", 2)]), t(&[("i", 3)])], vec![]);
        assert!(Topology::from_network(&mismatch).is_err());
    }
}

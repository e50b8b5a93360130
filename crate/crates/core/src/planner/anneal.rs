use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::greedy::greedy_tree;
use super::slicing::slice_to_fit;
use super::topology::Topology;
use super::tree::{cost_sliced, ContractionTree, CostModel};
use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::tensors::Label;

const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub mem_limit_bytes: u64,
    pub dtype_bytes: u64,
    pub seed: u64,
    pub iterations: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Most edges slicing may break before the limit is declared infeasible.
    pub max_sliced: usize,
}

impl SearchConfig {
    pub fn new(mem_limit_bytes: u64, seed: u64, iterations: usize) -> Self {
        SearchConfig { mem_limit_bytes, dtype_bytes: 8, seed, iterations, t_start: 1.0, t_end: 0.01, max_sliced: 24 }
    }
}

/// Best tree found, the edges sliced to meet the memory limit and its cost.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub tree: ContractionTree,
    pub sliced_edges: Vec<Label>,
    pub cost: CostModel,
    pub greedy_cost: Option<CostModel>,
}

#[derive(Clone)]
struct WorkTree {
    n: usize,
    w: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    parent: Vec<usize>,
    root: usize,
    sets: Vec<u64>,
    size: Vec<f64>,
    union: Vec<f64>,
}

impl WorkTree {
    fn new(topo: &Topology, tree: &ContractionTree) -> Self {
        let n = tree.n_leaves();
        let m = tree.n_nodes();
        let w = topo.words();
        let mut wt = WorkTree {
            n,
            w,
            left: vec![NONE; m],
            right: vec![NONE; m],
            parent: vec![NONE; m],
            root: tree.root(),
            sets: vec![0; m * w],
            size: vec![0.0; m],
            union: vec![0.0; m],
        };
        let zero = vec![0u64; w];
        for v in 0..m {
            match tree.children(v) {
                None => {
                    wt.sets[v * w..(v + 1) * w].copy_from_slice(topo.leaf_set(v));
                    wt.size[v] = topo.size(topo.leaf_set(v), &zero);
                }
                Some([l, r]) => {
                    wt.left[v] = l;
                    wt.right[v] = r;
                    wt.parent[l] = v;
                    wt.parent[r] = v;
                    wt.recompute(topo, v, &zero);
                }
            }
        }
        wt
    }

    fn recompute(&mut self, topo: &Topology, v: usize, zero: &[u64]) {
        let (w, l, r) = (self.w, self.left[v], self.right[v]);
        let mut union = vec![0u64; w];
        for k in 0..w {
            let (a, b) = (self.sets[l * w + k], self.sets[r * w + k]);
            self.sets[v * w + k] = a ^ b;
            union[k] = a | b;
        }
        self.union[v] = topo.size(&union, zero);
        self.size[v] = topo.size(&self.sets[v * w..(v + 1) * w], zero);
    }

    fn refresh_up(&mut self, topo: &Topology, mut v: usize, zero: &[u64]) {
        while v != NONE {
            self.recompute(topo, v, zero);
            v = self.parent[v];
        }
    }

    fn replace_child(&mut self, p: usize, old: usize, new: usize) {
        if self.left[p] == old {
            self.left[p] = new;
        } else {
            debug_assert_eq!(self.right[p], old);
            self.right[p] = new;
        }
    }

    fn sibling(&self, v: usize) -> usize {
        let p = self.parent[v];
        if self.left[p] == v {
            self.right[p]
        } else {
            self.left[p]
        }
    }

    /// Swaps a random grandchild with its uncle.
    fn rotate(&mut self, topo: &Topology, rng: &mut ChaCha8Rng, zero: &[u64]) {
        let c = loop {
            let c = rng.random_range(self.n..2 * self.n - 1);
            if c != self.root {
                break c;
            }
        };
        let p = self.parent[c];
        let s = self.sibling(c);
        let x = if rng.random_bool(0.5) { self.left[c] } else { self.right[c] };
        self.replace_child(c, x, s);
        self.replace_child(p, s, x);
        self.parent[s] = c;
        self.parent[x] = p;
        self.refresh_up(topo, c, zero);
    }

    /// Detaches a random leaf and re-inserts it above a random node.
    fn reattach(&mut self, topo: &Topology, rng: &mut ChaCha8Rng, zero: &[u64]) {
        let l = rng.random_range(0..self.n);
        let p = self.parent[l];
        let s = self.sibling(l);
        let g = self.parent[p];
        if g == NONE {
            self.root = s;
        } else {
            self.replace_child(g, p, s);
        }
        self.parent[s] = g;
        let t = loop {
            let t = rng.random_range(0..2 * self.n - 1);
            if t != l && t != p {
                break t;
            }
        };
        let tp = self.parent[t];
        self.left[p] = t;
        self.right[p] = l;
        self.parent[t] = p;
        self.parent[p] = tp;
        if tp == NONE {
            self.root = p;
        } else {
            self.replace_child(tp, t, p);
        }
        if g != NONE {
            self.refresh_up(topo, g, zero);
        }
        self.refresh_up(topo, p, zero);
    }

    /// log2 flops plus the number of doublings the largest tensor exceeds the cap by.
    fn energy(&self, log_cap: f64) -> f64 {
        let flops: f64 = self.union.iter().sum();
        let biggest = self.size.iter().cloned().fold(1.0, f64::max);
        flops.log2() + (biggest.log2() - log_cap).max(0.0)
    }

    fn to_tree(&self) -> ContractionTree {
        let mut merges = Vec::with_capacity(self.n - 1);
        let mut ids = vec![NONE; 2 * self.n - 1];
        let mut stack = vec![(self.root, false)];
        while let Some((v, expanded)) = stack.pop() {
            if v < self.n {
                ids[v] = v;
            } else if expanded {
                ids[v] = self.n + merges.len();
                merges.push([ids[self.left[v]], ids[self.right[v]]]);
            } else {
                stack.push((v, true));
                stack.push((self.right[v], false));
                stack.push((self.left[v], false));
            }
        }
        ContractionTree::new(self.n, merges).expect("work tree stays a valid binary tree")
    }
}

fn evaluate(topo: &Topology, tree: &ContractionTree, cap: f64, cfg: &SearchConfig) -> Option<(Vec<Label>, CostModel)> {
    let sliced = slice_to_fit(topo, tree, cap, cfg.max_sliced).ok()?;
    let cost = cost_sliced(tree, topo, &sliced, cfg.dtype_bytes).ok()?;
    Some((sliced, cost))
}

/// Simulated annealing over contraction trees, seeded from the greedy
/// baseline. The returned tree is the best found after slicing it to fit
/// the memory limit, so it never costs more than the sliced greedy tree.
pub fn anneal_search(net: &TensorNetworkGraph, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let topo = Topology::from_network(net)?;
    anneal_topology(&topo, cfg)
}

pub fn anneal_topology(topo: &Topology, cfg: &SearchConfig) -> Result<SearchOutcome> {
    if cfg.iterations == 0 {
        return Err(PlannerError::InvalidConfig("iterations must be at least 1".into()));
    }
    if topo.n_leaves() == 0 {
        return Err(PlannerError::InvalidTree("empty network".into()));
    }
    let cap = (cfg.mem_limit_bytes / cfg.dtype_bytes.max(1)) as f64;
    let zero = vec![0u64; topo.words()];
    let largest_leaf = (0..topo.n_leaves()).map(|i| topo.size(topo.leaf_set(i), &zero)).fold(1.0, f64::max);
    if largest_leaf > cap {
        return Err(PlannerError::MemoryTooSmall {
            limit_bytes: cfg.mem_limit_bytes,
            needed_bytes: largest_leaf as u64 * cfg.dtype_bytes,
        });
    }
    let greedy = greedy_tree(topo)?;
    let greedy_eval = evaluate(topo, &greedy, cap, cfg);
    let mut best = greedy_eval.clone().map(|(s, c)| (greedy.clone(), s, c));
    if topo.n_leaves() >= 3 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let log_cap = cap.log2();
        let mut work = WorkTree::new(topo, &greedy);
        let mut energy = work.energy(log_cap);
        let mut best_energy = energy;
        let ratio = cfg.t_end / cfg.t_start;
        for i in 0..cfg.iterations {
            let temp = cfg.t_start * ratio.powf(i as f64 / cfg.iterations as f64);
            let saved = work.clone();
            if rng.random_bool(0.5) {
                work.rotate(topo, &mut rng, &zero);
            } else {
                work.reattach(topo, &mut rng, &zero);
            }
            let candidate = work.energy(log_cap);
            let delta = candidate - energy;
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                energy = candidate;
                if energy < best_energy - 1e-9 {
                    best_energy = energy;
                    let tree = work.to_tree();
                    if let Some((s, c)) = evaluate(topo, &tree, cap, cfg) {
                        if best.as_ref().is_none_or(|b| c.flops < b.2.flops) {
                            best = Some((tree, s, c));
                        }
                    }
                }
            } else {
                work = saved;
            }
        }
    }
    let (tree, sliced_edges, cost) = best.ok_or_else(|| {
        PlannerError::Infeasible(format!(
            "no tree fits {} bytes within {} sliced edges",
            cfg.mem_limit_bytes, cfg.max_sliced
        ))
    })?;
    Ok(SearchOutcome { tree, sliced_edges, cost, greedy_cost: greedy_eval.map(|g| g.1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensors::{DenseTensor, Mode, Precision};

    fn grid(rows: usize, cols: usize) -> TensorNetworkGraph {
        let mut tensors = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let mut modes = Vec::new();
                if c + 1 < cols {
                    modes.push(Mode::new(format!("h{r}_{c}"), 2));
                }
                if c > 0 {
                    modes.push(Mode::new(format!("h{r}_{}", c - 1), 2));
                }
                if r + 1 < rows {
                    modes.push(Mode::new(format!("v{r}_{c}"), 2));
                }
                if r > 0 {
                    modes.push(Mode::new(format!("v{}_{c}", r - 1), 2));
                }
                tensors.push(DenseTensor::zeros(modes, Precision::C64).unwrap());
            }
        }
        TensorNetworkGraph::new(tensors, vec![])
    }

    #[test]
    fn two_tensors_single_tree() {
        let net = TensorNetworkGraph::new(
            vec![
                DenseTensor::zeros(vec![Mode::new("i", 2)], Precision::C64).unwrap(),
                DenseTensor::zeros(vec![Mode::new("i", 2)], Precision::C64).unwrap(),
            ],
            vec![],
        );
        for seed in 0..3 {
            let out = anneal_search(&net, &SearchConfig::new(1 << 20, seed, 10)).unwrap();
            assert_eq!(out.tree, ContractionTree::left_deep(2));
        }
    }

    #[test]
    fn grid_beats_or_ties_greedy_and_is_deterministic() {
        let net = grid(4, 4);
        let cfg = SearchConfig::new(1 << 20, 5, 2000);
        let a = anneal_search(&net, &cfg).unwrap();
        let b = anneal_search(&net, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.cost.flops <= a.greedy_cost.as_ref().unwrap().flops);
    }

    #[test]
    fn respects_memory_cap() {
        let net = grid(4, 4);
        for seed in [1, 2] {
            let cfg = SearchConfig::new(16 * 8, seed, 3000);
            let out = anneal_search(&net, &cfg).unwrap();
            assert!(out.cost.max_bytes() <= 128, "{:?}", out.cost);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = grid(2, 2);
        assert!(matches!(anneal_search(&net, &SearchConfig::new(8, 0, 10)), Err(PlannerError::MemoryTooSmall { .. })));
        assert!(matches!(anneal_search(&net, &SearchConfig::new(1 << 20, 0, 0)), Err(PlannerError::InvalidConfig(_))));
        // output legs cannot be sliced away
        let wide = TensorNetworkGraph::new(
            vec![
                DenseTensor::zeros(vec![Mode::new("i", 2), Mode::new("j", 2), Mode::new("k", 2)], Precision::C64).unwrap(),
                DenseTensor::zeros(vec![Mode::new("k", 2), Mode::new("l", 2), Mode::new("m", 2)], Precision::C64).unwrap(),
            ],
            ["i", "j", "l", "m"].into_iter().map(Label::new).collect(),
        );
        assert!(matches!(anneal_search(&wide, &SearchConfig::new(64, 0, 10)), Err(PlannerError::Infeasible(_))));
    }

    #[test]
    fn moves_keep_trees_valid() {
        let net = grid(3, 4);
        let topo = Topology::from_network(&net).unwrap();
        let zero = vec![0u64; topo.words()];
        let mut work = WorkTree::new(&topo, &greedy_tree(&topo).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in 0..500 {
            if i % 2 == 0 {
                work.rotate(&topo, &mut rng, &zero);
            } else {
                work.reattach(&topo, &mut rng, &zero);
            }
            let tree = work.to_tree();
            let fresh = WorkTree::new(&topo, &tree);
            let total = |w: &WorkTree| w.union.iter().sum::<f64>();
            assert_eq!(total(&work), total(&fresh));
        }
    }
}

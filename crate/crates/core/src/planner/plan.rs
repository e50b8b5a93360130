use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::anneal::{anneal_topology, SearchConfig};
use super::slicing::SlicePlan;
use super::stem::{assign_parallel_modes, find_stem, StemAnnotation, StepType};
use super::topology::Topology;
use super::tree::{node_costs, ContractionTree, CostModel};
use super::{PlannerError, Result};
use crate::circuit::TensorNetworkGraph;
use crate::cluster::ClusterSpec;
use crate::tensors::Label;

/// Everything needed to execute a contraction: order, slices, stem and
/// partition modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub tree: ContractionTree,
    pub slices: SlicePlan,
    pub stem: StemAnnotation,
    pub cost: CostModel,
}

#[derive(Serialize, Deserialize)]
struct PlanRecord {
    tree: Value,
    sliced_edges: Vec<Label>,
    slice_dims: Vec<usize>,
    stem: Vec<usize>,
    step_types: Vec<StepType>,
    n_inter: u32,
    n_intra: u32,
    cost: CostModel,
}

impl Plan {
    /// Plan for a fixed tree and slice set, without searching.
    pub fn for_tree(net: &TensorNetworkGraph, tree: ContractionTree, slices: SlicePlan) -> Result<Self> {
        let topo = Topology::from_network(net)?;
        let dtype = net.tensors.first().map(|t| t.precision().complex_bytes()).unwrap_or(8);
        let cost = super::tree::cost_sliced(&tree, &topo, &slices.sliced_edges, dtype)?;
        let costs = node_costs(&tree, &topo, &slices.sliced_edges)?;
        let stem = find_stem(&tree, &costs);
        Ok(Plan { tree, slices, stem, cost })
    }

    pub fn with_parallel_modes(mut self, n_inter: u32, n_intra: u32) -> Self {
        self.stem.n_inter = n_inter;
        self.stem.n_intra = n_intra;
        self
    }

    pub fn to_json(&self) -> String {
        let rec = PlanRecord {
            tree: self.tree.to_nested(),
            sliced_edges: self.slices.sliced_edges.clone(),
            slice_dims: self.slices.dims.clone(),
            stem: self.stem.path.clone(),
            step_types: self.stem.step_types.clone(),
            n_inter: self.stem.n_inter,
            n_intra: self.stem.n_intra,
            cost: self.cost.clone(),
        };
        serde_json::to_string_pretty(&rec).expect("plan records always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: PlanRecord = serde_json::from_str(text).map_err(|e| PlannerError::Json(e.to_string()))?;
        let tree = ContractionTree::from_nested(&rec.tree)?;
        if rec.sliced_edges.len() != rec.slice_dims.len() || rec.step_types.len() + 1 != tree.n_leaves() {
            return Err(PlannerError::Json("inconsistent plan fields".into()));
        }
        if rec.stem.iter().any(|&v| v >= tree.n_nodes()) {
            return Err(PlannerError::Json("stem node out of range".into()));
        }
        let stem = StemAnnotation {
            path: rec.stem,
            step_types: rec.step_types,
            n_leaves: tree.n_leaves(),
            n_inter: rec.n_inter,
            n_intra: rec.n_intra,
        };
        Ok(Plan { tree, slices: SlicePlan { sliced_edges: rec.sliced_edges, dims: rec.slice_dims }, stem, cost: rec.cost })
    }
}

/// Search, slice to the memory limit, annotate the stem and, for a cluster,
/// choose the partition modes.
pub fn plan_network(net: &TensorNetworkGraph, cfg: &SearchConfig, cluster: Option<&ClusterSpec>) -> Result<Plan> {
    let topo = Topology::from_network(net)?;
    let found = anneal_topology(&topo, cfg)?;
    let slices = SlicePlan::from_edges(net, found.sliced_edges)?;
    let costs = node_costs(&found.tree, &topo, &slices.sliced_edges)?;
    let mut stem = find_stem(&found.tree, &costs);
    if let Some(cluster) = cluster {
        let (n_inter, n_intra) = assign_parallel_modes(&stem, &costs, cluster, cluster.device_mem, cfg.dtype_bytes)?;
        stem.n_inter = n_inter;
        stem.n_intra = n_intra;
    }
    Ok(Plan { tree: found.tree, slices, stem, cost: found.cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_to_network, random_circuit, RandomCircuitConfig};

    #[test]
    fn json_roundtrip_and_determinism() {
        let c = random_circuit(&RandomCircuitConfig::new(8, 4, 2));
        let net = circuit_to_network(&c, Some("00000000")).unwrap();
        let cfg = SearchConfig::new(64 * 8, 9, 500);
        let plan = plan_network(&net, &cfg, None).unwrap();
        assert!(plan.cost.max_bytes() <= 64 * 8);
        let text = plan.to_json();
        assert_eq!(Plan::from_json(&text).unwrap(), plan);
        assert_eq!(plan_network(&net, &cfg, None).unwrap().to_json(), text);
        assert!(Plan::from_json("{}").is_err());
    }

    #[test]
    fn trivial_circuit_needs_no_slices() {
        let c = random_circuit(&RandomCircuitConfig::new(2, 1, 0));
        let net = circuit_to_network(&c, Some("00")).unwrap();
        let plan = plan_network(&net, &SearchConfig::new(1 << 20, 0, 100), None).unwrap();
        assert!(plan.slices.sliced_edges.is_empty());
        assert_eq!(plan.cost.subtasks, 1);
    }
}

//! Splits one contraction into independent sliced subtasks and sums them.

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::planner::{contract_tree, cost_sliced, greedy_tree, slice, SlicePlan, Topology};
use rqcsim::circuit_to_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = random_circuit(&RandomCircuitConfig::new(12, 8, 3));
    let net = circuit_to_network(&circuit, Some("000000000000"))?;
    let topo = Topology::from_network(&net)?;
    let tree = greedy_tree(&topo)?;
    let whole = contract_tree(&net, &tree, &SlicePlan::none())?;

    for subtasks in [2, 4, 8, 16] {
        let plan = slice(&net, &tree, subtasks)?;
        let c = cost_sliced(&tree, &topo, &plan.sliced_edges, 8)?;
        let sum = contract_tree(&net, &tree, &plan)?;
        println!(
            "{:>2} subtasks: peak {:>7} bytes, {:.3e} flops, |sum - whole| = {:.2e}",
            plan.n_subtasks(),
            c.max_bytes(),
            c.flops,
            (sum.data()[0] - whole.data()[0]).norm()
        );
    }
    Ok(())
}

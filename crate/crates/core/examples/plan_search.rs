//! Annealed contraction-order search under a memory cap, against the greedy baseline.

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::planner::{anneal_search, cost, greedy_tree, Plan, SearchConfig, SlicePlan, Topology};
use rqcsim::circuit_to_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = random_circuit(&RandomCircuitConfig::new(14, 8, 7));
    let net = circuit_to_network(&circuit, Some("01101100111010"))?;
    let greedy = cost(&greedy_tree(&Topology::from_network(&net)?)?, &net)?;
    println!("greedy: {:.3e} flops, peak {} bytes", greedy.flops, greedy.max_bytes());

    let cfg = SearchConfig::new(greedy.max_bytes() / 8, 1, 500);
    let found = anneal_search(&net, &cfg)?;
    println!(
        "annealed under {} bytes: {:.3e} flops, peak {} bytes, sliced {:?}",
        cfg.mem_limit_bytes,
        found.cost.flops,
        found.cost.max_bytes(),
        found.sliced_edges.iter().map(|l| l.as_str()).collect::<Vec<_>>()
    );

    let slices = SlicePlan::from_edges(&net, found.sliced_edges.clone())?;
    let plan = Plan::for_tree(&net, found.tree, slices)?;
    println!("stem length {}", plan.stem.path.len());
    println!("{}", plan.to_json());
    Ok(())
}

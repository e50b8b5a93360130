//! Runs the communication-free tail twice on halves to cut its peak memory.

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::cluster::{hybrid_execute, recompute_execute, ClusterSpec, RecomputeConfig};
use rqcsim::planner::{greedy_tree, Plan, SlicePlan, Topology};
use rqcsim::circuit_to_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = random_circuit(&RandomCircuitConfig::new(10, 8, 1));
    let net = circuit_to_network(&circuit, None)?;
    let plan = Plan::for_tree(&net, greedy_tree(&Topology::from_network(&net)?)?, SlicePlan::none())?.with_parallel_modes(1, 1);
    let cluster = ClusterSpec { device_mem: plan.cost.max_bytes() / 2, ..ClusterSpec::new(2, 2) };

    let (base, base_report) = hybrid_execute(&plan, &net, &cluster, None)?;
    let (out, report) = recompute_execute(&plan, &net, &cluster, None, &RecomputeConfig::default())?;
    let summary = report.recompute.as_ref().expect("recompute summary");
    println!("same result: {}", base == out);
    println!("halving mode {} from step {}", summary.halving_label.as_str(), summary.start_step);
    println!("region peak {} bytes (baseline {})", summary.region_peak_bytes, summary.baseline_region_peak_bytes);
    println!("inter bytes {} (baseline {}), effective N_inter {}", report.bytes_inter, base_report.bytes_inter, report.effective_n_inter);
    Ok(())
}

//! Runs a plan on a simulated 2-node, 2-device cluster with inter- and intra-node all-to-alls.

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::cluster::{hybrid_execute, ClusterSpec};
use rqcsim::planner::{contract_tree, greedy_tree, Plan, SlicePlan, Topology};
use rqcsim::quantizer::QuantScheme;
use rqcsim::{circuit_to_network, fidelity};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = random_circuit(&RandomCircuitConfig::new(10, 8, 11));
    let net = circuit_to_network(&circuit, None)?;
    let tree = greedy_tree(&Topology::from_network(&net)?)?;
    let plan = Plan::for_tree(&net, tree, SlicePlan::none())?.with_parallel_modes(1, 1);
    let cluster = ClusterSpec { device_mem: plan.cost.max_bytes() / 2, ..ClusterSpec::new(2, 2) };
    let single = contract_tree(&net, &plan.tree, &plan.slices)?;

    for quant in [None, Some(QuantScheme::int8()), Some(QuantScheme::int4(128))] {
        let (out, r) = hybrid_execute(&plan, &net, &cluster, quant.as_ref())?;
        println!(
            "{:<10} inter {:>6} B, intra {:>6} B, T_comm {:.3e} s, T_calc {:.3e} s, energy {:.3e} J, CR {:?}, fidelity {:.6}",
            quant.as_ref().map_or("none".to_string(), |q| q.to_string()),
            r.bytes_inter,
            r.bytes_intra,
            r.t_comm(),
            r.t_calc,
            r.energy,
            r.inter_cr,
            fidelity(&single, &out)?
        );
    }
    Ok(())
}

//! Contracts a random circuit's network and compares it with the state-vector oracle.

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::planner::{contract_tree, greedy_tree, SlicePlan, Topology};
use rqcsim::{circuit_to_network, statevector_oracle};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let circuit = random_circuit(&RandomCircuitConfig::new(10, 8, 42));
    let state = statevector_oracle(&circuit)?;
    let net = circuit_to_network(&circuit, None)?;
    let tree = greedy_tree(&Topology::from_network(&net)?)?;
    let out = contract_tree(&net, &tree, &SlicePlan::none())?;

    let worst = state
        .iter()
        .zip(out.data())
        .map(|(s, t)| ((s.re - t.re as f64).powi(2) + (s.im - t.im as f64).powi(2)).sqrt())
        .fold(0.0, f64::max);
    println!("{} gates, {} tensors, {} amplitudes", circuit.gates.len(), net.tensors.len(), state.len());
    println!("max |oracle - network| = {worst:.3e}");
    println!("amplitude of 0000000000: {:.6}", out.data()[0]);
    Ok(())
}

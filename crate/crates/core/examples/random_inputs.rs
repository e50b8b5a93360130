//! Writes a random circuit and a cluster description for the command-line tool.
//!
//! `cargo run --example random_inputs -- <dir> [qubits] [cycles] [seed]`

use std::path::PathBuf;

use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::cluster::ClusterSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let dir = PathBuf::from(args.first().map_or("inputs", String::as_str));
    let num = |i: usize, default: u64| args.get(i).map_or(Ok(default), |s| s.parse());
    let (n, cycles, seed) = (num(1, 12)? as usize, num(2, 8)? as usize, num(3, 0)?);

    std::fs::create_dir_all(&dir)?;
    let circuit = random_circuit(&RandomCircuitConfig::new(n, cycles, seed));
    std::fs::write(dir.join("circuit.json"), circuit.to_json())?;
    let cluster = ClusterSpec { device_mem: 1 << 16, ..ClusterSpec::new(2, 2) };
    std::fs::write(dir.join("cluster.json"), serde_json::to_string_pretty(&cluster)?)?;
    println!("wrote {}/circuit.json ({n} qubits, {cycles} cycles) and {}/cluster.json", dir.display(), dir.display());
    Ok(())
}

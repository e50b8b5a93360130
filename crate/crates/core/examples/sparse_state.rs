//! Many bitstring amplitudes at once through the padded-index batched contraction.

use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqcsim::circuit::{random_circuit, RandomCircuitConfig};
use rqcsim::cluster::BufferPool;
use rqcsim::planner::{greedy_tree, Plan, SlicePlan, Topology};
use rqcsim::sampler::amplitudes;
use rqcsim::sparse::{build_padded_index, chunked_execute, full_working_set, gather_contract, SparseBatchSpec};
use rqcsim::{circuit_to_network, statevector_oracle, DenseTensor, Mode, Precision};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SparseBatchSpec::new(vec![0, 0, 1, 1, 1, 3, 4, 4, 2], vec![0, 1, 2, 0, 1, 2, 0, 1, 2], 5, 3, "f")?;
    let index = build_padded_index(&spec);
    println!("repeat count m_r = {}, table {:?}", index.m_r, index.table);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut random = |modes| {
        DenseTensor::from_fn(modes, Precision::C64, |_| Complex32::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    };
    let a = random(vec![Mode::new("a", 5), Mode::new("x", 64), Mode::new("f", 16)])?;
    let b = random(vec![Mode::new("b", 3), Mode::new("y", 8), Mode::new("f", 16)])?;
    let budget = full_working_set(&a, &b, &spec)? / 3;
    let mut pool = BufferPool::new(1 << 20);
    pool.reserve_stem_buffers();
    let chunked = chunked_execute(&a, &b, &spec, budget, &mut pool)?;
    println!(
        "chunked under {budget} bytes: {} chunks of {} rows, working set {} bytes, exact = {}",
        chunked.chunks,
        chunked.rows_per_chunk,
        chunked.working_set_bytes,
        chunked.tensor == gather_contract(&a, &b, &spec)?
    );

    let circuit = random_circuit(&RandomCircuitConfig::new(10, 6, 9));
    let net = circuit_to_network(&circuit, None)?;
    let plan = Plan::for_tree(&net, greedy_tree(&Topology::from_network(&net)?)?, SlicePlan::none())?;
    let bits = ["0000000000", "1111111111", "1010101010", "0110011001"];
    let amps = amplitudes(&circuit, &bits, &plan)?;
    let state = statevector_oracle(&circuit)?;
    for (s, amp) in bits.iter().zip(&amps) {
        let want = state[usize::from_str_radix(s, 2)?];
        println!("{s}: {amp:.6} (oracle {:.6}{:+.6}i)", want.re, want.im);
    }
    Ok(())
}

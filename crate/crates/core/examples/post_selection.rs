//! Top-k post-selection over correlated subspaces and its linear XEB uplift.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rqcsim::sampler::{linear_xeb, porter_thomas_subspace, post_select, PostSelectSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n_qubits, free_bits) = (20, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let subspaces: Vec<_> = (0..2000).map(|_| porter_thomas_subspace(&mut rng, n_qubits, free_bits)).collect();

    let mut sampled = Vec::new();
    for s in &subspaces {
        let draw = WeightedIndex::new(&s.probabilities)?;
        sampled.push(s.probabilities[rng.sample(&draw)]);
    }
    let baseline = linear_xeb(&sampled, n_qubits)?;
    println!("ideal sampling: XEB {baseline:.3}");

    for k in [1, 4, 16, 64] {
        let picks = post_select(&subspaces, &PostSelectSpec::new(k, 1 << free_bits)?)?;
        let probs: Vec<f64> = subspaces
            .iter()
            .zip(picks.chunks(k))
            .flat_map(|(s, chosen)| chosen.iter().map(|b| s.probabilities[s.members.iter().position(|m| m == b).unwrap()]))
            .collect();
        let xeb = linear_xeb(&probs, n_qubits)?;
        println!("top-{k:<3} of 1024: XEB {xeb:.3}, uplift {:.3} (ln(N/k) = {:.3})", xeb / baseline, (1024.0 / k as f64).ln());
    }
    Ok(())
}

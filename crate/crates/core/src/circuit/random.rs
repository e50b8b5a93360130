use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Circuit, Gate, GateKind};

/// Parameters of a Sycamore-style random circuit on a near-square grid.
#[derive(Clone, Debug)]
pub struct RandomCircuitConfig {
    pub n_qubits: usize,
    pub cycles: usize,
    pub seed: u64,
    pub theta: f64,
    pub phi: f64,
    /// Standard deviation of the per-pair perturbation of `theta` and `phi`.
    pub jitter: f64,
}

impl RandomCircuitConfig {
    pub fn new(n_qubits: usize, cycles: usize, seed: u64) -> Self {
        RandomCircuitConfig { n_qubits, cycles, seed, theta: FRAC_PI_2, phi: FRAC_PI_6, jitter: 0.05 }
    }
}

fn grid_cols(n: usize) -> usize {
    let mut cols = 1;
    while cols * cols < n {
        cols += 1;
    }
    cols
}

/// Coupler pattern `p` of the repeating sequence ABCDCDAB.
fn pattern_pairs(n: usize, p: usize) -> Vec<(usize, usize)> {
    let cols = grid_cols(n);
    let mut pairs = Vec::new();
    for q in 0..n {
        let (r, c) = (q / cols, q % cols);
        let other = match p {
            0 if c % 2 == 0 => Some(q + 1),
            1 if c % 2 == 1 => Some(q + 1),
            2 if r % 2 == 0 => Some(q + cols),
            3 if r % 2 == 1 => Some(q + cols),
            _ => None,
        };
        if let Some(o) = other {
            let same_row = p >= 2 || (c + 1 < cols);
            if o < n && same_row {
                pairs.push((q, o));
            }
        }
    }
    pairs
}

/// Generates `cycles` full cycles plus the final half cycle. Single-qubit
/// gates never repeat on the same qubit in consecutive cycles.
pub fn random_circuit(cfg: &RandomCircuitConfig) -> Circuit {
    const SEQUENCE: [usize; 8] = [0, 1, 2, 3, 2, 3, 0, 1];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.jitter.max(0.0)).expect("finite jitter");
    let n = cfg.n_qubits;
    let mut last = vec![usize::MAX; n];
    let mut gates = Vec::new();
    let mut singles = |rng: &mut ChaCha8Rng, cycle: usize, gates: &mut Vec<Gate>| {
        for (q, prev) in last.iter_mut().enumerate() {
            let mut k = rng.random_range(0..3usize);
            while k == *prev {
                k = rng.random_range(0..3usize);
            }
            *prev = k;
            let kind = [GateKind::SqrtX, GateKind::SqrtY, GateKind::SqrtW][k].clone();
            gates.push(Gate::single(kind, q, cycle));
        }
    };
    for cycle in 0..cfg.cycles {
        singles(&mut rng, cycle, &mut gates);
        for (q0, q1) in pattern_pairs(n, SEQUENCE[cycle % SEQUENCE.len()]) {
            let theta = cfg.theta + noise.sample(&mut rng);
            let phi = cfg.phi + noise.sample(&mut rng);
            gates.push(Gate::fsim(theta, phi, q0, q1, cycle));
        }
    }
    singles(&mut rng, cfg.cycles, &mut gates);
    Circuit::new(n, cfg.cycles, gates).expect("generated circuits are valid")
}

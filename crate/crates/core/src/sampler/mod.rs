//! Bitstring amplitudes, linear cross-entropy benchmarking and post-selection
//! over correlated subspaces.

use num_complex::Complex32;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{circuit_to_network, parse_bitstring, Circuit, CircuitError};
use crate::planner::{Plan, PlannerError};
use crate::sparse::{gather_contract, SparseBatchSpec, SparseError};
use crate::tensors::{einsum_pair, DenseTensor, EinsumSpec, Label, Mode, TensorError};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("plan does not fit the circuit: {0}")]
    PlanMismatch(String),
    #[error("empty sample set")]
    EmptySample,
    #[error("invalid post-selection spec: k = {k}, N = {n_candidates}")]
    InvalidSpec { k: usize, n_candidates: usize },
    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),
    #[error("subspace {subspace} has {members} members, fewer than k = {k}")]
    SubspaceTooSmall { subspace: usize, members: usize, k: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, SamplerError>;

/// Reshapes `t` into `[row, f]`: `row` fuses `rows` in order, `f` fuses the
/// remaining labels in sorted order.
fn as_matrix(t: DenseTensor, rows: &[Label], row: &str) -> Result<DenseTensor> {
    let mut rest: Vec<Label> = t.labels().into_iter().filter(|l| !rows.contains(l)).collect();
    rest.sort();
    let mut order = rows.to_vec();
    order.extend(rest);
    let p = t.permuted(&order)?;
    let m: usize = p.modes()[..rows.len()].iter().map(|m| m.dim).product();
    let k = p.len() / m;
    let precision = p.precision();
    Ok(DenseTensor::new(vec![Mode::new(row, m), Mode::new("f", k)], p.into_data(), precision)?)
}

/// Index of each bitstring into the row-major fusion of the qubits `legs`.
fn row_indices(bits: &[Vec<u8>], legs: &[usize]) -> Vec<usize> {
    bits.iter().map(|b| legs.iter().fold(0, |acc, &q| acc * 2 + b[q] as usize)).collect()
}

/// Amplitudes `<x|C|0...0>` for every bitstring `x`. `plan` must be a plan
/// for the open network of `circuit` (one open leg per qubit). Each subtask
/// contracts the two subtrees under the root, and the batched sparse stage
/// joins them once per bitstring; subtask results are summed in order.
pub fn amplitudes(circuit: &Circuit, bitstrings: &[impl AsRef<str>], plan: &Plan) -> Result<Vec<Complex32>> {
    let net = circuit_to_network(circuit, None)?;
    if plan.tree.n_leaves() != net.tensors.len() {
        return Err(SamplerError::PlanMismatch(format!(
            "plan has {} leaves, network {}",
            plan.tree.n_leaves(),
            net.tensors.len()
        )));
    }
    if let Some(l) = plan.slices.sliced_edges.iter().find(|l| net.open_legs.contains(l)) {
        return Err(SamplerError::PlanMismatch(format!("open leg `{l}` is sliced")));
    }
    let bits: Vec<Vec<u8>> =
        bitstrings.iter().map(|b| parse_bitstring(b.as_ref(), circuit.n_qubits)).collect::<std::result::Result<_, _>>()?;
    if bits.is_empty() {
        return Ok(Vec::new());
    }
    let tree = &plan.tree;
    let mut total: Option<DenseTensor> = None;
    for assignment in plan.slices.assignments() {
        let sub = plan.slices.subnetwork(&net, &assignment)?;
        let mut slots: Vec<Option<DenseTensor>> = sub.tensors.into_iter().map(Some).collect();
        slots.resize(tree.n_nodes(), None);
        for v in tree.internal_nodes().filter(|&v| v != tree.root()) {
            let [l, r] = tree.children(v).expect("internal node");
            let (a, b) = (slots[l].take().expect("post-order"), slots[r].take().expect("post-order"));
            slots[v] = Some(einsum_pair(&EinsumSpec::pairwise(&a.labels(), &b.labels())?, &a, &b)?);
        }
        let (left, right) = match tree.children(tree.root()) {
            Some([l, r]) => (slots[l].take().expect("computed"), slots[r].take().expect("computed")),
            None => (slots[tree.root()].take().expect("leaf"), DenseTensor::scalar(Complex32::new(1.0, 0.0))),
        };
        let legs_of = |t: &DenseTensor| -> (Vec<Label>, Vec<usize>) {
            (0..circuit.n_qubits).filter(|&q| t.position(&net.open_legs[q]).is_some()).map(|q| (net.open_legs[q].clone(), q)).unzip()
        };
        let (labels_a, qubits_a) = legs_of(&left);
        let (labels_b, qubits_b) = legs_of(&right);
        let a = as_matrix(left, &labels_a, "a")?;
        let b = as_matrix(right, &labels_b, "b")?;
        let spec = SparseBatchSpec::new(
            row_indices(&bits, &qubits_a),
            row_indices(&bits, &qubits_b),
            a.modes()[0].dim,
            b.modes()[0].dim,
            "f",
        )?;
        let part = gather_contract(&a, &b, &spec)?;
        total = Some(match total {
            None => part,
            Some(acc) => acc.add(&part)?,
        });
    }
    Ok(total.expect("at least one subtask").into_data())
}

pub fn probabilities(amps: &[Complex32]) -> Vec<f64> {
    amps.iter().map(|a| (a.re as f64).powi(2) + (a.im as f64).powi(2)).collect()
}

/// Linear XEB: `2^n * mean(p) - 1`.
pub fn linear_xeb(probs: &[f64], n_qubits: usize) -> Result<f64> {
    if probs.is_empty() {
        return Err(SamplerError::EmptySample);
    }
    let mean = probs.iter().sum::<f64>() / probs.len() as f64;
    Ok((n_qubits as f64).exp2() * mean - 1.0)
}

/// Bitstrings that agree on `shared_bits`, with their probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedSubspace {
    pub shared_bits: Vec<(usize, u8)>,
    pub members: Vec<String>,
    pub probabilities: Vec<f64>,
}

impl CorrelatedSubspace {
    pub fn new(shared_bits: Vec<(usize, u8)>, members: Vec<String>, probabilities: Vec<f64>) -> Result<Self> {
        let s = CorrelatedSubspace { shared_bits, members, probabilities };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SamplerError::InvalidSubspace(m));
        if self.members.len() != self.probabilities.len() {
            return bad(format!("{} members but {} probabilities", self.members.len(), self.probabilities.len()));
        }
        if let Some(p) = self.probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return bad(format!("probability {p}"));
        }
        let width = self.members.first().map(|m| m.len()).unwrap_or(0);
        for m in &self.members {
            if m.len() != width || !m.bytes().all(|c| c == b'0' || c == b'1') {
                return bad(format!("bitstring `{m}`"));
            }
            for &(pos, value) in &self.shared_bits {
                if m.as_bytes().get(pos).map(|c| c - b'0') != Some(value) {
                    return bad(format!("`{m}` disagrees with shared bit {pos} = {value}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostSelectSpec {
    pub k: usize,
    pub n_candidates: usize,
}

impl PostSelectSpec {
    pub fn new(k: usize, n_candidates: usize) -> Result<Self> {
        if k == 0 || k > n_candidates {
            return Err(SamplerError::InvalidSpec { k, n_candidates });
        }
        Ok(PostSelectSpec { k, n_candidates })
    }
}

/// The `k` most probable members of each subspace, ties going to the
/// lexicographically smaller bitstring. Output is ordered by subspace, then rank.
pub fn post_select(subspaces: &[CorrelatedSubspace], spec: &PostSelectSpec) -> Result<Vec<String>> {
    PostSelectSpec::new(spec.k, spec.n_candidates)?;
    let mut out = Vec::with_capacity(spec.k * subspaces.len());
    for (i, s) in subspaces.iter().enumerate() {
        s.validate()?;
        if s.members.len() < spec.k {
            return Err(SamplerError::SubspaceTooSmall { subspace: i, members: s.members.len(), k: spec.k });
        }
        let mut order: Vec<usize> = (0..s.members.len()).collect();
        let rank = |&a: &usize, &b: &usize| {
            s.probabilities[b].total_cmp(&s.probabilities[a]).then_with(|| s.members[a].cmp(&s.members[b]))
        };
        if spec.k < order.len() {
            order.select_nth_unstable_by(spec.k - 1, rank);
            order.truncate(spec.k);
        }
        order.sort_by(rank);
        out.extend(order.into_iter().map(|j| s.members[j].clone()));
    }
    Ok(out)
}

/// A synthetic subspace over `n_qubits`: the leading `n_qubits - free_bits`
/// bits are random and shared, the trailing bits run over all values in
/// order, and probabilities follow the Porter-Thomas law `Exp(1) / 2^n`.
pub fn porter_thomas_subspace(rng: &mut impl Rng, n_qubits: usize, free_bits: usize) -> CorrelatedSubspace {
    assert!(free_bits <= n_qubits && free_bits < usize::BITS as usize);
    let fixed = n_qubits - free_bits;
    let shared_bits: Vec<(usize, u8)> = (0..fixed).map(|q| (q, rng.random_range(0..=1u8))).collect();
    let prefix: String = shared_bits.iter().map(|&(_, v)| char::from(b'0' + v)).collect();
    let scale = (n_qubits as f64).exp2();
    let size = 1usize << free_bits;
    let members = (0..size)
        .map(|x| if free_bits == 0 { prefix.clone() } else { format!("{prefix}{x:0free_bits$b}") })
        .collect();
    let probabilities = (0..size).map(|_| rng.sample::<f64, _>(Exp1) / scale).collect();
    CorrelatedSubspace { shared_bits, members, probabilities }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_circuit, statevector_oracle, RandomCircuitConfig};
    use crate::planner::{greedy_tree, slice, SlicePlan, Topology};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plan_for(c: &Circuit, subtasks: usize) -> Plan {
        let net = circuit_to_network(c, None).unwrap();
        let tree = greedy_tree(&Topology::from_network(&net).unwrap()).unwrap();
        let slices = if subtasks > 1 { slice(&net, &tree, subtasks).unwrap() } else { SlicePlan::none() };
        Plan::for_tree(&net, tree, slices).unwrap()
    }

    fn bitstring(x: usize, n: usize) -> String {
        format!("{x:0n$b}")
    }

    #[test]
    fn empty_circuit() {
        let c = Circuit::empty(2);
        let amps = amplitudes(&c, &["00", "01", "11"], &plan_for(&c, 1)).unwrap();
        assert_eq!(amps, vec![Complex32::new(1.0, 0.0), Complex32::new(0.0, 0.0), Complex32::new(0.0, 0.0)]);
        let one = Circuit::empty(1);
        assert_eq!(amplitudes(&one, &["0"], &plan_for(&one, 1)).unwrap(), vec![Complex32::new(1.0, 0.0)]);
    }

    #[test]
    fn random_circuit_matches_the_oracle() {
        let c = random_circuit(&RandomCircuitConfig::new(10, 6, 3));
        let state = statevector_oracle(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<usize> = (0..32).map(|_| rng.random_range(0..1024)).collect();
        let strings: Vec<String> = xs.iter().map(|&x| bitstring(x, 10)).collect();
        for subtasks in [1, 4] {
            let plan = plan_for(&c, subtasks);
            assert!(plan.slices.n_subtasks() >= subtasks);
            let amps = amplitudes(&c, &strings, &plan).unwrap();
            for (a, &x) in amps.iter().zip(&xs) {
                let want = state[x];
                assert!((a.re as f64 - want.re).abs() < 1e-5 && (a.im as f64 - want.im).abs() < 1e-5, "{x}: {a} vs {want}");
            }
        }
    }

    #[test]
    fn duplicates_give_duplicates() {
        let c = random_circuit(&RandomCircuitConfig::new(6, 4, 1));
        let plan = plan_for(&c, 1);
        let amps = amplitudes(&c, &["101100", "000111", "101100", "101100"], &plan).unwrap();
        assert_eq!(amps[0], amps[2]);
        assert_eq!(amps[0], amps[3]);
    }

    #[test]
    fn bad_inputs() {
        let c = Circuit::empty(3);
        let plan = plan_for(&c, 1);
        assert!(matches!(amplitudes(&c, &["01"], &plan), Err(SamplerError::Circuit(CircuitError::InvalidBitstring(_)))));
        assert!(matches!(amplitudes(&c, &["01x"], &plan), Err(SamplerError::Circuit(_))));
        let other = plan_for(&Circuit::empty(2), 1);
        assert!(matches!(amplitudes(&c, &["010"], &other), Err(SamplerError::PlanMismatch(_))));
        assert!(amplitudes(&c, &[] as &[&str], &plan).unwrap().is_empty());
    }

    #[test]
    fn xeb_reference_values() {
        let n = 12;
        let p = (-(n as f64)).exp2();
        assert_eq!(linear_xeb(&vec![p; 50], n).unwrap(), 0.0);
        assert_eq!(linear_xeb(&vec![2.0 * p; 50], n).unwrap(), 1.0);
        assert!(matches!(linear_xeb(&[], n), Err(SamplerError::EmptySample)));
    }

    #[test]
    fn xeb_of_porter_thomas_samples_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        // sampling from p itself weights an exponential by x: a Gamma(2, 1) variate
        let probs: Vec<f64> = (0..100_000)
            .map(|_| (rng.sample::<f64, _>(Exp1) + rng.sample::<f64, _>(Exp1)) / (n as f64).exp2())
            .collect();
        let xeb = linear_xeb(&probs, n).unwrap();
        assert!((xeb - 1.0).abs() < 0.02, "{xeb}");
    }

    fn subspace(members: &[&str], probs: &[f64]) -> CorrelatedSubspace {
        CorrelatedSubspace::new(vec![], members.iter().map(|s| s.to_string()).collect(), probs.to_vec()).unwrap()
    }

    #[test]
    fn argmax_and_ties() {
        let s = subspace(&["00", "01", "10"], &[0.1, 0.4, 0.25]);
        assert_eq!(post_select(&[s.clone()], &PostSelectSpec::new(1, 3).unwrap()).unwrap(), vec!["01"]);
        let all = post_select(&[s], &PostSelectSpec::new(3, 3).unwrap()).unwrap();
        assert_eq!(all, vec!["01", "10", "00"]);
        let tie = subspace(&["11", "10", "01"], &[0.3, 0.3, 0.3]);
        assert_eq!(post_select(&[tie], &PostSelectSpec::new(2, 3).unwrap()).unwrap(), vec!["01", "10"]);
    }

    #[test]
    fn post_select_errors() {
        assert!(PostSelectSpec::new(0, 4).is_err());
        assert!(PostSelectSpec::new(5, 4).is_err());
        let s = subspace(&["0", "1"], &[0.5, 0.5]);
        let spec = PostSelectSpec::new(3, 4).unwrap();
        assert!(matches!(post_select(&[s], &spec), Err(SamplerError::SubspaceTooSmall { subspace: 0, members: 2, k: 3 })));
        assert!(CorrelatedSubspace::new(vec![(0, 1)], vec!["01".into()], vec![0.1]).is_err());
        assert!(CorrelatedSubspace::new(vec![], vec!["01".into()], vec![-0.1]).is_err());
        assert!(CorrelatedSubspace::new(vec![], vec!["01".into(), "1".into()], vec![0.1, 0.1]).is_err());
        assert!(CorrelatedSubspace::new(vec![], vec!["01".into()], vec![]).is_err());
    }

    #[test]
    fn synthetic_subspaces_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = porter_thomas_subspace(&mut rng, 8, 3);
        s.validate().unwrap();
        assert_eq!(s.members.len(), 8);
        assert_eq!(s.shared_bits.len(), 5);
        assert!(s.members.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn selection_ignores_order_and_scale(seed in any::<u64>(), k in 1usize..6, c in 1e-3f64..1e3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut subs: Vec<CorrelatedSubspace> = (0..4).map(|_| porter_thomas_subspace(&mut rng, 10, 3)).collect();
            // coarse values force ties
            for s in &mut subs {
                for p in &mut s.probabilities {
                    *p = (*p * 4096.0).round();
                }
            }
            let spec = PostSelectSpec::new(k, 8).unwrap();
            let base = post_select(&subs, &spec).unwrap();
            prop_assert_eq!(base.len(), k * subs.len());
            let mut shuffled = subs.clone();
            for s in &mut shuffled {
                let mut idx: Vec<usize> = (0..s.members.len()).collect();
                idx.shuffle(&mut rng);
                s.members = idx.iter().map(|&i| s.members[i].clone()).collect();
                s.probabilities = idx.iter().map(|&i| s.probabilities[i] * c).collect();
            }
            prop_assert_eq!(post_select(&shuffled, &spec).unwrap(), base);
        }

        #[test]
        fn xeb_is_affine_in_the_mean(probs in proptest::collection::vec(0.0f64..1e-3, 1..50), c in 0.0f64..10.0, n in 1usize..20) {
            let scaled: Vec<f64> = probs.iter().map(|p| c * p).collect();
            let mean = probs.iter().sum::<f64>() / probs.len() as f64;
            let want = (n as f64).exp2() * c * mean - 1.0;
            prop_assert!((linear_xeb(&scaled, n).unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }
}

use std::collections::BTreeMap;

use num_complex::Complex32;

use super::{gate_matrix, Circuit, CircuitError, Result};
use crate::tensors::{einsum_pair, DenseTensor, EinsumSpec, Label, Mode, Precision};

/// Tensors joined by shared mode labels. Every label occurs in at most two
/// tensors; labels occurring once are open legs.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorNetworkGraph {
    pub tensors: Vec<DenseTensor>,
    pub open_legs: Vec<Label>,
}

impl TensorNetworkGraph {
    pub fn new(tensors: Vec<DenseTensor>, open_legs: Vec<Label>) -> Self {
        TensorNetworkGraph { tensors, open_legs }
    }

    /// Closed edges with the ids of the two tensors they join, ordered by label.
    pub fn hyperedges(&self) -> BTreeMap<Label, Vec<usize>> {
        let mut edges: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (i, t) in self.tensors.iter().enumerate() {
            for m in t.modes() {
                edges.entry(m.label.clone()).or_default().push(i);
            }
        }
        edges.retain(|_, ts| ts.len() >= 2);
        edges
    }

    pub fn dim_of(&self, label: &Label) -> Option<usize> {
        self.tensors.iter().find_map(|t| t.dim_of(label))
    }

    pub fn to_precision(&self, precision: Precision) -> Self {
        TensorNetworkGraph {
            tensors: self.tensors.iter().map(|t| t.to_precision(precision)).collect(),
            open_legs: self.open_legs.clone(),
        }
    }

    /// Contracts the tensors left to right. Reference path for tests and
    /// small networks; the result is ordered by `open_legs`.
    pub fn contract_sequential(&self) -> Result<DenseTensor> {
        let mut iter = self.tensors.iter();
        let mut acc = match iter.next() {
            Some(t) => t.clone(),
            None => return Ok(DenseTensor::scalar(Complex32::new(1.0, 0.0))),
        };
        for t in iter {
            let spec = EinsumSpec::pairwise(&acc.labels(), &t.labels())?;
            acc = einsum_pair(&spec, &acc, t)?;
        }
        Ok(acc.permuted(&self.open_legs)?)
    }
}

/// Parses a 0/1 string of length `n`; character `i` is the value of qubit `i`.
pub fn parse_bitstring(bits: &str, n: usize) -> Result<Vec<u8>> {
    let values: Vec<u8> = bits
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(CircuitError::InvalidBitstring(format!("unexpected character `{other}`"))),
        })
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(CircuitError::InvalidBitstring(format!("length {} for {} qubits", values.len(), n)));
    }
    Ok(values)
}

pub(crate) fn wire_label(qubit: usize, segment: usize) -> Label {
    Label::new(format!("q{qubit}_{segment}"))
}

fn basis_vector(label: Label, bit: u8) -> DenseTensor {
    let mut data = vec![Complex32::new(0.0, 0.0); 2];
    data[bit as usize] = Complex32::new(1.0, 0.0);
    DenseTensor::new(vec![Mode::new(label, 2)], data, Precision::C64).expect("rank-1 basis vector")
}

/// Builds the network for `<bitstring| U |0...0>` (closed) or, without a
/// bitstring, for the final state with one open leg per qubit in qubit order.
pub fn circuit_to_network(c: &Circuit, bitstring: Option<&str>) -> Result<TensorNetworkGraph> {
    let bits = bitstring.map(|b| parse_bitstring(b, c.n_qubits)).transpose()?;
    let mut segment = vec![0usize; c.n_qubits];
    let mut tensors: Vec<DenseTensor> = (0..c.n_qubits).map(|q| basis_vector(wire_label(q, 0), 0)).collect();
    for g in &c.gates {
        let mut t = gate_matrix(g);
        for (k, &q) in g.qubits.iter().enumerate() {
            let input = wire_label(q, segment[q]);
            segment[q] += 1;
            let output = wire_label(q, segment[q]);
            t = t.relabel(&Label::new(format!("i{k}")), input)?;
            t = t.relabel(&Label::new(format!("o{k}")), output)?;
        }
        tensors.push(t);
    }
    let finals: Vec<Label> = (0..c.n_qubits).map(|q| wire_label(q, segment[q])).collect();
    let open_legs = match bits {
        Some(bits) => {
            tensors.extend(finals.into_iter().zip(bits).map(|(l, b)| basis_vector(l, b)));
            Vec::new()
        }
        None => finals,
    };
    Ok(TensorNetworkGraph { tensors, open_legs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{statevector_oracle, random_circuit, Gate, GateKind, RandomCircuitConfig};

    #[test]
    fn empty_circuit_amplitude_is_one() {
        let c = Circuit::empty(3);
        let net = circuit_to_network(&c, Some("000")).unwrap();
        let v = net.contract_sequential().unwrap();
        assert_eq!(v.data(), &[Complex32::new(1.0, 0.0)]);
        let v = circuit_to_network(&c, Some("010")).unwrap().contract_sequential().unwrap();
        assert_eq!(v.data(), &[Complex32::new(0.0, 0.0)]);
    }

    #[test]
    fn sqrt_x_amplitude() {
        let c = Circuit::new(1, 0, vec![Gate::single(GateKind::SqrtX, 0, 0)]).unwrap();
        let v = circuit_to_network(&c, Some("0")).unwrap().contract_sequential().unwrap();
        assert!((v.data()[0].norm_sqr() - 0.5).abs() < 1e-7);
        let v = circuit_to_network(&c, Some("1")).unwrap().contract_sequential().unwrap();
        assert!((v.data()[0] - Complex32::new(0.0, -std::f32::consts::FRAC_1_SQRT_2)).norm() < 1e-7);
    }

    #[test]
    fn bitstring_errors() {
        let c = Circuit::empty(2);
        assert!(matches!(circuit_to_network(&c, Some("0")), Err(CircuitError::InvalidBitstring(_))));
        assert!(matches!(circuit_to_network(&c, Some("0x")), Err(CircuitError::InvalidBitstring(_))));
    }

    #[test]
    fn every_closed_edge_joins_two_tensors() {
        let c = random_circuit(&RandomCircuitConfig::new(6, 3, 2));
        let net = circuit_to_network(&c, None).unwrap();
        let edges = net.hyperedges();
        for (l, ts) in &edges {
            assert_eq!(ts.len(), 2, "{l}");
            assert_eq!(net.tensors[ts[0]].dim_of(l), net.tensors[ts[1]].dim_of(l));
        }
        assert_eq!(net.open_legs.len(), 6);
    }

    #[test]
    fn open_network_matches_oracle() {
        let c = random_circuit(&RandomCircuitConfig::new(5, 4, 9));
        let state = circuit_to_network(&c, None).unwrap().contract_sequential().unwrap();
        let oracle = statevector_oracle(&c).unwrap();
        for (a, b) in state.data().iter().zip(&oracle) {
            assert!((a.re as f64 - b.re).abs() < 1e-5 && (a.im as f64 - b.im).abs() < 1e-5);
        }
    }

    #[test]
    fn closed_network_matches_oracle() {
        let c = random_circuit(&RandomCircuitConfig::new(12, 6, 5));
        let oracle = statevector_oracle(&c).unwrap();
        let mut rng_state = 0x2545_f491_u64;
        for _ in 0..16 {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let idx = (rng_state >> 40) as usize % (1 << 12);
            let bits: String = (0..12).map(|q| if idx >> (11 - q) & 1 == 1 { '1' } else { '0' }).collect();
            let amp = circuit_to_network(&c, Some(&bits)).unwrap().contract_sequential().unwrap().data()[0];
            let want = oracle[idx];
            assert!(
                ((amp.re as f64 - want.re).powi(2) + (amp.im as f64 - want.im).powi(2)).sqrt() <= 1e-5,
                "{bits}"
            );
        }
    }
}

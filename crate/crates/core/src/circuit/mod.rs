//! Random quantum circuits: gate set, JSON format, conversion to a closed or
//! open tensor network, and a brute-force state-vector reference.

mod gates;
mod network;
mod oracle;
mod random;

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::gates::{gate_matrix, Gate, GateKind};
pub use self::network::{circuit_to_network, parse_bitstring, TensorNetworkGraph};
pub use self::oracle::{statevector_oracle, ORACLE_MAX_QUBITS};
pub use self::random::{random_circuit, RandomCircuitConfig};

use self::gates::{unitarity_error, GateRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("malformed circuit JSON: {0}")]
    Json(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGateKind(String),
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit circuit")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
    #[error("qubit {qubit} is paired twice in cycle {cycle}")]
    OverlappingPair { cycle: usize, qubit: usize },
    #[error("invalid gate: {0}")]
    BadGate(String),
    #[error("invalid bitstring: {0}")]
    InvalidBitstring(String),
    #[error("{n_qubits} qubits exceeds the state-vector limit of {max}")]
    TooLarge { n_qubits: usize, max: usize },
    #[error(transparent)]
    Tensor(#[from] crate::tensors::TensorError),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// `cycles` full cycles followed by a half cycle (index `cycles`) of
/// single-qubit gates. Gates are ordered by cycle, single-qubit gates first.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub cycles: usize,
    pub gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    n_qubits: usize,
    cycles: usize,
    gates: Vec<GateRecord>,
}

impl Circuit {
    pub fn new(n_qubits: usize, cycles: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Circuit { n_qubits, cycles, gates };
        c.validate()?;
        c.gates.sort_by_key(|g| (g.cycle, g.arity()));
        Ok(c)
    }

    pub fn empty(n_qubits: usize) -> Self {
        Circuit { n_qubits, cycles: 0, gates: Vec::new() }
    }

    fn validate(&self) -> Result<()> {
        let mut paired: HashSet<(usize, usize)> = HashSet::new();
        for g in &self.gates {
            for &q in &g.qubits {
                if q >= self.n_qubits {
                    return Err(CircuitError::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
                }
            }
            if g.cycle > self.cycles {
                return Err(CircuitError::BadGate(format!(
                    "cycle {} beyond the final half cycle {}",
                    g.cycle, self.cycles
                )));
            }
            let expected = match &g.kind {
                GateKind::SqrtX | GateKind::SqrtY | GateKind::SqrtW => 1,
                GateKind::FSim { .. } => 2,
                GateKind::Unitary(m) => match m.len() {
                    4 => 1,
                    16 => 2,
                    n => return Err(CircuitError::BadGate(format!("unitary with {n} entries"))),
                },
            };
            if g.qubits.len() != expected {
                return Err(CircuitError::BadGate(format!(
                    "{} acts on {} qubits, got {:?}",
                    g.kind_name(),
                    expected,
                    g.qubits
                )));
            }
            if let GateKind::Unitary(m) = &g.kind {
                let err = unitarity_error(m);
                if err > 1e-6 {
                    return Err(CircuitError::BadGate(format!("matrix is not unitary (error {err:.2e})")));
                }
            }
            if expected == 2 {
                if g.qubits[0] == g.qubits[1] {
                    return Err(CircuitError::BadGate(format!("two-qubit gate on {:?}", g.qubits)));
                }
                if g.cycle == self.cycles && self.cycles > 0 {
                    return Err(CircuitError::BadGate("two-qubit gate in the final half cycle".into()));
                }
                for &q in &g.qubits {
                    if !paired.insert((g.cycle, q)) {
                        return Err(CircuitError::OverlappingPair { cycle: g.cycle, qubit: q });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: CircuitRecord = serde_json::from_str(text).map_err(|e| CircuitError::Json(e.to_string()))?;
        let mut gates = Vec::with_capacity(rec.gates.len());
        for g in rec.gates {
            let kind = match g.kind.as_str() {
                "sqrt_x" => GateKind::SqrtX,
                "sqrt_y" => GateKind::SqrtY,
                "sqrt_w" => GateKind::SqrtW,
                "fsim" => match (g.theta, g.phi) {
                    (Some(theta), Some(phi)) => GateKind::FSim { theta, phi },
                    _ => return Err(CircuitError::BadGate("fsim requires theta and phi".into())),
                },
                "unitary" => {
                    let m = g.matrix.ok_or_else(|| CircuitError::BadGate("unitary requires matrix".into()))?;
                    GateKind::Unitary(m.iter().map(|[re, im]| Complex64::new(*re, *im)).collect())
                }
                other => return Err(CircuitError::UnknownGateKind(other.to_string())),
            };
            gates.push(Gate { kind, qubits: g.qubits, cycle: g.cycle });
        }
        Circuit::new(rec.n_qubits, rec.cycles, gates)
    }

    /// Canonical compact JSON.
    pub fn to_json(&self) -> String {
        let gates = self
            .gates
            .iter()
            .map(|g| {
                let (theta, phi, matrix) = match &g.kind {
                    GateKind::FSim { theta, phi } => (Some(*theta), Some(*phi), None),
                    GateKind::Unitary(m) => (None, None, Some(m.iter().map(|z| [z.re, z.im]).collect())),
                    _ => (None, None, None),
                };
                GateRecord { kind: g.kind_name().to_string(), qubits: g.qubits.clone(), cycle: g.cycle, theta, phi, matrix }
            })
            .collect();
        serde_json::to_string(&CircuitRecord { n_qubits: self.n_qubits, cycles: self.cycles, gates })
            .expect("circuit records always serialize")
    }
}

/// Parses the circuit JSON format.
pub fn parse_circuit(text: &str) -> Result<Circuit> {
    Circuit::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_empty_circuit() {
        let c = parse_circuit(r#"{"n_qubits": 1, "cycles": 0, "gates": []}"#).unwrap();
        assert_eq!(c, Circuit::empty(1));
    }

    #[test]
    fn two_qubit_one_cycle() {
        let text = r#"{"n_qubits":2,"cycles":1,"gates":[
            {"kind":"fsim","qubits":[0,1],"cycle":0,"theta":1.5,"phi":0.5},
            {"kind":"sqrt_x","qubits":[0],"cycle":0},
            {"kind":"sqrt_y","qubits":[1],"cycle":0}]}"#;
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.gates.len(), 3);
        // single-qubit gates are moved ahead of the two-qubit gate
        assert_eq!(c.gates[0].kind, GateKind::SqrtX);
        assert_eq!(c.gates[1].kind, GateKind::SqrtY);
        assert_eq!(c.gates[2].kind, GateKind::FSim { theta: 1.5, phi: 0.5 });
    }

    #[test]
    fn canonical_roundtrip() {
        let c = random_circuit(&RandomCircuitConfig::new(6, 4, 17));
        let text = c.to_json();
        let back = parse_circuit(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), text);
        let with_unitary = r#"{"n_qubits":1,"cycles":0,"gates":[{"kind":"unitary","qubits":[0],"cycle":0,"matrix":[[0,0],[1,0],[1,0],[0,0]]}]}"#;
        let u = parse_circuit(with_unitary).unwrap();
        assert_eq!(parse_circuit(&u.to_json()).unwrap(), u);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_circuit("{"), Err(CircuitError::Json(_))));
        assert!(matches!(
            parse_circuit(r#"{"n_qubits":1,"cycles":0,"gates":[{"kind":"cz","qubits":[0],"cycle":0}]}"#),
            Err(CircuitError::UnknownGateKind(_))
        ));
        assert!(matches!(
            parse_circuit(r#"{"n_qubits":1,"cycles":0,"gates":[{"kind":"sqrt_x","qubits":[3],"cycle":0}]}"#),
            Err(CircuitError::QubitOutOfRange { qubit: 3, .. })
        ));
        let overlapping = r#"{"n_qubits":3,"cycles":1,"gates":[
            {"kind":"fsim","qubits":[0,1],"cycle":0,"theta":1,"phi":0},
            {"kind":"fsim","qubits":[1,2],"cycle":0,"theta":1,"phi":0}]}"#;
        assert!(matches!(parse_circuit(overlapping), Err(CircuitError::OverlappingPair { cycle: 0, qubit: 1 })));
        let not_unitary = r#"{"n_qubits":1,"cycles":0,"gates":[{"kind":"unitary","qubits":[0],"cycle":0,"matrix":[[1,0],[1,0],[0,0],[1,0]]}]}"#;
        assert!(matches!(parse_circuit(not_unitary), Err(CircuitError::BadGate(_))));
        let same_qubit = r#"{"n_qubits":2,"cycles":1,"gates":[{"kind":"fsim","qubits":[1,1],"cycle":0,"theta":1,"phi":0}]}"#;
        assert!(matches!(parse_circuit(same_qubit), Err(CircuitError::BadGate(_))));
    }
}

pub mod circuit;
pub mod cli;
pub mod cluster;
pub mod planner;
pub mod quantizer;
pub mod sampler;
pub mod sparse;
pub mod tensors;

pub use circuit::{circuit_to_network, parse_circuit, statevector_oracle, Circuit, Gate, GateKind, TensorNetworkGraph};
pub use tensors::{fidelity, permute, DenseTensor, EinsumSpec, Label, Mode, Precision};

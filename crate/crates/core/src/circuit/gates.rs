use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use crate::tensors::{DenseTensor, Mode, Precision};

#[derive(Clone, Debug, PartialEq)]
pub enum GateKind {
    SqrtX,
    SqrtY,
    SqrtW,
    FSim { theta: f64, phi: f64 },
    /// Arbitrary 2x2 or 4x4 unitary, row-major.
    Unitary(Vec<Complex64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub cycle: usize,
}

impl Gate {
    pub fn single(kind: GateKind, qubit: usize, cycle: usize) -> Self {
        Gate { kind, qubits: vec![qubit], cycle }
    }

    pub fn fsim(theta: f64, phi: f64, q0: usize, q1: usize, cycle: usize) -> Self {
        Gate { kind: GateKind::FSim { theta, phi }, qubits: vec![q0, q1], cycle }
    }

    pub fn arity(&self) -> usize {
        self.qubits.len()
    }

    /// Row-major matrix; for two-qubit gates the first listed qubit is the
    /// more significant bit of the row and column index.
    pub fn matrix(&self) -> Vec<Complex64> {
        let c = Complex64::new;
        let h = FRAC_1_SQRT_2;
        match &self.kind {
            GateKind::SqrtX => vec![c(h, 0.), c(0., -h), c(0., -h), c(h, 0.)],
            GateKind::SqrtY => vec![c(h, 0.), c(-h, 0.), c(h, 0.), c(h, 0.)],
            GateKind::SqrtW => {
                // sqrt(i) = e^{i pi/4}, sqrt(-i) = e^{-i pi/4}
                let sqrt_i = Complex64::from_polar(1.0, FRAC_PI_4);
                let sqrt_mi = Complex64::from_polar(1.0, -FRAC_PI_4);
                vec![c(h, 0.), -sqrt_i * h, sqrt_mi * h, c(h, 0.)]
            }
            GateKind::FSim { theta, phi } => {
                let (s, co) = theta.sin_cos();
                let z = c(0., 0.);
                vec![
                    c(1., 0.), z, z, z,
                    z, c(co, 0.), c(0., -s), z,
                    z, c(0., -s), c(co, 0.), z,
                    z, z, z, Complex64::from_polar(1.0, -phi),
                ]
            }
            GateKind::Unitary(m) => m.clone(),
        }
    }

    pub(crate) fn kind_name(&self) -> &'static str {
        match self.kind {
            GateKind::SqrtX => "sqrt_x",
            GateKind::SqrtY => "sqrt_y",
            GateKind::SqrtW => "sqrt_w",
            GateKind::FSim { .. } => "fsim",
            GateKind::Unitary(_) => "unitary",
        }
    }
}

/// Gate as a rank-2 `(out, in)` or rank-4 `(out0, out1, in0, in1)` tensor.
pub fn gate_matrix(g: &Gate) -> DenseTensor {
    let modes: Vec<Mode> = if g.arity() == 1 {
        vec![Mode::new("o0", 2), Mode::new("i0", 2)]
    } else {
        vec![Mode::new("o0", 2), Mode::new("o1", 2), Mode::new("i0", 2), Mode::new("i1", 2)]
    };
    let data = g.matrix().iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
    DenseTensor::new(modes, data, Precision::C64).expect("gate layout is fixed")
}

/// Largest deviation of `M M^†` from the identity.
pub(crate) fn unitarity_error(m: &[Complex64]) -> f64 {
    let n = (m.len() as f64).sqrt() as usize;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += m[i * n + k] * m[j * n + k].conj();
            }
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc - want).norm());
        }
    }
    worst
}

/// Serialized gate record of the circuit JSON format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct GateRecord {
    pub kind: String,
    pub qubits: Vec<usize>,
    pub cycle: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[f64; 2]>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn approx(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn sqrt_x_matches_definition() {
        let m = Gate::single(GateKind::SqrtX, 0, 0).matrix();
        let h = FRAC_1_SQRT_2;
        assert!(approx(m[0], h, 0.) && approx(m[1], 0., -h) && approx(m[2], 0., -h) && approx(m[3], h, 0.));
    }

    #[test]
    fn fsim_special_points() {
        let id = Gate::fsim(0.0, 0.0, 0, 1, 0).matrix();
        for i in 0..4 {
            for j in 0..4 {
                assert!(approx(id[i * 4 + j], if i == j { 1. } else { 0. }, 0.));
            }
        }
        let sw = Gate::fsim(FRAC_PI_2, 0.0, 0, 1, 0).matrix();
        let want = [
            (0, 0, 1., 0.), (1, 2, 0., -1.), (2, 1, 0., -1.), (3, 3, 1., 0.),
        ];
        for i in 0..4 {
            for j in 0..4 {
                let (re, im) = want
                    .iter()
                    .find(|w| w.0 == i && w.1 == j)
                    .map(|w| (w.2, w.3))
                    .unwrap_or((0., 0.));
                assert!((sw[i * 4 + j] - Complex64::new(re, im)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn every_gate_is_unitary() {
        let gates = [
            Gate::single(GateKind::SqrtX, 0, 0),
            Gate::single(GateKind::SqrtY, 0, 0),
            Gate::single(GateKind::SqrtW, 0, 0),
            Gate::fsim(1.3, 0.4, 0, 1, 0),
            Gate::fsim(-2.0, 3.1, 0, 1, 0),
        ];
        for g in gates {
            assert!(unitarity_error(&g.matrix()) < 1e-6, "{:?}", g.kind);
        }
    }

    #[test]
    fn fsim_commutes_with_swap() {
        let m = Gate::fsim(0.9, 2.2, 0, 1, 0).matrix();
        let perm = [0usize, 2, 1, 3];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[i * 4 + j], m[perm[i] * 4 + perm[j]]);
            }
        }
    }

    #[test]
    fn gate_tensor_shapes() {
        assert_eq!(gate_matrix(&Gate::single(GateKind::SqrtW, 0, 0)).dims(), vec![2, 2]);
        assert_eq!(gate_matrix(&Gate::fsim(0.1, 0.2, 0, 1, 0)).dims(), vec![2, 2, 2, 2]);
    }
}

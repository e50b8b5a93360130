use num_complex::Complex64;

use super::{Circuit, CircuitError, Result};

pub const ORACLE_MAX_QUBITS: usize = 24;

/// Full state vector by sequential gate application. Qubit 0 is the most
/// significant bit of the basis index.
pub fn statevector_oracle(c: &Circuit) -> Result<Vec<Complex64>> {
    let n = c.n_qubits;
    if n > ORACLE_MAX_QUBITS {
        return Err(CircuitError::TooLarge { n_qubits: n, max: ORACLE_MAX_QUBITS });
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << n];
    psi[0] = Complex64::new(1.0, 0.0);
    for g in &c.gates {
        let m = g.matrix();
        match g.qubits.as_slice() {
            &[q] => apply_one(&mut psi, n, q, &m),
            &[q0, q1] => apply_two(&mut psi, n, q0, q1, &m),
            _ => unreachable!("validated gate arity"),
        }
    }
    Ok(psi)
}

fn bit(n: usize, q: usize) -> usize {
    1 << (n - 1 - q)
}

fn apply_one(psi: &mut [Complex64], n: usize, q: usize, m: &[Complex64]) {
    let b = bit(n, q);
    for i in 0..psi.len() {
        if i & b == 0 {
            let (a0, a1) = (psi[i], psi[i | b]);
            psi[i] = m[0] * a0 + m[1] * a1;
            psi[i | b] = m[2] * a0 + m[3] * a1;
        }
    }
}

fn apply_two(psi: &mut [Complex64], n: usize, q0: usize, q1: usize, m: &[Complex64]) {
    let (b0, b1) = (bit(n, q0), bit(n, q1));
    for i in 0..psi.len() {
        if i & (b0 | b1) == 0 {
            let idx = [i, i | b1, i | b0, i | b0 | b1];
            let amps = idx.map(|k| psi[k]);
            for (r, &k) in idx.iter().enumerate() {
                psi[k] = (0..4).map(|s| m[r * 4 + s] * amps[s]).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{random_circuit, Gate, GateKind, RandomCircuitConfig};
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn empty_is_ground_state() {
        let psi = statevector_oracle(&Circuit::empty(3)).unwrap();
        assert_eq!(psi[0], Complex64::new(1.0, 0.0));
        assert!(psi[1..].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn sqrt_x_first_column() {
        let c = Circuit::new(1, 0, vec![Gate::single(GateKind::SqrtX, 0, 0)]).unwrap();
        let psi = statevector_oracle(&c).unwrap();
        assert!((psi[0] - Complex64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((psi[1] - Complex64::new(0.0, -FRAC_1_SQRT_2)).norm() < 1e-15);
    }

    #[test]
    fn first_listed_qubit_is_high_bit() {
        // X on qubit 0 via a unitary, then a swap-like fsim moves the excitation to qubit 1
        let x = vec![
            Complex64::new(0., 0.), Complex64::new(1., 0.),
            Complex64::new(1., 0.), Complex64::new(0., 0.),
        ];
        let gates = vec![
            Gate::single(GateKind::Unitary(x), 0, 0),
            Gate::fsim(std::f64::consts::FRAC_PI_2, 0.0, 0, 1, 0),
        ];
        let psi = statevector_oracle(&Circuit::new(2, 1, gates).unwrap()).unwrap();
        // |10> -> -i |01>
        assert!((psi[0b01] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn normalized_and_guarded() {
        for seed in 0..5 {
            let c = random_circuit(&RandomCircuitConfig::new(8, 6, seed));
            let norm: f64 = statevector_oracle(&c).unwrap().iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-6);
        }
        assert!(matches!(statevector_oracle(&Circuit::empty(25)), Err(CircuitError::TooLarge { .. })));
    }
}

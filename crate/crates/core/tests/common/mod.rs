#![allow(dead_code)]

use betavqe::pauli::{Pauli, PauliString, PauliSum};
use betavqe::statevector::{Circuit, GateOp, Statevector};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub fn random_pauli_sum<R: Rng>(n: usize, n_terms: usize, rng: &mut R) -> PauliSum {
    let mut h = PauliSum::new(n);
    for _ in 0..n_terms {
        let ops = (0..n).map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)]).collect();
        h.add(PauliString::new(ops, rng.gen_range(-2.0..2.0)).unwrap()).unwrap();
    }
    h
}

pub fn random_state<R: Rng>(n: usize, rng: &mut R) -> Statevector {
    let mut amps: Vec<Complex64> =
        (0..1 << n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Statevector::from_amplitudes(amps).unwrap()
}

/// Circuit of `n_gates` random gates, each rotation with its own parameter.
pub fn random_circuit<R: Rng>(n: usize, n_gates: usize, rng: &mut R) -> (Circuit, Vec<f64>) {
    let mut gates = Vec::with_capacity(n_gates);
    let mut n_params = 0;
    for _ in 0..n_gates {
        let q = rng.gen_range(0..n);
        let choice = if n > 1 { rng.gen_range(0..4) } else { rng.gen_range(0..3) };
        let g = match choice {
            0 => GateOp::rx(q, n_params),
            1 => GateOp::ry(q, n_params),
            2 => GateOp::rz(q, n_params),
            _ => {
                let t = (q + rng.gen_range(1..n)) % n;
                GateOp::cnot(q, t)
            }
        };
        if g.param_index().is_some() {
            n_params += 1;
        }
        gates.push(g);
    }
    let theta = (0..n_params).map(|_| rng.gen_range(-3.2..3.2)).collect();
    (Circuit::new(n, n_params, gates).unwrap(), theta)
}

pub fn to_dvector(state: &Statevector) -> DVector<Complex64> {
    DVector::from_column_slice(state.amplitudes())
}

pub fn quadratic_form(m: &DMatrix<Complex64>, state: &Statevector) -> Complex64 {
    let v = to_dvector(state);
    (v.adjoint() * m * &v)[(0, 0)]
}

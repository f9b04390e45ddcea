//! Dense statevector simulation.
//!
//! Gates act in place on the amplitude vector through bit-masked index pairs;
//! no `2^n x 2^n` matrix is ever formed here. Rotations follow
//! `R_P(a) = exp(-i a P / 2)`, so the parameter-shift rule holds with a shift
//! of exactly `pi / 2`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::pauli::PauliSum;

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 26;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One gate of a circuit. Rotations read their angle from `theta[param]`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum GateOp {
    Rotation { axis: Axis, qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn rx(qubit: usize, param: usize) -> Self {
        GateOp::Rotation { axis: Axis::X, qubit, param }
    }

    pub fn ry(qubit: usize, param: usize) -> Self {
        GateOp::Rotation { axis: Axis::Y, qubit, param }
    }

    pub fn rz(qubit: usize, param: usize) -> Self {
        GateOp::Rotation { axis: Axis::Z, qubit, param }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp::Cnot { control, target }
    }

    pub fn param_index(&self) -> Option<usize> {
        match *self {
            GateOp::Rotation { param, .. } => Some(param),
            GateOp::Cnot { .. } => None,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Rotation { qubit, .. } => vec![qubit],
            GateOp::Cnot { control, target } => vec![control, target],
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::InvalidTarget { qubit: q, n_qubits });
            }
        }
        if let GateOp::Cnot { control, target } = *self {
            if control == target {
                return Err(Error::DegenerateCnot(control));
            }
        }
        Ok(())
    }
}

/// Line format: `<KIND> <qubits> <param>`, tab separated, e.g. `RY\t4\t17` or
/// `CNOT\t1,0\t-` (control first).
impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GateOp::Rotation { axis, qubit, param } => {
                let kind = match axis {
                    Axis::X => "RX",
                    Axis::Y => "RY",
                    Axis::Z => "RZ",
                };
                write!(f, "{kind}\t{qubit}\t{param}")
            }
            GateOp::Cnot { control, target } => write!(f, "CNOT\t{control},{target}\t-"),
        }
    }
}

impl FromStr for GateOp {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [kind, qubits, param] = fields[..] else {
            return Err(format!("expected 3 fields, found {}", fields.len()));
        };
        let num = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        let axis = match kind {
            "RX" => Axis::X,
            "RY" => Axis::Y,
            "RZ" => Axis::Z,
            "CNOT" => {
                let (c, t) = qubits.split_once(',').ok_or("CNOT needs control,target")?;
                if param != "-" {
                    return Err("CNOT takes no parameter".into());
                }
                return Ok(GateOp::cnot(num(c)?, num(t)?));
            }
            other => return Err(format!("unknown gate kind {other:?}")),
        };
        Ok(GateOp::Rotation { axis, qubit: num(qubits)?, param: num(param)? })
    }
}

/// Ordered gate list on a fixed register with a flat parameter vector.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_params: usize, gates: Vec<GateOp>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits { n: n_qubits, limit: MAX_QUBITS });
        }
        for g in &gates {
            g.validate(n_qubits)?;
            if let Some(index) = g.param_index() {
                if index >= n_params {
                    return Err(Error::ParameterIndex { index, n_params });
                }
            }
        }
        Ok(Circuit { n_qubits, n_params, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, GateOp::Cnot { .. })).count()
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params {
            return Err(Error::ParameterCount { expected: self.n_params, got: theta.len() });
        }
        Ok(())
    }

    /// One line per gate, preceded by a `qubits <n> params <m>` header.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {} params {}\n", self.n_qubits, self.n_params);
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or(Error::CircuitText { line: 1, msg: "empty input".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n_qubits, n_params) = match h[..] {
            ["qubits", q, "params", p] => (
                q.parse().map_err(|_| Error::CircuitText { line: 1, msg: "bad qubit count".into() })?,
                p.parse().map_err(|_| Error::CircuitText { line: 1, msg: "bad parameter count".into() })?,
            ),
            _ => return Err(Error::CircuitText { line: 1, msg: "expected `qubits <n> params <m>`".into() }),
        };
        let gates = lines
            .map(|(i, l)| l.parse::<GateOp>().map_err(|msg| Error::CircuitText { line: i + 1, msg }))
            .collect::<Result<Vec<_>>>()?;
        Circuit::new(n_qubits, n_params, gates)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state `|x>`.
    pub fn basis(n_qubits: usize, x: BitString) -> Result<Self> {
        if x.len() != n_qubits {
            return Err(Error::BitLength { expected: n_qubits, got: x.len() });
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits { n: n_qubits, limit: MAX_QUBITS });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[x.index() as usize] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The caller is responsible for normalization.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Config(format!("amplitude vector length {dim} is not a power of two")));
        }
        Ok(Statevector { n_qubits: dim.trailing_zeros() as usize, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, gate: &GateOp, theta: &[f64]) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some(index) = gate.param_index() {
            if index >= theta.len() {
                return Err(Error::ParameterIndex { index, n_params: theta.len() });
            }
        }
        apply_gate_raw(&mut self.amplitudes, gate, theta, false);
        Ok(())
    }

    /// Applies the inverse of `gate`.
    pub fn apply_inverse(&mut self, gate: &GateOp, theta: &[f64]) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some(index) = gate.param_index() {
            if index >= theta.len() {
                return Err(Error::ParameterIndex { index, n_params: theta.len() });
            }
        }
        apply_gate_raw(&mut self.amplitudes, gate, theta, true);
        Ok(())
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit, theta: &[f64]) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch { expected: circuit.n_qubits, got: self.n_qubits });
        }
        circuit.check_theta(theta)?;
        for g in &circuit.gates {
            apply_gate_raw(&mut self.amplitudes, g, theta, false);
        }
        Ok(())
    }
}

fn apply_gate_raw(amps: &mut [Complex64], gate: &GateOp, theta: &[f64], inverse: bool) {
    match *gate {
        GateOp::Rotation { axis, qubit, param } => {
            let angle = if inverse { -theta[param] } else { theta[param] };
            rotate(amps, axis, qubit, angle);
        }
        GateOp::Cnot { control, target } => cnot(amps, control, target),
    }
}

#[inline]
fn for_each_pair(amps: &mut [Complex64], qubit: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
    let step = 1usize << qubit;
    for chunk in amps.chunks_exact_mut(2 * step) {
        let (lo, hi) = chunk.split_at_mut(step);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            f(a, b);
        }
    }
}

fn rotate(amps: &mut [Complex64], axis: Axis, qubit: usize, angle: f64) {
    let (s, c) = (0.5 * angle).sin_cos();
    match axis {
        Axis::X => for_each_pair(amps, qubit, |a, b| {
            let (x, y) = (*a, *b);
            // -i s * z = (s z.im, -s z.re)
            *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
            *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
        }),
        Axis::Y => for_each_pair(amps, qubit, |a, b| {
            let (x, y) = (*a, *b);
            *a = x * c - y * s;
            *b = x * s + y * c;
        }),
        Axis::Z => {
            let lo = Complex64::new(c, -s);
            let hi = Complex64::new(c, s);
            for_each_pair(amps, qubit, |a, b| {
                *a *= lo;
                *b *= hi;
            })
        }
    }
}

fn cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let (lo, hi) = (control.min(target), control.max(target));
    let cm = 1usize << control;
    let tm = 1usize << target;
    for r in 0..amps.len() >> 2 {
        // spread r around zero bits at `lo` and `hi`
        let low = r & ((1 << lo) - 1);
        let mid = (r >> lo) & ((1 << (hi - lo - 1)) - 1);
        let top = r >> (hi - 1);
        let i = low | (mid << (lo + 1)) | (top << (hi + 1)) | cm;
        amps.swap(i, i | tm);
    }
}

#[inline]
fn im_conj_mul(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
fn re_conj_mul(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Visits matching amplitude pairs of `psi` and `lambda` on `qubit`, summing
/// what `f` returns.
#[inline]
fn fold_pairs2(
    psi: &mut [Complex64],
    lambda: &mut [Complex64],
    qubit: usize,
    mut f: impl FnMut(&mut Complex64, &mut Complex64, &mut Complex64, &mut Complex64) -> f64,
) -> f64 {
    let step = 1usize << qubit;
    let mut acc = 0.0;
    for (pc, lc) in psi.chunks_exact_mut(2 * step).zip(lambda.chunks_exact_mut(2 * step)) {
        let (p0, p1) = pc.split_at_mut(step);
        let (l0, l1) = lc.split_at_mut(step);
        for k in 0..step {
            acc += f(&mut p0[k], &mut p1[k], &mut l0[k], &mut l1[k]);
        }
    }
    acc
}

/// One reverse-sweep step for a rotation: returns `Im <lambda|P|psi>` and
/// undoes the rotation on both vectors, in a single pass.
fn overlap_and_unrotate(psi: &mut [Complex64], lambda: &mut [Complex64], axis: Axis, qubit: usize, angle: f64) -> f64 {
    let (s, c) = (-0.5 * angle).sin_cos();
    match axis {
        Axis::X => {
            let rx = |a: &mut Complex64, b: &mut Complex64| {
                let (x, y) = (*a, *b);
                *a = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                *b = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
            };
            fold_pairs2(psi, lambda, qubit, |p0, p1, l0, l1| {
                let v = im_conj_mul(*l0, *p1) + im_conj_mul(*l1, *p0);
                rx(p0, p1);
                rx(l0, l1);
                v
            })
        }
        Axis::Y => {
            let ry = |a: &mut Complex64, b: &mut Complex64| {
                let (x, y) = (*a, *b);
                *a = x * c - y * s;
                *b = x * s + y * c;
            };
            // (Y psi)_0 = -i psi_1, (Y psi)_1 = i psi_0
            fold_pairs2(psi, lambda, qubit, |p0, p1, l0, l1| {
                let v = re_conj_mul(*l1, *p0) - re_conj_mul(*l0, *p1);
                ry(p0, p1);
                ry(l0, l1);
                v
            })
        }
        Axis::Z => {
            let lo = Complex64::new(c, -s);
            let hi = Complex64::new(c, s);
            fold_pairs2(psi, lambda, qubit, |p0, p1, l0, l1| {
                let v = im_conj_mul(*l0, *p0) - im_conj_mul(*l1, *p1);
                *p0 *= lo;
                *p1 *= hi;
                *l0 *= lo;
                *l1 *= hi;
                v
            })
        }
    }
}

fn check_qubits(state: &Statevector, h: &PauliSum) -> Result<()> {
    if state.n_qubits != h.n_qubits() {
        return Err(Error::QubitMismatch { expected: h.n_qubits(), got: state.n_qubits });
    }
    Ok(())
}

fn expectation_raw(amps: &[Complex64], h: &PauliSum) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for (masks, c) in h.compiled() {
        let x = masks.x as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        if x == 0 {
            for (b, a) in amps.iter().enumerate() {
                acc += a.norm_sqr() * masks.sign(b);
            }
        } else {
            for (b, a) in amps.iter().enumerate() {
                acc += amps[b ^ x].conj() * a * masks.sign(b);
            }
        }
        total += acc * masks.y_phase() * c;
    }
    total
}

/// `<psi|H|psi>`.
pub fn expectation(state: &Statevector, h: &PauliSum) -> Result<f64> {
    check_qubits(state, h)?;
    let e = expectation_raw(&state.amplitudes, h);
    debug_assert!(e.im.abs() < 1e-10 * (1.0 + e.re.abs()), "expectation has imaginary residual {:e}", e.im);
    Ok(e.re)
}

fn apply_pauli_sum_raw(amps: &[Complex64], h: &PauliSum) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (masks, c) in h.compiled() {
        let x = masks.x as usize;
        let phase = masks.y_phase() * c;
        for (b, a) in amps.iter().enumerate() {
            out[b ^ x] += phase * a * masks.sign(b);
        }
    }
    out
}

/// `H|psi>` as an unnormalized amplitude vector.
pub fn apply_pauli_sum(state: &Statevector, h: &PauliSum) -> Result<Vec<Complex64>> {
    check_qubits(state, h)?;
    Ok(apply_pauli_sum_raw(&state.amplitudes, h))
}

/// `U(theta)|x>`.
pub fn evolve(x: BitString, circuit: &Circuit, theta: &[f64]) -> Result<Statevector> {
    let mut psi = Statevector::basis(circuit.n_qubits, x)?;
    psi.apply_circuit(circuit, theta)?;
    Ok(psi)
}

/// `<x|U^dag H U|x>`.
pub fn circuit_energy(x: BitString, circuit: &Circuit, theta: &[f64], h: &PauliSum) -> Result<f64> {
    let psi = evolve(x, circuit, theta)?;
    expectation(&psi, h)
}

/// `<x|U^dag H U|x>` together with its gradient in `theta`, by a reverse sweep.
///
/// After the forward pass `lambda = H U|x>` is carried backwards next to the
/// state; each rotation contributes `Im <lambda|P|psi>` at the point where
/// `psi` is the state right after that rotation. Memory is two state vectors.
pub fn energy_and_gradient(x: BitString, circuit: &Circuit, theta: &[f64], h: &PauliSum) -> Result<(f64, Vec<f64>)> {
    if h.n_qubits() != circuit.n_qubits {
        return Err(Error::QubitMismatch { expected: circuit.n_qubits, got: h.n_qubits() });
    }
    let mut psi = evolve(x, circuit, theta)?;
    let energy = expectation(&psi, h)?;
    let mut lambda = apply_pauli_sum_raw(&psi.amplitudes, h);
    let mut grad = vec![0.0; circuit.n_params];
    for g in circuit.gates.iter().rev() {
        match *g {
            GateOp::Rotation { axis, qubit, param } => {
                grad[param] += overlap_and_unrotate(&mut psi.amplitudes, &mut lambda, axis, qubit, theta[param]);
            }
            GateOp::Cnot { control, target } => {
                cnot(&mut psi.amplitudes, control, target);
                cnot(&mut lambda, control, target);
            }
        }
    }
    Ok((energy, grad))
}

/// Gradient of `<x|U^dag H U|x>` by reverse-mode (adjoint) differentiation.
pub fn grad_expectation_adjoint(x: BitString, circuit: &Circuit, theta: &[f64], h: &PauliSum) -> Result<Vec<f64>> {
    energy_and_gradient(x, circuit, theta, h).map(|(_, g)| g)
}

/// Gradient of `<x|U^dag H U|x>` by the two-point parameter-shift rule.
///
/// Requires every parameter to drive at most one rotation gate.
pub fn grad_expectation_shift(x: BitString, circuit: &Circuit, theta: &[f64], h: &PauliSum) -> Result<Vec<f64>> {
    circuit.check_theta(theta)?;
    let mut seen = vec![false; circuit.n_params];
    for g in &circuit.gates {
        if let Some(index) = g.param_index() {
            if std::mem::replace(&mut seen[index], true) {
                return Err(Error::SharedParameter { index });
            }
        }
    }
    let mut shifted = theta.to_vec();
    (0..circuit.n_params)
        .map(|k| {
            shifted[k] = theta[k] + FRAC_PI_2;
            let plus = circuit_energy(x, circuit, &shifted, h)?;
            shifted[k] = theta[k] - FRAC_PI_2;
            let minus = circuit_energy(x, circuit, &shifted, h)?;
            shifted[k] = theta[k];
            Ok(0.5 * (plus - minus))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{Pauli, PauliString};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single(p: Pauli) -> PauliSum {
        PauliSum::from_terms(1, [PauliString::new(vec![p], 1.0).unwrap()]).unwrap()
    }

    #[test]
    fn basis_states() {
        let s = Statevector::basis(2, "00".parse().unwrap()).unwrap();
        assert_eq!(s.amplitudes(), &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        let s = Statevector::basis(2, BitString::from_bits(&[0, 1]).unwrap()).unwrap();
        assert_eq!(s.amplitudes()[2], c(1., 0.));
        let s = Statevector::basis(3, "111".parse().unwrap()).unwrap();
        assert_eq!(s.amplitudes()[7], c(1., 0.));
        assert!(Statevector::basis(3, "11".parse().unwrap()).is_err());
    }

    #[test]
    fn rz_zero_is_identity() {
        let mut s = Statevector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let before = s.clone();
        s.apply_gate(&GateOp::rz(0, 0), &[0.0]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        let mut s = Statevector::basis(1, BitString::zeros(1)).unwrap();
        s.apply_gate(&GateOp::rx(0, 0), &[PI]).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1].im, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn cnot_truth_table() {
        let mut s = Statevector::basis(2, BitString::from_bits(&[1, 0]).unwrap()).unwrap();
        s.apply_gate(&GateOp::cnot(0, 1), &[]).unwrap();
        assert_eq!(s.amplitudes()[3], c(1., 0.));
        let mut s = Statevector::basis(2, BitString::from_bits(&[0, 1]).unwrap()).unwrap();
        s.apply_gate(&GateOp::cnot(0, 1), &[]).unwrap();
        assert_eq!(s.amplitudes()[2], c(1., 0.));
    }

    #[test]
    fn invalid_targets() {
        let mut s = Statevector::basis(2, BitString::zeros(2)).unwrap();
        assert!(s.apply_gate(&GateOp::rx(2, 0), &[0.0]).is_err());
        assert!(s.apply_gate(&GateOp::cnot(1, 1), &[]).is_err());
        assert!(Circuit::new(2, 1, vec![GateOp::ry(0, 1)]).is_err());
    }

    #[test]
    fn simple_expectations() {
        let s = Statevector::basis(1, BitString::zeros(1)).unwrap();
        assert_eq!(expectation(&s, &single(Pauli::Z)).unwrap(), 1.0);
        let mut plus = s.clone();
        plus.apply_gate(&GateOp::ry(0, 0), &[PI / 2.0]).unwrap();
        assert_abs_diff_eq!(expectation(&plus, &single(Pauli::X)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(expectation(&plus, &single(Pauli::Y)).unwrap(), 0.0, epsilon = 1e-14);
        assert!(expectation(&s, &PauliSum::new(2)).is_err());
    }

    #[test]
    fn apply_identity_and_x() {
        let s = Statevector::from_amplitudes(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let id = single(Pauli::I);
        assert_eq!(apply_pauli_sum(&s, &id).unwrap(), s.amplitudes());
        let zero = Statevector::basis(1, BitString::zeros(1)).unwrap();
        assert_eq!(apply_pauli_sum(&zero, &single(Pauli::X)).unwrap(), vec![c(0., 0.), c(1., 0.)]);
    }

    #[test]
    fn ry_gradient_is_minus_sine() {
        let circuit = Circuit::new(1, 1, vec![GateOp::ry(0, 0)]).unwrap();
        let h = single(Pauli::Z);
        let x = BitString::zeros(1);
        for &t in &[0.0, 0.3, PI / 2.0, 2.0] {
            let g = grad_expectation_adjoint(x, &circuit, &[t], &h).unwrap();
            assert_abs_diff_eq!(g[0], -t.sin(), epsilon = 1e-14);
        }
        let g = grad_expectation_shift(x, &circuit, &[PI / 2.0], &h).unwrap();
        assert_abs_diff_eq!(g[0], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn rz_commutes_with_z() {
        let circuit = Circuit::new(1, 1, vec![GateOp::rz(0, 0)]).unwrap();
        let g = grad_expectation_adjoint(BitString::zeros(1), &circuit, &[0.0], &single(Pauli::Z)).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn shift_rule_on_empty_and_shared() {
        let circuit = Circuit::new(2, 0, vec![GateOp::cnot(0, 1)]).unwrap();
        let h = PauliSum::new(2);
        assert!(grad_expectation_shift(BitString::zeros(2), &circuit, &[], &h).unwrap().is_empty());
        let shared = Circuit::new(1, 1, vec![GateOp::rx(0, 0), GateOp::ry(0, 0)]).unwrap();
        assert!(matches!(
            grad_expectation_shift(BitString::zeros(1), &shared, &[0.1], &single(Pauli::Z)),
            Err(Error::SharedParameter { index: 0 })
        ));
    }

    #[test]
    fn parameter_count_checked() {
        let circuit = Circuit::new(1, 2, vec![GateOp::rx(0, 0), GateOp::ry(0, 1)]).unwrap();
        assert!(matches!(
            grad_expectation_adjoint(BitString::zeros(1), &circuit, &[0.1], &single(Pauli::Z)),
            Err(Error::ParameterCount { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn circuit_text_round_trip() {
        let circuit = Circuit::new(3, 2, vec![GateOp::rz(2, 1), GateOp::cnot(1, 0), GateOp::rx(0, 0)]).unwrap();
        let text = circuit.to_text();
        assert_eq!(text, "qubits 3 params 2\nRZ\t2\t1\nCNOT\t1,0\t-\nRX\t0\t0\n");
        assert_eq!(Circuit::from_text(&text).unwrap(), circuit);
        assert!(Circuit::from_text("qubits 1 params 0\nCNOT\t0\t-\n").is_err());
    }
}

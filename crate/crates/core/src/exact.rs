//! Exact diagonalization of small Hamiltonians and the thermal quantities
//! derived from the full spectrum.
//!
//! All Boltzmann sums are shifted by the ground energy before exponentiation,
//! so large `beta` does not overflow.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::pauli::{to_dense_matrix, PauliSum};
use crate::statevector::{apply_pauli_sum, evolve, expectation, Circuit, Statevector};

/// Largest system [`Spectrum::new`] will diagonalize.
pub const EXACT_QUBIT_LIMIT: usize = 12;

/// Sorted eigenvalues of a Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

/// Thermal state of a solved Hamiltonian at one inverse temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSolution {
    pub eigenvalues: Vec<f64>,
    pub beta: f64,
    /// `-ln Z`, the quantity the variational loss is bounded by.
    pub free_energy: f64,
    pub energy: f64,
    pub specific_heat: f64,
    pub entropy: f64,
    pub purity: f64,
}

impl ExactSolution {
    pub fn ln_z(&self) -> f64 {
        -self.free_energy
    }

    /// Physical free energy `-ln Z / beta`.
    pub fn physical_free_energy(&self) -> f64 {
        self.free_energy / self.beta
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }
}

impl Spectrum {
    pub fn new(h: &PauliSum) -> Result<Self> {
        let n = h.n_qubits();
        if n > EXACT_QUBIT_LIMIT {
            return Err(Error::TooManyQubits { n, limit: EXACT_QUBIT_LIMIT });
        }
        let mut eigenvalues = if h.is_diagonal() {
            (0..1usize << n).map(|b| h.diagonal_element(b)).collect()
        } else {
            let dense = to_dense_matrix(h)?;
            if dense.iter().all(|z| z.im == 0.0) {
                let real: DMatrix<f64> = dense.map(|z| z.re);
                SymmetricEigen::new(real).eigenvalues.iter().copied().collect()
            } else {
                SymmetricEigen::new(dense).eigenvalues.iter().copied().collect::<Vec<f64>>()
            }
        };
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Spectrum { eigenvalues })
    }

    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Spectrum { eigenvalues }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Eigenvalue closest to `e`.
    pub fn nearest(&self, e: f64) -> f64 {
        let k = self.eigenvalues.partition_point(|&v| v < e);
        let mut best = f64::NAN;
        for idx in [k.wrapping_sub(1), k] {
            if let Some(&v) = self.eigenvalues.get(idx) {
                if best.is_nan() || (v - e).abs() < (best - e).abs() {
                    best = v;
                }
            }
        }
        best
    }

    /// Distinct levels in increasing order, merging values closer than `tol`.
    pub fn distinct_levels(&self, tol: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &e in &self.eigenvalues {
            if out.last().is_none_or(|&l| e - l > tol) {
                out.push(e);
            }
        }
        out
    }

    pub fn thermal(&self, beta: f64) -> ExactSolution {
        let e0 = self.ground_energy();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|e| (-beta * (e - e0)).exp()).collect();
        let z_shifted: f64 = weights.iter().sum();
        let ln_z = -beta * e0 + z_shifted.ln();
        let energy = weights.iter().zip(&self.eigenvalues).map(|(w, e)| w * e).sum::<f64>() / z_shifted;
        let var = weights.iter().zip(&self.eigenvalues).map(|(w, e)| w * (e - energy).powi(2)).sum::<f64>() / z_shifted;
        let purity = weights.iter().map(|w| w * w).sum::<f64>() / (z_shifted * z_shifted);
        ExactSolution {
            eigenvalues: self.eigenvalues.clone(),
            beta,
            free_energy: -ln_z,
            energy,
            specific_heat: beta * beta * var,
            entropy: beta * energy + ln_z,
            purity,
        }
    }
}

pub fn solve(h: &PauliSum, beta: f64) -> Result<ExactSolution> {
    Ok(Spectrum::new(h)?.thermal(beta))
}

pub fn exact_specific_heat(sol: &ExactSolution) -> f64 {
    sol.specific_heat
}

/// `‖(H - E)|psi>‖` with `E = <psi|H|psi>`.
pub fn residual(state: &Statevector, h: &PauliSum) -> Result<f64> {
    let e = expectation(state, h)?;
    let hpsi = apply_pauli_sum(state, h)?;
    let r: f64 = hpsi.iter().zip(state.amplitudes()).map(|(a, b)| (a - b * Complex64::new(e, 0.0)).norm_sqr()).sum();
    Ok(r.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenCheckRow {
    pub bits: BitString,
    pub energy: f64,
    pub nearest_eigenvalue: f64,
    pub abs_error: f64,
    pub residual: f64,
}

/// Compares each distinct sampled input's circuit energy with the spectrum.
pub fn eigenbasis_check(
    h: &PauliSum,
    spectrum: &Spectrum,
    circuit: &Circuit,
    theta: &[f64],
    samples: &[BitString],
) -> Result<Vec<EigenCheckRow>> {
    let mut distinct: Vec<BitString> = samples.to_vec();
    distinct.sort();
    distinct.dedup();
    distinct
        .into_iter()
        .map(|bits| {
            let psi = evolve(bits, circuit, theta)?;
            let energy = expectation(&psi, h)?;
            let nearest = spectrum.nearest(energy);
            Ok(EigenCheckRow {
                bits,
                energy,
                nearest_eigenvalue: nearest,
                abs_error: (energy - nearest).abs(),
                residual: residual(&psi, h)?,
            })
        })
        .collect()
}

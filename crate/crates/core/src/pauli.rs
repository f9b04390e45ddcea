//! Hamiltonians as weighted sums of Pauli strings.
//!
//! A [`PauliString`] assigns one of `I, X, Y, Z` to every qubit and carries a
//! real coefficient. A [`PauliSum`] keeps its terms merged: two terms with the
//! same operator pattern are folded into one. The transverse-field Ising model
//! on an open square grid is built by [`build_tfim`].
//!
//! Basis conventions used throughout the crate: qubit `i` is bit `i` of the
//! basis-state index (qubit 0 least significant), and lattice site `(r, c)` is
//! qubit `r * cols + c`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest system that [`to_dense_matrix`] will materialize.
pub const DENSE_QUBIT_LIMIT: usize = 14;

/// Tolerance on the imaginary part of merged coefficients.
const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    /// Single-qubit product `self * other = phase * result`.
    pub fn product(self, other: Pauli) -> (Complex64, Pauli) {
        use Pauli::*;
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        match (self, other) {
            (I, p) | (p, I) => (one, p),
            (X, X) | (Y, Y) | (Z, Z) => (one, I),
            (X, Y) => (i, Z),
            (Y, X) => (-i, Z),
            (Y, Z) => (i, X),
            (Z, Y) => (-i, X),
            (Z, X) => (i, Y),
            (X, Z) => (-i, Y),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Bit masks describing how a Pauli string acts on basis states.
///
/// `P |b> = i^{n_y} (-1)^{popcount(b & z)} |b ^ x>`, where `x` marks the `X`
/// and `Y` factors, `z` the `Z` and `Y` factors and `n_y` counts the `Y`s.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliMasks {
    pub x: u64,
    pub z: u64,
    pub n_y: u32,
}

impl PauliMasks {
    /// `i^{n_y}` as a complex number.
    pub fn y_phase(&self) -> Complex64 {
        match self.n_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    #[inline]
    pub fn sign(&self, basis: usize) -> f64 {
        if (basis as u64 & self.z).count_ones() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PauliString {
    ops: Vec<Pauli>,
    coefficient: f64,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>, coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::NonFiniteCoefficient(coefficient));
        }
        if ops.len() > 63 {
            return Err(Error::TooManyQubits { n: ops.len(), limit: 63 });
        }
        Ok(PauliString { ops, coefficient })
    }

    /// `coefficient * I` on `n` qubits.
    pub fn identity(n: usize, coefficient: f64) -> Result<Self> {
        Self::new(vec![Pauli::I; n], coefficient)
    }

    /// `coefficient` times the given single-qubit factors, identity elsewhere.
    pub fn from_sparse(n: usize, factors: &[(usize, Pauli)], coefficient: f64) -> Result<Self> {
        let mut ops = vec![Pauli::I; n];
        for &(q, p) in factors {
            if q >= n {
                return Err(Error::InvalidTarget { qubit: q, n_qubits: n });
            }
            ops[q] = p;
        }
        Self::new(ops, coefficient)
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn n_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn masks(&self) -> PauliMasks {
        let mut m = PauliMasks { x: 0, z: 0, n_y: 0 };
        for (q, op) in self.ops.iter().enumerate() {
            match op {
                Pauli::I => {}
                Pauli::X => m.x |= 1 << q,
                Pauli::Z => m.z |= 1 << q,
                Pauli::Y => {
                    m.x |= 1 << q;
                    m.z |= 1 << q;
                    m.n_y += 1;
                }
            }
        }
        m
    }

    /// True when the string is diagonal in the computational basis.
    pub fn is_diagonal(&self) -> bool {
        self.ops.iter().all(|p| matches!(p, Pauli::I | Pauli::Z))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+} ", self.coefficient)?;
        let mut any = false;
        for (q, op) in self.ops.iter().enumerate() {
            if *op != Pauli::I {
                write!(f, "{}{}", op.symbol(), q)?;
                any = true;
            }
        }
        if !any {
            f.write_str("I")?;
        }
        Ok(())
    }
}

/// A Hermitian operator written as a sum of distinct Pauli strings.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        PauliSum { n_qubits, terms: Vec::new() }
    }

    /// Builds a sum, merging duplicate patterns. Terms keep first-seen order.
    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = PauliString>) -> Result<Self> {
        let mut sum = PauliSum::new(n_qubits);
        for t in terms {
            sum.add(t)?;
        }
        Ok(sum)
    }

    pub fn add(&mut self, term: PauliString) -> Result<()> {
        if term.n_qubits() != self.n_qubits {
            return Err(Error::PauliLength { expected: self.n_qubits, got: term.n_qubits() });
        }
        match self.terms.iter_mut().find(|t| t.ops == term.ops) {
            Some(existing) => existing.coefficient += term.coefficient,
            None => self.terms.push(term),
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `(masks, coefficient)` pairs for the simulator kernels.
    pub fn compiled(&self) -> Vec<(PauliMasks, f64)> {
        self.terms.iter().map(|t| (t.masks(), t.coefficient)).collect()
    }

    /// True when every term with a nonzero coefficient is built from `I` and `Z`.
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == 0.0 || t.is_diagonal())
    }

    /// Diagonal matrix element `<b|H|b>`.
    pub fn diagonal_element(&self, basis: usize) -> f64 {
        self.terms.iter().filter(|t| t.is_diagonal()).map(|t| t.coefficient * t.masks().sign(basis)).sum()
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Boundary condition of a [`LatticeSpec`]. Only open boundaries are modelled.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Open,
}

/// Square grid with open boundaries and a transverse field strength.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub gamma: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn new(rows: usize, cols: usize, gamma: f64) -> Result<Self> {
        let spec = LatticeSpec { rows, cols, gamma, boundary: Boundary::Open };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::EmptyLattice { rows: self.rows, cols: self.cols });
        }
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::InvalidField(self.gamma));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.rows * self.cols
    }

    pub fn site(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Nearest-neighbour pairs: horizontal bonds row by row, then vertical
    /// bonds row by row. Each pair is `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.n_edges());
        for r in 0..self.rows {
            for c in 0..self.cols.saturating_sub(1) {
                edges.push((self.site(r, c), self.site(r, c + 1)));
            }
        }
        for r in 0..self.rows.saturating_sub(1) {
            for c in 0..self.cols {
                edges.push((self.site(r, c), self.site(r + 1, c)));
            }
        }
        edges
    }

    pub fn n_edges(&self) -> usize {
        self.rows * self.cols.saturating_sub(1) + self.rows.saturating_sub(1) * self.cols
    }
}

/// `H = -sum_<ij> Z_i Z_j - gamma * sum_i X_i` on the lattice.
///
/// Terms are emitted as all `ZZ` bonds (in [`LatticeSpec::edges`] order)
/// followed by one `X` term per site.
pub fn build_tfim(spec: &LatticeSpec) -> Result<PauliSum> {
    spec.validate()?;
    let n = spec.n_qubits();
    if n > 63 {
        return Err(Error::TooManyQubits { n, limit: 63 });
    }
    let mut h = PauliSum::new(n);
    for (a, b) in spec.edges() {
        h.add(PauliString::from_sparse(n, &[(a, Pauli::Z), (b, Pauli::Z)], -1.0)?)?;
    }
    for q in 0..n {
        h.add(PauliString::from_sparse(n, &[(q, Pauli::X)], -spec.gamma)?)?;
    }
    Ok(h)
}

/// Dense `2^n x 2^n` matrix of `h` in the computational basis.
pub fn to_dense_matrix(h: &PauliSum) -> Result<DMatrix<Complex64>> {
    let n = h.n_qubits();
    if n > DENSE_QUBIT_LIMIT {
        return Err(Error::TooManyQubits { n, limit: DENSE_QUBIT_LIMIT });
    }
    let dim = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (masks, c) in h.compiled() {
        let phase = masks.y_phase() * c;
        for col in 0..dim {
            let row = col ^ masks.x as usize;
            m[(row, col)] += phase * masks.sign(col);
        }
    }
    Ok(m)
}

/// `h * h` expanded back into a merged Pauli sum.
///
/// Products are accumulated with complex phases; every merged coefficient
/// must come out real, otherwise [`Error::NonHermitian`] is returned. Terms
/// whose coefficient cancels to zero are dropped.
pub fn square(h: &PauliSum) -> Result<PauliSum> {
    let n = h.n_qubits();
    let mut index: HashMap<Vec<Pauli>, usize> = HashMap::new();
    let mut acc: Vec<(Vec<Pauli>, Complex64)> = Vec::new();
    for a in h.terms() {
        for b in h.terms() {
            let mut phase = Complex64::new(a.coefficient * b.coefficient, 0.0);
            let ops: Vec<Pauli> = a
                .ops
                .iter()
                .zip(&b.ops)
                .map(|(&p, &q)| {
                    let (ph, r) = p.product(q);
                    phase *= ph;
                    r
                })
                .collect();
            match index.get(&ops) {
                Some(&k) => acc[k].1 += phase,
                None => {
                    index.insert(ops.clone(), acc.len());
                    acc.push((ops, phase));
                }
            }
        }
    }
    let scale = h.terms().iter().map(|t| t.coefficient.abs()).sum::<f64>().max(1.0);
    let mut out = PauliSum::new(n);
    for (ops, c) in acc {
        if c.im.abs() > HERMITIAN_TOL * scale * scale {
            return Err(Error::NonHermitian(c.im));
        }
        if c.re.abs() > HERMITIAN_TOL * scale * scale {
            out.terms.push(PauliString::new(ops, c.re)?);
        }
    }
    Ok(out)
}

//! Brickwork circuit of general two-qubit blocks on the lattice bonds.
//!
//! Every layer places one SU(4) block on every bond of the grid, in the order
//! of [`LatticeSpec::edges`]. A block on bond `(a, b)` is, in time order:
//!
//! ```text
//! RZ RY RZ on a, RZ RY RZ on b
//! CNOT b->a
//! RZ on a, RY on b
//! CNOT a->b
//! RY on b
//! CNOT b->a
//! RZ RY RZ on a, RZ RY RZ on b
//! ```
//!
//! 15 rotation angles and 3 CNOTs, enough to reach any two-qubit unitary up
//! to a global phase. Angles are numbered in emission order.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::LatticeSpec;
use crate::statevector::{Circuit, GateOp};

pub const PARAMS_PER_BLOCK: usize = 15;
pub const CNOTS_PER_BLOCK: usize = 3;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct AnsatzOptions {
    /// Append a final `RZ RY RZ` on every qubit (3 angles per qubit).
    ///
    /// Off by default. Lattices without bonds need it to rotate anything.
    pub local_layer: bool,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AnsatzCircuit {
    circuit: Circuit,
    depth: usize,
    lattice: LatticeSpec,
    options: AnsatzOptions,
}

impl AnsatzCircuit {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn options(&self) -> AnsatzOptions {
        self.options
    }

    pub fn into_circuit(self) -> Circuit {
        self.circuit
    }
}

impl Deref for AnsatzCircuit {
    type Target = Circuit;

    fn deref(&self) -> &Circuit {
        &self.circuit
    }
}

/// Appends one SU(4) block on `(a, b)`, drawing angle indices from `next`.
pub fn push_su4_block(gates: &mut Vec<GateOp>, a: usize, b: usize, next: &mut usize) {
    let mut take = || {
        *next += 1;
        *next - 1
    };
    let mut block = Vec::with_capacity(PARAMS_PER_BLOCK + CNOTS_PER_BLOCK);
    for q in [a, b] {
        block.extend([GateOp::rz(q, take()), GateOp::ry(q, take()), GateOp::rz(q, take())]);
    }
    block.push(GateOp::cnot(b, a));
    block.extend([GateOp::rz(a, take()), GateOp::ry(b, take())]);
    block.push(GateOp::cnot(a, b));
    block.push(GateOp::ry(b, take()));
    block.push(GateOp::cnot(b, a));
    for q in [a, b] {
        block.extend([GateOp::rz(q, take()), GateOp::ry(q, take()), GateOp::rz(q, take())]);
    }
    gates.extend(block);
}

pub fn build_ansatz(lattice: &LatticeSpec, depth: usize) -> Result<AnsatzCircuit> {
    build_ansatz_with(lattice, depth, AnsatzOptions::default())
}

pub fn build_ansatz_with(lattice: &LatticeSpec, depth: usize, options: AnsatzOptions) -> Result<AnsatzCircuit> {
    lattice.validate()?;
    if depth < 1 {
        return Err(Error::ZeroDepth);
    }
    let n = lattice.n_qubits();
    let edges = lattice.edges();
    let mut gates = Vec::with_capacity(depth * edges.len() * (PARAMS_PER_BLOCK + CNOTS_PER_BLOCK) + 3 * n);
    let mut next = 0;
    for _ in 0..depth {
        for &(a, b) in &edges {
            push_su4_block(&mut gates, a, b, &mut next);
        }
    }
    if options.local_layer {
        for q in 0..n {
            gates.push(GateOp::rz(q, next));
            gates.push(GateOp::ry(q, next + 1));
            gates.push(GateOp::rz(q, next + 2));
            next += 3;
        }
    }
    let circuit = Circuit::new(n, next, gates)?;
    Ok(AnsatzCircuit { circuit, depth, lattice: *lattice, options })
}

pub fn param_count(circuit: &AnsatzCircuit) -> usize {
    circuit.n_params()
}

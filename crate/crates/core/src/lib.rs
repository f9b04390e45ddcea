//! Variational free-energy minimization for quantum spin models.
//!
//! A classical autoregressive network ([`made::MadeModel`]) draws bit strings
//! `x`, each prepared as the product state `|x>` and rotated by a parametrized
//! circuit ([`ansatz`]). The resulting mixed state
//! `rho = sum_x p(x) U|x><x|U^dag` is trained ([`trainer`]) to minimize
//! `Tr(rho ln rho) + beta Tr(rho H)`, which upper-bounds `-ln Z` and reaches it
//! only at the Gibbs state. [`exact`] diagonalizes small Hamiltonians to check
//! the result, and [`runner`] drives training runs from configuration files.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod ansatz;
pub mod bits;
pub mod checkpoint;
pub mod error;
pub mod exact;
pub mod made;
pub mod optim;
pub mod pauli;
pub mod runner;
pub mod statevector;
pub mod trainer;

pub use bits::BitString;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/hamiltonians.md")]
    mod hamiltonians {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/ansatz.md")]
    mod ansatz {}
    #[doc = include_str!("../../../book/src/autoregressive.md")]
    mod autoregressive {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Lattice realization of the deformed momentum `P_(f) = -i d/dx + i f'(x)`.
//!
//! Every operator is a dense complex matrix on a uniform 1-D grid. On top of
//! that substrate the crate builds the four Hamiltonians generated by
//! `P_(f)`, the 2x2 and 4x4 supercharge algebras, and the Black-Scholes
//! family of non-Hermitian Hamiltonians, which it uses to price options by
//! backward evolution. Closed-form and Monte Carlo pricers serve as
//! independent oracles.

pub mod block;
pub mod eigen;
pub mod error;
pub mod finance;
pub mod function;
pub mod grid;
pub mod hamiltonians;
pub mod linop;
pub mod montecarlo;
pub mod operators;
pub mod probe;
pub mod report;
pub mod suite;
pub mod susy;
pub mod tolerance;

pub use error::{Error, Result};
pub use function::FunctionSpec;
pub use grid::Grid1D;
pub use linop::LinOp;

pub use num_complex::Complex64 as C64;

//! Factorization of hypergeometric-type difference equations on q-lattices:
//! q-Hamiltonians, alpha-ladder operators, the varsigma-commutator search and
//! the su_q(1,1) dynamical algebra, checked numerically on grids.

pub mod error;
pub mod factor;
pub mod families;
pub mod opalg;
pub mod par;
pub mod qcore;
pub mod suq;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use par::Exec;
pub use qcore::Shift;

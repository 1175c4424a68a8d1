//! Dense and sparse complex linear algebra shared by all modules.

pub mod dense;
pub mod krylov;
pub mod sparse;

pub use dense::{c, DMat, DVec, I, ONE, ZERO};
pub use krylov::{expm_action, KrylovOptions, KrylovOutcome, LinearOperator};
pub use sparse::{SpaceTag, SparseOp};
pub use num_complex::Complex64 as C64;

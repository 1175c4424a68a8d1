//! Numerical laboratory for the quasi-classical limit of particle-field systems.
//!
//! The microscopic side simulates the ε-scaled regularized Nelson model on a
//! truncated symmetric Fock space; the effective side evolves state-valued
//! measures (weighted ensembles of field configurations carrying particle
//! density matrices) under the time-dependent Schrödinger operator
//! `K_0 + V(e^{-itνω} z)`. The harness compares the two as ε → 0.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod micro;
pub mod models;
pub mod qc_dynamics;
pub mod serde_complex;
pub mod symbols;

pub use error::{Error, Result};
pub use fock::{FieldVector, FockBasis, FockSpec};
pub use harness::{ExperimentConfig, ExperimentResult};
pub use linalg::{SpaceTag, SparseOp, C64};
pub use measures::{Sample, StateValuedMeasure};
pub use micro::HybridState;
pub use models::{ModelConfig, NuRegime, ParticleGrid};
pub use qc_dynamics::{Integrator, PropagatorConfig};
pub use symbols::{FormFactor, Monomial, SimpleSymbol, SymbolSpec};

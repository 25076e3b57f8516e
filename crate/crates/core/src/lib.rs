//! Numerics for adiabatic geometric structures of parameterized Hermitian
//! families: open-path and cyclic geometric phases, the quantum geometric
//! tensor, the time-correlation function of the projector and the force
//! operator, and the fluctuation-correlation identity linking them, plus a
//! classical phase-space counterpart.

pub mod classical;
pub mod correlation;
pub mod error;
pub mod family;
pub mod geometry;
pub mod linalg;
pub mod par;

pub use error::{Error, Result};
pub use family::{FamilyKind, GradientSet, HamiltonianFamily, Monomial, ParameterPoint};
pub use linalg::{CMatrix, CVector, EigenDecomposition, HermitianMatrix, C64};

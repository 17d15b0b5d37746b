//! Moment dynamics and Gaussian stationary states for GKSL generators of
//! classical diffusion type,
//!
//! ```text
//! dρ/dt = −½ Σ_j [C_j, [C_j, ρ]],    C_j = ½𝔞ᵀK_j𝔞,
//! ```
//!
//! with quadratic bosonic or fermionic `C_j`.
//!
//! * [`moments`] propagates moment tensors of any order in closed form.
//! * [`gaussian`] checks stationarity of Gaussian states and normalizes them.
//! * [`fock`] is an explicit Fock-space oracle for cross-checking both.

pub mod algebra;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod moments;

pub use algebra::{GeneratorSpec, ModeSystem, QuadraticCoefficient, Statistics};
pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, C64};
pub use moments::MomentTensor;

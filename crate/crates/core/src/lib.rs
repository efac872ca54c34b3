//! Symmetrically orthogonally decomposable length-2 tensor trains.
//!
//! The crate builds trains `p_abcd = Σ_s T_abs S_cds` from two symmetric odeco
//! nodes, evaluates the polynomial families that vanish on them (the linear
//! relations `P_n`, the quadratic relations `Q_n` and the degree-`n`
//! invariant `h_n`) both numerically and symbolically, and checks the
//! algebraic claims around them: ideal non-membership of `h_n` over prime
//! fields and the dimension of the parametrized set via Jacobian ranks.

pub mod equations;
pub mod error;
pub mod geometry;
pub mod ideal;
pub mod models;
pub mod poly;
pub mod report;
pub mod tensor;

pub use error::{Error, Result};

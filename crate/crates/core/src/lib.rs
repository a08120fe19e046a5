//! Exact census machinery for ideal counts of cyclic cubic fields.
//!
//! The library evaluates the ideal-counting function r₃ = 1*χ*χ² attached to a
//! cyclic cubic field of conductor q, root-counting functions of binary cubic
//! forms modulo prime powers, generalized Hooley Δ₃ functions, the local
//! densities K_p(F), K_q(F), K(F), and the lattice census
//! Q(F,ξ,R) = Σ r₃(F(x)) over Z² ∩ R(ξ).
//!
//! Everything that admits a closed formula is paired with a brute-force oracle
//! at desk scale; `verify` runs the whole comparison suite.

pub mod arith;
pub mod census;
pub mod character;
pub mod congruence;
pub mod delta;
pub mod density;
pub mod error;
pub mod field;
pub mod parametrize;
pub mod verify;

pub use error::{Error, Result};

//! Kolyvagin-system ideals attached to synthetic Euler systems over
//! truncated Iwasawa algebras `Λ = O[[x_1, ..., x_r]]`.
//!
//! Every computation happens in a finite quotient `Λ/I(h^m)` cut out by a
//! monic parameter system `h`, at a fixed working precision `p^M`.

pub mod arith;
pub mod cli;
pub mod coeff;
pub mod error;
pub mod euler;
pub mod fitting;
pub mod galois;
pub mod lambda;
pub mod kolyvagin;
pub mod linalg;
pub mod poly;
pub mod ring;

pub use error::{Error, Result};

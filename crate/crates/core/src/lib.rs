//! Discrete averages and singular integrals along polynomial orbits of primes.

pub mod error;
pub mod expsums;
pub mod io;
pub mod iw;
pub mod lattice;
pub mod multipliers;
pub mod numeric;
pub mod numtheory;
pub mod operators;
pub mod variation;

pub use error::{Error, Result};

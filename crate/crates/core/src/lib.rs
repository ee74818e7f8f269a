//! Obstruction equations for Einstein desingularizations of the flat orbifold
//! T^4/Z_2 by Eguchi-Hanson metrics.

pub mod algebra;
pub mod error;
pub mod lattice;
pub mod point;

pub use error::{Error, Result};
pub mod config;
pub mod obstruction;
pub mod reproduce;
pub mod solver;

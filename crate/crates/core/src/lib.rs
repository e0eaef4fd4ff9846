//! Harmonic functions, boundary martingales and universal harmonic functions
//! on rooted trees.

pub mod dirichlet;
pub mod error;
pub mod function;
pub mod measure;
pub mod montecarlo;
pub mod operator;
pub mod passage;
pub mod rational;
pub mod tree;
pub mod universality;

pub use error::{Error, Result};

//! Engineered likelihood functions for Bayesian amplitude estimation.
//!
//! The bias Λ(θ; x) of an ancilla-free (AF) or ancilla-based (AB) circuit layer stack
//! is evaluated exactly from 2x2 products, expanded as a cosine polynomial in θ, pushed
//! through a Gaussian prior to obtain the variance reduction factor V, and maximized
//! over the rotation angles x by coordinate ascent.

pub mod bayes_engine;
pub mod chebyshev_reference;
pub mod elf_optimizer;
pub mod error;
pub mod harness;
pub mod logical_circuit;
pub mod pq_combinatorics;
pub mod quadrature;
pub mod series_expansion;
pub mod validation;

pub use error::{ElfError, Result};

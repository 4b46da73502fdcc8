//! Ground states of the focusing nonlinear Schrödinger energy on metric
//! graphs, with the hexagonal grid as the main example.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod calculus;
pub mod discrete;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod graph;
pub mod lattice;
pub mod solver;

pub use error::{Error, Result};

//! Numerical toolkit for magnetic systems with a potential on a coordinate ball.
//!
//! A system `(g, α, U)` at energy `k` moves particles along curves solving
//! `∇_σ̇ σ̇ = Y(σ̇) − ∇U(σ)`, where `Y` is the Lorentz force of `dα`. The crate
//! integrates this flow, evaluates ray transforms of tensor triples along it,
//! builds the reduced magnetic system `(2(k−U)g, α)` at energy ½, and checks the
//! identities tying the two together: transform reduction, potential algebra,
//! action equality, gauge invariance and Santaló's formula.

#![allow(clippy::needless_range_loop, clippy::redundant_guards)]

pub mod action;
pub mod catalog;
pub mod error;
pub mod fieldexpr;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod measures;
pub mod potentials;
pub mod quadrature;
pub mod reduction;
pub mod transform;

pub use error::{Error, Result};
pub use fieldexpr::{parse, Expr};
pub use geometry::{Metric, MpSystem};

/// Largest supported dimension of the coordinate ball.
pub const MAX_DIM: usize = 3;

pub type Vector = [f64; MAX_DIM];
pub type Matrix = [[f64; MAX_DIM]; MAX_DIM];

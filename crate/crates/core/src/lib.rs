//! Best approximation of a random vector by a variable independent of a
//! finite σ-algebra, and the series decomposition obtained by iterating it.
//!
//! The pipeline: a [`ConditionedVariable`] lists the atoms of the σ-algebra
//! with the conditional law of `X` on each. [`barycenter`] finds the
//! Wasserstein-2 barycenter ν₀ of those laws, [`approx`] couples every atom to
//! ν₀ optimally to realize `Y`, and [`decomposition`] repeats the step on the
//! residual `X − Y`. [`verify`] checks the resulting identities and
//! inequalities.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod barycenter;
pub mod compress;
pub mod decomposition;
pub mod error;
pub mod generate;
pub mod io;
pub mod measure;
pub mod ot;
pub mod parallel;
pub mod verify;

pub use approx::{best_approximation, ApproxOptions, ApproximationResult, RefinedVariable};
pub use barycenter::{BarycenterMode, BarycenterProblem, BarycenterResult};
pub use error::{Error, Result};
pub use decomposition::{decompose, DecompositionOptions, DecompositionReport};
pub use measure::{Atom, ConditionedVariable, DiscreteMeasure, Vector, WeightedPoint};
pub use ot::{solve_w2, Coupling, TransportResult};

pub use verify::{verify_approximation, verify_decomposition, CheckResult};

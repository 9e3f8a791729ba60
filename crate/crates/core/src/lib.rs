//! Numerical laboratory for diagonal cohomogeneity-one centrally flat
//! Kähler metrics under nil3/Z, SU(2) and E(2) actions: ODE right-hand
//! sides, curvature evaluators, equilibrium analysis, adaptive integration,
//! power-series expansions at singular orbits, closed-form solutions and
//! completeness classification.

pub mod ansatz;
pub mod bianchi;
pub mod cli;
pub mod closed_form;
pub mod diagnostics;
pub mod equilibria;
pub mod error;
pub mod flow;
pub mod series;

pub use bianchi::{Derivative, GroupSpec, GroupTag, State};
pub use error::{Error, Result};

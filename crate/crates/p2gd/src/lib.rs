//! First-order low-rank optimization on the determinantal variety
//! `R^{m×n}_{≤r}` of real matrices with rank at most `r`.
//!
//! The crate implements two projected-gradient iteration maps and an
//! iterative driver around them:
//!
//! * **P²GD** — a step along a projection of the negative gradient onto the
//!   tangent cone to the variety, followed by a metric projection back onto
//!   the variety, with Armijo backtracking.
//! * **P²GDR** — P²GD equipped with a rank reduction mechanism: steps are
//!   also attempted from rank-truncated copies of the iterate and the best
//!   candidate (lowest cost) is kept.
//!
//! P²GD can converge towards *apocalyptic* points: limits where the
//! stationarity measure jumps up even though it tends to zero along the
//! iterates. The rank reduction mechanism of P²GDR rules this out, at the
//! price of extra candidate steps and possible convergence to a different
//! stationary point. The [`experiments`] module ships four small analytic
//! scenarios on which both behaviors are observable exactly, and the `p2gd`
//! binary exposes them on the command line.
//!
//! Entry points: [`variety`] for the geometry (SVD, rank, tangent-cone
//! projection, stationarity measure), [`objectives`] for the built-in cost
//! functions, [`solver`] for the iteration maps and driver, [`experiments`]
//! for scenarios and comparison reports, [`cli`] for the command-line front
//! end.

pub mod checks;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod objectives;
pub mod solver;
pub mod variety;

pub use error::{Error, Result};

/// Ambient-space element: a dense real matrix under the Frobenius inner
/// product. Points, gradients, and search directions are all `Matrix` values.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Square matrix with the given diagonal. The analytic scenarios live on
/// diagonal matrices, so this shows up everywhere.
///
/// ```
/// let x = p2gd::diag(&[2.0, 1.0, 0.0]);
/// assert_eq!(x[(0, 0)], 2.0);
/// assert_eq!(x[(0, 1)], 0.0);
/// ```
pub fn diag(entries: &[f64]) -> Matrix {
    Matrix::from_diagonal(&nalgebra::DVector::from_vec(entries.to_vec()))
}

#[cfg(doctest)]
mod book {
    //! The guide chapters under `book/` double as doc-tests so their code
    //! stays in sync with the crate.
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/stationarity.md")]
    mod stationarity {}
    #[doc = include_str!("../../../book/src/algorithms.md")]
    mod algorithms {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

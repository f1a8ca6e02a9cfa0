//! Busemann subgradients and a hybrid projection-proximal point method on
//! Hadamard model spaces.
//!
//! - [`manifold`]: flat space and the hyperboloid model, with exponential and
//!   logarithm maps, distances and parallel transport.
//! - [`busemann`]: Busemann functions, their gradients, horospheres and
//!   horoball projections.
//! - [`bsubdiff`]: objective oracles that return certified Busemann
//!   subgradients, plus an empirical verifier.
//! - [`solver`]: the outer projection method, the inner approximate proximal
//!   routine, exact proximal iterations and run certificates.
//!
//! ```
//! use horoprox::bsubdiff::max_of_distances;
//! use horoprox::manifold::{dist, Space};
//! use horoprox::solver::{bhppm, SolverConfig, Terminal};
//!
//! let h2 = Space::hyperboloid(2, 1.0)?;
//! let a = h2.lift(&[-1.0, 0.0])?;
//! let b = h2.lift(&[1.0, 0.0])?;
//! let f = max_of_distances(&[a.clone(), b.clone()])?;
//! let run = bhppm(f.as_ref(), &h2.lift(&[0.3, 1.2])?, &SolverConfig::default())?;
//! assert_eq!(run.terminal, Terminal::Converged);
//! let (da, db) = (dist(&run.final_point, &a)?, dist(&run.final_point, &b)?);
//! assert!((da - db).abs() < 1e-6);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// `!(x > 0.0)` style guards are deliberate: NaN has to fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bsubdiff;
pub mod busemann;
pub mod manifold;
pub mod solver;

pub use manifold::{Point, Space, Tangent};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/busemann.md")]
    mod busemann {}
    #[doc = include_str!("../../../book/src/subgradients.md")]
    mod subgradients {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

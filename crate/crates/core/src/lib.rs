//! Numerical laboratory for uniform expansion of random walks of
//! volume-preserving diffeomorphisms of the 2-torus.
//!
//! - [`torus`] and [`word`]: points, tangent vectors, the generator catalog
//!   and words with their derivative cocycle.
//! - [`measure`]: finitely supported measures, convolution powers, presets.
//! - [`expansion`]: the expansion functional, its grid minimum and
//!   Lipschitz certificates, the search for an admissible `N`.
//! - [`spectrum`] and [`defect`]: Lyapunov exponents, stable directions,
//!   invariant line fields and conformal structures.
//! - [`walk`]: orbits, Weyl sums, finite orbits, two-step smoothing.
//! - [`config`], [`runner`], [`output`]: the batch front end.

pub mod config;
pub mod defect;
pub mod error;
pub mod expansion;
pub mod measure;
pub mod output;
pub mod runner;
pub mod seed;
pub mod spectrum;
pub mod torus;
pub mod walk;
pub mod word;

pub use error::{Error, Result};

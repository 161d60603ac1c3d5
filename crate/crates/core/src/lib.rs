//! Mean-field bosonic dynamics laboratory.
//!
//! The crate solves the Hartree equation on small single-particle spaces,
//! propagates the Bogoliubov fluctuation transformation Theta(t;0) along the
//! trajectory, builds the limiting complex Gaussian covariance Sigma(t), and
//! cross-checks everything against exact many-body simulation on truncated
//! bosonic Fock spaces.
//!
//! On a finite-dimensional space every potential is bounded, so the operator
//! inequality V^2 <= D(1 - Laplacian) assumed in the continuum theory holds
//! automatically, as do the observable regularity hypotheses; nothing needs
//! checking at runtime for those.

pub mod bogoliubov;
pub mod covariance;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod hartree;
pub mod lapack;
pub mod linalg;
pub mod space;
pub mod util;
pub mod xi;

pub use error::{MflabError, Result};

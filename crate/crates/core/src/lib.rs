//! Group-sparse recovery with the group Lasso.
//!
//! * [`dictionary`]: block-partitioned dictionaries and coherence diagnostics.
//! * [`model`]: group-sparse signal generation and the DCT/Dirac demixing scene.
//! * [`solver`]: proximal-gradient and alternating-minimization solvers, KKT checks.
//! * [`certify`]: primal-dual witness construction and sufficient-condition checks.
//! * [`experiments`]: seeded phase-transition sweeps and their CSV/PGM output.

pub mod binio;
pub mod certify;
pub mod dictionary;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod par;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};

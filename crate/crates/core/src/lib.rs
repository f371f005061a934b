//! Template-guided optimal matching for observational studies.
//!
//! A tripartite minimum-cost flow network selects treated units that resemble
//! a template sample (for instance the participants of a randomized trial)
//! while pairing each selected treated unit with a close control. The
//! objective is `S1 + lambda * S2`, where `S1` sums template-to-treated
//! distances and `S2` sums treated-to-control distances.
//!
//! Modules, bottom up:
//! - [`flownet`]: integer minimum-cost flow and a brute-force oracle.
//! - [`statdist`]: covariate tables, logistic score models, Mahalanobis
//!   distances, calipers and balance diagnostics.
//! - [`templatematch`]: the tripartite network, its design options and
//!   matched-sample extraction.
//! - [`pairmatch`]: plain bipartite optimal pair matching.
//! - [`simlab`]: the factorial bias simulation.
//! - [`cli`]: file formats and the `repmatch` command line.

pub mod cli;
pub mod error;
pub mod flownet;
pub mod pairmatch;
pub mod simlab;
pub mod statdist;
pub mod templatematch;

pub use error::{Error, Result};

//! Sparse independent component analysis by alternating
//! minimization, with classical ICA baselines (FastICA, Infomax, AMUSE), a
//! synthetic fMRI-style benchmark and the tooling to score them.
//!
//! Typical pipeline:
//!
//! ```no_run
//! use sparsica::{evaluate, simgen, sparse_ica};
//!
//! let ds = simgen::generate(&simgen::SimParams::default().with_seed(1))?;
//! let w = evaluate::whiten_dataset(&ds, 3)?;
//! let model = sparse_ica::fit(&w.xw, &sparse_ica::SparseIcaConfig::new(1.0))?;
//! let score = evaluate::match_components(&model.v, &ds.truth_maps())?;
//! println!("mean spatial similarity {:.3}", score.mean_corr);
//! # Ok::<(), sparsica::Error>(())
//! ```

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assignment;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod preprocess;
pub mod simgen;
pub mod sparse_ica;

pub use error::{Error, Result};
pub use matrix::Matrix;

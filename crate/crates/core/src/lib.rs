//! Numerical laboratory for empirical caulking.
//!
//! A pre-trained model is split into a frozen feature extractor `g_e` and a
//! frozen head `g_h`; a small trainable adapter `g_a` is inserted between them
//! and fitted by least squares on a target sample. This crate provides the
//! pieces needed to study that estimator on synthetic compositional targets:
//!
//! - [`function_spaces`]: compositional targets `f_H ∘ … ∘ f_1` with certified
//!   per-layer Hölder smoothness, covariate samplers and noisy samples.
//! - [`network`]: the sparse ReLU class with max-norm and path-sum budgets.
//! - [`fitting`]: exact reverse-mode gradients and multi-restart projected
//!   gradient descent.
//! - [`caulking`]: oracle and empirical pre-training, adapter fitting, scratch
//!   baselines, L2 and plug-in classification errors.
//! - [`rates`]: closed-form rate exponents, log–log power-law fits and sweep
//!   drivers.
//! - [`verify`]: covering numbers and Monte Carlo checks of the covering,
//!   approximation, maximal and quadratic inequalities.
//!
//! The crate is `no_std` and only needs `alloc`. IO, file formats and the CLI
//! live in the companion `caulk` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod caulking;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod function_spaces;
pub mod map;
pub mod matrix;
pub mod network;
pub mod rates;
pub mod seed;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use map::{DiffMap, Map};
pub use matrix::Matrix;

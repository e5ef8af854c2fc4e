//! Compositional target functions `f* = f_H ∘ … ∘ f_1` with certified per-layer
//! smoothness, covariate distributions and noisy regression samples.
//!
//! Each layer `f_i : [0,1]^{d_i} -> [0,1]^{d_{i+1}}` has coordinate functions that
//! depend on exactly `t_i` of the `d_i` inputs through a ridge projection
//! `p = w · x_S`:
//!
//! - kink mode (`β ∈ (0,1]`): `clamp(c |p - b|^β + o)`, with `w ≥ 0` unit in the
//!   Euclidean norm. The exponent is exact at the kink locus `p = b`.
//! - polynomial mode: `clamp(Σ_k a_k p^k)` with `w ≥ 0` summing to one, so
//!   `p ∈ [0,1]`. The degree is the largest integer strictly below `β`
//!   (at least 1), which makes `β ∈ (1,2]` layers affine.
//!
//! `clamp(v) = min(1, max(0, v))` is 1-Lipschitz and keeps every layer inside
//! the unit cube.

mod holder;
mod sampling;
mod target;

pub use holder::{
    holder_constant_estimate, holder_constant_estimate_with, holder_ratio_max, PairSampler,
};
pub use sampling::{
    make_regression_sample, make_regression_sample_with, sample_covariates, CovariateDistribution,
    NoiseModel, RegressionSample,
};
pub use target::{make_composition, CoordinateFn, Shape, TargetFunction, TargetSegment};

use crate::error::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoughnessMode {
    Kink,
    Polynomial,
}

/// Smoothness and sparsity of one layer `f_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `t_i`: number of inputs each coordinate function depends on.
    pub active_vars: usize,
    pub beta: f64,
    pub mode: RoughnessMode,
}

impl SmoothLayerSpec {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        active_vars: usize,
        beta: f64,
        mode: RoughnessMode,
    ) -> Self {
        Self {
            in_dim,
            out_dim,
            active_vars,
            beta,
            mode,
        }
    }

    /// Checks the per-layer invariants; `layer` is 1-based and only used in errors.
    pub fn validate(&self, layer: usize) -> Result<()> {
        let bad = |reason: alloc::string::String| Err(Error::InvalidLayer { layer, reason });
        if self.in_dim == 0 || self.out_dim == 0 {
            return bad(format!(
                "dimensions must be positive (in {}, out {})",
                self.in_dim, self.out_dim
            ));
        }
        if self.active_vars == 0 || self.active_vars > self.in_dim {
            return bad(format!(
                "active_vars {} must lie in 1..={}",
                self.active_vars, self.in_dim
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be a positive real, got {}", self.beta));
        }
        if self.mode == RoughnessMode::Kink && self.beta > 1.0 {
            return bad(format!("kink mode needs beta in (0, 1], got {}", self.beta));
        }
        Ok(())
    }

    /// Degree used by polynomial-mode layers.
    pub fn polynomial_degree(&self) -> usize {
        let d = num_traits::Float::ceil(self.beta) as usize;
        d.saturating_sub(1).max(1)
    }
}

/// Ordered layer specs plus the generator seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSpec {
    pub layers: Vec<SmoothLayerSpec>,
    pub seed: u64,
}

impl CompositionSpec {
    pub fn new(layers: Vec<SmoothLayerSpec>, seed: u64) -> Self {
        Self { layers, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidLayer {
                layer: 0,
                reason: "a composition needs at least one layer".into(),
            });
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(i + 1)?;
            if let Some(next) = self.layers.get(i + 1) {
                if next.in_dim != l.out_dim {
                    return Err(Error::InvalidLayer {
                        layer: i + 2,
                        reason: format!(
                            "in_dim {} does not match out_dim {} of layer {}",
                            next.in_dim,
                            l.out_dim,
                            i + 1
                        ),
                    });
                }
            }
        }
        let last = self.layers.len();
        if self.layers[last - 1].out_dim != 1 {
            return Err(Error::InvalidLayer {
                layer: last,
                reason: format!(
                    "final out_dim must be 1, got {}",
                    self.layers[last - 1].out_dim
                ),
            });
        }
        Ok(())
    }

    /// `H`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `d_1`.
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    /// `(β_i, t_i)` per layer.
    pub fn smoothness(&self) -> Vec<(f64, usize)> {
        self.layers
            .iter()
            .map(|l| (l.beta, l.active_vars))
            .collect()
    }
}

/// Clamp to `[0, 1]`.
#[inline]
pub fn clamp01(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else if v > 1.0 {
        1.0
    } else {
        v
    }
}

/// Rejects points outside `[0,1]^d`.
pub fn check_unit_cube(x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfDomain {
                coordinate: i,
                value: v,
            });
        }
    }
    Ok(())
}

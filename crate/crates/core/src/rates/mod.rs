//! Closed-form rate exponents, power-law fitting and the sweep drivers that
//! measure empirical rates.

mod sweep;

pub use sweep::{
    minimizing_depth, run_depth_sweep, run_m_sweep, run_rate_sweep, run_trials, DepthRow,
    DepthSetup, DepthTable, MSweepRow, MSweepSetup, ModelBuilder, RateSetup, SourceSize,
    TrialResult, DEPTH_TOLERANCE,
};

use crate::error::{invalid, Result};
use crate::stats::fit_line;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1]"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid("beta", "must be a positive real"));
    }
    Ok(())
}

/// Regression exponent `2αβ / (2αβ + 1)`.
pub fn theoretical_exponent(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    let ab = 2.0 * alpha * beta;
    Ok(ab / (ab + 1.0))
}

/// Regression exponent with pre-training error `γ_m`:
/// `2αβ/(2αβ+1) · (1 − γ_m / (β(α(β − γ_m) + 1)))`.
pub fn corollary_exponent(alpha: f64, beta: f64, gamma_m: f64) -> Result<f64> {
    let base = theoretical_exponent(alpha, beta)?;
    if !(gamma_m >= 0.0 && gamma_m < beta) {
        return Err(invalid("gamma_m", "must lie in [0, beta)"));
    }
    Ok(base * (1.0 - gamma_m / (beta * (alpha * (beta - gamma_m) + 1.0))))
}

/// Plug-in classification exponent `αβ / (2αβ + 1)`.
pub fn classification_exponent(alpha: f64, beta: f64) -> Result<f64> {
    Ok(theoretical_exponent(alpha, beta)? / 2.0)
}

/// How the inherited smoothness `α_i` of layer `i` combines the later layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaConvention {
    /// `α_i = ∏_{ℓ > i} min{1, β_ℓ}`
    #[default]
    Min,
    /// `α_i = ∏_{ℓ > i} max{1, β_ℓ}`
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionExponents {
    pub alphas: Vec<f64>,
    /// `γ_i = 2α_iβ_i / (2α_iβ_i + t_i)` for every layer.
    pub per_layer: Vec<f64>,
    /// Smallest `γ_i` over the requested range.
    pub worst: f64,
}

/// Per-layer exponents of a composition given `(β_i, t_i)`, with the worst
/// one over the 1-based inclusive range `lo..=hi`.
pub fn composition_exponents(
    layers: &[(f64, usize)],
    range: (usize, usize),
    convention: AlphaConvention,
) -> Result<CompositionExponents> {
    let h = layers.len();
    let (lo, hi) = range;
    if lo == 0 || lo > hi || hi > h {
        return Err(invalid(
            "range",
            alloc::format!("need 1 <= lo <= hi <= {h}, got ({lo}, {hi})"),
        ));
    }
    for &(b, t) in layers {
        if !(b > 0.0 && b.is_finite()) || t == 0 {
            return Err(invalid("layers", "each layer needs beta > 0 and t >= 1"));
        }
    }
    let mut alphas = alloc::vec![1.0; h];
    for i in (0..h.saturating_sub(1)).rev() {
        let b = layers[i + 1].0;
        let f = match convention {
            AlphaConvention::Min => b.min(1.0),
            AlphaConvention::Max => b.max(1.0),
        };
        alphas[i] = alphas[i + 1] * f;
    }
    let per_layer: Vec<f64> = layers
        .iter()
        .zip(&alphas)
        .map(|(&(b, t), a)| {
            let ab = 2.0 * a * b;
            ab / (ab + t as f64)
        })
        .collect();
    let worst = per_layer[lo - 1..hi]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(CompositionExponents {
        alphas,
        per_layer,
        worst,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub trials: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Mean final training loss, for auditing the optimization gap.
    pub mean_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub config_hash: String,
    pub model_kind: String,
}

impl RateTable {
    pub fn ns(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.n as f64).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.mean_error).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// Slope of `ln(mean_error)` on `ln(n)`.
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_range: (usize, usize),
}

/// Least-squares line through `(ln n, ln mean_error)`.
pub fn fit_power_law(table: &RateTable) -> Result<ExponentFit> {
    if table.rows.len() < 3 {
        return Err(invalid("table", "a power-law fit needs at least 3 rows"));
    }
    if let Some(r) = table
        .rows
        .iter()
        .find(|r| !(r.mean_error > 0.0 && r.mean_error.is_finite()))
    {
        return Err(invalid(
            "table",
            alloc::format!(
                "mean_error at n = {} is {}, a log-log fit needs positive errors",
                r.n,
                r.mean_error
            ),
        ));
    }
    let x: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = table.rows.iter().map(|r| r.mean_error.ln()).collect();
    let fit = fit_line(&x, &y);
    let ns = table.rows.iter().map(|r| r.n);
    Ok(ExponentFit {
        exponent: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n_range: (ns.clone().min().unwrap_or(0), ns.max().unwrap_or(0)),
    })
}

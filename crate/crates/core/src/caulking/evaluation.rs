use crate::error::{invalid, Error, Result};
use crate::function_spaces::{
    sample_covariates, CovariateDistribution, RegressionSample, TargetFunction,
};
use crate::map::Map;
use crate::matrix::Matrix;
use crate::seed::{derive_label, rng};
use crate::stats::mean_estimate;
use alloc::vec::Vec;
use rand::Rng;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl McEstimate {
    fn of(values: &[f64]) -> Self {
        let m = mean_estimate(values);
        Self {
            estimate: m.mean,
            std_error: m.std_error,
        }
    }
}

fn check_model<M: Map + ?Sized>(
    model: &M,
    target: &TargetFunction,
    q: &CovariateDistribution,
) -> Result<()> {
    if model.in_dim() != target.input_dim() || q.dim() != target.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "model/target input",
            expected: target.input_dim(),
            got: if q.dim() != target.input_dim() {
                q.dim()
            } else {
                model.in_dim()
            },
        });
    }
    if model.out_dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "model output",
            expected: 1,
            got: model.out_dim(),
        });
    }
    Ok(())
}

/// `‖model − f*‖²` in `L²(Q_X)` by Monte Carlo over `n_mc` draws.
pub fn l2_error<M: Map + ?Sized>(
    model: &M,
    target: &TargetFunction,
    q: &CovariateDistribution,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(invalid("n_mc", "needs at least 2 draws"));
    }
    check_model(model, target, q)?;
    let xs = sample_covariates(q, n_mc, derive_label(seed, "l2-error"));
    let sq: Vec<f64> = xs
        .iter_rows()
        .map(|x| {
            let d = model.eval_scalar(x) - target.eval_target(x)?;
            Ok(d * d)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::of(&sq))
}

/// Binary labels `Y_i ~ Bernoulli(f*(X_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSample {
    pub inputs: Matrix,
    pub labels: Vec<u8>,
    pub seed: u64,
}

impl ClassificationSample {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels as `0.0`/`1.0` regression targets.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&y| y as f64).collect()
    }

    /// The score-regression view `(X_i, Y_i)`; label noise is bounded, so it is
    /// sub-Gaussian with `σ = 1/2`.
    pub fn to_regression(&self) -> RegressionSample {
        RegressionSample {
            inputs: self.inputs.clone(),
            outputs: self.targets(),
            noise_sigma: 0.5,
            seed: self.seed,
        }
    }
}

fn check_score(p: f64, row: usize) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(invalid(
            "score",
            alloc::format!("f*(X_{row}) = {p} lies outside [0, 1]"),
        ))
    }
}

pub fn make_classification_sample(
    target: &TargetFunction,
    dist: &CovariateDistribution,
    n: usize,
    seed: u64,
) -> Result<ClassificationSample> {
    if n == 0 {
        return Err(invalid("n", "sample size must be positive"));
    }
    if dist.dim() != target.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "distribution/target input",
            expected: target.input_dim(),
            got: dist.dim(),
        });
    }
    let inputs = sample_covariates(dist, n, derive_label(seed, "covariates"));
    let mut r = rng(derive_label(seed, "labels"));
    let mut labels = Vec::with_capacity(n);
    for (i, x) in inputs.iter_rows().enumerate() {
        let p = check_score(target.eval_target(x)?, i)?;
        labels.push(u8::from(r.random::<f64>() < p));
    }
    Ok(ClassificationSample {
        inputs,
        labels,
        seed,
    })
}

/// `h(x) = 1{score(x) > 1/2}`.
#[derive(Debug, Clone)]
pub struct PluginClassifier<M> {
    pub score: M,
}

impl<M: Map> PluginClassifier<M> {
    pub fn new(score: M) -> Self {
        Self { score }
    }

    pub fn classify(&self, x: &[f64]) -> bool {
        self.score.eval_scalar(x) > 0.5
    }
}

/// Excess 0-1 risk against the Bayes rule, via the pointwise identity
/// `E |2f*(X) − 1| · 1{h(X) ≠ h*(X)}`.
pub fn excess_error<M: Map>(
    classifier: &PluginClassifier<M>,
    target: &TargetFunction,
    q: &CovariateDistribution,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(invalid("n_mc", "needs at least 2 draws"));
    }
    check_model(&classifier.score, target, q)?;
    let xs = sample_covariates(q, n_mc, derive_label(seed, "excess-error"));
    let v: Vec<f64> = xs
        .iter_rows()
        .map(|x| {
            let p = target.eval_target(x)?;
            let disagree = classifier.classify(x) != (p > 0.5);
            Ok(if disagree { (2.0 * p - 1.0).abs() } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::of(&v))
}

/// Excess 0-1 risk from its definition: one label per draw, scored by both
/// `h` and the Bayes rule, averaging the paired loss difference.
pub fn excess_error_by_definition<M: Map>(
    classifier: &PluginClassifier<M>,
    target: &TargetFunction,
    q: &CovariateDistribution,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(invalid("n_mc", "needs at least 2 draws"));
    }
    check_model(&classifier.score, target, q)?;
    let xs = sample_covariates(q, n_mc, derive_label(seed, "excess-definition"));
    let mut r = rng(derive_label(seed, "excess-labels"));
    let mut v = Vec::with_capacity(n_mc);
    for (i, x) in xs.iter_rows().enumerate() {
        let p = check_score(target.eval_target(x)?, i)?;
        let y = r.random::<f64>() < p;
        let loss = |h: bool| if h != y { 1.0 } else { 0.0 };
        v.push(loss(classifier.classify(x)) - loss(p > 0.5));
    }
    Ok(McEstimate::of(&v))
}

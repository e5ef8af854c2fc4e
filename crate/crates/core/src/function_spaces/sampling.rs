use super::TargetFunction;
use crate::error::{invalid, Result};
use crate::matrix::Matrix;
use crate::seed;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Marginal law of the covariates on `[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateDistribution {
    UniformCube {
        dim: usize,
    },
    /// `x_k = offset_k + slope_k * u_k` with `u` uniform on the cube.
    AffineWarp {
        offsets: Vec<f64>,
        slopes: Vec<f64>,
    },
}

impl CovariateDistribution {
    pub fn uniform(dim: usize) -> Self {
        Self::UniformCube { dim }
    }

    /// Checked affine warp; the image of the cube must stay inside it.
    pub fn affine_warp(offsets: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if offsets.len() != slopes.len() || offsets.is_empty() {
            return Err(invalid(
                "affine_warp",
                "offsets and slopes must have the same positive length",
            ));
        }
        for (a, s) in offsets.iter().zip(&slopes) {
            if !(*s > 0.0 && *a >= 0.0 && a + s <= 1.0 + 1e-12) {
                return Err(invalid(
                    "affine_warp",
                    "each coordinate needs slope > 0, offset >= 0, offset + slope <= 1",
                ));
            }
        }
        Ok(Self::AffineWarp { offsets, slopes })
    }

    /// Default shifted distribution: slopes drawn from `[0.8, 1.0]`, offsets
    /// uniform in the remaining room.
    pub fn default_shift(dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let slopes: Vec<f64> = (0..dim).map(|_| rng.random_range(0.8..=1.0)).collect();
        let offsets = slopes
            .iter()
            .map(|s| rng.random::<f64>() * (1.0 - s))
            .collect();
        Self::AffineWarp { offsets, slopes }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UniformCube { dim } => *dim,
            Self::AffineWarp { slopes, .. } => slopes.len(),
        }
    }

    fn fill(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match self {
            Self::UniformCube { .. } => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Self::AffineWarp { offsets, slopes } => {
                for ((v, a), s) in out.iter_mut().zip(offsets).zip(slopes) {
                    *v = (a + s * rng.random::<f64>()).min(1.0);
                }
            }
        }
    }
}

/// `n` i.i.d. draws, one per row.
pub fn sample_covariates(dist: &CovariateDistribution, n: usize, seed: u64) -> Matrix {
    let d = dist.dim();
    let mut rng = seed::rng(seed);
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        dist.fill(&mut rng, m.row_mut(i));
    }
    m
}

/// Additive noise law; both are sub-Gaussian with variance proxy `sigma²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-√3 σ, √3 σ]` (variance `σ²`).
    Uniform {
        sigma: f64,
    },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } | NoiseModel::Uniform { sigma } => sigma,
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseModel::Uniform { sigma } => {
                sigma * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0)
            }
        }
    }
}

/// `(X_i, Y_i)` with `Y_i = f*(X_i) + ξ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub inputs: Matrix,
    pub outputs: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl RegressionSample {
    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Gaussian-noise regression sample.
pub fn make_regression_sample(
    target: &TargetFunction,
    dist: &CovariateDistribution,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<RegressionSample> {
    make_regression_sample_with(
        target,
        dist,
        n,
        NoiseModel::Gaussian { sigma: noise_sigma },
        seed,
    )
}

pub fn make_regression_sample_with(
    target: &TargetFunction,
    dist: &CovariateDistribution,
    n: usize,
    noise: NoiseModel,
    seed: u64,
) -> Result<RegressionSample> {
    let sigma = noise.sigma();
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("noise_sigma", "must be a nonnegative real"));
    }
    if n == 0 {
        return Err(invalid("n", "a sample needs at least one point"));
    }
    if dist.dim() != target.input_dim() {
        return Err(crate::Error::DimensionMismatch {
            context: "covariate distribution",
            expected: target.input_dim(),
            got: dist.dim(),
        });
    }
    // covariates and noise come from independent streams
    let inputs = sample_covariates(dist, n, seed::derive_label(seed, "covariates"));
    let mut noise_rng = seed::rng(seed::derive_label(seed, "noise"));
    let mut outputs = Vec::with_capacity(n);
    for x in inputs.iter_rows() {
        let clean = target.eval_target(x)?;
        let xi = if sigma > 0.0 {
            noise.draw(&mut noise_rng)
        } else {
            0.0
        };
        outputs.push(clean + xi);
    }
    Ok(RegressionSample {
        inputs,
        outputs,
        noise_sigma: sigma,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{make_composition, CompositionSpec, RoughnessMode, SmoothLayerSpec};
    use super::*;
    use crate::stats;
    use alloc::vec;

    fn target() -> TargetFunction {
        let spec = CompositionSpec::new(
            vec![
                SmoothLayerSpec::new(2, 2, 2, 0.7, RoughnessMode::Kink),
                SmoothLayerSpec::new(2, 1, 2, 2.0, RoughnessMode::Polynomial),
            ],
            3,
        );
        make_composition(&spec).unwrap()
    }

    #[test]
    fn single_draw_in_cube() {
        let m = sample_covariates(&CovariateDistribution::uniform(3), 1, 9);
        assert_eq!(m.rows(), 1);
        assert!(m.row(0).iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn covariates_are_deterministic() {
        let d = CovariateDistribution::default_shift(2, 4);
        assert_eq!(sample_covariates(&d, 50, 1), sample_covariates(&d, 50, 1));
        assert_ne!(sample_covariates(&d, 50, 1), sample_covariates(&d, 50, 2));
    }

    #[test]
    fn identity_warp_matches_uniform_in_distribution() {
        let warp = CovariateDistribution::affine_warp(vec![0.0], vec![1.0]).unwrap();
        let a = sample_covariates(&warp, 10_000, 1).column(0);
        let b = sample_covariates(&CovariateDistribution::uniform(1), 10_000, 2).column(0);
        // two-sample KS critical value at level 0.001: 1.95 * sqrt(2 / 10^4)
        let crit = 1.95 * (2.0f64 / 10_000.0).sqrt();
        assert!(stats::ks_two_sample(&a, &b) < crit);
    }

    #[test]
    fn warp_support_stays_inside_cube() {
        assert!(CovariateDistribution::affine_warp(vec![0.3], vec![0.8]).is_err());
        let d = CovariateDistribution::default_shift(3, 0);
        let m = sample_covariates(&d, 1000, 0);
        assert!(m.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        if let CovariateDistribution::AffineWarp { slopes, .. } = &d {
            assert!(slopes.iter().all(|s| (0.8..=1.0).contains(s)));
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let f = target();
        let s = make_regression_sample(&f, &CovariateDistribution::uniform(2), 64, 0.0, 5).unwrap();
        for (x, y) in s.inputs.iter_rows().zip(&s.outputs) {
            assert_eq!(*y, f.eval_target(x).unwrap());
        }
    }

    #[test]
    fn noise_variance_matches_sigma_squared() {
        let f = target();
        let s = make_regression_sample(&f, &CovariateDistribution::uniform(2), 100_000, 0.1, 5)
            .unwrap();
        let resid: Vec<f64> = s
            .inputs
            .iter_rows()
            .zip(&s.outputs)
            .map(|(x, y)| y - f.eval_target(x).unwrap())
            .collect();
        let v = stats::sample_variance(&resid);
        assert!((v - 0.01).abs() <= 0.03 * 0.01, "variance {v}");
    }

    #[test]
    fn uniform_noise_has_requested_variance() {
        let f = target();
        let s = make_regression_sample_with(
            &f,
            &CovariateDistribution::uniform(2),
            100_000,
            NoiseModel::Uniform { sigma: 0.2 },
            8,
        )
        .unwrap();
        let resid: Vec<f64> = s
            .inputs
            .iter_rows()
            .zip(&s.outputs)
            .map(|(x, y)| y - f.eval_target(x).unwrap())
            .collect();
        assert!(resid.iter().all(|r| r.abs() <= 0.2 * 3f64.sqrt() + 1e-12));
        assert!((stats::sample_variance(&resid) - 0.04).abs() < 0.03 * 0.04);
    }

    #[test]
    fn samples_are_deterministic() {
        let f = target();
        let d = CovariateDistribution::uniform(2);
        assert_eq!(
            make_regression_sample(&f, &d, 32, 0.1, 77).unwrap(),
            make_regression_sample(&f, &d, 32, 0.1, 77).unwrap()
        );
        assert!(make_regression_sample(&f, &d, 32, -0.1, 77).is_err());
    }
}

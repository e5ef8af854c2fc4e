use crate::error::{invalid, Error, Result};
use crate::map::{euclid_dist, Map};
use crate::seed;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

/// Draws point pairs from the box `[lo, hi]^dim`.
///
/// Even-indexed pairs are independent uniform points; odd-indexed pairs are
/// local, `y = x + h u` with `h` log-uniform in `[min_scale, hi - lo]` and `u`
/// uniform in `[-1, 1]^dim`, clamped back into the box. Pairs come from one
/// sequential stream, so the first `k` pairs do not depend on how many are
/// requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampler {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub min_scale: f64,
}

impl PairSampler {
    pub fn unit_cube(dim: usize) -> Self {
        Self {
            dim,
            lo: 0.0,
            hi: 1.0,
            min_scale: 1e-6,
        }
    }

    pub fn with_box(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            dim,
            lo,
            hi,
            min_scale: 1e-6 * (hi - lo),
        }
    }

    pub fn pairs(&self, num_pairs: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut rng = seed::rng(seed);
        let width = self.hi - self.lo;
        let (ln_lo, ln_hi) = (self.min_scale.max(f64::MIN_POSITIVE).ln(), width.ln());
        (0..num_pairs)
            .map(|i| {
                let x: Vec<f64> = (0..self.dim)
                    .map(|_| self.lo + width * rng.random::<f64>())
                    .collect();
                let y = if i % 2 == 0 {
                    (0..self.dim)
                        .map(|_| self.lo + width * rng.random::<f64>())
                        .collect()
                } else {
                    let h = (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp();
                    x.iter()
                        .map(|v| {
                            (v + h * (2.0 * rng.random::<f64>() - 1.0)).clamp(self.lo, self.hi)
                        })
                        .collect()
                };
                (x, y)
            })
            .collect()
    }
}

/// `max ‖g(x) - g(y)‖ / ‖x - y‖^alpha` over the given pairs, skipping `x = y`.
pub fn holder_ratio_max<'a, G, I>(g: &G, alpha: f64, pairs: I) -> Result<f64>
where
    G: Map + ?Sized,
    I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
{
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1]"));
    }
    let (mut gx, mut gy) = (Vec::new(), Vec::new());
    let mut best: Option<f64> = None;
    for (x, y) in pairs {
        let d = euclid_dist(x, y);
        if d == 0.0 {
            continue;
        }
        g.eval_into(x, &mut gx);
        g.eval_into(y, &mut gy);
        let r = euclid_dist(&gx, &gy) / d.powf(alpha);
        best = Some(best.map_or(r, |b: f64| b.max(r)));
    }
    best.ok_or(Error::DegeneratePairs)
}

/// Lower estimate of the `alpha`-Hölder constant of `g` on `[0,1]^d`.
pub fn holder_constant_estimate<G: Map + ?Sized>(
    g: &G,
    alpha: f64,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    holder_constant_estimate_with(
        g,
        alpha,
        &PairSampler::unit_cube(g.in_dim()),
        num_pairs,
        seed,
    )
}

pub fn holder_constant_estimate_with<G: Map + ?Sized>(
    g: &G,
    alpha: f64,
    sampler: &PairSampler,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if num_pairs == 0 {
        return Err(invalid("num_pairs", "must be at least 1"));
    }
    if sampler.dim != g.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "Hölder pair sampler",
            expected: g.in_dim(),
            got: sampler.dim,
        });
    }
    let pairs = sampler.pairs(num_pairs, seed);
    holder_ratio_max(
        g,
        alpha,
        pairs.iter().map(|(x, y)| (x.as_slice(), y.as_slice())),
    )
}

#[cfg(test)]
mod tests {
    use super::super::{
        make_composition, target, CompositionSpec, RoughnessMode, Shape, SmoothLayerSpec,
    };
    use super::*;
    use crate::map::{scalar_fn, Identity};
    use alloc::vec;

    #[test]
    fn constant_map_has_zero_constant() {
        let g = scalar_fn(2, |_| 0.4);
        assert_eq!(holder_constant_estimate(&g, 0.3, 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn identity_ratio_is_one() {
        let est = holder_constant_estimate(&Identity(1), 1.0, 10_000, 2).unwrap();
        assert!((0.99..=1.0 + 1e-12).contains(&est), "{est}");
    }

    #[test]
    fn sqrt_constant_is_attained_near_zero() {
        // sup over 0 <= x < y <= 1 of (√y - √x)/√(y - x) equals 1 at x = 0
        let g = scalar_fn(1, |x| x[0].sqrt());
        let est = holder_constant_estimate(&g, 0.5, 100_000, 3).unwrap();
        assert!((0.95..=1.0 + 1e-12).contains(&est), "{est}");
    }

    #[test]
    fn degenerate_pairs_and_bad_alpha_are_rejected() {
        let p = [0.5];
        let pairs = vec![(&p[..], &p[..]); 3];
        assert_eq!(
            holder_ratio_max(&Identity(1), 1.0, pairs.clone()),
            Err(Error::DegeneratePairs)
        );
        assert!(holder_ratio_max(&Identity(1), 1.5, pairs).is_err());
        assert!(holder_constant_estimate(&Identity(1), 1.0, 0, 0).is_err());
    }

    #[test]
    fn nested_pair_sets_are_monotone() {
        let g = scalar_fn(2, |x| (x[0] - x[1]).abs().sqrt());
        let mut last = 0.0;
        for n in [10, 100, 1000, 10_000] {
            let e = holder_constant_estimate(&g, 0.8, n, 5).unwrap();
            assert!(e >= last);
            last = e;
        }
    }

    fn kink_layer(beta: f64, seed: u64) -> target::TargetFunction {
        let spec = CompositionSpec::new(
            vec![SmoothLayerSpec::new(2, 1, 2, beta, RoughnessMode::Kink)],
            seed,
        );
        make_composition(&spec).unwrap()
    }

    /// Pairs straddling the kink locus along the ridge direction at distances `hs`.
    fn kink_pairs(f: &target::TargetFunction, hs: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let c = &f.layers()[0][0];
        let Shape::Kink { center, .. } = c.shape else {
            unreachable!()
        };
        let mut w = vec![0.0; 2];
        for (v, wt) in c.vars.iter().zip(&c.weights) {
            w[*v] = *wt;
        }
        // base point on the locus: x = center * w (w has unit Euclidean norm)
        let base: Vec<f64> = w.iter().map(|wi| center * wi).collect();
        hs.iter()
            .map(|h| {
                (
                    base.clone(),
                    base.iter().zip(&w).map(|(b, wi)| b + h * wi).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn kink_exponent_is_exact() {
        for (beta, seed) in [(0.5, 1), (0.7, 2), (0.3, 3)] {
            let f = kink_layer(beta, seed);
            let nominal = f.layer_nominal_constant(1);
            let hs: Vec<f64> = (1..=7).map(|k| 10f64.powi(-k)).collect();
            let pairs = kink_pairs(&f, &hs);
            let it = || pairs.iter().map(|(x, y)| (x.as_slice(), y.as_slice()));
            let mut random = holder_constant_estimate(&f, beta, 20_000, seed).unwrap();
            random = random.max(holder_ratio_max(&f, beta, it()).unwrap());
            assert!(
                random <= 2.0 * nominal,
                "beta {beta}: {random} vs {nominal}"
            );
            let rough = holder_ratio_max(&f, beta + 0.2, it()).unwrap();
            assert!(rough > 10.0 * nominal, "beta {beta}: {rough} vs {nominal}");
        }
    }
}

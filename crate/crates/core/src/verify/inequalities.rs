use crate::error::{invalid, Result};
use crate::seed::rng;
use crate::stats::{fit_line, mean_estimate};
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Number of points in the log grid used to minimize over `γ`.
pub const GAMMA_GRID_POINTS: usize = 91;

/// `16 · inf_γ (σ² ln(N/γ) + γ max{σ², 2F² ln(N/γ)} + 2γF²)` with the
/// infimum taken over a log grid on `[1e-6, 1e3]`.
pub fn maximal_inequality_bound(n: usize, sigma: f64, f_scale: f64) -> f64 {
    let (s2, f2) = (sigma * sigma, f_scale * f_scale);
    let nf = n as f64;
    (0..GAMMA_GRID_POINTS)
        .map(|k| {
            let g = 10f64.powf(-6.0 + 9.0 * k as f64 / (GAMMA_GRID_POINTS - 1) as f64);
            let l = (nf / g).ln();
            s2 * l + g * s2.max(2.0 * f2 * l) + 2.0 * g * f2
        })
        .fold(f64::INFINITY, f64::min)
        * 16.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximalInequality {
    pub n: usize,
    pub sigma: f64,
    /// Monte Carlo mean of `max_i Z_i²`.
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo of `E max_{i ≤ N} Z_i²` for i.i.d. `Z_i ~ N(0, σ²)` against the
/// sub-Gamma maximal bound.
pub fn mc_maximal_inequality(
    n: usize,
    sigma: f64,
    f_scale: f64,
    trials: usize,
    seed: u64,
) -> Result<MaximalInequality> {
    if n == 0 {
        return Err(invalid("n", "needs at least one variable"));
    }
    if trials < 1000 {
        return Err(invalid("trials", "needs at least 1000 trials"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !(f_scale > 0.0 && f_scale.is_finite()) {
        return Err(invalid("sigma", "sigma must be nonnegative and F positive"));
    }
    let mut r = rng(seed);
    let maxima: Vec<f64> = (0..trials)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    z * z
                })
                .fold(0.0, f64::max)
                * sigma
                * sigma
        })
        .collect();
    let e = mean_estimate(&maxima);
    let bound = maximal_inequality_bound(n, sigma, f_scale);
    Ok(MaximalInequality {
        n,
        sigma,
        empirical: e.mean,
        std_error: e.std_error,
        bound,
        holds: e.mean <= bound,
    })
}

/// Right side `a + b²/2 + b √(a + b²/4 + c²)`.
pub fn quadratic_conclusion(a: f64, b: f64, c: f64) -> f64 {
    a + b * b / 2.0 + b * (a + b * b / 4.0 + c * c).sqrt()
}

/// For every `x` in the grid with `x² ≤ a + b √(x² + c²)`, checks
/// `x² ≤ a + b²/2 + b √(a + b²/4 + c²)` (up to `1e-12` relative rounding).
/// Returns `true` when no grid point is a counterexample.
pub fn check_quadratic_implication(a: f64, b: f64, c: f64, x_grid: &[f64]) -> Result<bool> {
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) {
        return Err(invalid("a, b, c", "must be nonnegative"));
    }
    let rhs = quadratic_conclusion(a, b, c);
    Ok(x_grid.iter().all(|&x| {
        let x2 = x * x;
        let premise = x2 <= a + b * (x2 + c * c).sqrt();
        !premise || x2 <= rhs * (1.0 + 1e-12)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSearch {
    pub triples: usize,
    pub points_checked: usize,
    pub premise_hits: usize,
    pub counterexamples: usize,
}

/// Random `(a, b, c) ∈ [0, 10]³` with a uniform `x` grid on
/// `[0, 1.5 · √conclusion + 1]` that also contains the premise boundary.
pub fn quadratic_search(triples: usize, grid_points: usize, seed: u64) -> Result<QuadraticSearch> {
    if grid_points < 2 {
        return Err(invalid("grid_points", "needs at least 2 points"));
    }
    let mut r = rng(seed);
    let mut out = QuadraticSearch {
        triples,
        points_checked: 0,
        premise_hits: 0,
        counterexamples: 0,
    };
    let mut grid = Vec::with_capacity(grid_points + 1);
    for _ in 0..triples {
        let (a, b, c) = (
            10.0 * r.random::<f64>(),
            10.0 * r.random::<f64>(),
            10.0 * r.random::<f64>(),
        );
        let top = 1.5 * quadratic_conclusion(a, b, c).sqrt() + 1.0;
        grid.clear();
        grid.extend((0..grid_points).map(|k| top * k as f64 / (grid_points - 1) as f64));
        grid.push(premise_boundary(a, b, c));
        out.points_checked += grid.len();
        out.premise_hits += grid
            .iter()
            .filter(|&&x| x * x <= a + b * (x * x + c * c).sqrt())
            .count();
        if !check_quadratic_implication(a, b, c, &grid)? {
            out.counterexamples += 1;
        }
    }
    Ok(out)
}

/// Largest `x ≥ 0` with `x² = a + b √(x² + c²)`, by bisection.
fn premise_boundary(a: f64, b: f64, c: f64) -> f64 {
    let g = |x: f64| x * x - a - b * (x * x + c * c).sqrt();
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One experiment cell for the bound-consistency report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyInput {
    pub n: usize,
    pub realized_mse: f64,
    pub approx_error: f64,
    pub log_cover: f64,
    pub delta: f64,
    pub f_scale: f64,
    pub sigma: f64,
}

impl ConsistencyInput {
    /// `approx² + (F² + σ²) ln N_δ / n + (F + σ) δ`.
    pub fn denominator(&self) -> f64 {
        let (f, s) = (self.f_scale, self.sigma);
        self.approx_error * self.approx_error
            + (f * f + s * s) * self.log_cover / self.n as f64
            + (f + s) * self.delta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub ns: Vec<usize>,
    pub c_hat: Vec<f64>,
    pub max_c_hat: f64,
    /// Slope of `ln Ĉ` against `ln n`, when at least 3 cells have `Ĉ > 0`.
    pub log_slope: Option<f64>,
    /// Set when `Ĉ` grows with `n` (slope above 0.5).
    pub diverging: bool,
}

/// Implied constant `Ĉ = realized / denominator` per cell. Diagnostic only.
pub fn bound_consistency_report(cells: &[ConsistencyInput]) -> Result<ConsistencyReport> {
    let mut c_hat = Vec::with_capacity(cells.len());
    for c in cells {
        let nonneg = [
            c.realized_mse,
            c.approx_error,
            c.log_cover,
            c.delta,
            c.f_scale,
            c.sigma,
        ];
        if c.n == 0 || nonneg.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("cells", "proxies must be nonnegative and n >= 1"));
        }
        let d = c.denominator();
        if d <= 0.0 {
            return Err(invalid(
                "cells",
                alloc::format!("denominator is zero at n = {}", c.n),
            ));
        }
        c_hat.push(c.realized_mse / d);
    }
    let pos: Vec<(f64, f64)> = cells
        .iter()
        .zip(&c_hat)
        .filter(|(_, &v)| v > 0.0)
        .map(|(c, v)| ((c.n as f64).ln(), v.ln()))
        .collect();
    let log_slope = (pos.len() >= 3).then(|| {
        let (x, y): (Vec<f64>, Vec<f64>) = pos.into_iter().unzip();
        fit_line(&x, &y).slope
    });
    Ok(ConsistencyReport {
        ns: cells.iter().map(|c| c.n).collect(),
        max_c_hat: c_hat.iter().copied().fold(0.0, f64::max),
        c_hat,
        log_slope,
        diverging: log_slope.is_some_and(|s| s > 0.5),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn bound_exceeds_expected_maximum() {
        for n in [1, 10, 100, 1000] {
            for s in [0.5, 1.0, 2.0] {
                let b = maximal_inequality_bound(n, s, 1.0);
                assert!(b >= 16.0 * s * s * (n as f64).ln().max(0.0));
            }
        }
    }

    #[test]
    fn single_variable_matches_chi_square_mean() {
        let r = mc_maximal_inequality(1, 1.0, 1.0, 100_000, 3).unwrap();
        assert!((r.empirical - 1.0).abs() <= 3.0 * r.std_error, "{r:?}");
        assert!(r.bound >= 1.0 && r.holds);
        let zero = mc_maximal_inequality(5, 0.0, 1.0, 1000, 3).unwrap();
        assert_eq!(zero.empirical, 0.0);
        assert!(zero.holds);
        assert!(mc_maximal_inequality(0, 1.0, 1.0, 1000, 3).is_err());
        assert!(mc_maximal_inequality(1, 1.0, 1.0, 999, 3).is_err());
    }

    #[test]
    fn maximal_inequality_holds_for_larger_n() {
        for n in [10, 100] {
            let r = mc_maximal_inequality(n, 1.0, 1.0, 5000, n as u64).unwrap();
            assert!(r.holds);
            assert!(r.bound / r.empirical > 1.0);
        }
    }

    #[test]
    fn quadratic_hand_cases() {
        let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
        assert!(check_quadratic_implication(4.0, 0.0, 1.0, &grid).unwrap());
        assert!(check_quadratic_implication(0.0, 3.0, 0.0, &grid).unwrap());
        assert!((quadratic_conclusion(0.0, 3.0, 0.0) - 9.0).abs() < 1e-12);
        assert!(check_quadratic_implication(-1.0, 0.0, 0.0, &grid).is_err());
        let x = premise_boundary(2.0, 1.5, 0.7);
        assert!((x * x - 2.0 - 1.5 * (x * x + 0.49).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn quadratic_search_finds_nothing() {
        let s = quadratic_search(500, 200, 1).unwrap();
        assert_eq!(s.counterexamples, 0);
        assert!(s.premise_hits > 0 && s.premise_hits < s.points_checked);
    }

    #[test]
    fn consistency_examples() {
        let cell = ConsistencyInput {
            n: 100,
            realized_mse: 0.0,
            approx_error: 0.1,
            log_cover: 5.0,
            delta: 0.01,
            f_scale: 1.0,
            sigma: 0.1,
        };
        let d = cell.denominator();
        let r = bound_consistency_report(&[
            cell,
            ConsistencyInput {
                realized_mse: d,
                ..cell
            },
        ])
        .unwrap();
        assert_eq!(r.c_hat[0], 0.0);
        assert!((r.c_hat[1] - 1.0).abs() < 1e-15);
        assert!(r.log_slope.is_none());
        let zero = ConsistencyInput {
            approx_error: 0.0,
            log_cover: 0.0,
            delta: 0.0,
            ..cell
        };
        assert!(bound_consistency_report(&[zero]).is_err());

        let grow: Vec<ConsistencyInput> = [100, 1000, 10_000]
            .iter()
            .map(|&n| ConsistencyInput {
                n,
                realized_mse: 1.0,
                approx_error: 0.0,
                delta: 0.0,
                ..cell
            })
            .collect();
        let g = bound_consistency_report(&grow).unwrap();
        assert!(g.diverging);
        assert_eq!(g.ns, vec![100, 1000, 10_000]);
    }

    proptest! {
        #[test]
        fn implication_has_no_counterexample(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0) {
            let top = 1.5 * quadratic_conclusion(a, b, c).sqrt() + 1.0;
            let mut grid: Vec<f64> = (0..400).map(|k| top * k as f64 / 399.0).collect();
            grid.push(premise_boundary(a, b, c));
            prop_assert!(check_quadratic_implication(a, b, c, &grid).unwrap());
        }
    }
}

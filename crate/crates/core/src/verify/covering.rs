use crate::error::{invalid, Error, Result};
use crate::map::{euclid_dist, Map};
use crate::matrix::Matrix;
use alloc::vec;
use alloc::vec::Vec;

/// Largest set accepted by the exhaustive cover search.
pub const EXHAUSTIVE_CAP: usize = 24;

/// Slack used for the triangle-inequality check.
pub const TRIANGLE_TOL: f64 = 1e-9;

/// Relative slack on ball membership, `d ≤ δ (1 + BALL_RTOL)`.
pub const BALL_RTOL: f64 = 1e-12;

/// A finite metric space given by its distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPointSet<T> {
    elements: Vec<T>,
    dist: Matrix,
}

impl<T> MetricPointSet<T> {
    /// Checks squareness, symmetry, zero diagonal, nonnegativity and the
    /// triangle inequality.
    pub fn new(elements: Vec<T>, dist: Matrix) -> Result<Self> {
        let n = elements.len();
        if dist.rows() != n || dist.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "distance matrix",
                expected: n,
                got: dist.rows().max(dist.cols()),
            });
        }
        for i in 0..n {
            if dist.row(i)[i] != 0.0 {
                return Err(invalid(
                    "dist",
                    alloc::format!("diagonal entry {i} is not zero"),
                ));
            }
            for j in 0..n {
                let d = dist.row(i)[j];
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(invalid(
                        "dist",
                        alloc::format!("entry ({i}, {j}) = {d} is not a finite nonnegative number"),
                    ));
                }
                if d != dist.row(j)[i] {
                    return Err(invalid(
                        "dist",
                        alloc::format!("entries ({i}, {j}) and ({j}, {i}) differ"),
                    ));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist.row(i)[k] > dist.row(i)[j] + dist.row(j)[k] + TRIANGLE_TOL {
                        return Err(invalid(
                            "dist",
                            alloc::format!("triangle inequality fails on ({i}, {j}, {k})"),
                        ));
                    }
                }
            }
        }
        Ok(Self { elements, dist })
    }

    pub fn from_fn(elements: Vec<T>, metric: impl Fn(&T, &T) -> f64) -> Result<Self> {
        let n = elements.len();
        let mut dist = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let d = metric(&elements[i], &elements[j]);
                dist.row_mut(i)[j] = d;
                dist.row_mut(j)[i] = d;
            }
        }
        Self::new(elements, dist)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[T] {
        &self.elements
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist.row(i)[j]
    }

    pub fn diameter(&self) -> f64 {
        self.dist.as_slice().iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverMode {
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverResult {
    pub delta: f64,
    pub exact_size: Option<usize>,
    pub greedy_size: usize,
    /// Size of a greedy maximal set with pairwise distances above `2δ`.
    pub packing_lower_bound: usize,
    pub mode: CoverMode,
    /// Centers of the best cover found.
    pub centers: Vec<usize>,
}

fn ball_masks<T>(set: &MetricPointSet<T>, delta: f64) -> Vec<u64> {
    let r = delta * (1.0 + BALL_RTOL);
    (0..set.len())
        .map(|c| {
            (0..set.len())
                .filter(|&j| set.distance(c, j) <= r)
                .fold(0u64, |m, j| m | (1 << j))
        })
        .collect()
}

fn greedy_cover(balls: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut covered = vec![false; n];
    let mut left = n;
    let mut centers = Vec::new();
    while left > 0 {
        let (best, _) = balls
            .iter()
            .enumerate()
            .map(|(c, b)| (c, b.iter().filter(|&&j| !covered[j]).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        for &j in &balls[best] {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
            }
        }
        centers.push(best);
    }
    centers
}

fn packing_bound<T>(set: &MetricPointSet<T>, delta: f64) -> usize {
    let sep = 2.0 * delta * (1.0 + BALL_RTOL);
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..set.len() {
        if chosen.iter().all(|&c| set.distance(c, i) > sep) {
            chosen.push(i);
        }
    }
    chosen.len()
}

struct Search<'a> {
    balls: &'a [u64],
    best: Vec<usize>,
    max_ball: u32,
}

impl Search<'_> {
    fn run(&mut self, uncovered: u64, chosen: &mut Vec<usize>) {
        if uncovered == 0 {
            if chosen.len() < self.best.len() {
                self.best = chosen.clone();
            }
            return;
        }
        let need = uncovered.count_ones().div_ceil(self.max_ball) as usize;
        if chosen.len() + need >= self.best.len() {
            return;
        }
        let e = uncovered.trailing_zeros() as usize;
        let mut options: Vec<(u32, usize)> = (0..self.balls.len())
            .filter(|&c| self.balls[c] >> e & 1 == 1)
            .map(|c| ((self.balls[c] & uncovered).count_ones(), c))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, c) in options {
            chosen.push(c);
            self.run(uncovered & !self.balls[c], chosen);
            chosen.pop();
        }
    }
}

/// Internal `δ`-cover of `set` (centers from the set, closed balls).
pub fn covering_number<T>(
    set: &MetricPointSet<T>,
    delta: f64,
    mode: CoverMode,
) -> Result<CoverResult> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", "must be a positive real"));
    }
    let n = set.len();
    if mode == CoverMode::Exhaustive && n > EXHAUSTIVE_CAP {
        return Err(Error::CapExceeded {
            required: n as u128,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let r = delta * (1.0 + BALL_RTOL);
    let balls: Vec<Vec<usize>> = (0..n)
        .map(|c| (0..n).filter(|&j| set.distance(c, j) <= r).collect())
        .collect();
    let greedy = greedy_cover(&balls, n);
    let packing = packing_bound(set, delta);
    let (exact, centers) = match mode {
        CoverMode::Greedy => (None, greedy.clone()),
        CoverMode::Exhaustive => {
            let masks = ball_masks(set, delta);
            let mut s = Search {
                balls: &masks,
                best: greedy.clone(),
                max_ball: masks
                    .iter()
                    .map(|m| m.count_ones())
                    .max()
                    .unwrap_or(1)
                    .max(1),
            };
            let full = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
            s.run(full, &mut Vec::new());
            (Some(s.best.len()), s.best)
        }
    };
    Ok(CoverResult {
        delta,
        exact_size: exact,
        greedy_size: greedy.len(),
        packing_lower_bound: packing,
        mode,
        centers,
    })
}

/// Exact covering number, or the greedy upper bound for sets over the cap.
pub fn covering_size<T>(set: &MetricPointSet<T>, delta: f64) -> Result<usize> {
    let mode = if set.len() <= EXHAUSTIVE_CAP {
        CoverMode::Exhaustive
    } else {
        CoverMode::Greedy
    };
    let r = covering_number(set, delta, mode)?;
    Ok(r.exact_size.unwrap_or(r.greedy_size))
}

/// Sup distance on probe points: `max_p ‖f(p) − g(p)‖` with the Euclidean
/// norm on outputs.
pub fn function_class_metric<M: Map>(
    members: &[M],
    probes: &Matrix,
) -> Result<MetricPointSet<usize>> {
    if probes.rows() == 0 {
        return Err(invalid("probes", "need at least one probe point"));
    }
    if let Some(m) = members.iter().find(|m| m.in_dim() != probes.cols()) {
        return Err(Error::DimensionMismatch {
            context: "probe/member input",
            expected: probes.cols(),
            got: m.in_dim(),
        });
    }
    let images: Vec<Vec<Vec<f64>>> = members
        .iter()
        .map(|m| probes.iter_rows().map(|p| m.eval(p)).collect())
        .collect();
    MetricPointSet::from_fn((0..members.len()).collect(), |&a, &b| {
        images[a]
            .iter()
            .zip(&images[b])
            .map(|(u, v)| euclid_dist(u, v))
            .fold(0.0, f64::max)
    })
}

/// First `n` points of the Halton sequence in `[lo, hi]^dim`.
pub fn halton_probes(dim: usize, n: usize, lo: f64, hi: f64) -> Matrix {
    const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let radical_inverse = |mut i: u64, base: u64| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    let mut m = Matrix::zeros(n, dim);
    for i in 0..n {
        for (j, v) in m.row_mut(i).iter_mut().enumerate() {
            *v = lo + (hi - lo) * radical_inverse(i as u64 + 1, PRIMES[j % PRIMES.len()]);
        }
    }
    m
}

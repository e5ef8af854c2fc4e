use super::{check_unit_cube, clamp01, CompositionSpec, RoughnessMode};
use crate::error::{Error, Result};
use crate::map::{DiffMap, Map};
use crate::seed;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

/// Closed-form profile applied to the ridge projection `p`.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `c |p - b|^β + o`
    Kink {
        scale: f64,
        center: f64,
        offset: f64,
        beta: f64,
    },
    /// `Σ_k coeffs[k] p^k`
    Polynomial { coeffs: Vec<f64> },
}

impl Shape {
    #[inline]
    fn value(&self, p: f64) -> f64 {
        match self {
            Shape::Kink {
                scale,
                center,
                offset,
                beta,
            } => scale * (p - center).abs().powf(*beta) + offset,
            Shape::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, a| acc * p + a),
        }
    }

    /// Derivative in `p`; zero at the kink itself.
    #[inline]
    fn derivative(&self, p: f64) -> f64 {
        match self {
            Shape::Kink {
                scale,
                center,
                beta,
                ..
            } => {
                let u = p - center;
                if u == 0.0 {
                    0.0
                } else {
                    scale * beta * u.abs().powf(beta - 1.0) * u.signum()
                }
            }
            Shape::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, a)| acc * p + k as f64 * a),
        }
    }
}

/// One output coordinate of a layer: `clamp(shape(w · x_S))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateFn {
    /// Active input indices (0-based, strictly increasing).
    pub vars: Vec<usize>,
    pub weights: Vec<f64>,
    pub shape: Shape,
}

impl CoordinateFn {
    #[inline]
    fn projection(&self, x: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(&self.weights)
            .map(|(&v, w)| w * x[v])
            .sum()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        clamp01(self.shape.value(self.projection(x)))
    }

    /// Upper bound on the Hölder constant (Euclidean input norm) at the
    /// layer's exponent for kinks, or the Lipschitz constant on `p ∈ [0,1]`
    /// for polynomials.
    pub fn nominal_constant(&self) -> f64 {
        let wnorm = self.weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        match &self.shape {
            Shape::Kink { scale, .. } => scale * wnorm.powf(self.kink_beta().unwrap_or(1.0)),
            Shape::Polynomial { coeffs } => {
                let slope: f64 = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, a)| k as f64 * a.abs())
                    .sum();
                slope * wnorm
            }
        }
    }

    fn kink_beta(&self) -> Option<f64> {
        match self.shape {
            Shape::Kink { beta, .. } => Some(beta),
            _ => None,
        }
    }
}

/// A fully parameterized composition `f_H ∘ … ∘ f_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    spec: CompositionSpec,
    layers: Vec<Vec<CoordinateFn>>,
}

/// Draws the closed-form parameters for every layer of `spec`.
///
/// Deterministic in `spec.seed`; layer `i` uses its own derived stream.
pub fn make_composition(spec: &CompositionSpec) -> Result<TargetFunction> {
    spec.validate()?;
    let mut layers = Vec::with_capacity(spec.depth());
    for (i, l) in spec.layers.iter().enumerate() {
        let mut rng = seed::rng(seed::derive(spec.seed, i as u64));
        let mut coords = Vec::with_capacity(l.out_dim);
        for _ in 0..l.out_dim {
            let mut vars = rand::seq::index::sample(&mut rng, l.in_dim, l.active_vars).into_vec();
            vars.sort_unstable();
            let mut weights: Vec<f64> = (0..l.active_vars)
                .map(|_| rng.random_range(0.2..1.0))
                .collect();
            let shape = match l.mode {
                RoughnessMode::Kink => {
                    let n2 = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
                    weights.iter_mut().for_each(|w| *w /= n2);
                    let n1: f64 = weights.iter().sum();
                    Shape::Kink {
                        scale: rng.random_range(0.5..1.0),
                        center: rng.random_range(0.3..0.7) * n1,
                        offset: rng.random_range(0.05..0.2),
                        beta: l.beta,
                    }
                }
                RoughnessMode::Polynomial => {
                    let n1: f64 = weights.iter().sum();
                    weights.iter_mut().for_each(|w| *w /= n1);
                    let degree = l.polynomial_degree();
                    let amp: f64 = rng.random_range(0.5..0.9);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    let mix: f64 = if degree > 1 {
                        rng.random_range(0.0..0.5)
                    } else {
                        0.0
                    };
                    // q(p) = mix * p + (1 - mix) * p^degree maps [0,1] onto [0,1]
                    let offset = if sign > 0.0 {
                        rng.random_range(0.05..(0.95 - amp))
                    } else {
                        rng.random_range((0.05 + amp)..0.95)
                    };
                    let mut coeffs = alloc::vec![0.0; degree + 1];
                    coeffs[0] = offset;
                    coeffs[1] += sign * amp * mix;
                    coeffs[degree] += sign * amp * (1.0 - mix);
                    Shape::Polynomial { coeffs }
                }
            };
            coords.push(CoordinateFn {
                vars,
                weights,
                shape,
            });
        }
        layers.push(coords);
    }
    Ok(TargetFunction {
        spec: spec.clone(),
        layers,
    })
}

impl TargetFunction {
    /// Builds a target from explicit coordinate functions, checking them
    /// against `spec`.
    pub fn from_parts(spec: CompositionSpec, layers: Vec<Vec<CoordinateFn>>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.depth() {
            return Err(Error::InvalidLayer {
                layer: layers.len().min(spec.depth()) + 1,
                reason: format!(
                    "expected {} layers of parameters, got {}",
                    spec.depth(),
                    layers.len()
                ),
            });
        }
        for (i, (coords, ls)) in layers.iter().zip(&spec.layers).enumerate() {
            let layer = i + 1;
            let bad = |reason| Err(Error::InvalidLayer { layer, reason });
            if coords.len() != ls.out_dim {
                return bad(format!(
                    "expected {} coordinate functions, got {}",
                    ls.out_dim,
                    coords.len()
                ));
            }
            for c in coords {
                if c.vars.len() != ls.active_vars || c.weights.len() != ls.active_vars {
                    return bad(format!(
                        "coordinate must use exactly {} inputs",
                        ls.active_vars
                    ));
                }
                if c.vars.windows(2).any(|w| w[0] >= w[1]) || c.vars.iter().any(|&v| v >= ls.in_dim)
                {
                    return bad("active inputs must be distinct, sorted and in range".into());
                }
                match (&c.shape, ls.mode) {
                    (Shape::Kink { beta, .. }, RoughnessMode::Kink) if *beta == ls.beta => {}
                    (Shape::Polynomial { coeffs }, RoughnessMode::Polynomial)
                        if !coeffs.is_empty() => {}
                    _ => return bad("coordinate shape does not match the layer mode".into()),
                }
            }
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &CompositionSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Vec<CoordinateFn>] {
        &self.layers
    }

    /// `H`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    /// Input dimension of layer `k` (1-based).
    pub fn layer_in_dim(&self, k: usize) -> usize {
        self.spec.layers[k - 1].in_dim
    }

    /// Output dimension of layer `k` (1-based).
    pub fn layer_out_dim(&self, k: usize) -> usize {
        self.spec.layers[k - 1].out_dim
    }

    /// Exact evaluation of `f*` at a point of `[0,1]^{d_1}`.
    pub fn eval_target(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "target input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        check_unit_cube(x)?;
        Ok(self.eval_layers_unchecked(1, self.depth(), x)[0])
    }

    /// Composes layers `from..=to` (1-based) at `z`, which must lie in the
    /// input cube of layer `from`.
    pub fn eval_partial(&self, from: usize, to: usize, z: &[f64]) -> Result<Vec<f64>> {
        self.check_range(from, to)?;
        let d = self.layer_in_dim(from);
        if z.len() != d {
            return Err(Error::DimensionMismatch {
                context: "partial composition input",
                expected: d,
                got: z.len(),
            });
        }
        check_unit_cube(z)?;
        Ok(self.eval_layers_unchecked(from, to, z))
    }

    pub fn check_range(&self, from: usize, to: usize) -> Result<()> {
        if from == 0 || from > to || to > self.depth() {
            return Err(Error::LayerRange {
                from,
                to,
                layers: self.depth(),
            });
        }
        Ok(())
    }

    /// Layers `from..=to` without domain checks. Every layer is a closed form
    /// defined on all of `R^{d_i}`, which is what frozen heads rely on when an
    /// adapter strays outside the cube.
    pub fn eval_layers_unchecked(&self, from: usize, to: usize, z: &[f64]) -> Vec<f64> {
        let mut cur: Vec<f64> = z.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[from - 1..to] {
            next.clear();
            next.extend(layer.iter().map(|c| c.eval(&cur)));
            core::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Segment `from..=to` as a differentiable map.
    pub fn segment(self: &Arc<Self>, from: usize, to: usize) -> Result<TargetSegment> {
        self.check_range(from, to)?;
        Ok(TargetSegment {
            target: Arc::clone(self),
            from,
            to,
        })
    }

    /// Nominal Euclidean Hölder constant of layer `k` at its own exponent
    /// (kink layers) or Lipschitz constant (polynomial layers).
    pub fn layer_nominal_constant(&self, k: usize) -> f64 {
        let cs: Vec<f64> = self.layers[k - 1]
            .iter()
            .map(|c| c.nominal_constant())
            .collect();
        cs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl Map for TargetFunction {
    fn in_dim(&self) -> usize {
        self.input_dim()
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        *out = self.eval_layers_unchecked(1, self.depth(), x);
    }
}

/// Layers `from..=to` of a shared target, usable as an oracle extractor,
/// head or ideal adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSegment {
    target: Arc<TargetFunction>,
    from: usize,
    to: usize,
}

impl TargetSegment {
    pub fn target(&self) -> &Arc<TargetFunction> {
        &self.target
    }

    pub fn range(&self) -> (usize, usize) {
        (self.from, self.to)
    }
}

impl Map for TargetSegment {
    fn in_dim(&self) -> usize {
        self.target.layer_in_dim(self.from)
    }
    fn out_dim(&self) -> usize {
        self.target.layer_out_dim(self.to)
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        *out = self.target.eval_layers_unchecked(self.from, self.to, x);
    }
}

impl DiffMap for TargetSegment {
    fn vjp(&self, x: &[f64], cotangent: &[f64], out: &mut Vec<f64>) {
        let layers = &self.target.layers[self.from - 1..self.to];
        // forward pass, keeping each layer's input
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        let mut cur = x.to_vec();
        for layer in layers {
            let next: Vec<f64> = layer.iter().map(|c| c.eval(&cur)).collect();
            inputs.push(core::mem::replace(&mut cur, next));
        }
        let mut cot = cotangent.to_vec();
        for (layer, input) in layers.iter().zip(&inputs).rev() {
            let mut g = alloc::vec![0.0; input.len()];
            for (c, &dy) in layer.iter().zip(&cot) {
                if dy == 0.0 {
                    continue;
                }
                let p = c.projection(input);
                let raw = c.shape.value(p);
                // clamp passes gradient only strictly inside (0, 1)
                if raw <= 0.0 || raw >= 1.0 {
                    continue;
                }
                let d = dy * c.shape.derivative(p);
                for (&v, w) in c.vars.iter().zip(&c.weights) {
                    g[v] += d * w;
                }
            }
            cot = g;
        }
        *out = cot;
    }
}

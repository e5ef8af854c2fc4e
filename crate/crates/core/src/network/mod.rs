//! The sparse ReLU class `F_ReLU(N_h, N_w, S, B)`.
//!
//! A network with height `N_h` is the composition of `N_h` affine maps with a
//! ReLU `η(v) = max(0, v)` between consecutive maps:
//!
//! `x ↦ W^(N_h) η(… η(W^(1) x + b^(1)) …) + b^(N_h)`.
//!
//! The textbook form also applies `η` to the raw input; on the unit cube that
//! is the identity, so it is omitted. No activation follows the last map.
//! `‖W‖_∞` is the largest absolute entry, and the class requires
//! `max_ℓ ‖W^(ℓ)‖_∞ ∨ ‖b^(ℓ)‖_∞ ≤ B` and `Σ_ℓ (‖W^(ℓ)‖_∞ + ‖b^(ℓ)‖_∞) ≤ S`.

mod grid;
mod text;

pub use grid::{
    enumerate_grid_class, enumerate_grid_class_with, FiniteNetworkClass, GridParams,
    DEFAULT_CLASS_CAP,
};
pub use text::{deserialize_network, serialize_network, NETWORK_HEADER};

use crate::error::{invalid, Error, Result};
use crate::map::{DiffMap, Map};
use crate::seed;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Relative slack used when comparing against `S` and `B`.
const BUDGET_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluNetworkSpec {
    /// `N_h`: number of affine maps.
    pub height: usize,
    /// `N_w`: hidden width.
    pub width: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    /// `S`; may be infinite.
    pub sparsity: f64,
    /// `B`; may be infinite.
    pub bound: f64,
}

impl ReluNetworkSpec {
    pub fn new(
        height: usize,
        width: usize,
        in_dim: usize,
        out_dim: usize,
        sparsity: f64,
        bound: f64,
    ) -> Self {
        Self {
            height,
            width,
            in_dim,
            out_dim,
            sparsity,
            bound,
        }
    }

    /// Spec with `S = B = ∞`.
    pub fn unconstrained(height: usize, width: usize, in_dim: usize, out_dim: usize) -> Self {
        Self::new(height, width, in_dim, out_dim, f64::INFINITY, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(invalid(
                "network spec",
                "height, width and dimensions must be positive",
            ));
        }
        if !(self.sparsity > 0.0) || !(self.bound > 0.0) {
            return Err(invalid(
                "network spec",
                "sparsity budget S and weight bound B must be positive",
            ));
        }
        Ok(())
    }

    pub fn is_constrained(&self) -> bool {
        self.sparsity.is_finite() || self.bound.is_finite()
    }

    /// `(rows, cols)` of `W^(ℓ)` for `ℓ = 1..=N_h`.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .map(|l| {
                let rows = if l + 1 == self.height {
                    self.out_dim
                } else {
                    self.width
                };
                let cols = if l == 0 { self.in_dim } else { self.width };
                (rows, cols)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

/// Location of one layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSlot {
    pub rows: usize,
    pub cols: usize,
    /// Start of `W` (row-major); `b` follows immediately.
    pub offset: usize,
}

impl LayerSlot {
    #[inline]
    pub fn weights_range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    #[inline]
    pub fn bias_range(&self) -> core::ops::Range<usize> {
        let s = self.offset + self.rows * self.cols;
        s..s + self.rows
    }
}

/// A ReLU network with all parameters in one flat vector, layer by layer,
/// each layer as `W` row-major followed by `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetwork {
    spec: ReluNetworkSpec,
    slots: Vec<LayerSlot>,
    params: Vec<f64>,
}

fn slots_for(spec: &ReluNetworkSpec) -> Vec<LayerSlot> {
    let mut offset = 0;
    spec.layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let s = LayerSlot { rows, cols, offset };
            offset += rows * cols + rows;
            s
        })
        .collect()
}

impl ReluNetwork {
    pub fn zeros(spec: ReluNetworkSpec) -> Result<Self> {
        spec.validate()?;
        let params = vec![0.0; spec.param_count()];
        Ok(Self {
            slots: slots_for(&spec),
            spec,
            params,
        })
    }

    pub fn from_params(spec: ReluNetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::DimensionMismatch {
                context: "network parameters",
                expected: spec.param_count(),
                got: params.len(),
            });
        }
        Ok(Self {
            slots: slots_for(&spec),
            spec,
            params,
        })
    }

    /// Builds from per-layer `(W rows, b)`; shapes must match `spec`.
    pub fn from_layers(
        spec: ReluNetworkSpec,
        layers: &[(Vec<Vec<f64>>, Vec<f64>)],
    ) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes();
        if layers.len() != shapes.len() {
            return Err(Error::DimensionMismatch {
                context: "network layer count",
                expected: shapes.len(),
                got: layers.len(),
            });
        }
        let mut params = Vec::with_capacity(spec.param_count());
        for ((w, b), (rows, cols)) in layers.iter().zip(shapes) {
            if w.len() != rows || b.len() != rows || w.iter().any(|r| r.len() != cols) {
                return Err(invalid(
                    "layers",
                    "weight or bias shape does not match the network shape",
                ));
            }
            w.iter().for_each(|r| params.extend_from_slice(r));
            params.extend_from_slice(b);
        }
        Self::from_params(spec, params)
    }

    pub fn spec(&self) -> &ReluNetworkSpec {
        &self.spec
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Same parameters under a different `(S, B)`.
    pub fn with_budget(mut self, sparsity: f64, bound: f64) -> Result<Self> {
        self.spec.sparsity = sparsity;
        self.spec.bound = bound;
        self.spec.validate()?;
        Ok(self)
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.params[self.slots[layer].weights_range()]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.params[self.slots[layer].bias_range()]
    }

    pub fn height(&self) -> usize {
        self.slots.len()
    }

    /// Checked evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.spec.in_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.spec.in_dim,
                got: x.len(),
            });
        }
        Ok(self.eval(x))
    }

    fn affine(&self, layer: usize, input: &[f64], out: &mut Vec<f64>, relu_input: bool) {
        let s = self.slots[layer];
        let w = &self.params[s.weights_range()];
        let b = &self.params[s.bias_range()];
        out.clear();
        for r in 0..s.rows {
            let row = &w[r * s.cols..(r + 1) * s.cols];
            let mut acc = b[r];
            if relu_input {
                for (wi, &v) in row.iter().zip(input) {
                    if v > 0.0 {
                        acc += wi * v;
                    }
                }
            } else {
                for (wi, &v) in row.iter().zip(input) {
                    acc += wi * v;
                }
            }
            out.push(acc);
        }
    }

    /// Forward pass storing every pre-activation for a later [`backward`](Self::backward).
    pub fn forward_cached(&self, x: &[f64], ws: &mut Workspace) {
        ws.ensure(self.height());
        ws.input.clear();
        ws.input.extend_from_slice(x);
        for l in 0..self.height() {
            let (prev, rest) = ws.pre.split_at_mut(l);
            let input: &[f64] = if l == 0 { &ws.input } else { &prev[l - 1] };
            self.affine(l, input, &mut rest[0], l > 0);
        }
    }

    /// Output of the last cached forward pass.
    pub fn cached_output<'a>(&self, ws: &'a Workspace) -> &'a [f64] {
        &ws.pre[self.height() - 1]
    }

    /// Pre-activations of hidden layer `l` (0-based) from the last cached pass.
    pub fn cached_preactivation<'a>(&self, ws: &'a Workspace, l: usize) -> &'a [f64] {
        &ws.pre[l]
    }

    /// Reverse pass for the cached input: adds `∂⟨cot, net(x)⟩/∂θ` into `grad`
    /// and, if requested, writes the input cotangent. ReLU kinks use the zero
    /// subgradient.
    pub fn backward(
        &self,
        ws: &mut Workspace,
        cotangent: &[f64],
        grad: &mut [f64],
        input_cot: Option<&mut Vec<f64>>,
    ) {
        debug_assert_eq!(grad.len(), self.params.len());
        let h = self.height();
        ws.delta.clear();
        ws.delta.extend_from_slice(cotangent);
        for l in (0..h).rev() {
            let s = self.slots[l];
            let input: &[f64] = if l == 0 { &ws.input } else { &ws.pre[l - 1] };
            let relu = l > 0;
            {
                let (gw, gb) = grad[s.offset..s.offset + s.rows * s.cols + s.rows]
                    .split_at_mut(s.rows * s.cols);
                for r in 0..s.rows {
                    let d = ws.delta[r];
                    gb[r] += d;
                    if d == 0.0 {
                        continue;
                    }
                    let g = &mut gw[r * s.cols..(r + 1) * s.cols];
                    for (gi, &v) in g.iter_mut().zip(input) {
                        let a = if relu && v <= 0.0 { 0.0 } else { v };
                        *gi += d * a;
                    }
                }
            }
            if l == 0 && input_cot.is_none() {
                break;
            }
            let w = &self.params[s.weights_range()];
            ws.next.clear();
            ws.next.resize(s.cols, 0.0);
            for r in 0..s.rows {
                let d = ws.delta[r];
                if d == 0.0 {
                    continue;
                }
                for (n, wi) in ws.next.iter_mut().zip(&w[r * s.cols..(r + 1) * s.cols]) {
                    *n += d * wi;
                }
            }
            if relu {
                for (n, &v) in ws.next.iter_mut().zip(input) {
                    if v <= 0.0 {
                        *n = 0.0;
                    }
                }
            }
            core::mem::swap(&mut ws.delta, &mut ws.next);
        }
        if let Some(out) = input_cot {
            out.clear();
            out.extend_from_slice(&ws.delta);
        }
    }

    /// Post-ReLU hidden activations `η(z^(ℓ))` for `ℓ = 1..N_h-1`.
    pub fn hidden_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut ws = Workspace::default();
        self.forward_cached(x, &mut ws);
        ws.pre[..self.height() - 1]
            .iter()
            .map(|z| z.iter().map(|v| v.max(0.0)).collect())
            .collect()
    }
}

/// Scratch buffers for cached forward and reverse passes.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, layers: usize) {
        if self.pre.len() < layers {
            self.pre.resize_with(layers, Vec::new);
        }
    }
}

impl Map for ReluNetwork {
    fn in_dim(&self) -> usize {
        self.spec.in_dim
    }
    fn out_dim(&self) -> usize {
        self.spec.out_dim
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        let mut a = Vec::with_capacity(self.spec.width);
        let mut b = Vec::with_capacity(self.spec.width);
        self.affine(0, x, &mut a, false);
        for l in 1..self.height() {
            self.affine(l, &a, &mut b, true);
            core::mem::swap(&mut a, &mut b);
        }
        out.clear();
        out.extend_from_slice(&a);
    }
}

impl DiffMap for ReluNetwork {
    fn vjp(&self, x: &[f64], cotangent: &[f64], out: &mut Vec<f64>) {
        let mut ws = Workspace::default();
        let mut scratch = vec![0.0; self.params.len()];
        self.forward_cached(x, &mut ws);
        self.backward(&mut ws, cotangent, &mut scratch, Some(out));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub max_norm: f64,
    pub path_sum: f64,
    pub satisfies_b: bool,
    pub satisfies_s: bool,
}

impl ConstraintReport {
    pub fn feasible(&self) -> bool {
        self.satisfies_b && self.satisfies_s
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn within(value: f64, budget: f64) -> bool {
    value <= budget * (1.0 + BUDGET_RTOL)
}

pub fn check_constraints(net: &ReluNetwork) -> ConstraintReport {
    let mut max_norm = 0.0f64;
    let mut path_sum = 0.0;
    for s in &net.slots {
        let w = max_abs(&net.params[s.weights_range()]);
        let b = max_abs(&net.params[s.bias_range()]);
        max_norm = max_norm.max(w).max(b);
        path_sum += w + b;
    }
    ConstraintReport {
        max_norm,
        path_sum,
        satisfies_b: within(max_norm, net.spec.bound),
        satisfies_s: within(path_sum, net.spec.sparsity),
    }
}

/// Clip every entry to `[-B, B]`, then rescale all parameters by
/// `S / path_sum` if the budget is still exceeded.
pub fn project_constraints(net: &ReluNetwork, spec: &ReluNetworkSpec) -> ReluNetwork {
    let mut out = net.clone();
    out.spec.sparsity = spec.sparsity;
    out.spec.bound = spec.bound;
    project_in_place(&mut out);
    out
}

pub(crate) fn project_in_place(net: &mut ReluNetwork) {
    let b = net.spec.bound;
    if b.is_finite() {
        for p in net.params.iter_mut() {
            *p = p.clamp(-b, b);
        }
    }
    let s = net.spec.sparsity;
    if s.is_finite() {
        let report = check_constraints(net);
        if !report.satisfies_s {
            let k = s / report.path_sum;
            net.params.iter_mut().for_each(|p| *p *= k);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitScheme {
    /// Weights `U(±min(B, √(6/fan_in)))`, biases `U(±min(B, 1/√fan_in))`.
    UniformScaled,
    /// Each weight row is a random direction with Euclidean norm `√2`; all
    /// biases zero.
    ZeroBiasRidge,
}

/// Random network inside the class of `spec`.
pub fn init_network(spec: &ReluNetworkSpec, scheme: InitScheme, seed: u64) -> Result<ReluNetwork> {
    let mut net = ReluNetwork::zeros(*spec)?;
    let mut rng = seed::rng(seed);
    for s in net.slots.clone() {
        let fan_in = s.cols as f64;
        match scheme {
            InitScheme::UniformScaled => {
                let wl = (6.0 / fan_in).sqrt().min(spec.bound);
                let bl = (1.0 / fan_in.sqrt()).min(spec.bound);
                for p in &mut net.params[s.weights_range()] {
                    *p = wl * (2.0 * rng.random::<f64>() - 1.0);
                }
                for p in &mut net.params[s.bias_range()] {
                    *p = bl * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            InitScheme::ZeroBiasRidge => {
                let scale = 2f64.sqrt();
                let w = &mut net.params[s.weights_range()];
                for r in 0..s.rows {
                    let row = &mut w[r * s.cols..(r + 1) * s.cols];
                    let mut norm = 0.0;
                    for p in row.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *p = z;
                        norm += z * z;
                    }
                    let norm = norm.sqrt().max(f64::MIN_POSITIVE);
                    row.iter_mut().for_each(|p| *p *= scale / norm);
                }
            }
        }
    }
    project_in_place(&mut net);
    Ok(net)
}

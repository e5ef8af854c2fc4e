//! Pre-trained models, adapter insertion and evaluation.
//!
//! A [`PretrainedModel`] holds a frozen extractor `g_e` and head `g_h`. Empirical
//! caulking fits an adapter `g_a` by least squares over
//! `F_n = {g_h ∘ g_a ∘ g_e : g_a ∈ G_n}` with `g_e` and `g_h` untouched.
//!
//! Two pre-training modes are provided. The oracle mode cuts the exact target
//! composition at the split, so caulkability holds with zero error. The
//! empirical mode fits one ReLU network on a source sample of size `m` and
//! cuts it between affine maps.

mod evaluation;

pub use evaluation::{
    excess_error, excess_error_by_definition, l2_error, make_classification_sample,
    ClassificationSample, McEstimate, PluginClassifier,
};

use crate::error::{invalid, Error, Result};
use crate::fitting::{fit_problem, multi_restart_fit_problem, FitConfig, FitTrace, Problem};
use crate::function_spaces::{
    make_regression_sample, CovariateDistribution, RegressionSample, TargetFunction, TargetSegment,
};
use crate::map::{DiffMap, Identity, Map};
use crate::matrix::Matrix;
use crate::network::{InitScheme, ReluNetwork, ReluNetworkSpec, Workspace};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// A ReLU network used as a frozen stage, with optional ReLUs on its input
/// and output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetStage {
    pub net: ReluNetwork,
    pub relu_input: bool,
    pub relu_output: bool,
}

impl Map for NetStage {
    fn in_dim(&self) -> usize {
        self.net.spec().in_dim
    }
    fn out_dim(&self) -> usize {
        self.net.spec().out_dim
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        if self.relu_input {
            let r: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            self.net.eval_into(&r, out);
        } else {
            self.net.eval_into(x, out);
        }
        if self.relu_output {
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
}

impl DiffMap for NetStage {
    fn vjp(&self, x: &[f64], cotangent: &[f64], out: &mut Vec<f64>) {
        let input: Vec<f64> = if self.relu_input {
            x.iter().map(|v| v.max(0.0)).collect()
        } else {
            x.to_vec()
        };
        let mut ws = Workspace::default();
        self.net.forward_cached(&input, &mut ws);
        let cot: Vec<f64> = if self.relu_output {
            let z = self.net.cached_output(&ws);
            cotangent
                .iter()
                .zip(z)
                .map(|(c, v)| if *v > 0.0 { *c } else { 0.0 })
                .collect()
        } else {
            cotangent.to_vec()
        };
        let mut scratch = vec![0.0; self.net.param_count()];
        self.net.backward(&mut ws, &cot, &mut scratch, Some(out));
        if self.relu_input {
            for (o, v) in out.iter_mut().zip(x) {
                if *v <= 0.0 {
                    *o = 0.0;
                }
            }
        }
    }
}

/// A frozen part of a pre-trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Identity(usize),
    Oracle(TargetSegment),
    Network(NetStage),
}

impl Map for Stage {
    fn in_dim(&self) -> usize {
        match self {
            Stage::Identity(d) => *d,
            Stage::Oracle(s) => s.in_dim(),
            Stage::Network(n) => n.in_dim(),
        }
    }
    fn out_dim(&self) -> usize {
        match self {
            Stage::Identity(d) => *d,
            Stage::Oracle(s) => s.out_dim(),
            Stage::Network(n) => n.out_dim(),
        }
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            Stage::Identity(d) => Identity(*d).eval_into(x, out),
            Stage::Oracle(s) => s.eval_into(x, out),
            Stage::Network(n) => n.eval_into(x, out),
        }
    }
}

impl DiffMap for Stage {
    fn vjp(&self, x: &[f64], cotangent: &[f64], out: &mut Vec<f64>) {
        match self {
            Stage::Identity(d) => Identity(*d).vjp(x, cotangent, out),
            Stage::Oracle(s) => s.vjp(x, cotangent, out),
            Stage::Network(n) => n.vjp(x, cotangent, out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Oracle,
    /// Fitted on a source sample of size `m`.
    Empirical {
        m: usize,
    },
}

/// Frozen `(g_h, g_e)` pair with the middle part it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainedModel {
    pub extractor: Stage,
    pub head: Stage,
    /// The middle of the pre-trained model: `f_{i_h} ∘ … ∘ f_{i_e}` for oracle
    /// models, the fitted middle maps for empirical ones.
    pub middle: Stage,
    /// `(i_e, i_h)`, 1-based and inclusive.
    pub split: (usize, usize),
    pub provenance: Provenance,
}

impl PretrainedModel {
    pub fn adapter_in_dim(&self) -> usize {
        self.extractor.out_dim()
    }

    pub fn adapter_out_dim(&self) -> usize {
        self.head.in_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.extractor.in_dim()
    }

    /// `g_h ∘ adapter ∘ g_e` at `x`.
    pub fn eval_with<A: Map + ?Sized>(&self, adapter: &A, x: &[f64]) -> f64 {
        let z = self.extractor.eval(x);
        let a = adapter.eval(&z);
        self.head.eval_scalar(&a)
    }

    /// The pre-trained model itself, `g_h ∘ middle ∘ g_e`.
    pub fn eval_pretrained(&self, x: &[f64]) -> f64 {
        self.eval_with(&self.middle, x)
    }
}

/// Exact cut of `f*` at `(i_e, i_h)`: `g_e = f_{i_e-1} ∘ … ∘ f_1`,
/// `g_h = f_H ∘ … ∘ f_{i_h+1}` and ideal adapter `f_{i_h} ∘ … ∘ f_{i_e}`.
pub fn pretrain_oracle(
    target: &Arc<TargetFunction>,
    split: (usize, usize),
) -> Result<PretrainedModel> {
    let (ie, ih) = split;
    let h = target.depth();
    target.check_range(ie, ih)?;
    let extractor = if ie == 1 {
        Stage::Identity(target.input_dim())
    } else {
        Stage::Oracle(target.segment(1, ie - 1)?)
    };
    let head = if ih == h {
        Stage::Identity(1)
    } else {
        Stage::Oracle(target.segment(ih + 1, h)?)
    };
    Ok(PretrainedModel {
        extractor,
        head,
        middle: Stage::Oracle(target.segment(ie, ih)?),
        split,
        provenance: Provenance::Oracle,
    })
}

/// Layout of the network fitted by [`pretrain_empirical`]: a uniform-width
/// ReLU network whose affine maps are grouped into extractor, middle and head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalArchitecture {
    pub width: usize,
    pub extractor_maps: usize,
    pub middle_maps: usize,
    pub head_maps: usize,
}

impl EmpiricalArchitecture {
    pub fn height(&self) -> usize {
        self.extractor_maps + self.middle_maps + self.head_maps
    }
}

/// Fits one network to `m` noisy source draws of `f*` under `source`, then
/// cuts it into `g_e = η ∘ (first maps)`, the middle maps, and
/// `g_h = (last maps) ∘ η`, so that `g_h ∘ middle ∘ g_e` is the fitted network.
pub fn pretrain_empirical(
    target: &TargetFunction,
    source: &CovariateDistribution,
    m: usize,
    arch: &EmpiricalArchitecture,
    noise_sigma: f64,
    config: &FitConfig,
    seed: u64,
) -> Result<PretrainedModel> {
    if m == 0 {
        return Err(invalid("m", "the source sample needs at least one point"));
    }
    if arch.extractor_maps == 0 || arch.middle_maps == 0 || arch.head_maps == 0 || arch.width == 0 {
        return Err(invalid(
            "architecture",
            "each part needs at least one affine map and width >= 1",
        ));
    }
    let sample = make_regression_sample(
        target,
        source,
        m,
        noise_sigma,
        crate::seed::derive_label(seed, "source"),
    )?;
    let spec = ReluNetworkSpec::unconstrained(arch.height(), arch.width, target.input_dim(), 1);
    let cfg = FitConfig {
        seed: crate::seed::derive_label(seed, "pretrain-fit"),
        ..*config
    };
    let (net, _) = multi_restart_fit_problem(
        &spec,
        &Problem::from_sample(&sample),
        &cfg,
        InitScheme::UniformScaled,
    )?;
    let (pre, mid, post) = split_network(&net, arch.extractor_maps, arch.middle_maps)?;
    let ie = arch.extractor_maps + 1;
    Ok(PretrainedModel {
        extractor: Stage::Network(NetStage {
            net: pre,
            relu_input: false,
            relu_output: true,
        }),
        head: Stage::Network(NetStage {
            net: post,
            relu_input: true,
            relu_output: false,
        }),
        middle: Stage::Network(NetStage {
            net: mid,
            relu_input: false,
            relu_output: false,
        }),
        split: (ie, ie + arch.middle_maps - 1),
        provenance: Provenance::Empirical { m },
    })
}

/// Cuts a network into maps `[0, a)`, `[a, a + b)` and the rest.
fn split_network(
    net: &ReluNetwork,
    a: usize,
    b: usize,
) -> Result<(ReluNetwork, ReluNetwork, ReluNetwork)> {
    let spec = net.spec();
    let h = net.height();
    let part = |from: usize, to: usize| -> Result<ReluNetwork> {
        let slots = &net.slots()[from..to];
        let in_dim = slots[0].cols;
        let out_dim = slots[slots.len() - 1].rows;
        let s = ReluNetworkSpec::new(
            to - from,
            spec.width,
            in_dim,
            out_dim,
            spec.sparsity,
            spec.bound,
        );
        let start = slots[0].offset;
        let end = slots[slots.len() - 1].bias_range().end;
        ReluNetwork::from_params(s, net.params()[start..end].to_vec())
    };
    if a == 0 || b == 0 || a + b >= h {
        return Err(invalid("split", "each part needs at least one affine map"));
    }
    Ok((part(0, a)?, part(a, a + b)?, part(a + b, h)?))
}

/// The trainable adapter class `G_n`: `depth` hidden ReLU layers of width
/// `width` (depth 0 is a single affine map), optionally constrained by `(S, B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdapterSpec {
    pub depth: usize,
    pub width: usize,
    pub constraints: Option<(f64, f64)>,
}

impl AdapterSpec {
    pub fn new(depth: usize, width: usize) -> Self {
        Self {
            depth,
            width,
            constraints: None,
        }
    }

    pub fn network_spec(&self, in_dim: usize, out_dim: usize) -> ReluNetworkSpec {
        let (s, b) = self.constraints.unwrap_or((f64::INFINITY, f64::INFINITY));
        ReluNetworkSpec::new(self.depth + 1, self.width.max(1), in_dim, out_dim, s, b)
    }
}

/// `g_h ∘ g_a ∘ g_e` with a frozen pre-trained pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CaulkedModel {
    pub pretrained: Arc<PretrainedModel>,
    pub adapter: ReluNetwork,
}

impl Map for CaulkedModel {
    fn in_dim(&self) -> usize {
        self.pretrained.input_dim()
    }
    fn out_dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(self.pretrained.eval_with(&self.adapter, x));
    }
}

fn check_interfaces(
    pre: &PretrainedModel,
    adapter: &ReluNetworkSpec,
    sample: &RegressionSample,
) -> Result<()> {
    let mismatch = |context, expected, got| {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    };
    if sample.inputs.cols() != pre.input_dim() {
        return mismatch(
            "sample/extractor interface",
            pre.input_dim(),
            sample.inputs.cols(),
        );
    }
    if adapter.in_dim != pre.adapter_in_dim() {
        return mismatch(
            "extractor/adapter interface",
            pre.adapter_in_dim(),
            adapter.in_dim,
        );
    }
    if adapter.out_dim != pre.adapter_out_dim() {
        return mismatch(
            "adapter/head interface",
            pre.adapter_out_dim(),
            adapter.out_dim,
        );
    }
    if pre.head.out_dim() != 1 {
        return mismatch("head output", 1, pre.head.out_dim());
    }
    Ok(())
}

/// Extractor features of every sample row, computed once per fit.
pub fn extract_features(pre: &PretrainedModel, inputs: &Matrix) -> Matrix {
    inputs.map_rows(pre.adapter_in_dim(), |x, out| {
        pre.extractor.eval_into(x, out)
    })
}

/// Empirical caulking: least-squares fit of a fresh adapter from
/// `config.restarts` random starts, with `g_e` and `g_h` frozen.
pub fn caulk_fit(
    pretrained: &Arc<PretrainedModel>,
    adapter: &AdapterSpec,
    sample: &RegressionSample,
    config: &FitConfig,
) -> Result<(CaulkedModel, FitTrace)> {
    let spec = adapter.network_spec(pretrained.adapter_in_dim(), pretrained.adapter_out_dim());
    check_interfaces(pretrained, &spec, sample)?;
    let features = extract_features(pretrained, &sample.inputs);
    let problem = Problem::new(&features, &sample.outputs).with_head(&pretrained.head);
    let (net, trace) =
        multi_restart_fit_problem(&spec, &problem, config, InitScheme::UniformScaled)?;
    Ok((
        CaulkedModel {
            pretrained: Arc::clone(pretrained),
            adapter: net,
        },
        trace,
    ))
}

/// Single caulking run from a given adapter initialization.
pub fn caulk_fit_from(
    pretrained: &Arc<PretrainedModel>,
    adapter_init: &ReluNetwork,
    sample: &RegressionSample,
    config: &FitConfig,
) -> Result<(CaulkedModel, FitTrace)> {
    let spec = *adapter_init.spec();
    check_interfaces(pretrained, &spec, sample)?;
    let features = extract_features(pretrained, &sample.inputs);
    let problem = Problem::new(&features, &sample.outputs).with_head(&pretrained.head);
    let constraints = spec.is_constrained().then_some(&spec);
    let (net, trace) = fit_problem(adapter_init, &problem, config, constraints)?;
    Ok((
        CaulkedModel {
            pretrained: Arc::clone(pretrained),
            adapter: net,
        },
        trace,
    ))
}

/// Baseline without a pre-trained model: the full class fitted from scratch.
pub fn scratch_fit(
    spec: &ReluNetworkSpec,
    sample: &RegressionSample,
    config: &FitConfig,
) -> Result<(ReluNetwork, FitTrace)> {
    multi_restart_fit_problem(
        spec,
        &Problem::from_sample(sample),
        config,
        InitScheme::UniformScaled,
    )
}

use super::covering::{covering_size, function_class_metric, halton_probes};
use crate::error::{invalid, Error, Result};
use crate::function_spaces::{holder_constant_estimate_with, holder_ratio_max, PairSampler};
use crate::map::{euclid_dist, scalar_fn, FnMap, Map};
use crate::matrix::Matrix;
use crate::network::{enumerate_grid_class, ReluNetwork, ReluNetworkSpec};
use crate::seed::{derive_label, rng};
use crate::stats::mean_estimate;
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

/// Relative slack allowed between the measured and claimed Hölder constant.
pub const HOLDER_RTOL: f64 = 1e-9;

/// Pairs drawn by the randomized part of the Hölder precondition check.
pub const HOLDER_CHECK_PAIRS: usize = 20_000;

/// Image of every probe under every member of `class`, one matrix per member.
fn member_images<A: Map>(class: &[A], inputs: &Matrix) -> Vec<Matrix> {
    class
        .iter()
        .map(|g| inputs.map_rows(g.out_dim(), |x, out| g.eval_into(x, out)))
        .collect()
}

/// Largest `‖g_h(u) − g_h(v)‖ / ‖u − v‖^α` over pairs of head inputs that the
/// class actually produces, plus random pairs in their bounding box.
fn measured_head_constant<H: Map + ?Sized>(
    head: &H,
    alpha: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<f64> {
    let mut pairs: Vec<(&[f64], &[f64])> = Vec::new();
    let step = (points.len() / 400).max(1);
    let sub: Vec<&Vec<f64>> = points.iter().step_by(step).collect();
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            pairs.push((sub[i], sub[j]));
        }
    }
    let mut best = holder_ratio_max(head, alpha, pairs).unwrap_or(0.0);
    let dim = head.in_dim();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        for &v in p {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if hi > lo {
        let sampler = PairSampler::with_box(dim, lo, hi);
        best = best.max(holder_constant_estimate_with(
            head,
            alpha,
            &sampler,
            HOLDER_CHECK_PAIRS,
            seed,
        )?);
    }
    Ok(best)
}

fn check_alpha_c(alpha: f64, c_alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1]"));
    }
    if !(c_alpha > 0.0 && c_alpha.is_finite()) {
        return Err(invalid("c_alpha", "must be a positive real"));
    }
    Ok(())
}

fn check_head<H: Map + ?Sized>(
    images: &[Matrix],
    head: &H,
    alpha: f64,
    c_alpha: f64,
    seed: u64,
) -> Result<f64> {
    let points: Vec<Vec<f64>> = images
        .iter()
        .flat_map(|m| m.iter_rows().map(|r| r.to_vec()))
        .collect();
    let measured = measured_head_constant(head, alpha, &points, seed)?;
    if measured > c_alpha * (1.0 + HOLDER_RTOL) {
        return Err(Error::HolderPrecondition {
            measured,
            claimed: c_alpha,
        });
    }
    Ok(measured)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringCheck {
    pub deltas: Vec<f64>,
    /// `N(δ, F)` under the sup over `ν` probes.
    pub class_covering: Vec<usize>,
    /// `(δ / C_α)^{1/α}` for each `δ`.
    pub adapter_radii: Vec<f64>,
    /// `N((δ / C_α)^{1/α}, G)` under the sup over adapter-domain probes.
    pub adapter_covering: Vec<usize>,
    pub holds: Vec<bool>,
    pub measured_constant: f64,
}

impl CoveringCheck {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }

    pub fn violations(&self) -> usize {
        self.holds.iter().filter(|&&h| !h).count()
    }
}

/// Compares `N(δ, {g_h ∘ g_a ∘ g_e})` with `N((δ/C_α)^{1/α}, G)` at every `δ`.
///
/// The adapter-domain probes are `g_e(ν)` together with `extra_adapter_probes`.
#[allow(clippy::too_many_arguments)]
pub fn check_composition_covering<A, H, E>(
    class: &[A],
    head: &H,
    extractor: &E,
    alpha: f64,
    c_alpha: f64,
    deltas: &[f64],
    nu_probes: &Matrix,
    extra_adapter_probes: Option<&Matrix>,
    seed: u64,
) -> Result<CoveringCheck>
where
    A: Map,
    H: Map + ?Sized,
    E: Map + ?Sized,
{
    check_alpha_c(alpha, c_alpha)?;
    if class.is_empty() || deltas.is_empty() {
        return Err(invalid("class", "class and delta grid must be nonempty"));
    }
    let adapter_probes = adapter_domain_probes(extractor, nu_probes, extra_adapter_probes)?;
    let images = member_images(class, &adapter_probes);
    let measured = check_head(&images, head, alpha, c_alpha, derive_label(seed, "holder"))?;
    let composed: Vec<FnMap<_>> = class
        .iter()
        .map(|g| {
            FnMap::new(
                extractor.in_dim(),
                head.out_dim(),
                move |x: &[f64], out: &mut Vec<f64>| {
                    let z = extractor.eval(x);
                    head.eval_into(&g.eval(&z), out);
                },
            )
        })
        .collect();
    let f_metric = function_class_metric(&composed, nu_probes)?;
    let g_metric = function_class_metric(class, &adapter_probes)?;
    let mut out = CoveringCheck {
        deltas: deltas.to_vec(),
        class_covering: Vec::new(),
        adapter_radii: Vec::new(),
        adapter_covering: Vec::new(),
        holds: Vec::new(),
        measured_constant: measured,
    };
    for &d in deltas {
        let r = (d / c_alpha).powf(1.0 / alpha);
        let left = covering_size(&f_metric, d)?;
        let right = covering_size(&g_metric, r)?;
        out.class_covering.push(left);
        out.adapter_radii.push(r);
        out.adapter_covering.push(right);
        out.holds.push(left <= right);
    }
    Ok(out)
}

fn adapter_domain_probes<E: Map + ?Sized>(
    extractor: &E,
    nu: &Matrix,
    extra: Option<&Matrix>,
) -> Result<Matrix> {
    if nu.rows() == 0 {
        return Err(invalid("nu_probes", "need at least one probe point"));
    }
    if nu.cols() != extractor.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "probe/extractor input",
            expected: extractor.in_dim(),
            got: nu.cols(),
        });
    }
    let mut rows: Vec<Vec<f64>> = nu.iter_rows().map(|x| extractor.eval(x)).collect();
    if let Some(e) = extra {
        if e.cols() != extractor.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "adapter probe dimension",
                expected: extractor.out_dim(),
                got: e.cols(),
            });
        }
        rows.extend(e.iter_rows().map(|r| r.to_vec()));
    }
    Ok(Matrix::from_rows(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationCheck {
    /// `min_G ‖g_h∘g_a∘g_e − g_h∘g*_a∘g_e‖_{L²(Q_X)}` by Monte Carlo.
    pub left: f64,
    pub left_std_error: f64,
    /// `C_α (min_G sup ‖g_a − g*_a‖)^α` over adapter-domain probes.
    pub right: f64,
    pub best_member: usize,
    pub measured_constant: f64,
    pub holds: bool,
}

/// Compares the best L2 approximation of the composed target with
/// `C_α · (best sup-norm adapter error)^α`.
#[allow(clippy::too_many_arguments)]
pub fn check_approximation_bound<A, S, H, E>(
    class: &[A],
    ideal_adapter: &S,
    head: &H,
    extractor: &E,
    alpha: f64,
    c_alpha: f64,
    q_probes: &Matrix,
    extra_adapter_probes: Option<&Matrix>,
    seed: u64,
) -> Result<ApproximationCheck>
where
    A: Map,
    S: Map + ?Sized,
    H: Map + ?Sized,
    E: Map + ?Sized,
{
    check_alpha_c(alpha, c_alpha)?;
    if class.is_empty() {
        return Err(invalid("class", "must be nonempty"));
    }
    if q_probes.rows() < 2 {
        return Err(invalid("q_probes", "need at least 2 Monte Carlo draws"));
    }
    let adapter_probes = adapter_domain_probes(extractor, q_probes, extra_adapter_probes)?;
    let mut images = member_images(class, &adapter_probes);
    let ideal_image = adapter_probes.map_rows(ideal_adapter.out_dim(), |x, out| {
        ideal_adapter.eval_into(x, out)
    });
    images.push(ideal_image.clone());
    let measured = check_head(&images, head, alpha, c_alpha, derive_label(seed, "holder"))?;
    images.pop();

    let sup_err = images
        .iter()
        .map(|m| {
            m.iter_rows()
                .zip(ideal_image.iter_rows())
                .map(|(u, v)| euclid_dist(u, v))
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let right = c_alpha * sup_err.powf(alpha);

    let nq = q_probes.rows();
    let target: Vec<Vec<f64>> = (0..nq).map(|i| head.eval(ideal_image.row(i))).collect();
    let mut best = (f64::INFINITY, 0.0, 0usize);
    for (k, m) in images.iter().enumerate() {
        let sq: Vec<f64> = (0..nq)
            .map(|i| {
                let d = euclid_dist(&head.eval(m.row(i)), &target[i]);
                d * d
            })
            .collect();
        let e = mean_estimate(&sq);
        let l2 = e.mean.sqrt();
        if l2 < best.0 {
            let se = if l2 > 0.0 {
                e.std_error / (2.0 * l2)
            } else {
                0.0
            };
            best = (l2, se, k);
        }
    }
    let (left, left_std_error, best_member) = best;
    Ok(ApproximationCheck {
        left,
        left_std_error,
        right,
        best_member,
        measured_constant: measured,
        holds: left <= right + 3.0 * left_std_error,
    })
}

/// A head map with a globally certified Hölder exponent and constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticHead {
    /// `z ↦ z`, `α = 1`, `C = 1`
    Identity,
    /// `z ↦ clamp(z, 0, 1)²`, `α = 1`, `C = 2`
    ClampedSquare,
    /// `z ↦ sin(2z)`, `α = 1`, `C = 2`
    Sine,
    /// `z ↦ √|z|`, `α = 1/2`, `C = 1`
    SqrtAbs,
    /// `z ↦ |z|^0.7`, `α = 0.7`, `C = 1`
    Power07,
    /// `z ↦ 0.4`, any `α`, `C = 1`
    Constant,
}

impl AnalyticHead {
    pub const ALL: [AnalyticHead; 6] = [
        AnalyticHead::Identity,
        AnalyticHead::ClampedSquare,
        AnalyticHead::Sine,
        AnalyticHead::SqrtAbs,
        AnalyticHead::Power07,
        AnalyticHead::Constant,
    ];

    /// `(α, C_α)`.
    pub fn holder(&self) -> (f64, f64) {
        match self {
            AnalyticHead::Identity => (1.0, 1.0),
            AnalyticHead::ClampedSquare => (1.0, 2.0),
            AnalyticHead::Sine => (1.0, 2.0),
            AnalyticHead::SqrtAbs => (0.5, 1.0),
            AnalyticHead::Power07 => (0.7, 1.0),
            AnalyticHead::Constant => (1.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AnalyticHead::Identity => "identity",
            AnalyticHead::ClampedSquare => "clamped-square",
            AnalyticHead::Sine => "sine",
            AnalyticHead::SqrtAbs => "sqrt-abs",
            AnalyticHead::Power07 => "power-0.7",
            AnalyticHead::Constant => "constant",
        }
    }

    pub fn apply(&self, z: f64) -> f64 {
        match self {
            AnalyticHead::Identity => z,
            AnalyticHead::ClampedSquare => {
                let c = z.clamp(0.0, 1.0);
                c * c
            }
            AnalyticHead::Sine => (2.0 * z).sin(),
            AnalyticHead::SqrtAbs => z.abs().sqrt(),
            AnalyticHead::Power07 => z.abs().powf(0.7),
            AnalyticHead::Constant => 0.4,
        }
    }

    pub fn as_map(self) -> impl Map {
        scalar_fn(1, move |z: &[f64]| self.apply(z[0]))
    }
}

/// A generated verification instance: finite adapter class `G`, analytic
/// head, fixed extractor `x ↦ mean(x)` on `[0,1]^dim`, and an ideal adapter.
pub struct VerifyInstance {
    pub description: String,
    pub class: Vec<ReluNetwork>,
    pub head: AnalyticHead,
    pub input_dim: usize,
    pub ideal_adapter: Box<dyn Map>,
    pub ideal_in_class: bool,
}

impl core::fmt::Debug for VerifyInstance {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("VerifyInstance")
            .field("description", &self.description)
            .field("class_size", &self.class.len())
            .field("head", &self.head)
            .field("ideal_in_class", &self.ideal_in_class)
            .finish()
    }
}

impl VerifyInstance {
    pub fn extractor(&self) -> impl Map {
        let d = self.input_dim;
        scalar_fn(d, move |x: &[f64]| x.iter().sum::<f64>() / d as f64)
    }
}

/// Largest adapter class drawn by [`generate_instance`].
pub const INSTANCE_CLASS_CAP: usize = 20;

/// Instance `index` of a seeded family. The class is a random subset of at most
/// 20 members of the 1-hidden-unit grid class with `B = 1`, step 0.5, `S = 2`.
/// With `ideal_in_class` the ideal adapter is a member; otherwise it is
/// `z ↦ 0.3 sin(5z) + 0.5`, which no member matches.
pub fn generate_instance(seed: u64, index: usize, ideal_in_class: bool) -> Result<VerifyInstance> {
    let s = crate::seed::derive_path(seed, &[index as u64, ideal_in_class as u64]);
    let mut r = rng(s);
    let spec = ReluNetworkSpec::new(2, 1, 1, 1, 2.0, 1.0);
    let full = enumerate_grid_class(&spec, 0.5, crate::network::DEFAULT_CLASS_CAP)?;
    let mut members = full.members;
    members.shuffle(&mut r);
    let size = r.random_range(5..=INSTANCE_CLASS_CAP).min(members.len());
    members.truncate(size);
    let head = AnalyticHead::ALL[index % AnalyticHead::ALL.len()];
    let input_dim = 1 + index % 2;
    let ideal_adapter: Box<dyn Map> = if ideal_in_class {
        let k = r.random_range(0..members.len());
        Box::new(members[k].clone())
    } else {
        Box::new(scalar_fn(1, |z: &[f64]| 0.3 * (5.0 * z[0]).sin() + 0.5))
    };
    Ok(VerifyInstance {
        description: alloc::format!(
            "instance {index}: |G| = {size}, head {}, input dim {input_dim}, ideal adapter {}",
            head.name(),
            if ideal_in_class { "in G" } else { "outside G" }
        ),
        class: members,
        head,
        input_dim,
        ideal_adapter,
        ideal_in_class,
    })
}

/// `δ ∈ {0.05, 0.10, …, 1.00}`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 * 0.05).collect()
}

/// Runs [`check_composition_covering`] on an instance with 256 Halton probes
/// and 256 extra adapter-domain probes on `[-1, 2]`.
pub fn check_instance_covering(inst: &VerifyInstance, seed: u64) -> Result<CoveringCheck> {
    check_instance_covering_with(inst, inst.head.holder().1, seed)
}

/// As [`check_instance_covering`] with a caller-supplied `C_α`.
pub fn check_instance_covering_with(
    inst: &VerifyInstance,
    c: f64,
    seed: u64,
) -> Result<CoveringCheck> {
    let alpha = inst.head.holder().0;
    let nu = halton_probes(inst.input_dim, 256, 0.0, 1.0);
    let extra = halton_probes(1, 256, -1.0, 2.0);
    check_composition_covering(
        &inst.class,
        &inst.head.as_map(),
        &inst.extractor(),
        alpha,
        c,
        &default_delta_grid(),
        &nu,
        Some(&extra),
        seed,
    )
}

/// Runs [`check_approximation_bound`] with `n_mc` uniform draws as `Q_X`.
pub fn check_instance_approximation(
    inst: &VerifyInstance,
    n_mc: usize,
    seed: u64,
) -> Result<ApproximationCheck> {
    check_instance_approximation_with(inst, inst.head.holder().1, n_mc, seed)
}

/// As [`check_instance_approximation`] with a caller-supplied `C_α`.
pub fn check_instance_approximation_with(
    inst: &VerifyInstance,
    c: f64,
    n_mc: usize,
    seed: u64,
) -> Result<ApproximationCheck> {
    let alpha = inst.head.holder().0;
    let q = crate::function_spaces::sample_covariates(
        &crate::function_spaces::CovariateDistribution::uniform(inst.input_dim),
        n_mc,
        derive_label(seed, "q-probes"),
    );
    let extra = halton_probes(1, 256, -1.0, 2.0);
    check_approximation_bound(
        &inst.class,
        &*inst.ideal_adapter,
        &inst.head.as_map(),
        &inst.extractor(),
        alpha,
        c,
        &q,
        Some(&extra),
        seed,
    )
}

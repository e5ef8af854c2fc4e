//! Least-squares fitting of ReLU networks.
//!
//! The estimator of interest is the empirical risk minimizer of
//! `(1/n) Σ (f(X_i) - Y_i)²`. Exact minimization over a ReLU class is out of
//! reach, so it is approximated by projected first-order descent from several
//! random starts. Gradients are exact reverse-mode derivatives, optionally
//! pulled back through a frozen differentiable head.

use crate::error::{invalid, Error, Result};
use crate::function_spaces::RegressionSample;
use crate::map::DiffMap;
use crate::matrix::Matrix;
use crate::network::{
    init_network, project_constraints, InitScheme, ReluNetwork, ReluNetworkSpec, Workspace,
};
use crate::seed;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

/// Threshold on training-loss improvement below which an epoch counts as a plateau.
pub const PLATEAU_TOL: f64 = 1e-10;
/// Learning-rate halvings allowed before a run is declared divergent.
pub const MAX_HALVINGS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    GradientDescent,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `None` is full batch.
    pub batch_size: Option<usize>,
    pub restarts: usize,
    pub patience: usize,
    pub project_every: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            max_epochs: 2000,
            batch_size: None,
            restarts: 1,
            patience: 100,
            project_every: 1,
            seed: 0,
            optimizer: Optimizer::GradientDescent,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be a positive real"));
        }
        if self.max_epochs == 0
            || self.restarts == 0
            || self.patience == 0
            || self.project_every == 0
        {
            return Err(invalid(
                "fit config",
                "max_epochs, restarts, patience and project_every must be positive",
            ));
        }
        if self.patience > self.max_epochs {
            return Err(invalid("patience", "must not exceed max_epochs"));
        }
        if self.batch_size == Some(0) {
            return Err(invalid("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Training record of the selected run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// `losses[k]` is the full training loss after `k` epochs.
    pub losses: Vec<f64>,
    pub final_loss: f64,
    pub restart_index: usize,
    pub epochs_run: usize,
}

/// A least-squares objective over a fixed design, optionally composed with a
/// frozen head `h`: the model is `h ∘ net`.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub inputs: &'a Matrix,
    pub targets: &'a [f64],
    pub head: Option<&'a dyn DiffMap>,
}

impl<'a> Problem<'a> {
    pub fn new(inputs: &'a Matrix, targets: &'a [f64]) -> Self {
        Self {
            inputs,
            targets,
            head: None,
        }
    }

    pub fn from_sample(sample: &'a RegressionSample) -> Self {
        Self::new(&sample.inputs, &sample.outputs)
    }

    pub fn with_head(mut self, head: &'a dyn DiffMap) -> Self {
        self.head = Some(head);
        self
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn check(&self, net: &ReluNetwork) -> Result<()> {
        let mismatch = |context, expected, got| {
            Err(Error::DimensionMismatch {
                context,
                expected,
                got,
            })
        };
        if self.targets.is_empty() {
            return Err(invalid("targets", "need at least one observation"));
        }
        if self.inputs.rows() != self.targets.len() {
            return mismatch("inputs vs targets", self.targets.len(), self.inputs.rows());
        }
        if self.inputs.cols() != net.spec().in_dim {
            return mismatch("network input", net.spec().in_dim, self.inputs.cols());
        }
        match self.head {
            Some(h) => {
                if h.in_dim() != net.spec().out_dim {
                    return mismatch("head input", h.in_dim(), net.spec().out_dim);
                }
                if h.out_dim() != 1 {
                    return mismatch("head output", 1, h.out_dim());
                }
            }
            None if net.spec().out_dim != 1 => {
                return mismatch("network output", 1, net.spec().out_dim)
            }
            None => {}
        }
        Ok(())
    }

    /// Model prediction at row `i`.
    fn predict(&self, net: &ReluNetwork, i: usize, buf: &mut Vec<f64>, out: &mut Vec<f64>) -> f64 {
        use crate::map::Map;
        net.eval_into(self.inputs.row(i), buf);
        match self.head {
            Some(h) => {
                h.eval_into(buf, out);
                out[0]
            }
            None => buf[0],
        }
    }

    /// Mean squared error; no dimension checks.
    pub fn loss(&self, net: &ReluNetwork) -> f64 {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let n = self.len();
        (0..n)
            .map(|i| {
                let r = self.predict(net, i, &mut a, &mut b) - self.targets[i];
                r * r
            })
            .sum::<f64>()
            / n as f64
    }

    /// Loss and gradient over the rows in `idx` (all rows when `None`).
    pub fn loss_and_gradient_on(
        &self,
        net: &ReluNetwork,
        idx: Option<&[usize]>,
        grad: &mut Vec<f64>,
    ) -> f64 {
        grad.clear();
        grad.resize(net.param_count(), 0.0);
        let mut ws = Workspace::default();
        let (mut hout, mut cot) = (Vec::new(), Vec::new());
        let n = idx.map_or(self.len(), |v| v.len());
        let scale = 2.0 / n as f64;
        let mut loss = 0.0;
        for k in 0..n {
            let i = idx.map_or(k, |v| v[k]);
            net.forward_cached(self.inputs.row(i), &mut ws);
            match self.head {
                Some(h) => {
                    let z = net.cached_output(&ws).to_vec();
                    h.eval_into(&z, &mut hout);
                    let r = hout[0] - self.targets[i];
                    loss += r * r;
                    h.vjp(&z, &[scale * r], &mut cot);
                    net.backward(&mut ws, &cot, grad, None);
                }
                None => {
                    let r = net.cached_output(&ws)[0] - self.targets[i];
                    loss += r * r;
                    net.backward(&mut ws, &[scale * r], grad, None);
                }
            }
        }
        loss / n as f64
    }
}

/// Mean squared error of `net` on `(inputs, targets)` and its exact gradient
/// with respect to the flat parameter vector.
pub fn loss_and_gradient(
    net: &ReluNetwork,
    inputs: &Matrix,
    targets: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let p = Problem::new(inputs, targets);
    p.check(net)?;
    let mut g = Vec::new();
    let l = p.loss_and_gradient_on(net, None, &mut g);
    Ok((l, g))
}

/// Central-difference gradient of the loss, one pair of evaluations per parameter.
pub fn finite_diff_gradient(
    net: &ReluNetwork,
    inputs: &Matrix,
    targets: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    finite_diff_gradient_problem(net, &Problem::new(inputs, targets), step)
}

pub fn finite_diff_gradient_problem(
    net: &ReluNetwork,
    problem: &Problem<'_>,
    step: f64,
) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", "must be a positive real"));
    }
    problem.check(net)?;
    let mut work = net.clone();
    let mut g = vec![0.0; net.param_count()];
    for (k, gk) in g.iter_mut().enumerate() {
        let base = net.params()[k];
        work.params_mut()[k] = base + step;
        let up = problem.loss(&work);
        work.params_mut()[k] = base - step;
        let down = problem.loss(&work);
        work.params_mut()[k] = base;
        *gk = (up - down) / (2.0 * step);
    }
    Ok(g)
}

/// Fits `net_init` to a regression sample.
pub fn fit_least_squares(
    net_init: &ReluNetwork,
    sample: &RegressionSample,
    config: &FitConfig,
    constraints: Option<&ReluNetworkSpec>,
) -> Result<(ReluNetwork, FitTrace)> {
    fit_problem(net_init, &Problem::from_sample(sample), config, constraints)
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// One descent run from `net_init` with learning-rate halving on divergence.
pub fn fit_problem(
    net_init: &ReluNetwork,
    problem: &Problem<'_>,
    config: &FitConfig,
    constraints: Option<&ReluNetworkSpec>,
) -> Result<(ReluNetwork, FitTrace)> {
    config.validate()?;
    problem.check(net_init)?;
    let project = |net: &ReluNetwork| match constraints {
        Some(spec) => project_constraints(net, spec),
        None => net.clone(),
    };
    let mut lr = config.learning_rate;
    let mut halvings = 0u32;
    'run: loop {
        let mut net = project(net_init);
        let mut grad = Vec::new();
        let mut losses = Vec::new();
        let mut adam = AdamState {
            m: vec![0.0; net.param_count()],
            v: vec![0.0; net.param_count()],
            t: 0,
        };
        let mut order: Vec<usize> = (0..problem.len()).collect();
        let mut shuffle_rng = seed::rng(seed::derive_label(config.seed, "minibatch"));
        let mut best = f64::INFINITY;
        let mut stale = 0usize;
        let mut epochs = 0usize;
        loop {
            let loss = match config.batch_size {
                None => problem.loss_and_gradient_on(&net, None, &mut grad),
                Some(_) => problem.loss(&net),
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    return Err(Error::Diverged {
                        halvings: MAX_HALVINGS,
                    });
                }
                lr *= 0.5;
                continue 'run;
            }
            losses.push(loss);
            if epochs == config.max_epochs || loss == 0.0 {
                break;
            }
            if config.batch_size.is_none() && grad.iter().all(|g| *g == 0.0) {
                break;
            }
            if loss < best - PLATEAU_TOL {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
            match config.batch_size {
                None => step(&mut net, &grad, lr, &config.optimizer, &mut adam),
                Some(bs) => {
                    order.shuffle(&mut shuffle_rng);
                    for chunk in order.chunks(bs) {
                        problem.loss_and_gradient_on(&net, Some(chunk), &mut grad);
                        step(&mut net, &grad, lr, &config.optimizer, &mut adam);
                    }
                    grad.clear();
                }
            }
            epochs += 1;
            if constraints.is_some() && epochs % config.project_every == 0 {
                net = project(&net);
            }
        }
        if constraints.is_some() && epochs % config.project_every != 0 {
            net = project(&net);
            let l = problem.loss(&net);
            *losses.last_mut().expect("at least one loss") = l;
        }
        let final_loss = *losses.last().expect("at least one loss");
        return Ok((
            net,
            FitTrace {
                losses,
                final_loss,
                restart_index: 0,
                epochs_run: epochs,
            },
        ));
    }
}

fn step(net: &mut ReluNetwork, grad: &[f64], lr: f64, opt: &Optimizer, adam: &mut AdamState) {
    match *opt {
        Optimizer::GradientDescent => {
            for (p, g) in net.params_mut().iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            for (((p, g), m), v) in net
                .params_mut()
                .iter_mut()
                .zip(grad)
                .zip(&mut adam.m)
                .zip(&mut adam.v)
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

/// Best of `config.restarts` runs from independent random starts over the
/// class `spec`; constrained when `spec` has a finite budget.
pub fn multi_restart_fit(
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

pub fn multi_restart_fit_problem(
    spec: &ReluNetworkSpec,
    problem: &Problem<'_>,
    config: &FitConfig,
    init: InitScheme,
) -> Result<(ReluNetwork, FitTrace)> {
    config.validate()?;
    let constraints = spec.is_constrained().then_some(spec);
    let mut best: Option<(ReluNetwork, FitTrace)> = None;
    for r in 0..config.restarts {
        let run_seed = seed::derive(config.seed, r as u64);
        let start = init_network(spec, init, run_seed)?;
        let cfg = FitConfig {
            seed: run_seed,
            ..*config
        };
        let (net, mut trace) = fit_problem(&start, problem, &cfg, constraints)?;
        trace.restart_index = r;
        // strict comparison keeps the lowest index on ties
        if best
            .as_ref()
            .is_none_or(|(_, t)| trace.final_loss < t.final_loss)
        {
            best = Some((net, trace));
        }
    }
    Ok(best.expect("restarts >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{scalar_fn, Map};
    use crate::network::check_constraints;
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_net(w: f64, b: f64) -> ReluNetwork {
        ReluNetwork::from_params(ReluNetworkSpec::unconstrained(1, 1, 1, 1), vec![w, b]).unwrap()
    }

    fn random_problem(
        h: usize,
        w: usize,
        d: usize,
        n: usize,
        seed: u64,
    ) -> (ReluNetwork, Matrix, Vec<f64>) {
        let spec = ReluNetworkSpec::unconstrained(h, w, d, 1);
        let mut net = init_network(&spec, InitScheme::UniformScaled, seed).unwrap();
        let mut rng = crate::seed::rng(seed ^ 0xABCD);
        for p in net.params_mut() {
            *p += rng.random_range(-0.2..0.2);
        }
        let x: Vec<f64> = (0..n * d).map(|_| rng.random()).collect();
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (net, Matrix::from_vec(n, d, x), y)
    }

    /// Least-squares line through `(x, y)` by the normal equations.
    fn normal_equations(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        (slope, (sy - slope * sx) / n)
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        let (net, x, _) = random_problem(3, 5, 2, 16, 1);
        let y: Vec<f64> = x.iter_rows().map(|r| net.eval(r)[0]).collect();
        let (l, g) = loss_and_gradient(&net, &x, &y).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
        let fd = finite_diff_gradient(&net, &x, &y, 1e-5).unwrap();
        assert!(fd.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn scalar_linear_closed_form() {
        // f(x) = w x with data (1, 2) at w = 1: loss (w - 2)^2 = 1, derivative 2(w - 2) = -2
        let net =
            ReluNetwork::from_params(ReluNetworkSpec::unconstrained(1, 1, 1, 1), vec![1.0, 0.0])
                .unwrap();
        let x = Matrix::from_rows(&[[1.0]]);
        let (l, g) = loss_and_gradient(&net, &x, &[2.0]).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(g[0], -2.0);
        let fd = finite_diff_gradient(&net, &x, &[2.0], 1e-4).unwrap();
        assert!((fd[0] + 2.0).abs() < 1e-6);
        assert!(finite_diff_gradient(&net, &x, &[2.0], 0.0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let net = linear_net(1.0, 0.0);
        let x = Matrix::from_rows(&[[1.0, 2.0]]);
        assert!(loss_and_gradient(&net, &x, &[1.0]).is_err());
        let x = Matrix::from_rows(&[[1.0]]);
        assert!(loss_and_gradient(&net, &x, &[1.0, 2.0]).is_err());
    }

    fn assert_grad_close(a: &[f64], b: &[f64]) {
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            let err = (x - y).abs();
            assert!(
                err <= 1e-8 || err <= 1e-5 * x.abs().max(y.abs()),
                "coordinate {k}: {x} vs {y}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for s in 0..20u64 {
            let mut rng = crate::seed::rng(s);
            let (h, w, d) = (
                rng.random_range(1..=4),
                rng.random_range(1..=8),
                rng.random_range(1..=3),
            );
            let (net, x, y) = random_problem(h, w, d, 8, 100 + s);
            let (_, g) = loss_and_gradient(&net, &x, &y).unwrap();
            let fd = finite_diff_gradient(&net, &x, &y, 1e-5).unwrap();
            assert_grad_close(&g, &fd);
        }
    }

    #[test]
    fn head_gradient_matches_finite_differences() {
        let head = crate::map::FnMap::new(2, 1, |z: &[f64], out: &mut Vec<f64>| {
            out.push(z[0] * z[0] + 3.0 * z[1])
        });
        struct Quad<M>(M);
        impl<M: Map> Map for Quad<M> {
            fn in_dim(&self) -> usize {
                2
            }
            fn out_dim(&self) -> usize {
                1
            }
            fn eval_into(&self, x: &[f64], out: &mut Vec<f64>) {
                self.0.eval_into(x, out)
            }
        }
        impl<M: Map> DiffMap for Quad<M> {
            fn vjp(&self, x: &[f64], c: &[f64], out: &mut Vec<f64>) {
                out.clear();
                out.extend_from_slice(&[2.0 * x[0] * c[0], 3.0 * c[0]]);
            }
        }
        let head = Quad(head);
        let spec = ReluNetworkSpec::unconstrained(2, 4, 2, 2);
        let net = init_network(&spec, InitScheme::UniformScaled, 5).unwrap();
        let (_, x, y) = random_problem(1, 1, 2, 12, 6);
        let p = Problem::new(&x, &y).with_head(&head);
        let mut g = Vec::new();
        p.loss_and_gradient_on(&net, None, &mut g);
        let fd = finite_diff_gradient_problem(&net, &p, 1e-5).unwrap();
        assert_grad_close(&g, &fd);
    }

    fn sample_from(x: Matrix, y: Vec<f64>) -> RegressionSample {
        RegressionSample {
            inputs: x,
            outputs: y,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn already_optimal_stops_immediately() {
        let (net, x, _) = random_problem(2, 4, 2, 32, 3);
        let y: Vec<f64> = x.iter_rows().map(|r| net.eval(r)[0]).collect();
        let (_, trace) =
            fit_least_squares(&net, &sample_from(x, y), &FitConfig::default(), None).unwrap();
        assert!(trace.final_loss <= 1e-10);
        assert!(trace.epochs_run <= 1);
    }

    fn line_data(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = crate::seed::rng(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y = x
            .iter()
            .map(|v| 0.7 * v - 0.2 + rng.random_range(-0.1..0.1))
            .collect();
        (x, y)
    }

    #[test]
    fn linear_fit_matches_normal_equations() {
        let (x, y) = line_data(200, 4);
        let (slope, icpt) = normal_equations(&x, &y);
        let cfg = FitConfig {
            learning_rate: 0.5,
            max_epochs: 20_000,
            patience: 500,
            ..FitConfig::default()
        };
        let s = sample_from(Matrix::from_vec(200, 1, x), y);
        let (net, _) = fit_least_squares(&linear_net(0.0, 0.0), &s, &cfg, None).unwrap();
        assert!((net.params()[0] - slope).abs() < 1e-4 && (net.params()[1] - icpt).abs() < 1e-4);

        let spec = ReluNetworkSpec::unconstrained(1, 1, 1, 1);
        let multi = FitConfig { restarts: 4, ..cfg };
        let (best, _) = multi_restart_fit(&spec, &s, &multi).unwrap();
        for r in 0..4 {
            let start = init_network(
                &spec,
                InitScheme::UniformScaled,
                seed::derive(multi.seed, r),
            )
            .unwrap();
            let (n, _) = fit_least_squares(&start, &s, &cfg, None).unwrap();
            assert!((n.params()[0] - slope).abs() < 1e-4 && (n.params()[1] - icpt).abs() < 1e-4);
        }
        assert!((best.params()[0] - slope).abs() < 1e-4);
    }

    #[test]
    fn fits_are_deterministic() {
        let (net, x, y) = random_problem(3, 6, 2, 64, 9);
        let s = sample_from(x, y);
        let cfg = FitConfig {
            max_epochs: 200,
            batch_size: Some(16),
            ..FitConfig::default()
        };
        let a = fit_least_squares(&net, &s, &cfg, None).unwrap();
        let b = fit_least_squares(&net, &s, &cfg, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn restarts_select_the_minimum() {
        let (_, x, y) = random_problem(1, 1, 2, 64, 10);
        let s = sample_from(x, y);
        let spec = ReluNetworkSpec::unconstrained(3, 6, 2, 1);
        let cfg = FitConfig {
            max_epochs: 150,
            ..FitConfig::default()
        };
        let (_, one) = multi_restart_fit(&spec, &s, &cfg).unwrap();
        let (_, single) = fit_least_squares(
            &init_network(&spec, InitScheme::UniformScaled, seed::derive(cfg.seed, 0)).unwrap(),
            &s,
            &FitConfig {
                seed: seed::derive(cfg.seed, 0),
                ..cfg
            },
            None,
        )
        .unwrap();
        assert_eq!(one.final_loss, single.final_loss);
        let (_, five) = multi_restart_fit(&spec, &s, &FitConfig { restarts: 5, ..cfg }).unwrap();
        assert!(five.final_loss <= one.final_loss);
    }

    #[test]
    fn constrained_fit_is_feasible() {
        let (_, x, y) = random_problem(1, 1, 2, 64, 11);
        let s = sample_from(x, y);
        let spec = ReluNetworkSpec::new(3, 5, 2, 1, 2.0, 0.5);
        let cfg = FitConfig {
            max_epochs: 100,
            project_every: 7,
            restarts: 2,
            ..FitConfig::default()
        };
        let (net, trace) = multi_restart_fit(&spec, &s, &cfg).unwrap();
        assert!(check_constraints(&net).feasible());
        assert_eq!(trace.final_loss, Problem::from_sample(&s).loss(&net));
    }

    #[test]
    fn divergence_is_reported() {
        let x = Matrix::from_rows(&[[1.0], [0.5]]);
        let y = vec![1e200, -1e200];
        let cfg = FitConfig {
            learning_rate: 1e10,
            ..FitConfig::default()
        };
        let r = fit_least_squares(&linear_net(0.0, 0.0), &sample_from(x, y), &cfg, None);
        assert_eq!(
            r.unwrap_err(),
            Error::Diverged {
                halvings: MAX_HALVINGS
            }
        );
    }

    #[test]
    fn adam_reduces_loss() {
        let target = scalar_fn(1, |x| (6.0 * x[0]).sin());
        let x = Matrix::from_vec(64, 1, (0..64).map(|i| i as f64 / 63.0).collect());
        let y: Vec<f64> = x.iter_rows().map(|r| target.eval(r)[0]).collect();
        let s = sample_from(x, y);
        let spec = ReluNetworkSpec::unconstrained(2, 16, 1, 1);
        let cfg = FitConfig {
            learning_rate: 0.01,
            max_epochs: 500,
            optimizer: Optimizer::adam(),
            ..FitConfig::default()
        };
        let (_, t) = multi_restart_fit(&spec, &s, &cfg).unwrap();
        assert!(t.final_loss < 0.5 * t.losses[0]);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        assert!(FitConfig {
            patience: 3000,
            ..FitConfig::default()
        }
        .validate()
        .is_err());
        assert!(FitConfig {
            learning_rate: 0.0,
            ..FitConfig::default()
        }
        .validate()
        .is_err());
        assert!(FitConfig {
            batch_size: Some(0),
            ..FitConfig::default()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn small_step_descent_is_monotone(seed in any::<u64>(), h in 1usize..=3, w in 1usize..=6) {
            let (net, x, y) = random_problem(h, w, 2, 32, seed);
            let s = sample_from(x, y);
            let cfg = FitConfig { learning_rate: 1e-3, max_epochs: 60, patience: 60, ..FitConfig::default() };
            let (_, t) = fit_least_squares(&net, &s, &cfg, None).unwrap();
            for pair in t.losses.windows(2) {
                prop_assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
            }
        }

        #[test]
        fn fitted_parameters_are_seed_deterministic(seed in any::<u64>()) {
            let (_, x, y) = random_problem(1, 1, 2, 24, seed);
            let s = sample_from(x, y);
            let spec = ReluNetworkSpec::new(2, 4, 2, 1, 3.0, 1.0);
            let cfg = FitConfig { max_epochs: 40, patience: 40, restarts: 2, seed, ..FitConfig::default() };
            let (a, _) = multi_restart_fit(&spec, &s, &cfg).unwrap();
            let (b, _) = multi_restart_fit(&spec, &s, &cfg).unwrap();
            let bits = |n: &ReluNetwork| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a), bits(&b));
        }
    }
}

//! One function per CLI command. Each writes into an [`OutputDir`] and
//! finishes with a manifest.

use crate::config::{ExperimentConfig, ModelKind, PretrainMode, Resolved, Task};
use crate::error::{CliError, CoreContext};
use crate::exec::PoolExecutor;
use crate::formats::{pretrained_files, serialize_target};
use crate::manifest::{OutputDir, RunManifest};
use crate::plots::svg_for_csv;
use crate::tables::{caulking_csv, depth_csv, m_sweep_csv, rate_csv, trace_csv, CaulkingRow};
use caulk_core::caulking::{
    caulk_fit, excess_error, excess_error_by_definition, l2_error, make_classification_sample,
    pretrain_empirical, pretrain_oracle, scratch_fit, PluginClassifier, PretrainedModel,
};
use caulk_core::exec::Executor;
use caulk_core::fitting::{FitConfig, FitTrace};
use caulk_core::function_spaces::{make_composition, make_regression_sample, TargetFunction};
use caulk_core::network::{serialize_network, ReluNetworkSpec};
use caulk_core::rates::{
    composition_exponents, fit_power_law, run_depth_sweep, run_m_sweep, run_rate_sweep, DepthSetup,
    MSweepSetup, ModelBuilder, RateSetup, RateTable, SourceSize,
};
use caulk_core::seed::{derive_label, derive_path};
use caulk_core::stats::spearman;
use caulk_core::verify::{
    bound_consistency_report, check_composition_covering, check_instance_approximation_with,
    check_instance_covering_with, default_delta_grid, generate_instance, halton_probes,
    mc_maximal_inequality, quadratic_search, ConsistencyInput, VerifyInstance,
};
use serde::Serialize;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenTarget,
    Pretrain,
    Caulk,
    Scratch,
    RateSweep,
    DepthSweep,
    MSweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenTarget => "gen-target",
            Command::Pretrain => "pretrain",
            Command::Caulk => "caulk",
            Command::Scratch => "scratch",
            Command::RateSweep => "rate-sweep",
            Command::DepthSweep => "depth-sweep",
            Command::MSweep => "m-sweep",
            Command::Verify => "verify",
        }
    }
}

/// Runs `cmd` with the config's `output_dir`, or `out` when given.
pub fn run(
    cmd: Command,
    resolved: &Resolved,
    out: Option<PathBuf>,
) -> Result<RunManifest, CliError> {
    let cfg = &resolved.config;
    let root = out.unwrap_or_else(|| cfg.output_dir.clone());
    let mut dir = OutputDir::create(&root, cmd.name(), &resolved.hash)?;
    let exec = PoolExecutor::from_env().map_err(|e| CliError::Runtime(e.to_string()))?;
    let failure = match cmd {
        Command::GenTarget => gen_target(cfg, &mut dir).map(|_| None),
        Command::Pretrain => pretrain(cfg, &mut dir).map(|_| None),
        Command::Caulk => fit_models(cfg, &mut dir, &exec, false).map(|_| None),
        Command::Scratch => fit_models(cfg, &mut dir, &exec, true).map(|_| None),
        Command::RateSweep => rate_sweep(cfg, &mut dir, &exec).map(|_| None),
        Command::DepthSweep => depth_sweep(cfg, &mut dir, &exec).map(|_| None),
        Command::MSweep => m_sweep(cfg, &mut dir, &exec).map(|_| None),
        Command::Verify => verify(cfg, &mut dir, &exec),
    }?;
    let manifest = dir.finish()?;
    match failure {
        None => Ok(manifest),
        Some((summary, path)) => Err(CliError::Verification {
            summary,
            counterexample: Some(path),
        }),
    }
}

fn target(cfg: &ExperimentConfig) -> Result<Arc<TargetFunction>, CliError> {
    let block = ExperimentConfig::require(&cfg.composition, "composition")?;
    let spec = block.to_spec()?;
    Ok(Arc::new(make_composition(&spec).context("composition")?))
}

fn fit_config(cfg: &ExperimentConfig) -> Result<FitConfig, CliError> {
    cfg.fit.to_core("fit")
}

fn build_pretrained(
    cfg: &ExperimentConfig,
    f: &Arc<TargetFunction>,
) -> Result<PretrainedModel, CliError> {
    let p = ExperimentConfig::require(&cfg.pretrain, "pretrain")?;
    let split = (p.split[0], p.split[1]);
    match p.mode {
        PretrainMode::Oracle => pretrain_oracle(f, split).context("pretrain.split"),
        PretrainMode::Empirical => {
            let m = p
                .m
                .ok_or_else(|| CliError::config("pretrain.m", "empirical mode needs `m`".into()))?;
            let arch = p.architecture.ok_or_else(|| {
                CliError::config(
                    "pretrain.architecture",
                    "empirical mode needs an architecture block".into(),
                )
            })?;
            let implied = [
                arch.extractor_maps + 1,
                arch.extractor_maps + arch.middle_maps,
            ];
            if p.split != implied {
                return Err(CliError::config(
                    "pretrain.split",
                    format!(
                        "empirical mode cuts the network after {} extractor and {} middle maps, so split must be {:?}",
                        arch.extractor_maps, arch.middle_maps, implied
                    ),
                ));
            }
            let fit = match &p.fit {
                Some(b) => b.to_core("pretrain.fit")?,
                None => fit_config(cfg)?,
            };
            let dist = crate::config::DistributionKind::Uniform.build(f.input_dim(), 0);
            pretrain_empirical(
                f,
                &dist,
                m,
                &arch.into(),
                p.noise_sigma,
                &fit,
                derive_label(cfg.master_seed, "pretrain"),
            )
            .context("pretrain")
        }
    }
}

fn gen_target(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let f = target(cfg)?;
    dir.write("target.txt", serialize_target(&f))?;
    #[derive(Serialize)]
    struct Echo {
        composition: crate::config::CompositionBlock,
    }
    let echo = Echo {
        composition: crate::config::CompositionBlock::from_spec(f.spec()),
    };
    let echo = toml::to_string(&echo).map_err(|e| CliError::Runtime(e.to_string()))?;
    dir.write("composition.toml", echo)?;
    Ok(())
}

fn write_pretrained(
    dir: &mut OutputDir,
    prefix: &str,
    pre: &PretrainedModel,
    f: &TargetFunction,
) -> Result<(), CliError> {
    let (record, files) = pretrained_files(pre, f);
    for (name, text) in files {
        dir.write(&format!("{prefix}{name}"), text)?;
    }
    dir.write_json(&format!("{prefix}pretrained.json"), &record)?;
    Ok(())
}

fn pretrain(cfg: &ExperimentConfig, dir: &mut OutputDir) -> Result<(), CliError> {
    let f = target(cfg)?;
    let pre = build_pretrained(cfg, &f)?;
    write_pretrained(dir, "", &pre, &f)
}

#[derive(Debug, Serialize)]
struct PluginRecord {
    model_id: String,
    n: usize,
    seed: u64,
    l2_estimate: f64,
    l2_stderr: f64,
    excess_identity: f64,
    excess_identity_stderr: f64,
    excess_definition: f64,
    excess_definition_stderr: f64,
    /// `2 sqrt(l2)`.
    bound: f64,
    /// Combined standard error of `excess - bound`.
    combined_stderr: f64,
    bound_holds: bool,
    estimators_agree: bool,
}

#[derive(Debug, Serialize)]
struct ModelsReport {
    config_hash: String,
    model_kind: String,
    task: Task,
    models: Vec<PluginRecord>,
    all_bounds_hold: bool,
    all_estimators_agree: bool,
}

struct FittedModel {
    row: CaulkingRow,
    plugin: PluginRecord,
    network: String,
    trace: FitTrace,
}

fn fit_models<E: Executor>(
    cfg: &ExperimentConfig,
    dir: &mut OutputDir,
    exec: &E,
    scratch: bool,
) -> Result<(), CliError> {
    let block = ExperimentConfig::require(&cfg.caulk, "caulk")?;
    if block.trials == 0 {
        return Err(CliError::config("caulk.trials", "must be positive".into()));
    }
    if block.n_grid.is_empty() || block.n_grid.contains(&0) {
        return Err(CliError::config(
            "caulk.n_grid",
            "needs positive sample sizes".into(),
        ));
    }
    let f = target(cfg)?;
    let fit = fit_config(cfg)?;
    let q = block.distribution.build(f.input_dim(), f.spec().seed);
    let kind = if scratch { "scratch" } else { "caulk" };
    let pre = if scratch {
        None
    } else {
        let p = Arc::new(build_pretrained(cfg, &f)?);
        write_pretrained(dir, "pretrained/", &p, &f)?;
        Some(p)
    };
    let adapter = if scratch {
        None
    } else {
        Some(ExperimentConfig::require(&cfg.adapter, "adapter")?.to_core())
    };
    let net_spec = if scratch {
        let s = ExperimentConfig::require(&cfg.scratch, "scratch")?;
        Some(ReluNetworkSpec::unconstrained(
            s.height,
            s.width,
            f.input_dim(),
            1,
        ))
    } else {
        None
    };
    let cells: Vec<(usize, usize)> = block
        .n_grid
        .iter()
        .flat_map(|&n| (0..block.trials).map(move |t| (n, t)))
        .collect();
    let results = exec.run(cells.len(), |k| -> Result<FittedModel, CliError> {
        let (n, t) = cells[k];
        let cell = derive_path(cfg.master_seed, &[n as u64, t as u64]);
        let s_seed = derive_label(cell, "sample");
        let sample = match block.task {
            Task::Regression => {
                make_regression_sample(&f, &q, n, block.noise_sigma, s_seed).context("caulk")?
            }
            Task::Classification => make_classification_sample(&f, &q, n, s_seed)
                .context("caulk")?
                .to_regression(),
        };
        let fc = FitConfig {
            seed: derive_label(cell, "fit"),
            ..fit
        };
        let model_id = format!("{kind}-n{n}-t{t}");
        let mc = derive_label(cell, "mc");
        let ex = derive_label(cell, "excess");
        let (network, trace, l2, e1, e2) = match (&pre, &adapter, &net_spec) {
            (Some(p), Some(a), _) => {
                let (m, trace) = caulk_fit(p, a, &sample, &fc).context("caulk")?;
                let l2 = l2_error(&m, &f, &q, block.n_mc, mc).context("caulk.n_mc")?;
                let net = serialize_network(&m.adapter);
                let c = PluginClassifier::new(m);
                let e1 = excess_error(&c, &f, &q, block.n_mc, ex).context("caulk.n_mc")?;
                let e2 =
                    excess_error_by_definition(&c, &f, &q, block.n_mc, ex).context("caulk.n_mc")?;
                (net, trace, l2, e1, e2)
            }
            (_, _, Some(spec)) => {
                let (m, trace) = scratch_fit(spec, &sample, &fc).context("scratch")?;
                let l2 = l2_error(&m, &f, &q, block.n_mc, mc).context("caulk.n_mc")?;
                let net = serialize_network(&m);
                let c = PluginClassifier::new(m);
                let e1 = excess_error(&c, &f, &q, block.n_mc, ex).context("caulk.n_mc")?;
                let e2 =
                    excess_error_by_definition(&c, &f, &q, block.n_mc, ex).context("caulk.n_mc")?;
                (net, trace, l2, e1, e2)
            }
            _ => unreachable!("a model builder is always configured"),
        };
        let bound = 2.0 * l2.estimate.max(0.0).sqrt();
        let bound_se = if l2.estimate > 0.0 {
            l2.std_error / l2.estimate.sqrt()
        } else {
            0.0
        };
        let combined = (e1.std_error.powi(2) + bound_se.powi(2)).sqrt();
        let agree_se = (e1.std_error.powi(2) + e2.std_error.powi(2)).sqrt();
        Ok(FittedModel {
            row: CaulkingRow {
                model_id: model_id.clone(),
                n,
                seed: cell,
                l2_estimate: l2.estimate,
                l2_stderr: l2.std_error,
                excess_estimate: e1.estimate,
            },
            plugin: PluginRecord {
                model_id,
                n,
                seed: cell,
                l2_estimate: l2.estimate,
                l2_stderr: l2.std_error,
                excess_identity: e1.estimate,
                excess_identity_stderr: e1.std_error,
                excess_definition: e2.estimate,
                excess_definition_stderr: e2.std_error,
                bound,
                combined_stderr: combined,
                bound_holds: e1.estimate <= bound + 3.0 * combined,
                estimators_agree: (e1.estimate - e2.estimate).abs() <= 3.0 * agree_se,
            },
            network,
            trace,
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut plugins = Vec::with_capacity(results.len());
    for r in results {
        let m = r?;
        dir.write(&format!("models/{}.relunet", m.row.model_id), &m.network)?;
        dir.write(
            &format!("traces/{}.csv", m.row.model_id),
            trace_csv(&m.trace),
        )?;
        rows.push(m.row);
        plugins.push(m.plugin);
    }
    let csv = caulking_csv(&rows);
    dir.write("caulking.csv", &csv)?;
    dir.write("caulking.svg", svg_for_csv(&csv)?)?;
    let report = ModelsReport {
        config_hash: dir.config_hash().to_string(),
        model_kind: kind.to_string(),
        task: block.task,
        all_bounds_hold: plugins.iter().all(|p| p.bound_holds),
        all_estimators_agree: plugins.iter().all(|p| p.estimators_agree),
        models: plugins,
    };
    dir.write_json("plugin.json", &report)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ExponentReport {
    config_hash: String,
    model: String,
    /// Fitted slope of `ln(mean_error)` on `ln(n)`; absent below three grid points.
    exponent: Option<f64>,
    intercept: Option<f64>,
    r_squared: Option<f64>,
    /// `-γ` of the worst layer the model has to learn.
    theoretical: Option<f64>,
    alpha_convention: String,
    spearman: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ConsistencyJson {
    config_hash: String,
    /// What stands in for the unknown class statistics.
    proxies: &'static str,
    ns: Vec<usize>,
    c_hat: Vec<f64>,
    max_c_hat: f64,
    log_slope: Option<f64>,
    diverging: bool,
}

fn model_builder(
    cfg: &ExperimentConfig,
    f: &Arc<TargetFunction>,
    kind: ModelKind,
) -> Result<(ModelBuilder, Option<(usize, usize)>, usize), CliError> {
    Ok(match kind {
        ModelKind::Caulk => {
            let pre = build_pretrained(cfg, f)?;
            let adapter = ExperimentConfig::require(&cfg.adapter, "adapter")?.to_core();
            let split = pre.split;
            let params = adapter
                .network_spec(pre.adapter_in_dim(), pre.adapter_out_dim())
                .param_count();
            (
                ModelBuilder::Caulk {
                    pretrained: Arc::new(pre),
                    adapter,
                },
                Some(split),
                params,
            )
        }
        ModelKind::Scratch => {
            let s = ExperimentConfig::require(&cfg.scratch, "scratch")?;
            let network = ReluNetworkSpec::unconstrained(s.height, s.width, f.input_dim(), 1);
            let params = network.param_count();
            (
                ModelBuilder::Scratch { network },
                Some((1, f.depth())),
                params,
            )
        }
        ModelKind::Exact => (ModelBuilder::Exact, None, 0),
    })
}

fn write_rate_outputs(
    dir: &mut OutputDir,
    prefix: &str,
    table: &RateTable,
    theoretical: Option<f64>,
    convention: &str,
) -> Result<(), CliError> {
    let csv = rate_csv(table);
    dir.write(&format!("{prefix}rate.csv"), &csv)?;
    dir.write(&format!("{prefix}rate.svg"), svg_for_csv(&csv)?)?;
    let fit = fit_power_law(table).ok();
    let report = ExponentReport {
        config_hash: dir.config_hash().to_string(),
        model: table.model_kind.clone(),
        exponent: fit.as_ref().map(|f| f.exponent),
        intercept: fit.as_ref().map(|f| f.intercept),
        r_squared: fit.as_ref().map(|f| f.r_squared),
        theoretical,
        alpha_convention: convention.to_string(),
        spearman: (table.rows.len() >= 2).then(|| spearman(&table.ns(), &table.errors())),
    };
    dir.write_json(&format!("{prefix}exponent.json"), &report)?;
    Ok(())
}

fn rate_sweep<E: Executor>(
    cfg: &ExperimentConfig,
    dir: &mut OutputDir,
    exec: &E,
) -> Result<(), CliError> {
    let block = ExperimentConfig::require(&cfg.rates, "rates")?;
    let f = target(cfg)?;
    let (model, range, params) = model_builder(cfg, &f, block.model)?;
    let theoretical = match range {
        Some(r) => Some(
            -composition_exponents(&f.spec().smoothness(), r, block.alpha_convention.into())
                .context("rates")?
                .worst,
        ),
        None => None,
    };
    let setup = RateSetup {
        target: f.clone(),
        model,
        distribution: block.distribution.build(f.input_dim(), f.spec().seed),
        n_grid: block.n_grid.clone(),
        trials: block.trials,
        noise_sigma: block.noise_sigma,
        n_mc: block.n_mc,
        fit: fit_config(cfg)?,
    };
    let (mut table, _) = run_rate_sweep(&setup, cfg.master_seed, exec).context("rates")?;
    table.config_hash = dir.config_hash().to_string();
    let convention = format!("{:?}", block.alpha_convention).to_lowercase();
    write_rate_outputs(dir, "", &table, theoretical, &convention)?;
    let cells: Vec<ConsistencyInput> = table
        .rows
        .iter()
        .map(|r| ConsistencyInput {
            n: r.n,
            realized_mse: r.mean_error,
            approx_error: 0.0,
            log_cover: params as f64 * (r.n as f64).ln(),
            delta: 1.0 / r.n as f64,
            f_scale: 1.0,
            sigma: block.noise_sigma,
        })
        .collect();
    let report = bound_consistency_report(&cells).context("rates")?;
    dir.write_json(
        "consistency.json",
        &ConsistencyJson {
            config_hash: dir.config_hash().to_string(),
            proxies: "approximation error 0, log covering number P ln n with P trainable parameters, delta 1/n, F 1",
            ns: report.ns,
            c_hat: report.c_hat,
            max_c_hat: report.max_c_hat,
            log_slope: report.log_slope,
            diverging: report.diverging,
        },
    )?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DepthSummary {
    config_hash: String,
    seeds: Vec<DepthSeed>,
}

#[derive(Debug, Serialize)]
struct DepthSeed {
    seed: u64,
    table: String,
    min_depth: Vec<(String, usize)>,
}

fn depth_sweep<E: Executor>(
    cfg: &ExperimentConfig,
    dir: &mut OutputDir,
    exec: &E,
) -> Result<(), CliError> {
    let block = ExperimentConfig::require(&cfg.depth, "depth")?;
    if block.seeds == 0 {
        return Err(CliError::config("depth.seeds", "must be positive".into()));
    }
    let f = target(cfg)?;
    let variants = block
        .variants
        .iter()
        .map(|v| {
            pretrain_oracle(&f, (v.split[0], v.split[1]))
                .map(|p| (v.name.clone(), Arc::new(p)))
                .context("depth.variants")
        })
        .collect::<Result<Vec<_>, _>>()?;
    let setup = DepthSetup {
        target: f.clone(),
        variants,
        depths: block.depths.clone(),
        width: block.width,
        distribution: block.distribution.build(f.input_dim(), f.spec().seed),
        n: block.n,
        trials: block.trials,
        noise_sigma: block.noise_sigma,
        n_mc: block.n_mc,
        fit: fit_config(cfg)?,
    };
    let mut summary = DepthSummary {
        config_hash: dir.config_hash().to_string(),
        seeds: Vec::new(),
    };
    for k in 0..block.seeds {
        let seed = if block.seeds == 1 {
            cfg.master_seed
        } else {
            derive_path(cfg.master_seed, &[k as u64])
        };
        let table = run_depth_sweep(&setup, seed, exec).context("depth")?;
        let name = if block.seeds == 1 {
            "depth".to_string()
        } else {
            format!("depth_seed{k}")
        };
        let csv = depth_csv(&table);
        dir.write(&format!("{name}.csv"), &csv)?;
        dir.write(&format!("{name}.svg"), svg_for_csv(&csv)?)?;
        summary.seeds.push(DepthSeed {
            seed,
            table: format!("{name}.csv"),
            min_depth: table.min_depth.clone(),
        });
    }
    dir.write_json("depth_summary.json", &summary)?;
    Ok(())
}

fn m_sweep<E: Executor>(
    cfg: &ExperimentConfig,
    dir: &mut OutputDir,
    exec: &E,
) -> Result<(), CliError> {
    let block = ExperimentConfig::require(&cfg.m_sweep, "m_sweep")?;
    let f = target(cfg)?;
    let mut m_grid: Vec<SourceSize> = block
        .m_grid
        .iter()
        .map(|&m| SourceSize::Finite(m))
        .collect();
    if block.include_oracle {
        m_grid.push(SourceSize::Oracle);
    }
    let fit = fit_config(cfg)?;
    let setup = MSweepSetup {
        target: f.clone(),
        m_grid,
        n_grid: block.n_grid.clone(),
        trials: block.trials,
        source: crate::config::DistributionKind::Uniform.build(f.input_dim(), 0),
        distribution: block.distribution.build(f.input_dim(), f.spec().seed),
        split: (block.split[0], block.split[1]),
        architecture: block.architecture.into(),
        pretrain_noise: block.pretrain_noise,
        pretrain_fit: match &block.pretrain_fit {
            Some(b) => b.to_core("m_sweep.pretrain_fit")?,
            None => fit,
        },
        adapter: ExperimentConfig::require(&cfg.adapter, "adapter")?.to_core(),
        noise_sigma: block.noise_sigma,
        n_mc: block.n_mc,
        fit,
    };
    let rows = run_m_sweep(&setup, cfg.master_seed, exec).context("m_sweep")?;
    let csv = m_sweep_csv(&rows);
    dir.write("m_sweep.csv", &csv)?;
    dir.write("m_sweep.svg", svg_for_csv(&csv)?)?;
    for r in &rows {
        let mut table = r.table.clone();
        table.config_hash = dir.config_hash().to_string();
        write_rate_outputs(dir, &format!("m_{}/", r.m), &table, None, "min")?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct CoveringRecord {
    instance: String,
    index: usize,
    head: String,
    alpha: f64,
    c_alpha: f64,
    deltas: Vec<f64>,
    class_covering: Vec<usize>,
    adapter_radii: Vec<f64>,
    adapter_covering: Vec<usize>,
    holds: Vec<bool>,
    measured_constant: Option<f64>,
    error: Option<String>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct ApproximationRecord {
    instance: String,
    index: usize,
    ideal_in_class: bool,
    head: String,
    alpha: f64,
    c_alpha: f64,
    left: Option<f64>,
    left_std_error: Option<f64>,
    right: Option<f64>,
    best_member: Option<usize>,
    measured_constant: Option<f64>,
    error: Option<String>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct MaximalRecord {
    n: usize,
    sigma: f64,
    trials: usize,
    empirical: f64,
    std_error: f64,
    bound: f64,
    ratio: f64,
    holds: bool,
}

#[derive(Debug, Serialize)]
struct QuadraticRecord {
    triples: usize,
    grid_points: usize,
    points_checked: usize,
    premise_hits: usize,
    counterexamples: usize,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    config_hash: String,
    probative: Vec<(String, bool)>,
    /// Greedy-vs-greedy comparisons on classes above the exhaustive cap; never affect the exit code.
    smoke: Vec<(String, bool)>,
    chi_square_mean_check: Option<bool>,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct Counterexample {
    check: String,
    instance_seed: u64,
    index: usize,
    ideal_in_class: bool,
    description: String,
    head: String,
    c_alpha: f64,
    detail: String,
    class: Vec<String>,
}

fn counterexample(
    check: &str,
    seed: u64,
    index: usize,
    inst: &VerifyInstance,
    c_alpha: f64,
    detail: String,
) -> Counterexample {
    Counterexample {
        check: check.to_string(),
        instance_seed: seed,
        index,
        ideal_in_class: inst.ideal_in_class,
        description: inst.description.clone(),
        head: inst.head.name().to_string(),
        c_alpha,
        detail,
        class: inst.class.iter().map(serialize_network).collect(),
    }
}

type Failure = Option<(String, PathBuf)>;

fn verify<E: Executor>(
    cfg: &ExperimentConfig,
    dir: &mut OutputDir,
    exec: &E,
) -> Result<Failure, CliError> {
    let default = crate::config::VerifyBlock::default();
    let block = cfg.verify.as_ref().unwrap_or(&default);
    let maximal_cells = block.maximal_ns.len() * block.maximal_sigmas.len();
    if block.instances + block.outside_instances == 0
        && maximal_cells == 0
        && block.quadratic_triples == 0
    {
        return Err(CliError::config(
            "verify",
            "the verification suite is empty".into(),
        ));
    }
    if !(block.c_alpha_scale > 0.0 && block.c_alpha_scale.is_finite()) {
        return Err(CliError::config(
            "verify.c_alpha_scale",
            "must be a positive real".into(),
        ));
    }
    let inst_seed = derive_label(cfg.master_seed, "instances");
    let check_seed = derive_label(cfg.master_seed, "checks");
    let mut counterexamples: Vec<Counterexample> = Vec::new();
    let mut summary = VerifySummary {
        config_hash: dir.config_hash().to_string(),
        probative: Vec::new(),
        smoke: Vec::new(),
        chi_square_mean_check: None,
        passed: true,
    };

    if block.instances > 0 {
        let results = exec.run(block.instances, |k| -> Result<_, CliError> {
            let inst = generate_instance(inst_seed, k, true).context("verify")?;
            let (alpha, c) = inst.head.holder();
            let c = c * block.c_alpha_scale;
            let res = check_instance_covering_with(&inst, c, derive_path(check_seed, &[k as u64]));
            Ok((inst, alpha, c, res))
        });
        let mut records = Vec::new();
        for (k, r) in results.into_iter().enumerate() {
            let (inst, alpha, c, res) = r?;
            let rec = match res {
                Ok(chk) => {
                    let passed = chk.all_hold();
                    if !passed {
                        counterexamples.push(counterexample(
                            "covering",
                            inst_seed,
                            k,
                            &inst,
                            c,
                            format!("{} violated deltas", chk.violations()),
                        ));
                    }
                    CoveringRecord {
                        instance: inst.description.clone(),
                        index: k,
                        head: inst.head.name().into(),
                        alpha,
                        c_alpha: c,
                        deltas: chk.deltas,
                        class_covering: chk.class_covering,
                        adapter_radii: chk.adapter_radii,
                        adapter_covering: chk.adapter_covering,
                        holds: chk.holds,
                        measured_constant: Some(chk.measured_constant),
                        error: None,
                        passed,
                    }
                }
                Err(e) => {
                    counterexamples.push(counterexample(
                        "covering",
                        inst_seed,
                        k,
                        &inst,
                        c,
                        e.to_string(),
                    ));
                    CoveringRecord {
                        instance: inst.description.clone(),
                        index: k,
                        head: inst.head.name().into(),
                        alpha,
                        c_alpha: c,
                        deltas: default_delta_grid(),
                        class_covering: Vec::new(),
                        adapter_radii: Vec::new(),
                        adapter_covering: Vec::new(),
                        holds: Vec::new(),
                        measured_constant: match e {
                            caulk_core::Error::HolderPrecondition { measured, .. } => {
                                Some(measured)
                            }
                            _ => None,
                        },
                        error: Some(e.to_string()),
                        passed: false,
                    }
                }
            };
            records.push(rec);
        }
        let ok = records.iter().all(|r| r.passed);
        summary.probative.push(("covering".into(), ok));
        dir.write_json("covering.json", &records)?;
    }

    if block.instances + block.outside_instances > 0 {
        let jobs: Vec<(usize, bool)> = (0..block.instances)
            .map(|k| (k, true))
            .chain((0..block.outside_instances).map(|k| (k, false)))
            .collect();
        let results = exec.run(jobs.len(), |j| -> Result<_, CliError> {
            let (k, inside) = jobs[j];
            let inst = generate_instance(inst_seed, k, inside).context("verify")?;
            let (alpha, c) = inst.head.holder();
            let c = c * block.c_alpha_scale;
            let res = check_instance_approximation_with(
                &inst,
                c,
                block.n_mc,
                derive_path(check_seed, &[k as u64, inside as u64, 1]),
            );
            Ok((k, inst, alpha, c, res))
        });
        let mut records = Vec::new();
        for r in results {
            let (k, inst, alpha, c, res) = r?;
            let mut rec = ApproximationRecord {
                instance: inst.description.clone(),
                index: k,
                ideal_in_class: inst.ideal_in_class,
                head: inst.head.name().into(),
                alpha,
                c_alpha: c,
                left: None,
                left_std_error: None,
                right: None,
                best_member: None,
                measured_constant: None,
                error: None,
                passed: false,
            };
            match res {
                Ok(chk) => {
                    rec.left = Some(chk.left);
                    rec.left_std_error = Some(chk.left_std_error);
                    rec.right = Some(chk.right);
                    rec.best_member = Some(chk.best_member);
                    rec.measured_constant = Some(chk.measured_constant);
                    rec.passed = chk.holds;
                    if !chk.holds {
                        counterexamples.push(counterexample(
                            "approximation",
                            inst_seed,
                            k,
                            &inst,
                            c,
                            format!(
                                "left {} (se {}) exceeds right {}",
                                chk.left, chk.left_std_error, chk.right
                            ),
                        ));
                    }
                }
                Err(e) => {
                    if let caulk_core::Error::HolderPrecondition { measured, .. } = e {
                        rec.measured_constant = Some(measured);
                    }
                    rec.error = Some(e.to_string());
                    counterexamples.push(counterexample(
                        "approximation",
                        inst_seed,
                        k,
                        &inst,
                        c,
                        e.to_string(),
                    ));
                }
            }
            records.push(rec);
        }
        let ok = records.iter().all(|r| r.passed);
        summary.probative.push(("approximation".into(), ok));
        dir.write_json("approximation.json", &records)?;
    }

    if maximal_cells > 0 {
        let cells: Vec<(usize, f64)> = block
            .maximal_ns
            .iter()
            .flat_map(|&n| block.maximal_sigmas.iter().map(move |&s| (n, s)))
            .collect();
        let maximal_seed = derive_label(cfg.master_seed, "maximal");
        let results = exec.run(cells.len(), |j| {
            let (n, s) = cells[j];
            mc_maximal_inequality(
                n,
                s,
                1.0,
                block.maximal_trials,
                derive_path(maximal_seed, &[j as u64]),
            )
            .context("verify.maximal_trials")
        });
        let mut records = Vec::new();
        for r in results {
            let m = r?;
            if m.n == 1 && m.sigma == 1.0 {
                summary.chi_square_mean_check =
                    Some((m.empirical - 1.0).abs() <= 3.0 * m.std_error);
            }
            records.push(MaximalRecord {
                n: m.n,
                sigma: m.sigma,
                trials: block.maximal_trials,
                empirical: m.empirical,
                std_error: m.std_error,
                bound: m.bound,
                ratio: if m.empirical > 0.0 {
                    m.bound / m.empirical
                } else {
                    f64::INFINITY
                },
                holds: m.holds,
            });
        }
        let ok = records.iter().all(|r| r.holds);
        summary.probative.push(("maximal".into(), ok));
        dir.write_json("maximal.json", &records)?;
    }

    if block.quadratic_triples > 0 {
        let q = quadratic_search(
            block.quadratic_triples,
            block.quadratic_grid_points,
            derive_label(cfg.master_seed, "quadratic"),
        )
        .context("verify.quadratic_grid_points")?;
        let rec = QuadraticRecord {
            triples: q.triples,
            grid_points: block.quadratic_grid_points,
            points_checked: q.points_checked,
            premise_hits: q.premise_hits,
            counterexamples: q.counterexamples,
            passed: q.counterexamples == 0,
        };
        summary.probative.push(("quadratic".into(), rec.passed));
        dir.write_json("quadratic.json", &rec)?;
    }

    if block.smoke {
        let spec = ReluNetworkSpec::new(2, 2, 1, 1, 3.0, 1.0);
        let full = caulk_core::network::enumerate_grid_class(&spec, 1.0, 4096).context("verify")?;
        let nu = halton_probes(1, 128, 0.0, 1.0);
        let extra = halton_probes(1, 128, -1.0, 2.0);
        for head in caulk_core::verify::AnalyticHead::ALL {
            let (alpha, c) = head.holder();
            let extractor = caulk_core::map::Identity(1);
            let res = check_composition_covering(
                &full.members,
                &head.as_map(),
                &extractor,
                alpha,
                c,
                &default_delta_grid(),
                &nu,
                Some(&extra),
                derive_label(cfg.master_seed, "smoke"),
            );
            let ok = res.map(|r| r.all_hold()).unwrap_or(false);
            summary.smoke.push((
                format!(
                    "greedy covering, |G| = {}, head {}",
                    full.members.len(),
                    head.name()
                ),
                ok,
            ));
        }
    }

    summary.passed = summary.probative.iter().all(|(_, ok)| *ok)
        && summary.chi_square_mean_check.unwrap_or(true);
    let passed = summary.passed;
    let failed: Vec<String> = summary
        .probative
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n.clone())
        .chain(
            (summary.chi_square_mean_check == Some(false)).then(|| "chi-square mean".to_string()),
        )
        .collect();
    dir.write_json("summary.json", &summary)?;
    if passed {
        return Ok(None);
    }
    let path = dir.write_json("counterexample.json", &counterexamples)?;
    Ok(Some((
        format!("failed checks: {}", failed.join(", ")),
        path,
    )))
}

use super::{fit_power_law, ExponentFit, RateRow, RateTable};
use crate::caulking::{
    caulk_fit, l2_error, pretrain_empirical, pretrain_oracle, scratch_fit, AdapterSpec,
    EmpiricalArchitecture, PretrainedModel,
};
use crate::error::{invalid, Result};
use crate::exec::Executor;
use crate::fitting::FitConfig;
use crate::function_spaces::{make_regression_sample, CovariateDistribution, TargetFunction};
use crate::network::ReluNetworkSpec;
use crate::seed::{derive_label, derive_path};
use crate::stats::mean_estimate;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

/// What each sweep cell fits to its target sample.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelBuilder {
    Caulk {
        pretrained: Arc<PretrainedModel>,
        adapter: AdapterSpec,
    },
    Scratch {
        network: ReluNetworkSpec,
    },
    /// `f*` itself, with no fitting.
    Exact,
}

impl ModelBuilder {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelBuilder::Caulk { .. } => "caulk",
            ModelBuilder::Scratch { .. } => "scratch",
            ModelBuilder::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateSetup {
    pub target: Arc<TargetFunction>,
    pub model: ModelBuilder,
    /// `Q_X`, used both for target samples and for the L2 error.
    pub distribution: CovariateDistribution,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub noise_sigma: f64,
    pub n_mc: usize,
    pub fit: FitConfig,
}

/// Outcome of one `(n, trial)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub n: usize,
    pub trial: usize,
    pub l2_error: f64,
    pub l2_std_error: f64,
    pub train_loss: f64,
}

fn check_grid(name: &'static str, grid: &[usize]) -> Result<()> {
    if grid.is_empty() || grid[0] == 0 {
        return Err(invalid(name, "needs at least one positive entry"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(name, "must be strictly increasing"));
    }
    Ok(())
}

/// Seeds shared by every model evaluated on the `(n, trial)` cell, so
/// different builders see identical samples.
fn cell_seeds(seed: u64, n: usize, trial: usize) -> (u64, u64, u64) {
    let cell = derive_path(seed, &[n as u64, trial as u64]);
    (
        derive_label(cell, "sample"),
        derive_label(cell, "fit"),
        derive_label(cell, "mc"),
    )
}

fn run_cell(setup: &RateSetup, n: usize, trial: usize, seed: u64) -> Result<TrialResult> {
    let (s_seed, f_seed, mc_seed) = cell_seeds(seed, n, trial);
    let sample = make_regression_sample(
        &setup.target,
        &setup.distribution,
        n,
        setup.noise_sigma,
        s_seed,
    )?;
    let fit = FitConfig {
        seed: f_seed,
        ..setup.fit
    };
    let (err, train_loss) = match &setup.model {
        ModelBuilder::Caulk {
            pretrained,
            adapter,
        } => {
            let (model, trace) = caulk_fit(pretrained, adapter, &sample, &fit)?;
            (
                l2_error(
                    &model,
                    &setup.target,
                    &setup.distribution,
                    setup.n_mc,
                    mc_seed,
                )?,
                trace.final_loss,
            )
        }
        ModelBuilder::Scratch { network } => {
            let (net, trace) = scratch_fit(network, &sample, &fit)?;
            (
                l2_error(
                    &net,
                    &setup.target,
                    &setup.distribution,
                    setup.n_mc,
                    mc_seed,
                )?,
                trace.final_loss,
            )
        }
        ModelBuilder::Exact => {
            let e = l2_error(
                &*setup.target,
                &setup.target,
                &setup.distribution,
                setup.n_mc,
                mc_seed,
            )?;
            let res: f64 = sample
                .inputs
                .iter_rows()
                .zip(&sample.outputs)
                .map(|(x, y)| {
                    let d = setup.target.eval_target(x).unwrap_or(f64::NAN) - y;
                    d * d
                })
                .sum();
            (e, res / n as f64)
        }
    };
    Ok(TrialResult {
        n,
        trial,
        l2_error: err.estimate,
        l2_std_error: err.std_error,
        train_loss,
    })
}

/// Runs every `(n, trial)` cell of `setup` and returns them sorted by `(n, trial)`.
pub fn run_trials<E: Executor>(setup: &RateSetup, seed: u64, exec: &E) -> Result<Vec<TrialResult>> {
    check_grid("n_grid", &setup.n_grid)?;
    if setup.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let t = setup.trials;
    let cells = exec.run(setup.n_grid.len() * t, |j| {
        run_cell(setup, setup.n_grid[j / t], j % t, seed)
    });
    cells.into_iter().collect()
}

fn aggregate(setup: &RateSetup, cells: &[TrialResult]) -> RateTable {
    let rows = setup
        .n_grid
        .iter()
        .map(|&n| {
            let errs: Vec<f64> = cells
                .iter()
                .filter(|c| c.n == n)
                .map(|c| c.l2_error)
                .collect();
            let losses: Vec<f64> = cells
                .iter()
                .filter(|c| c.n == n)
                .map(|c| c.train_loss)
                .collect();
            let e = mean_estimate(&errs);
            RateRow {
                n,
                trials: errs.len(),
                mean_error: e.mean,
                std_error: e.std_error,
                mean_train_loss: mean_estimate(&losses).mean,
            }
        })
        .collect();
    RateTable {
        rows,
        config_hash: String::new(),
        model_kind: setup.model.kind().to_string(),
    }
}

/// Mean L2 error over `trials` independent fits at each `n`, plus the
/// individual cells.
pub fn run_rate_sweep<E: Executor>(
    setup: &RateSetup,
    seed: u64,
    exec: &E,
) -> Result<(RateTable, Vec<TrialResult>)> {
    let cells = run_trials(setup, seed, exec)?;
    Ok((aggregate(setup, &cells), cells))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthSetup {
    pub target: Arc<TargetFunction>,
    pub variants: Vec<(String, Arc<PretrainedModel>)>,
    pub depths: Vec<usize>,
    pub width: usize,
    pub distribution: CovariateDistribution,
    pub n: usize,
    pub trials: usize,
    pub noise_sigma: f64,
    pub n_mc: usize,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthRow {
    pub variant: String,
    pub depth: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub is_min: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthTable {
    pub rows: Vec<DepthRow>,
    /// Per variant, the smallest depth whose error is within 5% of that
    /// variant's minimum.
    pub min_depth: Vec<(String, usize)>,
}

/// Relative slack used to pick the minimizing depth.
pub const DEPTH_TOLERANCE: f64 = 0.05;

/// Smallest depth whose mean error is within `DEPTH_TOLERANCE` of the best.
pub fn minimizing_depth(depths: &[usize], errors: &[f64]) -> usize {
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    depths
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e <= best * (1.0 + DEPTH_TOLERANCE))
        .map(|(&d, _)| d)
        .min()
        .unwrap_or(depths[0])
}

/// Caulks every variant with every adapter depth on shared target samples.
pub fn run_depth_sweep<E: Executor>(setup: &DepthSetup, seed: u64, exec: &E) -> Result<DepthTable> {
    if setup.depths.is_empty() {
        return Err(invalid("depths", "needs at least one depth"));
    }
    if setup.variants.is_empty() {
        return Err(invalid("variants", "needs at least one pretrained variant"));
    }
    if setup.trials == 0 || setup.n == 0 {
        return Err(invalid("trials", "trials and n must be positive"));
    }
    let (nv, nd, t) = (setup.variants.len(), setup.depths.len(), setup.trials);
    let cells = exec.run(nv * nd * t, |j| -> Result<f64> {
        let (v, rest) = (j / (nd * t), j % (nd * t));
        let (d, trial) = (rest / t, rest % t);
        let (s_seed, f_seed, mc_seed) = cell_seeds(seed, setup.n, trial);
        let sample = make_regression_sample(
            &setup.target,
            &setup.distribution,
            setup.n,
            setup.noise_sigma,
            s_seed,
        )?;
        let fit = FitConfig {
            seed: derive_path(f_seed, &[v as u64, setup.depths[d] as u64]),
            ..setup.fit
        };
        let adapter = AdapterSpec::new(setup.depths[d], setup.width);
        let (model, _) = caulk_fit(&setup.variants[v].1, &adapter, &sample, &fit)?;
        Ok(l2_error(
            &model,
            &setup.target,
            &setup.distribution,
            setup.n_mc,
            mc_seed,
        )?
        .estimate)
    });
    let cells: Vec<f64> = cells.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(nv * nd);
    let mut min_depth = Vec::with_capacity(nv);
    for (v, (name, _)) in setup.variants.iter().enumerate() {
        let stats: Vec<_> = (0..nd)
            .map(|d| mean_estimate(&cells[(v * nd + d) * t..(v * nd + d + 1) * t]))
            .collect();
        let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
        let best = minimizing_depth(&setup.depths, &means);
        for (d, s) in stats.iter().enumerate() {
            rows.push(DepthRow {
                variant: name.clone(),
                depth: setup.depths[d],
                mean_error: s.mean,
                std_error: s.std_error,
                is_min: setup.depths[d] == best,
            });
        }
        min_depth.push((name.clone(), best));
    }
    Ok(DepthTable { rows, min_depth })
}

/// Source sample size for pre-training; `Oracle` cuts `f*` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSize {
    Finite(usize),
    Oracle,
}

impl core::fmt::Display for SourceSize {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SourceSize::Finite(m) => write!(f, "{m}"),
            SourceSize::Oracle => f.write_str("oracle"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MSweepSetup {
    pub target: Arc<TargetFunction>,
    pub m_grid: Vec<SourceSize>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    /// Source distribution `P` for pre-training.
    pub source: CovariateDistribution,
    /// Target distribution `Q_X`.
    pub distribution: CovariateDistribution,
    /// Split used by the oracle sentinel.
    pub split: (usize, usize),
    pub architecture: EmpiricalArchitecture,
    pub pretrain_noise: f64,
    pub pretrain_fit: FitConfig,
    pub adapter: AdapterSpec,
    pub noise_sigma: f64,
    pub n_mc: usize,
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MSweepRow {
    pub m: SourceSize,
    pub fit: ExponentFit,
    pub table: RateTable,
}

/// For each source size: pre-train, run the rate sweep on shared target
/// samples, and fit the exponent.
pub fn run_m_sweep<E: Executor>(
    setup: &MSweepSetup,
    seed: u64,
    exec: &E,
) -> Result<Vec<MSweepRow>> {
    if setup.m_grid.is_empty() {
        return Err(invalid("m_grid", "needs at least one entry"));
    }
    let finite: Vec<usize> = setup
        .m_grid
        .iter()
        .filter_map(|m| match m {
            SourceSize::Finite(m) => Some(*m),
            SourceSize::Oracle => None,
        })
        .collect();
    let oracle_count = setup.m_grid.len() - finite.len();
    if finite.windows(2).any(|w| w[0] >= w[1])
        || oracle_count > 1
        || (oracle_count == 1 && setup.m_grid.last() != Some(&SourceSize::Oracle))
    {
        return Err(invalid(
            "m_grid",
            "must be strictly increasing, with the oracle sentinel last",
        ));
    }
    // one seed for every m: nested source samples and a common initialization
    let pretrain_seed = derive_label(seed, "pretrain");
    let pretrained = exec.run(setup.m_grid.len(), |k| -> Result<Arc<PretrainedModel>> {
        Ok(Arc::new(match setup.m_grid[k] {
            SourceSize::Oracle => pretrain_oracle(&setup.target, setup.split)?,
            SourceSize::Finite(m) => pretrain_empirical(
                &setup.target,
                &setup.source,
                m,
                &setup.architecture,
                setup.pretrain_noise,
                &setup.pretrain_fit,
                pretrain_seed,
            )?,
        }))
    });
    let mut rows = Vec::with_capacity(setup.m_grid.len());
    for (m, pre) in setup.m_grid.iter().zip(pretrained) {
        let rate = RateSetup {
            target: Arc::clone(&setup.target),
            model: ModelBuilder::Caulk {
                pretrained: pre?,
                adapter: setup.adapter,
            },
            distribution: setup.distribution.clone(),
            n_grid: setup.n_grid.clone(),
            trials: setup.trials,
            noise_sigma: setup.noise_sigma,
            n_mc: setup.n_mc,
            fit: setup.fit,
        };
        let (table, _) = run_rate_sweep(&rate, derive_label(seed, "rates"), exec)?;
        rows.push(MSweepRow {
            m: *m,
            fit: fit_power_law(&table)?,
            table,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::function_spaces::{
        make_composition, CompositionSpec, RoughnessMode, SmoothLayerSpec,
    };
    use alloc::vec;

    fn small_target() -> Arc<TargetFunction> {
        let spec = CompositionSpec::new(
            vec![
                SmoothLayerSpec::new(1, 1, 1, 1.0, RoughnessMode::Kink),
                SmoothLayerSpec::new(1, 1, 1, 2.0, RoughnessMode::Polynomial),
            ],
            5,
        );
        Arc::new(make_composition(&spec).unwrap())
    }

    fn quick_fit() -> FitConfig {
        FitConfig {
            max_epochs: 60,
            patience: 60,
            ..FitConfig::default()
        }
    }

    fn rate_setup(model: ModelBuilder, n_grid: Vec<usize>, trials: usize) -> RateSetup {
        RateSetup {
            target: small_target(),
            model,
            distribution: CovariateDistribution::uniform(1),
            n_grid,
            trials,
            noise_sigma: 0.1,
            n_mc: 200,
            fit: quick_fit(),
        }
    }

    #[test]
    fn single_cell_gives_one_row() {
        let (t, cells) = run_rate_sweep(
            &rate_setup(ModelBuilder::Exact, vec![32], 1),
            1,
            &Sequential,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(cells.len(), 1);
        assert_eq!(t.model_kind, "exact");
    }

    #[test]
    fn exact_model_has_zero_error() {
        let (t, _) = run_rate_sweep(
            &rate_setup(ModelBuilder::Exact, vec![16, 32, 64], 3),
            2,
            &Sequential,
        )
        .unwrap();
        assert!(t.rows.iter().all(|r| r.mean_error == 0.0 && r.trials == 3));
        assert!(t.rows.iter().all(|r| r.mean_train_loss > 0.0));
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(run_rate_sweep(
            &rate_setup(ModelBuilder::Exact, vec![32, 32], 1),
            1,
            &Sequential
        )
        .is_err());
        assert!(
            run_rate_sweep(&rate_setup(ModelBuilder::Exact, vec![], 1), 1, &Sequential).is_err()
        );
        assert!(
            run_rate_sweep(&rate_setup(ModelBuilder::Exact, vec![8], 0), 1, &Sequential).is_err()
        );
    }

    #[test]
    fn sweeps_are_deterministic() {
        let pre = Arc::new(pretrain_oracle(&small_target(), (2, 2)).unwrap());
        let model = ModelBuilder::Caulk {
            pretrained: pre,
            adapter: AdapterSpec::new(0, 1),
        };
        let s = rate_setup(model, vec![16, 32, 64], 2);
        assert_eq!(
            run_rate_sweep(&s, 9, &Sequential).unwrap(),
            run_rate_sweep(&s, 9, &Sequential).unwrap()
        );
        let scratch = rate_setup(
            ModelBuilder::Scratch {
                network: ReluNetworkSpec::unconstrained(2, 4, 1, 1),
            },
            vec![16, 32, 64],
            2,
        );
        let a = run_rate_sweep(&scratch, 9, &Sequential).unwrap();
        assert_eq!(a, run_rate_sweep(&scratch, 9, &Sequential).unwrap());
        assert_ne!(a, run_rate_sweep(&scratch, 10, &Sequential).unwrap());
    }

    #[test]
    fn minimizing_depth_uses_tolerance() {
        assert_eq!(minimizing_depth(&[0, 1, 2], &[1.03, 1.0, 0.99]), 0);
        assert_eq!(minimizing_depth(&[0, 1, 2], &[1.1, 1.0, 0.99]), 1);
        assert_eq!(minimizing_depth(&[3], &[0.5]), 3);
    }

    #[test]
    fn depth_sweep_shape() {
        let f = small_target();
        let pre = Arc::new(pretrain_oracle(&f, (2, 2)).unwrap());
        let setup = DepthSetup {
            target: Arc::clone(&f),
            variants: vec![("only".into(), pre)],
            depths: vec![1],
            width: 3,
            distribution: CovariateDistribution::uniform(1),
            n: 32,
            trials: 2,
            noise_sigma: 0.1,
            n_mc: 100,
            fit: quick_fit(),
        };
        let t = run_depth_sweep(&setup, 3, &Sequential).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].is_min);
        assert_eq!(t.min_depth, vec![("only".into(), 1)]);
        assert!(run_depth_sweep(
            &DepthSetup {
                depths: vec![],
                ..setup
            },
            3,
            &Sequential
        )
        .is_err());
    }

    fn m_setup(m_grid: Vec<SourceSize>) -> MSweepSetup {
        MSweepSetup {
            target: small_target(),
            m_grid,
            n_grid: vec![16, 32, 64],
            trials: 1,
            source: CovariateDistribution::uniform(1),
            distribution: CovariateDistribution::uniform(1),
            split: (2, 2),
            architecture: EmpiricalArchitecture {
                width: 3,
                extractor_maps: 1,
                middle_maps: 1,
                head_maps: 1,
            },
            pretrain_noise: 0.1,
            pretrain_fit: quick_fit(),
            adapter: AdapterSpec::new(0, 1),
            noise_sigma: 0.1,
            n_mc: 100,
            fit: quick_fit(),
        }
    }

    #[test]
    fn m_sweep_single_entry_matches_rate_sweep() {
        let s = m_setup(vec![SourceSize::Oracle]);
        let rows = run_m_sweep(&s, 4, &Sequential).unwrap();
        assert_eq!(rows.len(), 1);
        let rate = RateSetup {
            target: s.target.clone(),
            model: ModelBuilder::Caulk {
                pretrained: Arc::new(pretrain_oracle(&s.target, s.split).unwrap()),
                adapter: s.adapter,
            },
            distribution: s.distribution.clone(),
            n_grid: s.n_grid.clone(),
            trials: 1,
            noise_sigma: s.noise_sigma,
            n_mc: s.n_mc,
            fit: s.fit,
        };
        let (table, _) = run_rate_sweep(&rate, derive_label(4, "rates"), &Sequential).unwrap();
        assert_eq!(rows[0].table, table);
    }

    #[test]
    fn m_grid_validation() {
        let bad = [
            vec![SourceSize::Finite(64), SourceSize::Finite(32)],
            vec![SourceSize::Oracle, SourceSize::Finite(32)],
            vec![],
        ];
        for g in bad {
            assert!(run_m_sweep(&m_setup(g), 1, &Sequential).is_err());
        }
        let ok = run_m_sweep(
            &m_setup(vec![SourceSize::Finite(32), SourceSize::Oracle]),
            1,
            &Sequential,
        )
        .unwrap();
        assert_eq!(ok[0].m, SourceSize::Finite(32));
        assert_eq!(ok[1].m.to_string(), "oracle");
    }
}

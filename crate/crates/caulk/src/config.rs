//! Experiment configuration: TOML documents with `--set key=value` overrides.
//!
//! Every command reads the same [`ExperimentConfig`]; blocks a command does not
//! use are ignored. The config hash is the SHA-256 of the canonical JSON form
//! of the resolved config with `output_dir` cleared.

use crate::error::CliError;
use caulk_core::caulking::{AdapterSpec, EmpiricalArchitecture};
use caulk_core::fitting::{FitConfig, Optimizer};
use caulk_core::function_spaces::{
    CompositionSpec, CovariateDistribution, RoughnessMode, SmoothLayerSpec,
};
use caulk_core::rates::AlphaConvention;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub composition: Option<CompositionBlock>,
    #[serde(default)]
    pub fit: FitBlock,
    #[serde(default)]
    pub pretrain: Option<PretrainBlock>,
    #[serde(default)]
    pub adapter: Option<AdapterBlock>,
    #[serde(default)]
    pub scratch: Option<ScratchBlock>,
    #[serde(default)]
    pub rates: Option<RatesBlock>,
    #[serde(default)]
    pub depth: Option<DepthBlock>,
    #[serde(default)]
    pub m_sweep: Option<MSweepBlock>,
    #[serde(default)]
    pub caulk: Option<CaulkBlock>,
    #[serde(default)]
    pub verify: Option<VerifyBlock>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionBlock {
    pub seed: u64,
    pub layers: Vec<LayerBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBlock {
    pub in_dim: usize,
    pub out_dim: usize,
    pub active_vars: usize,
    pub beta: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Kink,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Gd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitBlock {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: Option<usize>,
    pub restarts: usize,
    pub patience: usize,
    pub project_every: usize,
}

impl Default for FitBlock {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            optimizer: OptimizerKind::Gd,
            learning_rate: d.learning_rate,
            max_epochs: d.max_epochs,
            batch_size: d.batch_size,
            restarts: d.restarts,
            patience: d.patience,
            project_every: d.project_every,
        }
    }
}

impl FitBlock {
    /// Core fit config; the seed is filled in per cell by the sweeps.
    pub fn to_core(&self, key: &str) -> Result<FitConfig, CliError> {
        let cfg = FitConfig {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            restarts: self.restarts,
            patience: self.patience,
            project_every: self.project_every,
            seed: 0,
            optimizer: match self.optimizer {
                OptimizerKind::Gd => Optimizer::GradientDescent,
                OptimizerKind::Adam => Optimizer::adam(),
            },
        };
        cfg.validate()
            .map_err(|e| CliError::config(key, e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PretrainMode {
    Oracle,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainBlock {
    pub mode: PretrainMode,
    /// `(i_e, i_h)`: the adapter replaces layers `i_e..=i_h`.
    pub split: [usize; 2],
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub architecture: Option<ArchitectureBlock>,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub fit: Option<FitBlock>,
}

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureBlock {
    pub width: usize,
    pub extractor_maps: usize,
    pub middle_maps: usize,
    pub head_maps: usize,
}

impl From<ArchitectureBlock> for EmpiricalArchitecture {
    fn from(a: ArchitectureBlock) -> Self {
        EmpiricalArchitecture {
            width: a.width,
            extractor_maps: a.extractor_maps,
            middle_maps: a.middle_maps,
            head_maps: a.head_maps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterBlock {
    pub depth: usize,
    pub width: usize,
    #[serde(default)]
    pub sparsity: Option<f64>,
    #[serde(default)]
    pub bound: Option<f64>,
}

impl AdapterBlock {
    pub fn to_core(&self) -> AdapterSpec {
        let constraints = match (self.sparsity, self.bound) {
            (None, None) => None,
            (s, b) => Some((s.unwrap_or(f64::INFINITY), b.unwrap_or(f64::INFINITY))),
        };
        AdapterSpec {
            depth: self.depth,
            width: self.width,
            constraints,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScratchBlock {
    pub height: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DistributionKind {
    #[default]
    Uniform,
    /// An affine warp drawn from the composition seed.
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Caulk,
    Scratch,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    #[default]
    Min,
    Max,
}

impl From<Convention> for AlphaConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Min => AlphaConvention::Min,
            Convention::Max => AlphaConvention::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesBlock {
    pub model: ModelKind,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub noise_sigma: f64,
    pub n_mc: usize,
    #[serde(default)]
    pub distribution: DistributionKind,
    #[serde(default)]
    pub alpha_convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantBlock {
    pub name: String,
    pub split: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthBlock {
    pub variants: Vec<VariantBlock>,
    pub depths: Vec<usize>,
    pub width: usize,
    pub n: usize,
    pub trials: usize,
    pub noise_sigma: f64,
    pub n_mc: usize,
    #[serde(default)]
    pub distribution: DistributionKind,
    /// Number of independent seeds; seed `k` is derived from `master_seed`.
    #[serde(default = "one")]
    pub seeds: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MSweepBlock {
    pub m_grid: Vec<usize>,
    #[serde(default = "yes")]
    pub include_oracle: bool,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub split: [usize; 2],
    pub architecture: ArchitectureBlock,
    pub pretrain_noise: f64,
    #[serde(default)]
    pub pretrain_fit: Option<FitBlock>,
    pub noise_sigma: f64,
    pub n_mc: usize,
    #[serde(default)]
    pub distribution: DistributionKind,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaulkBlock {
    #[serde(default)]
    pub task: Task,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
    pub n_mc: usize,
    #[serde(default)]
    pub distribution: DistributionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    /// Generated instances with the ideal adapter inside the class.
    pub instances: usize,
    /// Extra instances with the ideal adapter outside the class (approximation check only).
    pub outside_instances: usize,
    pub n_mc: usize,
    /// Multiplies every head's Hölder constant; values below 1 break the bound on purpose.
    pub c_alpha_scale: f64,
    pub maximal_ns: Vec<usize>,
    pub maximal_sigmas: Vec<f64>,
    pub maximal_trials: usize,
    pub quadratic_triples: usize,
    pub quadratic_grid_points: usize,
    /// Greedy covering comparisons on classes above the exhaustive cap.
    pub smoke: bool,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            instances: 10,
            outside_instances: 10,
            n_mc: 20_000,
            c_alpha_scale: 1.0,
            maximal_ns: vec![1, 10, 100, 1000],
            maximal_sigmas: vec![0.5, 1.0, 2.0],
            maximal_trials: 100_000,
            quadratic_triples: 10_000,
            quadratic_grid_points: 200,
            smoke: true,
        }
    }
}

/// A parsed config plus its hash.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub hash: String,
}

/// Loads `path`, applies overrides in order, then deserializes and hashes.
pub fn load(path: &Path, overrides: &[String]) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides)
}

pub fn parse(text: &str, overrides: &[String]) -> Result<Resolved, CliError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config("config", e.message().to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." {
                "config".to_string()
            } else {
                path
            };
            CliError::config(&key, e.into_inner().to_string())
        })?;
    let hash = config_hash(&config);
    Ok(Resolved { config, hash })
}

/// `a.b.c=value`; numeric segments index arrays. The value is read as a TOML
/// value and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::config(spec, "override must look like key=value".to_string()))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::config(key, "empty path segment".to_string()));
    }
    let mut root = toml::Value::Table(std::mem::take(table));
    let res = set_path(&mut root, &parts, parse_value(raw.trim()), key);
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    res
}

fn set_path(
    node: &mut toml::Value,
    parts: &[&str],
    value: toml::Value,
    key: &str,
) -> Result<(), CliError> {
    let (head, rest) = (parts[0], &parts[1..]);
    let slot = match node {
        toml::Value::Table(t) => {
            if rest.is_empty() {
                t.insert(head.to_string(), value);
                return Ok(());
            }
            t.entry(head.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        }
        toml::Value::Array(a) => {
            let i: usize = head
                .parse()
                .map_err(|_| CliError::config(key, format!("`{head}` is not an array index")))?;
            let len = a.len();
            let item = a.get_mut(i).ok_or_else(|| {
                CliError::config(key, format!("index {i} out of range (length {len})"))
            })?;
            if rest.is_empty() {
                *item = value;
                return Ok(());
            }
            item
        }
        _ => {
            return Err(CliError::config(
                key,
                format!("`{head}` sits below a scalar value"),
            ))
        }
    };
    set_path(slot, rest, value, key)
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output_dir = PathBuf::new();
    let json = serde_json::to_string(&c).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl CompositionBlock {
    pub fn to_spec(&self) -> Result<CompositionSpec, CliError> {
        let spec = CompositionSpec::new(
            self.layers
                .iter()
                .map(|l| {
                    SmoothLayerSpec::new(
                        l.in_dim,
                        l.out_dim,
                        l.active_vars,
                        l.beta,
                        match l.mode {
                            Mode::Kink => RoughnessMode::Kink,
                            Mode::Polynomial => RoughnessMode::Polynomial,
                        },
                    )
                })
                .collect(),
            self.seed,
        );
        spec.validate()
            .map_err(|e| CliError::config("composition.layers", e.to_string()))?;
        Ok(spec)
    }

    pub fn from_spec(spec: &CompositionSpec) -> Self {
        Self {
            seed: spec.seed,
            layers: spec
                .layers
                .iter()
                .map(|l| LayerBlock {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    active_vars: l.active_vars,
                    beta: l.beta,
                    mode: match l.mode {
                        RoughnessMode::Kink => Mode::Kink,
                        RoughnessMode::Polynomial => Mode::Polynomial,
                    },
                })
                .collect(),
        }
    }
}

impl DistributionKind {
    pub fn build(self, dim: usize, composition_seed: u64) -> CovariateDistribution {
        match self {
            DistributionKind::Uniform => CovariateDistribution::uniform(dim),
            DistributionKind::Shifted => CovariateDistribution::default_shift(
                dim,
                caulk_core::seed::derive_label(composition_seed, "shift"),
            ),
        }
    }
}

impl ExperimentConfig {
    pub fn require<'a, T>(block: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
        block
            .as_ref()
            .ok_or_else(|| CliError::config(key, "required block is missing".to_string()))
    }
}

//! The thirteen acceptance criteria. Each prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use caulk::commands::{run, Command};
use caulk::config::load;
use caulk::core::fitting::{finite_diff_gradient, loss_and_gradient};
use caulk::core::function_spaces::{sample_covariates, CovariateDistribution};
use caulk::core::network::{init_network, InitScheme, ReluNetworkSpec};
use caulk::core::rates::{
    classification_exponent, composition_exponents, corollary_exponent, fit_power_law,
    theoretical_exponent, AlphaConvention, RateRow, RateTable,
};
use caulk::core::stats::spearman;
use caulk::tables::Table;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

impl Outcome {
    fn ok(&self) -> bool {
        self.passed && self.elapsed <= self.budget
    }

    fn line(&self) -> String {
        let verdict = if self.ok() { "PASS" } else { "FAIL" };
        let over = if self.elapsed > self.budget {
            format!(", over the {:.0} s budget", self.budget.as_secs_f64())
        } else {
            String::new()
        };
        format!(
            "criterion {:>2} {verdict}: {} ({:.1} s{over})",
            self.id,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

/// One CLI invocation, kept for the reproducibility rerun.
struct Invocation {
    command: Command,
    config: PathBuf,
    overrides: Vec<String>,
    out: PathBuf,
}

struct Suite {
    scratch: tempfile::TempDir,
    runs: Vec<Invocation>,
}

impl Suite {
    fn config(name: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs/acceptance")
            .join(name)
    }

    fn invoke(
        &mut self,
        command: Command,
        config: &str,
        overrides: &[&str],
    ) -> Result<PathBuf, String> {
        let out = self
            .scratch
            .path()
            .join(format!("run{}-{}", self.runs.len(), command.name()));
        let config = Self::config(config);
        let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        execute(command, &config, &overrides, &out)?;
        self.runs.push(Invocation {
            command,
            config,
            overrides,
            out: out.clone(),
        });
        Ok(out)
    }
}

fn execute(
    command: Command,
    config: &Path,
    overrides: &[String],
    out: &Path,
) -> Result<(), String> {
    let resolved = load(config, overrides).map_err(|e| e.to_string())?;
    run(command, &resolved, Some(out.to_path_buf()))
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_table(path: &Path) -> Table {
    Table::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn timed(
    id: usize,
    budget_secs: u64,
    f: impl FnOnce() -> Result<(bool, String), String>,
) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let outcome = Outcome {
        id,
        passed,
        detail,
        elapsed: start.elapsed(),
        budget: Duration::from_secs(budget_secs),
    };
    println!("{}", outcome.line());
    outcome
}

fn gradient_oracle() -> Result<(bool, String), String> {
    let mut worst: f64 = 0.0;
    let mut bad = 0usize;
    let mut coords = 0usize;
    for k in 0..20u64 {
        let (h, w, d) = (
            1 + (k % 4) as usize,
            1 + ((3 * k) % 8) as usize,
            1 + (k % 3) as usize,
        );
        let spec = ReluNetworkSpec::unconstrained(h, w, d, 1);
        let net =
            init_network(&spec, InitScheme::UniformScaled, 1000 + k).map_err(|e| e.to_string())?;
        let x = sample_covariates(&CovariateDistribution::uniform(d), 16, 2000 + k);
        let y: Vec<f64> = sample_covariates(&CovariateDistribution::uniform(1), 16, 3000 + k)
            .iter_rows()
            .map(|r| 2.0 * r[0] - 1.0)
            .collect();
        let (_, g) = loss_and_gradient(&net, &x, &y).map_err(|e| e.to_string())?;
        let fd = finite_diff_gradient(&net, &x, &y, 1e-5).map_err(|e| e.to_string())?;
        for (a, b) in g.iter().zip(&fd) {
            coords += 1;
            let diff = (a - b).abs();
            if diff <= 1e-8 {
                continue;
            }
            let rel = diff / a.abs().max(b.abs());
            worst = worst.max(rel);
            if rel > 1e-5 {
                bad += 1;
            }
        }
    }
    Ok((
        bad == 0,
        format!("{coords} gradient coordinates on 20 networks, {bad} mismatches, worst relative error {worst:.2e}"),
    ))
}

fn exponent_formulas() -> Result<(bool, String), String> {
    let e = |r: caulk::core::Result<f64>| r.map_err(|e| e.to_string());
    let t = e(theoretical_exponent(1.0, 1.0))?;
    let c = e(classification_exponent(1.0, 1.0))?;
    let k = e(corollary_exponent(1.0, 1.0, 0.5))?;
    let mut ok = (t - 2.0 / 3.0).abs() <= 1e-12
        && (c - 1.0 / 3.0).abs() <= 1e-12
        && (k - 4.0 / 9.0).abs() <= 1e-12;
    let grid: Vec<f64> = (0..100)
        .map(|i| e(corollary_exponent(1.0, 1.0, i as f64 / 100.0)))
        .collect::<Result<_, _>>()?;
    let monotone = grid.windows(2).all(|w| w[1] < w[0]);
    let comp = composition_exponents(
        &[(2.0, 1), (0.5, 1), (2.0, 1)],
        (1, 3),
        AlphaConvention::Min,
    )
    .map_err(|e| e.to_string())?;
    let want = [2.0 / 3.0, 0.5, 0.8];
    let comp_ok = comp.per_layer.len() == 3
        && comp
            .per_layer
            .iter()
            .zip(want)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
    ok = ok && monotone && comp_ok;
    Ok((
        ok,
        format!(
            "theoretical {t}, classification {c}, corollary {k}, monotone {monotone}, per-layer {:?}",
            comp.per_layer
        ),
    ))
}

fn rate_table(points: &[(usize, f64)]) -> RateTable {
    RateTable {
        rows: points
            .iter()
            .map(|&(n, e)| RateRow {
                n,
                trials: 1,
                mean_error: e,
                std_error: 0.0,
                mean_train_loss: 0.0,
            })
            .collect(),
        config_hash: String::new(),
        model_kind: "synthetic".into(),
    }
}

fn power_law_fitter() -> Result<(bool, String), String> {
    let exact: Vec<(usize, f64)> = (6..=11)
        .map(|k| {
            let n = 1usize << k;
            (n, 4.0 * (n as f64).powf(-2.0 / 3.0))
        })
        .collect();
    let f = fit_power_law(&rate_table(&exact)).map_err(|e| e.to_string())?;
    let exact_err = (f.exponent + 2.0 / 3.0).abs();
    let exact_ok = exact_err <= 1e-10 && f.r_squared >= 1.0 - 1e-12;
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let u = sample_covariates(&CovariateDistribution::uniform(6), 1, s);
        let pts: Vec<(usize, f64)> = (6..=11)
            .zip(u.row(0))
            .map(|(k, &v)| {
                let n = 1usize << k;
                (n, (n as f64).powf(-0.5) * (0.9 + 0.2 * v))
            })
            .collect();
        let f = fit_power_law(&rate_table(&pts)).map_err(|e| e.to_string())?;
        worst = worst.max((f.exponent + 0.5).abs());
    }
    Ok((
        exact_ok && worst <= 0.05,
        format!(
            "exact exponent error {exact_err:.1e}, r2 {}, worst noisy deviation {worst:.3} over 100 seeds",
            f.r_squared
        ),
    ))
}

fn rate_sweep(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(Command::RateSweep, "rate_sweep.toml", &[])?;
    let t = read_table(&out.join("rate.csv"));
    let n = t.column("n").map_err(|e| e.to_string())?;
    let e = t.column("mean_error").map_err(|e| e.to_string())?;
    let rho = spearman(&n, &e);
    let ex = read_json(&out.join("exponent.json"));
    let exponent = ex["exponent"].as_f64().ok_or("exponent missing")?;
    let grid_ok = n.first() == Some(&64.0) && n.last() == Some(&2048.0) && t.rows.len() == 6;
    let trials_ok = t
        .column("trials")
        .map_err(|e| e.to_string())?
        .iter()
        .all(|&k| k == 10.0);
    Ok((
        grid_ok && trials_ok && rho <= -0.9 && exponent <= -0.2,
        format!(
            "spearman {rho}, fitted exponent {exponent:.3}, theoretical {}",
            ex["theoretical"]
        ),
    ))
}

fn caulk_beats_scratch(suite: &mut Suite) -> Result<(bool, String), String> {
    let c = suite.invoke(Command::Caulk, "caulk_vs_scratch.toml", &[])?;
    let s = suite.invoke(Command::Scratch, "caulk_vs_scratch.toml", &[])?;
    let read = |dir: &Path| -> Result<Vec<(String, f64)>, String> {
        let t = read_table(&dir.join("caulking.csv"));
        let ids = t.text_column("model_id").map_err(|e| e.to_string())?;
        let l2 = t.column("l2_estimate").map_err(|e| e.to_string())?;
        Ok(ids
            .into_iter()
            .map(|id| id.rsplit('-').next().unwrap_or_default().to_string())
            .zip(l2)
            .collect())
    };
    let caulked = read(&c)?;
    let scratch = read(&s)?;
    let mut wins = 0;
    let mut pairs = 0;
    for (trial, e) in &caulked {
        if let Some((_, se)) = scratch.iter().find(|(t, _)| t == trial) {
            pairs += 1;
            if e < se {
                wins += 1;
            }
        }
    }
    Ok((
        pairs == 10 && wins >= 8,
        format!("caulked error below scratch in {wins} of {pairs} paired seeds at n = 256"),
    ))
}

fn depth_trend(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(Command::DepthSweep, "depth_sweep.toml", &[])?;
    let summary = read_json(&out.join("depth_summary.json"));
    let seeds = summary["seeds"].as_array().ok_or("no seeds")?;
    let mut good = 0;
    let mut pairs = Vec::new();
    for s in seeds {
        let mins = s["min_depth"].as_array().ok_or("no min_depth")?;
        let get = |name: &str| {
            mins.iter()
                .find(|m| m[0] == name)
                .and_then(|m| m[1].as_u64())
        };
        let (w, n) = (
            get("wide").ok_or("no wide")?,
            get("narrow").ok_or("no narrow")?,
        );
        pairs.push(format!("{w}/{n}"));
        if w <= n {
            good += 1;
        }
    }
    Ok((
        seeds.len() == 5 && good >= 4,
        format!(
            "wide depth <= narrow depth in {good} of {} seeds (wide/narrow: {})",
            seeds.len(),
            pairs.join(" ")
        ),
    ))
}

fn m_sweep_trend(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(Command::MSweep, "m_sweep.toml", &[])?;
    let t = read_table(&out.join("m_sweep.csv"));
    let ms = t.text_column("m").map_err(|e| e.to_string())?;
    let ex = t.column("exponent").map_err(|e| e.to_string())?;
    let shape_ok = ms == ["128", "512", "2048", "oracle"];
    let inversions = ex.windows(2).filter(|w| w[1] > w[0]).count();
    let oracle = *ex.last().ok_or("empty m-sweep")?;
    let oracle_best = ex[..ex.len() - 1].iter().all(|&e| oracle < e);
    Ok((
        shape_ok && inversions <= 1 && oracle_best,
        format!(
            "exponents {:?} over m = {:?}, {inversions} inversions, oracle strictly best {oracle_best}",
            ex.iter().map(|e| (e * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            ms
        ),
    ))
}

const ONLY_COVERING: [&str; 5] = [
    "verify.outside_instances=0",
    "verify.maximal_ns=[]",
    "verify.quadratic_triples=0",
    "verify.smoke=false",
    "verify.instances=10",
];

fn covering_inequality(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(Command::Verify, "verify.toml", &ONLY_COVERING)?;
    let recs = read_json(&out.join("covering.json"));
    let recs = recs.as_array().ok_or("covering.json is not a list")?;
    let mut violations = 0;
    let mut max_g = 0;
    let mut deltas_ok = true;
    for r in recs {
        let holds = r["holds"].as_array().ok_or("no holds")?;
        violations += holds
            .iter()
            .filter(|h| !h.as_bool().unwrap_or(false))
            .count();
        if r["error"].is_string() {
            violations += 1;
        }
        let deltas: Vec<f64> = r["deltas"]
            .as_array()
            .ok_or("no deltas")?
            .iter()
            .filter_map(Value::as_f64)
            .collect();
        deltas_ok &= deltas.len() == 20
            && deltas
                .iter()
                .enumerate()
                .all(|(k, d)| (d - 0.05 * (k + 1) as f64).abs() < 1e-9);
        let desc = r["instance"].as_str().unwrap_or_default();
        let g: usize = desc
            .split("|G| = ")
            .nth(1)
            .and_then(|s| s.split(',').next())
            .and_then(|s| s.trim().parse().ok())
            .ok_or("class size missing from description")?;
        max_g = max_g.max(g);
    }
    Ok((
        recs.len() == 10 && violations == 0 && max_g <= 20 && deltas_ok,
        format!(
            "{} instances, largest |G| = {max_g}, {violations} violations over the 20-point delta grid",
            recs.len()
        ),
    ))
}

fn approximation_inequality(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(
        Command::Verify,
        "verify.toml",
        &[
            "verify.instances=10",
            "verify.outside_instances=10",
            "verify.maximal_ns=[]",
            "verify.quadratic_triples=0",
            "verify.smoke=false",
        ],
    )?;
    let recs = read_json(&out.join("approximation.json"));
    let recs = recs.as_array().ok_or("approximation.json is not a list")?;
    let mut failures = 0;
    let mut outside = 0;
    for r in recs {
        if !r["ideal_in_class"].as_bool().unwrap_or(true) {
            outside += 1;
        }
        let (Some(l), Some(se), Some(rhs)) = (
            r["left"].as_f64(),
            r["left_std_error"].as_f64(),
            r["right"].as_f64(),
        ) else {
            failures += 1;
            continue;
        };
        if l > rhs + 3.0 * se {
            failures += 1;
        }
    }
    Ok((
        recs.len() == 20 && outside == 10 && failures == 0,
        format!(
            "{} instances ({outside} with the ideal adapter outside G), {failures} exceed right side + 3 se",
            recs.len()
        ),
    ))
}

fn maximal_inequality(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(
        Command::Verify,
        "verify.toml",
        &[
            "verify.instances=0",
            "verify.outside_instances=0",
            "verify.quadratic_triples=0",
            "verify.smoke=false",
            "verify.maximal_ns=[1, 10, 100, 1000]",
            "verify.maximal_sigmas=[0.5, 1.0, 2.0]",
            "verify.maximal_trials=100000",
        ],
    )?;
    let recs = read_json(&out.join("maximal.json"));
    let recs = recs.as_array().ok_or("maximal.json is not a list")?;
    let mut violations = 0;
    let mut chi = None;
    for r in recs {
        let emp = r["empirical"].as_f64().ok_or("no empirical")?;
        let bound = r["bound"].as_f64().ok_or("no bound")?;
        if emp > bound {
            violations += 1;
        }
        if r["n"] == 1 && r["sigma"].as_f64() == Some(1.0) {
            let se = r["std_error"].as_f64().ok_or("no std_error")?;
            chi = Some(((emp - 1.0).abs(), se));
        }
    }
    let (dev, se) = chi.ok_or("no N = 1, sigma = 1 cell")?;
    Ok((
        recs.len() == 12 && violations == 0 && dev <= 3.0 * se,
        format!(
            "{} cells at 1e5 trials, {violations} bound violations, N = 1 sigma = 1 deviation {dev:.4} vs 3 se {:.4}",
            recs.len(),
            3.0 * se
        ),
    ))
}

fn quadratic_implication(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(
        Command::Verify,
        "verify.toml",
        &[
            "verify.instances=0",
            "verify.outside_instances=0",
            "verify.maximal_ns=[]",
            "verify.smoke=false",
            "verify.quadratic_triples=10000",
        ],
    )?;
    let r = read_json(&out.join("quadratic.json"));
    let triples = r["triples"].as_u64().unwrap_or(0);
    let ce = r["counterexamples"]
        .as_u64()
        .ok_or("no counterexamples field")?;
    Ok((
        triples == 10_000 && ce == 0,
        format!(
            "{triples} triples, {} grid points checked, {ce} counterexamples",
            r["points_checked"]
        ),
    ))
}

fn plugin_inequality(suite: &mut Suite) -> Result<(bool, String), String> {
    let out = suite.invoke(Command::Caulk, "plugin.toml", &[])?;
    let report = read_json(&out.join("plugin.json"));
    let models = report["models"].as_array().ok_or("no models")?;
    let mut bound_fail = 0;
    let mut agree_fail = 0;
    for m in models {
        let f = |k: &str| m[k].as_f64().ok_or(format!("missing {k}"));
        let (mse, se_mse) = (f("l2_estimate")?, f("l2_stderr")?);
        let (e1, se1) = (f("excess_identity")?, f("excess_identity_stderr")?);
        let (e2, se2) = (f("excess_definition")?, f("excess_definition_stderr")?);
        let root = mse.max(0.0).sqrt();
        let se_root = if root > 0.0 { se_mse / root } else { 0.0 };
        let combined = (se1 * se1 + se_root * se_root).sqrt();
        if e1 > 2.0 * root + 3.0 * combined {
            bound_fail += 1;
        }
        if (e1 - e2).abs() > 3.0 * (se1 * se1 + se2 * se2).sqrt() {
            agree_fail += 1;
        }
    }
    Ok((
        models.len() == 20 && bound_fail == 0 && agree_fail == 0,
        format!(
            "{} score models, {bound_fail} bound failures, {agree_fail} estimator disagreements",
            models.len()
        ),
    ))
}

fn files_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .replace('\\', "/");
            if rel != "manifest.json" {
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn reproducibility(suite: &Suite) -> Result<(bool, String), String> {
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for (k, inv) in suite.runs.iter().enumerate() {
        let again = suite.scratch.path().join(format!("rerun{k}"));
        execute(inv.command, &inv.config, &inv.overrides, &again)?;
        let a = files_except_manifest(&inv.out);
        let b = files_except_manifest(&again);
        compared += a
            .iter()
            .filter(|(p, _)| p.ends_with(".csv") || p.ends_with(".json"))
            .count();
        if a != b {
            mismatched.push(format!("{} {}", inv.command.name(), inv.config.display()));
        }
        let hash = |d: &Path| read_json(&d.join("manifest.json"))["config_hash"].clone();
        if hash(&inv.out) != hash(&again) {
            mismatched.push(format!("{} config hash", inv.command.name()));
        }
    }
    Ok((
        mismatched.is_empty() && !suite.runs.is_empty(),
        format!(
            "{} commands rerun, {compared} CSV/JSON files compared, mismatches: {}",
            suite.runs.len(),
            if mismatched.is_empty() {
                "none".to_string()
            } else {
                mismatched.join("; ")
            }
        ),
    ))
}

fn main() {
    let mut suite = Suite {
        scratch: tempfile::tempdir().unwrap(),
        runs: Vec::new(),
    };
    let outcomes = vec![
        timed(1, 30, gradient_oracle),
        timed(2, 1, exponent_formulas),
        timed(3, 5, power_law_fitter),
        timed(4, 600, || rate_sweep(&mut suite)),
        timed(5, 300, || caulk_beats_scratch(&mut suite)),
        timed(6, 600, || depth_trend(&mut suite)),
        timed(7, 900, || m_sweep_trend(&mut suite)),
        timed(8, 120, || covering_inequality(&mut suite)),
        timed(9, 120, || approximation_inequality(&mut suite)),
        timed(10, 60, || maximal_inequality(&mut suite)),
        timed(11, 30, || quadratic_implication(&mut suite)),
        timed(12, 300, || plugin_inequality(&mut suite)),
    ];
    let repro = timed(13, 3600, || reproducibility(&suite));
    let failed: Vec<usize> = outcomes
        .iter()
        .chain(std::iter::once(&repro))
        .filter(|o| !o.ok())
        .map(|o| o.id)
        .collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all 13 criteria passed");
}

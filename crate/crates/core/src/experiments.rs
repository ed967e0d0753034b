//! End-to-end experiments on the uniform models: posterior shape, risk
//! against tolerance, acceptance-rate scaling and the grid-oracle check.
//!
//! Each runner returns a serializable report plus the in-memory artifacts;
//! [`write_outputs`] turns those into CSV/JSON files.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::adjust::{adjust_samples, fit_local_linear, oracle_adjustment, AdjustmentModel};
use crate::analysis::{
    brute_force_posterior, centered_grid, estimate_density, estimate_density_on, l1_between,
    l1_discrepancy, loglog_slope, posterior_risk, segmented_slope, DensityEstimate, LogLogFit,
    RiskCurve, RiskKind, RiskPoint, SegmentedFit,
};
use crate::domain::{ParameterPoint, ReferenceTable, RunWarning};
use crate::engine::{
    acceptance_rate, acceptance_rate_se, run_rejection, simulate_observed, RunConfig, Sampler,
};
use crate::error::{Error, Result};
use crate::io::{
    write_density_csv, write_float_csv, write_json, write_reference_table, write_risk_curve_csv,
};
use crate::models::{UniformRiskModel, UniformShapeModel};
use crate::rng::{stream_key, Domain};
use crate::theory::{predict_acceptance_exponent, shape_posterior_for};

/// `points` log-spaced values from `10^lo` to `10^hi`, endpoints included.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![10f64.powf(lo)];
    }
    (0..points)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
        .collect()
}

fn default_workers() -> usize {
    1
}
fn default_theta0() -> f64 {
    0.5
}
fn default_c() -> f64 {
    1.0
}
fn default_k0() -> usize {
    2
}
fn default_bins() -> usize {
    50
}
fn default_accepted() -> usize {
    20_000
}
fn default_max_draws() -> u64 {
    20_000_000_000
}
fn default_sampler() -> Sampler {
    Sampler::Auto
}
fn default_shape_n() -> Vec<usize> {
    vec![10_000, 100_000, 1_000_000]
}
fn default_scaling_n() -> Vec<usize> {
    vec![1_000, 10_000, 100_000]
}
fn default_slope_tolerance() -> f64 {
    0.2
}
fn default_risk_n() -> usize {
    10_000
}
fn default_risk_epsilons() -> Vec<f64> {
    logspace(-0.8, -2.2, 15)
}
fn default_risk_accepted() -> usize {
    400_000
}
fn default_replicates() -> usize {
    1
}
fn default_min_points() -> usize {
    50
}
fn default_oracle_n() -> usize {
    1_000
}
fn default_oracle_k0() -> usize {
    1
}
fn default_oracle_epsilon() -> Option<f64> {
    Some(0.05)
}
fn default_repeats() -> usize {
    1
}
fn default_grid_points() -> usize {
    200
}
fn default_oracle_reps() -> usize {
    10_000
}
fn default_max_l1() -> f64 {
    0.1
}
fn default_prior_sampler() -> Sampler {
    Sampler::Prior
}

/// Posterior shape against the limiting density, plus the fitted
/// regression coefficients against their limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    #[serde(default = "default_shape_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_k0")]
    pub k0: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// ε = C/√n.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Stop once this many draws are accepted.
    #[serde(default = "default_accepted")]
    pub accepted: usize,
    /// Cap on simulations per n.
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// Posterior risk of plain and regression-adjusted ABC over a tolerance grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskConfig {
    #[serde(default = "default_risk_n")]
    pub n: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// Log-spaced tolerances, at least six.
    #[serde(default = "default_risk_epsilons")]
    pub epsilons: Vec<f64>,
    /// Accepted draws to collect at the loosest tolerance.
    #[serde(default = "default_risk_accepted")]
    pub accepted: usize,
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
    /// Independent observed datasets; risks are pooled as √(mean risk²).
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Points with fewer accepted draws are flagged and left out of fits.
    #[serde(default = "default_min_points")]
    pub min_accepted: usize,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// Acceptance rate against n under ε = C/√n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default = "default_scaling_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_k0")]
    pub k0: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_accepted")]
    pub accepted: usize,
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
    /// Allowed |fitted − predicted| slope.
    #[serde(default = "default_slope_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// Rejection ABC against the brute-force grid posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_oracle_n")]
    pub n: usize,
    #[serde(default = "default_oracle_k0")]
    pub k0: usize,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// `null` means ε = ∞.
    #[serde(default = "default_oracle_epsilon")]
    pub epsilon: Option<f64>,
    /// Runs with seeds `seed, seed+1, …`.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_accepted")]
    pub accepted: usize,
    #[serde(default = "default_max_draws")]
    pub max_draws: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Simulations per grid point.
    #[serde(default = "default_oracle_reps")]
    pub reps: usize,
    #[serde(default = "default_max_l1")]
    pub max_l1: f64,
    #[serde(default = "default_prior_sampler")]
    pub sampler: Sampler,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

/// One experiment, selected by the `experiment` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Shape(ShapeConfig),
    Risk(RiskConfig),
    AcceptanceScaling(ScalingConfig),
    OracleCheck(OracleConfig),
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Shape(_) => "shape",
            Self::Risk(_) => "risk",
            Self::AcceptanceScaling(_) => "acceptance-scaling",
            Self::OracleCheck(_) => "oracle-check",
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::Shape(c) => c.seed = seed,
            Self::Risk(c) => c.seed = seed,
            Self::AcceptanceScaling(c) => c.seed = seed,
            Self::OracleCheck(c) => c.seed = seed,
        }
    }

    pub fn set_workers(&mut self, workers: usize) {
        match self {
            Self::Shape(c) => c.workers = workers,
            Self::Risk(c) => c.workers = workers,
            Self::AcceptanceScaling(c) => c.workers = workers,
            Self::OracleCheck(c) => c.workers = workers,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Shape(c) => c.validate(),
            Self::Risk(c) => c.validate(),
            Self::AcceptanceScaling(c) => c.validate(),
            Self::OracleCheck(c) => c.validate(),
        }
    }
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn check_common(workers: usize, accepted: usize, max_draws: u64) -> Result<()> {
    require(workers >= 1, || "workers must be at least 1".into())?;
    require(accepted >= 1, || "accepted must be at least 1".into())?;
    require(max_draws >= 1, || "max_draws must be at least 1".into())
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.workers, self.accepted, self.max_draws)?;
        require(!self.n.is_empty(), || "n list is empty".into())?;
        require(self.c > 0.0 && self.c.is_finite(), || {
            format!("C must be positive, got {}", self.c)
        })?;
        require(self.bins >= 10, || {
            format!("need at least 10 bins, got {}", self.bins)
        })?;
        for &n in &self.n {
            UniformShapeModel::new(n, self.k0, self.theta0)?;
        }
        Ok(())
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.workers, self.accepted, self.max_draws)?;
        UniformRiskModel::new(self.n, self.theta0)?;
        require(self.epsilons.len() >= 6, || {
            format!("need at least 6 tolerances, got {}", self.epsilons.len())
        })?;
        require(self.epsilons.iter().all(|&e| e > 0.0 && e < 0.5), || {
            "tolerances must lie in (0, 0.5)".into()
        })?;
        require(self.epsilons.windows(2).all(|w| w[1] < w[0]), || {
            "tolerances must be strictly decreasing".into()
        })?;
        let logs: Vec<f64> = self.epsilons.iter().map(|e| e.log10()).collect();
        let step = (logs[logs.len() - 1] - logs[0]) / (logs.len() - 1) as f64;
        require(
            logs.iter()
                .enumerate()
                .all(|(i, l)| (l - logs[0] - step * i as f64).abs() < 1e-6),
            || "tolerances must be log-spaced".into(),
        )?;
        require(self.replicates >= 1, || {
            "replicates must be at least 1".into()
        })?;
        require(self.min_accepted >= 3, || {
            "min_accepted must be at least 3".into()
        })
    }
}

impl ScalingConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.workers, self.accepted, self.max_draws)?;
        require(self.n.len() >= 3, || {
            format!("need at least 3 sample sizes, got {}", self.n.len())
        })?;
        require(self.c > 0.0 && self.c.is_finite(), || {
            format!("C must be positive, got {}", self.c)
        })?;
        require(self.tolerance > 0.0, || {
            "slope tolerance must be positive".into()
        })?;
        for &n in &self.n {
            UniformShapeModel::new(n, self.k0, self.theta0)?;
        }
        Ok(())
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        check_common(self.workers, self.accepted, self.max_draws)?;
        UniformShapeModel::new(self.n, self.k0, self.theta0)?;
        require(self.n <= 1_000, || {
            format!("the grid oracle is meant for n ≤ 1000, got {}", self.n)
        })?;
        require(self.epsilon.is_none_or(|e| e > 0.0), || {
            "tolerance must be positive".into()
        })?;
        require(self.repeats >= 1, || "repeats must be at least 1".into())?;
        require(self.bins >= 10, || {
            format!("need at least 10 bins, got {}", self.bins)
        })?;
        require(self.grid_points >= 2, || {
            "need at least 2 grid points".into()
        })?;
        require(self.reps >= 1000, || {
            "need at least 1000 replicates per grid point".into()
        })
    }
}

/// Reports of every experiment, tagged like the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentReport {
    Shape(ShapeReport),
    Risk(RiskReport),
    AcceptanceScaling(ScalingReport),
    OracleCheck(OracleReport),
}

/// How an experiment's outcome should be judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Ok,
    /// Some required statistic could not be formed (e.g. no acceptances).
    Degenerate,
    /// The experiment's self-check failed.
    CheckFailed,
}

impl ExperimentReport {
    pub fn outcome(&self) -> Outcome {
        match self {
            Self::Shape(r) if r.runs.iter().any(|p| p.l1.is_none()) => Outcome::Degenerate,
            Self::AcceptanceScaling(r) if !r.passed => Outcome::CheckFailed,
            Self::OracleCheck(r) if !r.passed => Outcome::CheckFailed,
            _ => Outcome::Ok,
        }
    }
}

/// A named file to write.
#[derive(Debug, Clone)]
pub enum Artifact {
    Table(ReferenceTable),
    Density(DensityEstimate),
    Curve(RiskCurve),
    Rows {
        header: Vec<String>,
        rows: Vec<Vec<f64>>,
    },
    Adjustment(AdjustmentModel),
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<(String, Artifact)>,
}

/// Writes every artifact into `dir` and returns the paths written.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, artifact) in &output.artifacts {
        let path = dir.join(name);
        match artifact {
            Artifact::Table(t) => {
                write_reference_table(t, &path)?;
                written.push(crate::io::sidecar_path(&path));
            }
            Artifact::Density(d) => write_density_csv(d, &path)?,
            Artifact::Curve(c) => write_risk_curve_csv(c, &path)?,
            Artifact::Rows { header, rows } => write_float_csv(
                std::io::BufWriter::new(std::fs::File::create(&path)?),
                header,
                rows,
            )?,
            Artifact::Adjustment(a) => write_json(&path, a)?,
        }
        written.push(path);
    }
    Ok(written)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config {
        ExperimentConfig::Shape(c) => run_shape(c),
        ExperimentConfig::Risk(c) => run_risk(c),
        ExperimentConfig::AcceptanceScaling(c) => run_scaling(c),
        ExperimentConfig::OracleCheck(c) => run_oracle_check(c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRun {
    pub n: usize,
    pub epsilon: f64,
    pub simulations: u64,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub acceptance_rate_se: f64,
    /// `None` when too few draws were accepted for a histogram.
    pub l1: Option<f64>,
    /// Fitted coefficients, one per summary statistic.
    pub coefficients: Option<Vec<f64>>,
    /// Frobenius distance to the limiting coefficients.
    pub coefficient_distance: Option<f64>,
    /// Largest |coefficient| among slow statistics.
    pub max_abs_slow: Option<f64>,
    pub warning: Option<RunWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub runs: Vec<ShapeRun>,
    /// Limiting coefficients, one per summary statistic.
    pub limit_coefficients: Vec<f64>,
}

/// Runs until `accepted` draws are kept or `max_draws` simulations are spent.
fn stopping_config(
    epsilon: f64,
    accepted: usize,
    max_draws: u64,
    sampler: Sampler,
    seed: u64,
    workers: usize,
) -> RunConfig {
    RunConfig::fixed(max_draws, epsilon, seed)
        .with_workers(workers)
        .with_sampler(sampler)
        .until_accepted(accepted)
}

fn column(coefs: &AdjustmentModel) -> Vec<f64> {
    coefs.coefficients.iter().map(|row| row[0]).collect()
}

pub fn run_shape(cfg: &ShapeConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    let mut limit = Vec::new();
    for &n in &cfg.n {
        let model = UniformShapeModel::new(n, cfg.k0, cfg.theta0)?;
        let observed = simulate_observed(&model, &ParameterPoint::scalar(cfg.theta0), cfg.seed);
        let tp = shape_posterior_for(&model, cfg.c)?;
        let eps = tp.epsilon();
        let table = run_rejection(
            &model,
            &observed,
            &stopping_config(
                eps,
                cfg.accepted,
                cfg.max_draws,
                cfg.sampler,
                cfg.seed,
                cfg.workers,
            ),
        )?;
        info!(
            "shape n={n}: {} accepted of {} simulations",
            table.len(),
            table.total_simulated
        );

        let oracle = oracle_adjustment(&model.rate_profile())?;
        limit = column(&oracle);
        let thetas = table.theta_component(0);
        let l1 = match estimate_density(&thetas, cfg.bins) {
            Ok(est) => {
                let l1 = l1_discrepancy(&est, &tp)?;
                artifacts.push((format!("shape_n{n}_histogram.csv"), Artifact::Density(est)));
                Some(l1)
            }
            Err(Error::InsufficientData { .. } | Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        };
        let half = tp.half_width_1d()?;
        let grid = centered_grid(cfg.theta0 - 1.1 * half, cfg.theta0 + 1.1 * half, 400);
        let curve = tp.density_curve(&grid)?;
        artifacts.push((
            format!("shape_n{n}_theory.csv"),
            Artifact::Rows {
                header: vec!["theta".into(), "density".into()],
                rows: curve.into_iter().map(|(t, v)| vec![t, v]).collect(),
            },
        ));

        let fit = match fit_local_linear(&table) {
            Ok(f) => Some(f),
            Err(Error::InsufficientData { .. } | Error::DegenerateDesign(_)) => None,
            Err(e) => return Err(e),
        };
        let coefficients = fit.as_ref().map(column);
        let coefficient_distance = fit
            .as_ref()
            .map(|f| f.coefficient_distance(&oracle))
            .transpose()?;
        let max_abs_slow = coefficients
            .as_ref()
            .map(|c| c[..cfg.k0].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if let Some(f) = fit {
            artifacts.push((
                format!("shape_n{n}_adjustment.json"),
                Artifact::Adjustment(f),
            ));
        }

        runs.push(ShapeRun {
            n,
            epsilon: eps,
            simulations: table.total_simulated,
            accepted: table.len(),
            acceptance_rate: acceptance_rate(&table)?,
            acceptance_rate_se: acceptance_rate_se(&table)?,
            l1,
            coefficients,
            coefficient_distance,
            max_abs_slow,
            warning: table.warning,
        });
        artifacts.push((format!("shape_n{n}_table.csv"), Artifact::Table(table)));
    }
    Ok(ExperimentOutput {
        report: ExperimentReport::Shape(ShapeReport {
            runs,
            limit_coefficients: limit,
        }),
        artifacts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub epsilon: f64,
    /// Accepted draws summed over replicates.
    pub accepted: usize,
    pub vanilla_risk: Option<f64>,
    pub adjusted_risk: Option<f64>,
    /// Fitted coefficients (slow, fast), averaged over replicates.
    pub coefficients: Option<Vec<f64>>,
    /// Below `min_accepted` in some replicate; excluded from fits.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    pub loose_epsilon: f64,
    /// Simulations per replicate at the loosest tolerance.
    pub simulations: Vec<u64>,
    pub vanilla_fit: LogLogFit,
    pub adjusted_fit: SegmentedFit,
    /// Single-line fit of the adjusted curve, for comparison.
    pub adjusted_line: LogLogFit,
    pub adjusted_steep_slope: f64,
    /// `10^breakpoint`.
    pub adjusted_breakpoint_epsilon: f64,
}

/// Observed-data seed of replicate `r`; replicate 0 uses `seed` itself.
fn replicate_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        stream_key(seed, Domain::Observed, r as u64)
    }
}

pub fn run_risk(cfg: &RiskConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = UniformRiskModel::new(cfg.n, cfg.theta0)?;
    let theta0 = ParameterPoint::scalar(cfg.theta0);
    let loose = cfg.epsilons[0];
    let e = cfg.epsilons.len();
    let mut sq_vanilla = vec![0.0; e];
    let mut sq_adjusted = vec![0.0; e];
    let mut coef_sum = vec![vec![0.0; 2]; e];
    let mut accepted = vec![0usize; e];
    let mut flagged = vec![false; e];
    let mut simulations = Vec::new();
    let mut artifacts = Vec::new();

    for r in 0..cfg.replicates {
        let seed = replicate_seed(cfg.seed, r);
        let observed = simulate_observed(&model, &theta0, seed);
        let table = run_rejection(
            &model,
            &observed,
            &stopping_config(
                loose,
                cfg.accepted,
                cfg.max_draws,
                cfg.sampler,
                seed,
                cfg.workers,
            ),
        )?;
        info!(
            "risk replicate {r}: {} accepted of {} simulations",
            table.len(),
            table.total_simulated
        );
        simulations.push(table.total_simulated);
        for (i, &eps) in cfg.epsilons.iter().enumerate() {
            let sub = table.restrict(eps)?;
            accepted[i] += sub.len();
            if sub.len() < cfg.min_accepted {
                flagged[i] = true;
                continue;
            }
            let vanilla = posterior_risk(&sub.thetas(), &theta0)?;
            let fit = fit_local_linear(&sub)?;
            let adjusted = posterior_risk(&adjust_samples(&sub, &fit)?, &theta0)?;
            sq_vanilla[i] += vanilla * vanilla;
            sq_adjusted[i] += adjusted * adjusted;
            for (acc, v) in coef_sum[i].iter_mut().zip(column(&fit)) {
                *acc += v;
            }
        }
        if r == 0 {
            artifacts.push(("risk_table.csv".to_owned(), Artifact::Table(table)));
        }
    }

    let reps = cfg.replicates as f64;
    let rows: Vec<RiskRow> = (0..e)
        .map(|i| {
            let ok = !flagged[i];
            RiskRow {
                epsilon: cfg.epsilons[i],
                accepted: accepted[i],
                vanilla_risk: ok.then(|| (sq_vanilla[i] / reps).sqrt()),
                adjusted_risk: ok.then(|| (sq_adjusted[i] / reps).sqrt()),
                coefficients: ok.then(|| coef_sum[i].iter().map(|c| c / reps).collect()),
                flagged: !ok,
            }
        })
        .collect();
    let curve = |kind: RiskKind, pick: fn(&RiskRow) -> Option<f64>| {
        RiskCurve::new(
            kind,
            rows.iter()
                .filter_map(|row| {
                    pick(row).map(|risk| RiskPoint {
                        epsilon: row.epsilon,
                        risk,
                        n_samples: row.accepted,
                    })
                })
                .collect(),
        )
    };
    let vanilla = curve(RiskKind::Vanilla, |r| r.vanilla_risk)?;
    let adjusted = curve(RiskKind::Adjusted, |r| r.adjusted_risk)?;
    let degenerate = |e: Error| match e {
        Error::InsufficientData { needed, found } => Error::Degenerate(format!(
            "only {found} tolerances have enough accepted draws; fits need {needed}"
        )),
        other => other,
    };
    let vanilla_fit = loglog_slope(&vanilla.log_points()).map_err(degenerate)?;
    let adjusted_fit = segmented_slope(&adjusted.log_points()).map_err(degenerate)?;
    let adjusted_line = loglog_slope(&adjusted.log_points()).map_err(degenerate)?;
    artifacts.push(("risk_vanilla.csv".to_owned(), Artifact::Curve(vanilla)));
    artifacts.push(("risk_adjusted.csv".to_owned(), Artifact::Curve(adjusted)));

    Ok(ExperimentOutput {
        report: ExperimentReport::Risk(RiskReport {
            rows,
            loose_epsilon: loose,
            simulations,
            vanilla_fit,
            adjusted_steep_slope: adjusted_fit.steep_slope(),
            adjusted_breakpoint_epsilon: 10f64.powf(adjusted_fit.breakpoint),
            adjusted_fit,
            adjusted_line,
        }),
        artifacts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub epsilon: f64,
    pub simulations: u64,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub acceptance_rate_se: f64,
    /// No acceptances; excluded from the fit.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub fit: Option<LogLogFit>,
    pub predicted_slope: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn run_scaling(cfg: &ScalingConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut predicted = None;
    for &n in &cfg.n {
        let model = UniformShapeModel::new(n, cfg.k0, cfg.theta0)?;
        predicted = Some(predict_acceptance_exponent(&model.rate_profile(), 1)?);
        let eps = cfg.c / (n as f64).sqrt();
        let observed = simulate_observed(&model, &ParameterPoint::scalar(cfg.theta0), cfg.seed);
        let table = run_rejection(
            &model,
            &observed,
            &stopping_config(
                eps,
                cfg.accepted,
                cfg.max_draws,
                cfg.sampler,
                cfg.seed,
                cfg.workers,
            ),
        )?;
        info!(
            "scaling n={n}: {} accepted of {} simulations",
            table.len(),
            table.total_simulated
        );
        rows.push(ScalingRow {
            n,
            epsilon: eps,
            simulations: table.total_simulated,
            accepted: table.len(),
            acceptance_rate: acceptance_rate(&table)?,
            acceptance_rate_se: acceptance_rate_se(&table)?,
            flagged: table.is_empty(),
        });
    }
    let predicted_slope = predicted.expect("n list validated non-empty");
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.flagged)
        .map(|r| (r.n as f64, r.acceptance_rate))
        .collect();
    let fit = if points.len() >= 3 {
        Some(loglog_slope(&points)?)
    } else {
        None
    };
    let passed = fit.is_some_and(|f| (f.slope - predicted_slope).abs() <= cfg.tolerance);
    let table_rows = rows
        .iter()
        .map(|r| {
            vec![
                r.n as f64,
                r.epsilon,
                r.simulations as f64,
                r.accepted as f64,
                r.acceptance_rate,
                r.acceptance_rate_se,
            ]
        })
        .collect();
    Ok(ExperimentOutput {
        report: ExperimentReport::AcceptanceScaling(ScalingReport {
            rows,
            fit,
            predicted_slope,
            tolerance: cfg.tolerance,
            passed,
        }),
        artifacts: vec![(
            "acceptance_scaling.csv".to_owned(),
            Artifact::Rows {
                header: [
                    "n",
                    "epsilon",
                    "simulations",
                    "accepted",
                    "acceptance_rate",
                    "acceptance_rate_se",
                ]
                .map(String::from)
                .to_vec(),
                rows: table_rows,
            },
        )],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRun {
    pub seed: u64,
    pub accepted: usize,
    pub simulations: u64,
    pub lower: f64,
    pub upper: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub runs: Vec<OracleRun>,
    pub max_l1: f64,
    pub passed: bool,
}

pub fn run_oracle_check(cfg: &OracleConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let model = UniformShapeModel::new(cfg.n, cfg.k0, cfg.theta0)?;
    let eps = cfg.epsilon.unwrap_or(f64::INFINITY);
    let mut runs = Vec::new();
    let mut artifacts = Vec::new();
    for r in 0..cfg.repeats {
        let seed = cfg.seed.wrapping_add(r as u64);
        let observed = simulate_observed(&model, &ParameterPoint::scalar(cfg.theta0), seed);
        let table = run_rejection(
            &model,
            &observed,
            &stopping_config(
                eps,
                cfg.accepted,
                cfg.max_draws,
                cfg.sampler,
                seed,
                cfg.workers,
            ),
        )?;
        let thetas = table.theta_component(0);
        if thetas.len() < 100 {
            return Err(Error::Degenerate(format!(
                "seed {seed}: only {} accepted draws, need 100 for a histogram",
                thetas.len()
            )));
        }
        // common range: the accepted draws plus a 10% margin, inside the prior
        let lo = thetas.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = thetas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let margin = 0.1 * (hi - lo);
        let (lo, hi) = ((lo - margin).max(0.0), (hi + margin).min(1.0));
        let est = estimate_density_on(&thetas, lo, hi, cfg.bins)?;
        let grid = centered_grid(lo, hi, cfg.grid_points);
        let oracle =
            brute_force_posterior(&model, &observed, eps, &grid, cfg.reps, seed, cfg.workers)?;
        let l1 = l1_between(&est, &oracle);
        info!("oracle seed {seed}: L1 {l1}");
        runs.push(OracleRun {
            seed,
            accepted: table.len(),
            simulations: table.total_simulated,
            lower: lo,
            upper: hi,
            l1,
        });
        artifacts.push((format!("oracle_seed{seed}_abc.csv"), Artifact::Density(est)));
        artifacts.push((
            format!("oracle_seed{seed}_grid.csv"),
            Artifact::Density(oracle),
        ));
    }
    let passed = runs.iter().all(|r| r.l1 < cfg.max_l1);
    Ok(ExperimentOutput {
        report: ExperimentReport::OracleCheck(OracleReport {
            runs,
            max_l1: cfg.max_l1,
            passed,
        }),
        artifacts,
    })
}

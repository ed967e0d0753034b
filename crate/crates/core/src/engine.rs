//! Accept/reject ABC with counter-based parallel simulation.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    distance_unchecked, AcceptedDraw, GenerativeModel, ParameterPoint, ReferenceTable, RunWarning,
    SummaryVector,
};
use crate::error::{Error, Result};
use crate::rng::{stream, Domain, StreamRng};

/// How the acceptance radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceSpec {
    Fixed(f64),
    /// Empirical `q`-quantile of `pilot` prior-predictive distances.
    Quantile {
        q: f64,
        pilot: usize,
    },
}

impl ToleranceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ToleranceSpec::Fixed(eps) if eps > 0.0 => Ok(()),
            ToleranceSpec::Fixed(eps) => Err(Error::Config(format!(
                "tolerance must be positive, got {eps}"
            ))),
            ToleranceSpec::Quantile { q, .. } if !(q > 0.0 && q < 1.0) => Err(Error::Config(
                format!("quantile level must lie in (0,1), got {q}"),
            )),
            ToleranceSpec::Quantile { pilot, .. } if pilot < 100 => Err(Error::Config(format!(
                "pilot size must be at least 100, got {pilot}"
            ))),
            ToleranceSpec::Quantile { .. } => Ok(()),
        }
    }
}

/// Where proposals come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// θ from the prior, z from the model: the textbook algorithm.
    #[default]
    Prior,
    /// The model's restricted proposal; fails if the model has none.
    Localized,
    /// Localized when the model offers it, prior otherwise.
    Auto,
}

/// Draws processed between stop-condition checks.
pub const BATCH: u64 = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of simulations M. With `min_accepted` set this is the cap.
    pub draws: u64,
    pub tolerance: ToleranceSpec,
    pub seed: u64,
    pub workers: usize,
    pub sampler: Sampler,
    /// Stop at the first batch boundary where this many draws are accepted.
    pub min_accepted: Option<usize>,
}

impl RunConfig {
    pub fn fixed(draws: u64, epsilon: f64, seed: u64) -> Self {
        Self {
            draws,
            tolerance: ToleranceSpec::Fixed(epsilon),
            seed,
            workers: 1,
            sampler: Sampler::Prior,
            min_accepted: None,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn until_accepted(mut self, target: usize) -> Self {
        self.min_accepted = Some(target);
        self
    }
}

/// Tolerance returned by [`resolve_tolerance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedTolerance {
    pub epsilon: f64,
    pub warning: Option<RunWarning>,
}

/// Linear-interpolation quantile (`h = (N−1)q`) of unsorted data.
pub fn empirical_quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile level {q} outside [0,1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Turns a [`ToleranceSpec`] into a concrete ε.
///
/// Quantile pilots draw from the prior predictive using `rng` sequentially.
pub fn resolve_tolerance<M: GenerativeModel + ?Sized>(
    model: &M,
    observed: &SummaryVector,
    spec: ToleranceSpec,
    rng: &mut StreamRng,
) -> Result<ResolvedTolerance> {
    spec.validate()?;
    match spec {
        ToleranceSpec::Fixed(epsilon) => Ok(ResolvedTolerance {
            epsilon,
            warning: None,
        }),
        ToleranceSpec::Quantile { q, pilot } => {
            check_observed(model, observed)?;
            let distances: Vec<f64> = (0..pilot)
                .map(|_| {
                    let theta = model.prior_sample(rng);
                    let s = model.simulate_summary(&theta, rng);
                    distance_unchecked(observed.as_slice(), s.as_slice())
                })
                .collect();
            let first = distances[0];
            if distances.iter().all(|&d| d == first) {
                warn!("pilot distances are all equal to {first}");
                return Ok(ResolvedTolerance {
                    epsilon: first,
                    warning: Some(RunWarning::DegeneratePilot),
                });
            }
            Ok(ResolvedTolerance {
                epsilon: empirical_quantile(&distances, q)?,
                warning: None,
            })
        }
    }
}

fn check_observed<M: GenerativeModel + ?Sized>(model: &M, observed: &SummaryVector) -> Result<()> {
    if observed.dim() != model.summary_dim() {
        return Err(Error::Dimension {
            expected: model.summary_dim(),
            found: observed.dim(),
        });
    }
    Ok(())
}

/// Simulates the observed summary η(y) at `theta` from its own stream.
pub fn simulate_observed<M: GenerativeModel + ?Sized>(
    model: &M,
    theta: &ParameterPoint,
    seed: u64,
) -> SummaryVector {
    model.simulate_summary(theta, &mut stream(seed, Domain::Observed, 0))
}

/// Runs rejection ABC.
///
/// Draw `i` uses the stream `(seed, Draw, i)`, so the table is identical for
/// every worker count. A draw is accepted when its distance is `≤ ε`.
/// Pilot draws for a quantile tolerance come from the `(seed, Pilot, 0)`
/// stream.
pub fn run_rejection<M: GenerativeModel + ?Sized>(
    model: &M,
    observed: &SummaryVector,
    cfg: &RunConfig,
) -> Result<ReferenceTable> {
    check_observed(model, observed)?;
    if cfg.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let resolved = resolve_tolerance(
        model,
        observed,
        cfg.tolerance,
        &mut stream(cfg.seed, Domain::Pilot, 0),
    )?;
    let epsilon = resolved.epsilon;

    let local = match cfg.sampler {
        Sampler::Prior => None,
        Sampler::Localized => Some(model.localize(observed, epsilon).ok_or_else(|| {
            Error::Config("model offers no localized proposal at this tolerance".into())
        })?),
        Sampler::Auto => model.localize(observed, epsilon),
    };
    let proposal_mass = local.as_ref().map_or(1.0, |l| l.mass());
    let obs = observed.as_slice();

    let simulate_one = |i: u64| -> Option<AcceptedDraw> {
        let mut rng = stream(cfg.seed, Domain::Draw, i);
        let (theta, summary) = match &local {
            Some(l) => l.draw(&mut rng)?,
            None => {
                let theta = model.prior_sample(&mut rng);
                let summary = model.simulate_summary(&theta, &mut rng);
                (theta, summary)
            }
        };
        let distance = distance_unchecked(obs, summary.as_slice());
        (distance <= epsilon).then_some(AcceptedDraw {
            index: i,
            theta,
            summary,
            distance,
        })
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()?;
    let mut draws = Vec::new();
    let mut done = 0u64;
    pool.install(|| {
        while done < cfg.draws {
            let end = (done + BATCH).min(cfg.draws);
            let batch: Vec<AcceptedDraw> = (done..end)
                .into_par_iter()
                .filter_map(simulate_one)
                .collect();
            draws.extend(batch);
            done = end;
            if cfg.min_accepted.is_some_and(|t| draws.len() >= t) {
                break;
            }
        }
    });

    let warning = if done == 0 {
        warn!("rejection run with zero draws");
        Some(RunWarning::NoDraws)
    } else if draws.is_empty() {
        warn!("no draw accepted at ε={epsilon} after {done} simulations");
        Some(RunWarning::NoAcceptances)
    } else {
        resolved.warning
    };

    Ok(ReferenceTable {
        draws,
        total_simulated: done,
        proposal_mass,
        epsilon,
        observed_summary: observed.clone(),
        seed: cfg.seed,
        warning,
    })
}

/// Fraction of prior draws accepted, `|draws| / M`.
///
/// For localized runs M is the equivalent number of prior draws.
pub fn acceptance_rate(table: &ReferenceTable) -> Result<f64> {
    if table.total_simulated == 0 {
        return Err(Error::Undefined(
            "acceptance rate of a run with no simulations".into(),
        ));
    }
    Ok(table.draws.len() as f64 * table.proposal_mass / table.total_simulated as f64)
}

/// Monte Carlo standard error of [`acceptance_rate`] (binomial on proposals).
pub fn acceptance_rate_se(table: &ReferenceTable) -> Result<f64> {
    let m = table.total_simulated as f64;
    if m == 0.0 {
        return Err(Error::Undefined(
            "acceptance rate of a run with no simulations".into(),
        ));
    }
    let p = table.draws.len() as f64 / m;
    Ok(table.proposal_mass * (p * (1.0 - p) / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::euclidean_distance;
    use crate::models::UniformShapeModel;

    fn shape(n: usize, k0: usize) -> UniformShapeModel {
        UniformShapeModel::new(n, k0, 0.5).unwrap()
    }

    fn observed(m: &UniformShapeModel, seed: u64) -> SummaryVector {
        simulate_observed(m, &ParameterPoint::scalar(m.theta0), seed)
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(empirical_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&[1.0, 2.0, 3.0], 1.0).unwrap(), 3.0);
        assert_eq!(empirical_quantile(&[5.0], 0.3).unwrap(), 5.0);
        assert!(empirical_quantile(&[], 0.3).is_err());
    }

    #[test]
    fn fixed_tolerance_is_returned_unchanged() {
        let m = shape(100, 0);
        let obs = observed(&m, 1);
        let r = resolve_tolerance(
            &m,
            &obs,
            ToleranceSpec::Fixed(0.01),
            &mut stream(1, Domain::Pilot, 0),
        )
        .unwrap();
        assert_eq!(r.epsilon, 0.01);
        assert!(r.warning.is_none());
    }

    #[test]
    fn tolerance_spec_validation() {
        assert!(ToleranceSpec::Fixed(0.0).validate().is_err());
        assert!(ToleranceSpec::Quantile {
            q: 1.0,
            pilot: 1000
        }
        .validate()
        .is_err());
        assert!(ToleranceSpec::Quantile { q: 0.1, pilot: 99 }
            .validate()
            .is_err());
        assert!(ToleranceSpec::Quantile { q: 0.1, pilot: 100 }
            .validate()
            .is_ok());
    }

    #[test]
    fn infinite_tolerance_accepts_everything_uniformly() {
        let m = shape(100, 1);
        let obs = observed(&m, 2);
        let table = run_rejection(&m, &obs, &RunConfig::fixed(1000, f64::INFINITY, 3)).unwrap();
        assert_eq!(acceptance_rate(&table).unwrap(), 1.0);
        // KS against U(0,1); 1% critical value 1.63/√1000
        let mut t = table.theta_component(0);
        t.sort_by(f64::total_cmp);
        let d = t
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                ((i + 1) as f64 / 1000.0 - x)
                    .abs()
                    .max((x - i as f64 / 1000.0).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.63 / 1000f64.sqrt(), "KS {d}");
    }

    #[test]
    fn zero_draws_yield_flagged_empty_table() {
        let m = shape(100, 0);
        let obs = observed(&m, 2);
        let table = run_rejection(&m, &obs, &RunConfig::fixed(0, 0.1, 3)).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.warning, Some(RunWarning::NoDraws));
        assert!(matches!(acceptance_rate(&table), Err(Error::Undefined(_))));
    }

    #[test]
    fn no_acceptance_is_a_warning_not_an_error() {
        let m = shape(100, 2);
        let obs = observed(&m, 2);
        let table = run_rejection(&m, &obs, &RunConfig::fixed(100, 1e-9, 3)).unwrap();
        assert!(table.is_empty());
        assert_eq!(table.warning, Some(RunWarning::NoAcceptances));
        assert_eq!(acceptance_rate(&table).unwrap(), 0.0);
    }

    #[test]
    fn acceptance_rate_counts() {
        let m = shape(100, 0);
        let obs = observed(&m, 2);
        let mut table = run_rejection(&m, &obs, &RunConfig::fixed(1000, f64::INFINITY, 3)).unwrap();
        table.draws.truncate(50);
        assert_eq!(acceptance_rate(&table).unwrap(), 0.05);
    }

    #[test]
    fn stored_distances_are_exact_and_bounded() {
        let m = shape(200, 1);
        let obs = observed(&m, 4);
        let table = run_rejection(&m, &obs, &RunConfig::fixed(20_000, 0.05, 5)).unwrap();
        assert!(!table.is_empty());
        for d in &table.draws {
            assert_eq!(d.distance, euclidean_distance(&obs, &d.summary).unwrap());
            assert!(d.distance <= 0.05);
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let m = shape(500, 1);
        let obs = observed(&m, 6);
        let base = run_rejection(&m, &obs, &RunConfig::fixed(70_000, 0.05, 7)).unwrap();
        for workers in [2, 8] {
            let other = run_rejection(
                &m,
                &obs,
                &RunConfig::fixed(70_000, 0.05, 7).with_workers(workers),
            )
            .unwrap();
            assert_eq!(base, other, "workers={workers}");
        }
    }

    #[test]
    fn nested_tolerances_give_nested_accepted_sets() {
        let m = shape(500, 1);
        let obs = observed(&m, 8);
        let small = run_rejection(&m, &obs, &RunConfig::fixed(50_000, 0.03, 9)).unwrap();
        let large = run_rejection(&m, &obs, &RunConfig::fixed(50_000, 0.06, 9)).unwrap();
        assert!(small.len() < large.len());
        let big: std::collections::HashSet<u64> = large.draws.iter().map(|d| d.index).collect();
        assert!(small.draws.iter().all(|d| big.contains(&d.index)));
        assert_eq!(large.restrict(0.03).unwrap().draws, small.draws);
    }

    #[test]
    fn quantile_tolerance_hits_its_acceptance_level() {
        let m = shape(200, 1);
        let obs = observed(&m, 10);
        let q = 0.05;
        let mut cfg = RunConfig::fixed(40_000, 1.0, 11);
        cfg.tolerance = ToleranceSpec::Quantile { q, pilot: 20_000 };
        let table = run_rejection(&m, &obs, &cfg).unwrap();
        let rate = acceptance_rate(&table).unwrap();
        // binomial spread of the run plus the pilot's own quantile noise
        let bound =
            3.0 * (q * (1.0 - q) / 40_000.0).sqrt() + 3.0 * (q * (1.0 - q) / 20_000.0).sqrt();
        assert!((rate - q).abs() < bound, "rate {rate}");
    }

    #[test]
    fn min_accepted_stops_at_batch_boundary() {
        let m = shape(200, 0);
        let obs = observed(&m, 12);
        let cfg = RunConfig::fixed(10 * BATCH, 0.05, 13).until_accepted(10);
        let table = run_rejection(&m, &obs, &cfg).unwrap();
        assert_eq!(table.total_simulated, BATCH);
        assert!(table.len() >= 10);
    }

    #[test]
    fn localized_requires_support() {
        let m = shape(200, 0);
        let obs = observed(&m, 12);
        let cfg = RunConfig::fixed(100, f64::INFINITY, 13).with_sampler(Sampler::Localized);
        assert!(matches!(
            run_rejection(&m, &obs, &cfg),
            Err(Error::Config(_))
        ));
        let auto = RunConfig::fixed(100, f64::INFINITY, 13).with_sampler(Sampler::Auto);
        assert_eq!(run_rejection(&m, &obs, &auto).unwrap().proposal_mass, 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = shape(200, 2);
        let obs = SummaryVector::new(vec![0.5]).unwrap();
        assert!(matches!(
            run_rejection(&m, &obs, &RunConfig::fixed(10, 0.1, 1)),
            Err(Error::Dimension { .. })
        ));
    }
}

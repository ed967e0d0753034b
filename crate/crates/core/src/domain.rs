//! Domain types shared by every stage: parameter and summary vectors, the
//! generative-model contract, rate profiles and the reference table.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::StreamRng;

fn check_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config(format!(
            "{what} must have at least one entry"
        )));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{what} has non-finite entry {bad}")));
    }
    Ok(())
}

/// A point θ in the parameter space ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("parameter", &values)?;
        Ok(Self(values))
    }

    pub fn scalar(value: f64) -> Self {
        Self(vec![value])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// A summary statistic vector η(z) ∈ ℝ^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummaryVector(Vec<f64>);

impl SummaryVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite("summary", &values)?;
        Ok(Self(values))
    }

    /// Builds a summary without validation. Callers guarantee finiteness.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// ‖a − b‖₂.
pub fn euclidean_distance(a: &SummaryVector, b: &SummaryVector) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(distance_unchecked(a.as_slice(), b.as_slice()))
}

#[inline]
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-statistic convergence rates, limit map and slow/fast split.
///
/// Rates are power laws `v_nj = n^{p_j}`. The limit map is affine,
/// `b(θ) = offset + J θ`, which covers every model in this crate; its
/// gradient is `J` and the fast block is rows `k0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    rate_exponents: Vec<f64>,
    limit_offset: Vec<f64>,
    limit_jacobian: DMatrix<f64>,
    k0: usize,
}

impl RateProfile {
    pub fn new(
        rate_exponents: Vec<f64>,
        limit_offset: Vec<f64>,
        limit_jacobian: DMatrix<f64>,
        k0: usize,
    ) -> Result<Self> {
        let k = rate_exponents.len();
        if k == 0 {
            return Err(Error::Config(
                "rate profile needs at least one statistic".into(),
            ));
        }
        check_dim(k, limit_offset.len())?;
        check_dim(k, limit_jacobian.nrows())?;
        if rate_exponents.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!(
                "rates must be nondecreasing in the statistic index, got exponents {rate_exponents:?}"
            )));
        }
        if k0 >= k {
            return Err(Error::Config(format!(
                "split index k0={k0} must be below k={k}"
            )));
        }
        let d = limit_jacobian.ncols();
        if d == 0 {
            return Err(Error::Config(
                "parameter dimension must be at least 1".into(),
            ));
        }
        if k - k0 < d {
            return Err(Error::Rank(format!(
                "{} fast statistics cannot identify {d} parameters",
                k - k0
            )));
        }
        let profile = Self {
            rate_exponents,
            limit_offset,
            limit_jacobian,
            k0,
        };
        let fast = profile.gradient_fast();
        let sv = fast.clone().svd(false, false).singular_values;
        let max = sv.max();
        let min = sv.min();
        if !(max > 0.0) || min <= 1e-12 * max {
            return Err(Error::Rank(format!(
                "fast-statistic gradient is not of full column rank (singular values {:?})",
                sv.as_slice()
            )));
        }
        Ok(profile)
    }

    pub fn summary_dim(&self) -> usize {
        self.rate_exponents.len()
    }

    pub fn param_dim(&self) -> usize {
        self.limit_jacobian.ncols()
    }

    /// Number of slow statistics.
    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn rate_exponents(&self) -> &[f64] {
        &self.rate_exponents
    }

    /// `v_nj` for each statistic at dataset size `n`.
    pub fn rates(&self, n: usize) -> Vec<f64> {
        self.rate_exponents
            .iter()
            .map(|p| (n as f64).powf(*p))
            .collect()
    }

    /// Evaluates b(θ).
    pub fn limit(&self, theta: &ParameterPoint) -> Result<Vec<f64>> {
        check_dim(self.param_dim(), theta.dim())?;
        let t = nalgebra::DVector::from_column_slice(theta.as_slice());
        let v = &self.limit_jacobian * t;
        Ok(v.iter()
            .zip(&self.limit_offset)
            .map(|(a, b)| a + b)
            .collect())
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.limit_jacobian
    }

    /// ∇b₍₂₎, the `(k − k0) × d` gradient of the fast limits.
    pub fn gradient_fast(&self) -> DMatrix<f64> {
        let k = self.summary_dim();
        self.limit_jacobian.rows(self.k0, k - self.k0).into_owned()
    }
}

/// One accepted `(θ, η(z), distance)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedDraw {
    /// Position of the draw in the run's counter-based sequence.
    pub index: u64,
    pub theta: ParameterPoint,
    pub summary: SummaryVector,
    pub distance: f64,
}

/// Non-fatal conditions a run can end in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunWarning {
    NoDraws,
    NoAcceptances,
    DegeneratePilot,
}

/// Output of a rejection run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub draws: Vec<AcceptedDraw>,
    /// Number of simulations actually performed.
    pub total_simulated: u64,
    /// Prior-predictive probability of the region proposals were drawn from;
    /// 1 for plain prior sampling. Each proposal stands in for
    /// `1 / proposal_mass` prior draws.
    pub proposal_mass: f64,
    pub epsilon: f64,
    pub observed_summary: SummaryVector,
    pub seed: u64,
    pub warning: Option<RunWarning>,
}

impl ReferenceTable {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Number of prior draws the run is equivalent to.
    pub fn effective_draws(&self) -> f64 {
        self.total_simulated as f64 / self.proposal_mass
    }

    pub fn thetas(&self) -> Vec<ParameterPoint> {
        self.draws.iter().map(|d| d.theta.clone()).collect()
    }

    /// First coordinate of every accepted θ.
    pub fn theta_component(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.theta.as_slice()[j]).collect()
    }

    /// Keeps only draws within `epsilon`. Valid for any `epsilon` no larger
    /// than the tolerance the table was built with.
    pub fn restrict(&self, epsilon: f64) -> Result<ReferenceTable> {
        if !(epsilon > 0.0) || epsilon > self.epsilon {
            return Err(Error::Config(format!(
                "cannot restrict a table built at ε={} to ε={epsilon}",
                self.epsilon
            )));
        }
        let draws: Vec<_> = self
            .draws
            .iter()
            .filter(|d| d.distance <= epsilon)
            .cloned()
            .collect();
        let warning = if draws.is_empty() && self.total_simulated > 0 {
            Some(RunWarning::NoAcceptances)
        } else {
            self.warning
        };
        Ok(ReferenceTable {
            draws,
            epsilon,
            warning,
            observed_summary: self.observed_summary.clone(),
            ..*self
        })
    }
}

/// Generative model contract: prior, simulator and summary map.
///
/// Implementations are stateless apart from the generator passed in, so a
/// model can be shared freely across worker threads.
pub trait GenerativeModel: Sync {
    fn param_dim(&self) -> usize;
    fn summary_dim(&self) -> usize;
    /// Dataset size n.
    fn sample_size(&self) -> usize;

    fn prior_sample(&self, rng: &mut StreamRng) -> ParameterPoint;
    fn prior_density(&self, theta: &ParameterPoint) -> f64;

    /// Draws a full dataset of `sample_size()` observations.
    fn simulate(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> Vec<f64>;
    fn summarize(&self, data: &[f64]) -> Result<SummaryVector>;

    /// Draws η(z) for z ~ P_θ. Models may override this with an exact
    /// shortcut that never materializes the dataset.
    fn simulate_summary(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> SummaryVector {
        let data = self.simulate(theta, rng);
        self.summarize(&data)
            .expect("simulate must produce datasets summarize accepts")
    }

    /// Optional restricted proposal covering every `(θ, η)` within
    /// `epsilon` of `observed`.
    fn localize(
        &self,
        _observed: &SummaryVector,
        _epsilon: f64,
    ) -> Option<Box<dyn LocalProposal + '_>> {
        None
    }
}

/// Exact sampler for the prior predictive restricted to a region that
/// contains the acceptance ball.
///
/// `draw` returns `None` when the proposal is thinned away; such calls still
/// count as simulations. Conditioned on `Some`, the pair has the prior
/// predictive law restricted to the region, whose prior-predictive
/// probability is `mass()`.
pub trait LocalProposal: Sync {
    fn mass(&self) -> f64;
    fn draw(&self, rng: &mut StreamRng) -> Option<(ParameterPoint, SummaryVector)>;
}

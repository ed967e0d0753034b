//! Uniform-location model families and their summary statistics.
//!
//! * [`UniformShapeModel`]: `y_i ~ U(θ−½, θ+½)`, summaries are the first
//!   `k0` raw observations plus the midrange of the rest.
//! * [`UniformRiskModel`]: `X_i ~ U(θ, θ+1)`, summaries are the mean of the
//!   first √n observations and the overall minimum.
//! * [`Example1Model`]: `z_i ~ U(θ−½, θ+½)`, summaries are `k1` raw
//!   observations, the mean and the maximum.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{GenerativeModel, LocalProposal, ParameterPoint, RateProfile, SummaryVector};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Tail exponent for localized windows: the probability that a draw outside
/// the window could have been accepted is at most `2·e^{-LOCAL_TAIL}`.
const LOCAL_TAIL: f64 = 80.0;

/// Uniform draw on (0, 1].
#[inline]
fn open_unit(rng: &mut StreamRng) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `1 − V^{1/m}` for `V ~ U(0,1]`, i.e. a Beta(1, m) variate, computed
/// without cancellation for large `m`.
#[inline]
fn beta_one(m: f64, rng: &mut StreamRng) -> f64 {
    -(open_unit(rng).ln() / m).exp_m1()
}

/// Exact `(min, max)` of `m ≥ 1` iid U(0,1) variables in O(1).
pub fn uniform_extremes(m: usize, rng: &mut StreamRng) -> (f64, f64) {
    assert!(m >= 1, "need at least one observation");
    let max = 1.0 - beta_one(m as f64, rng);
    if m == 1 {
        return (max, max);
    }
    // given the max, the other m−1 are iid U(0, max)
    let min = max * beta_one((m - 1) as f64, rng);
    (min, max)
}

fn midrange(data: &[f64]) -> f64 {
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    0.5 * (lo + hi)
}

/// `(y_1, …, y_{k0}, midrange(y_{k0+1..n}))`.
pub fn summarize_uniform_shape(data: &[f64], k0: usize) -> Result<SummaryVector> {
    if data.len() <= k0 {
        return Err(Error::Dimension {
            expected: k0 + 1,
            found: data.len(),
        });
    }
    let mut s = Vec::with_capacity(k0 + 1);
    s.extend_from_slice(&data[..k0]);
    s.push(midrange(&data[k0..]));
    SummaryVector::new(s)
}

/// `(mean of the first √n observations, minimum of all n)`.
pub fn summarize_uniform_risk(data: &[f64]) -> Result<SummaryVector> {
    let root = exact_sqrt(data.len()).ok_or_else(|| {
        Error::Config(format!(
            "dataset length {} is not a perfect square",
            data.len()
        ))
    })?;
    let s1 = data[..root].iter().sum::<f64>() / root as f64;
    let s2 = data.iter().copied().fold(f64::INFINITY, f64::min);
    SummaryVector::new(vec![s1, s2])
}

fn exact_sqrt(n: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

fn uniform_density(x: f64, lo: f64, hi: f64) -> f64 {
    if (lo..=hi).contains(&x) {
        1.0 / (hi - lo)
    } else {
        0.0
    }
}

/// Location model with `k0` non-converging raw observations and a midrange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformShapeModel {
    pub n: usize,
    pub k0: usize,
    pub theta0: f64,
}

impl UniformShapeModel {
    pub fn new(n: usize, k0: usize, theta0: f64) -> Result<Self> {
        if n <= k0 {
            return Err(Error::Config(format!("n={n} must exceed k0={k0}")));
        }
        if !(theta0 > 0.0 && theta0 < 1.0) {
            return Err(Error::Config(format!(
                "theta0={theta0} must lie inside the prior support (0,1)"
            )));
        }
        Ok(Self { n, k0, theta0 })
    }

    pub fn rate_profile(&self) -> RateProfile {
        let k = self.k0 + 1;
        let mut exponents = vec![0.0; self.k0];
        exponents.push(1.0);
        RateProfile::new(
            exponents,
            vec![0.0; k],
            DMatrix::from_element(k, 1, 1.0),
            self.k0,
        )
        .expect("shape-model profile is valid")
    }

    fn midrange_draw(&self, theta: f64, rng: &mut StreamRng) -> f64 {
        let (lo, hi) = uniform_extremes(self.n - self.k0, rng);
        theta - 0.5 + 0.5 * (lo + hi)
    }
}

impl GenerativeModel for UniformShapeModel {
    fn param_dim(&self) -> usize {
        1
    }
    fn summary_dim(&self) -> usize {
        self.k0 + 1
    }
    fn sample_size(&self) -> usize {
        self.n
    }

    fn prior_sample(&self, rng: &mut StreamRng) -> ParameterPoint {
        ParameterPoint::scalar(rng.random::<f64>())
    }

    fn prior_density(&self, theta: &ParameterPoint) -> f64 {
        uniform_density(theta.as_slice()[0], 0.0, 1.0)
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> Vec<f64> {
        let t = theta.as_slice()[0];
        (0..self.n).map(|_| t - 0.5 + rng.random::<f64>()).collect()
    }

    fn summarize(&self, data: &[f64]) -> Result<SummaryVector> {
        if data.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: data.len(),
            });
        }
        summarize_uniform_shape(data, self.k0)
    }

    fn simulate_summary(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> SummaryVector {
        let t = theta.as_slice()[0];
        let mut s = Vec::with_capacity(self.k0 + 1);
        for _ in 0..self.k0 {
            s.push(t - 0.5 + rng.random::<f64>());
        }
        s.push(self.midrange_draw(t, rng));
        SummaryVector::from_raw(s)
    }

    fn localize(
        &self,
        observed: &SummaryVector,
        epsilon: f64,
    ) -> Option<Box<dyn LocalProposal + '_>> {
        if !(epsilon > 0.0 && epsilon < 0.5) || observed.dim() != self.k0 + 1 {
            return None;
        }
        let obs = observed.as_slice();
        // |mid − θ| > δ has probability ≤ 2(1−2δ)^m ≤ 2e^{−2mδ}
        let delta = LOCAL_TAIL / (2.0 * (self.n - self.k0) as f64);
        let center = obs[self.k0];
        let lo = (center - epsilon - delta).max(0.0);
        let hi = (center + epsilon + delta).min(1.0);
        let width = (hi - lo).max(0.0);
        Some(Box::new(ShapeLocal {
            model: *self,
            theta_lo: lo,
            theta_width: width,
            slow_centers: obs[..self.k0].to_vec(),
            epsilon,
            mass: width * (2.0 * epsilon).powi(self.k0 as i32),
        }))
    }
}

struct ShapeLocal {
    model: UniformShapeModel,
    theta_lo: f64,
    theta_width: f64,
    slow_centers: Vec<f64>,
    epsilon: f64,
    mass: f64,
}

impl LocalProposal for ShapeLocal {
    fn mass(&self) -> f64 {
        self.mass
    }

    fn draw(&self, rng: &mut StreamRng) -> Option<(ParameterPoint, SummaryVector)> {
        if self.theta_width <= 0.0 {
            return None;
        }
        let t = self.theta_lo + self.theta_width * rng.random::<f64>();
        let mut keep = 1.0;
        let mut spans = Vec::with_capacity(self.slow_centers.len());
        for &y in &self.slow_centers {
            let lo = (y - self.epsilon).max(t - 0.5);
            let hi = (y + self.epsilon).min(t + 0.5);
            let len = (hi - lo).max(0.0);
            keep *= len / (2.0 * self.epsilon);
            spans.push((lo, len));
        }
        if rng.random::<f64>() >= keep {
            return None;
        }
        let mut s: Vec<f64> = spans
            .iter()
            .map(|&(lo, len)| lo + len * rng.random::<f64>())
            .collect();
        s.push(self.model.midrange_draw(t, rng));
        Some((ParameterPoint::scalar(t), SummaryVector::from_raw(s)))
    }
}

/// Location model `X_i ~ U(θ, θ+1)` with a √n-mean and the minimum.
///
/// The prior is `U(θ0 − ½, θ0 + ½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRiskModel {
    pub n: usize,
    pub theta0: f64,
    root: usize,
}

impl UniformRiskModel {
    pub fn new(n: usize, theta0: f64) -> Result<Self> {
        let root = exact_sqrt(n)
            .ok_or_else(|| Error::Config(format!("n={n} must be a perfect square")))?;
        if !theta0.is_finite() {
            return Err(Error::Config("theta0 must be finite".into()));
        }
        Ok(Self { n, theta0, root })
    }

    pub fn rate_profile(&self) -> RateProfile {
        RateProfile::new(
            vec![0.25, 1.0],
            vec![0.5, 0.0],
            DMatrix::from_element(2, 1, 1.0),
            1,
        )
        .expect("risk-model profile is valid")
    }

    fn prior_bounds(&self) -> (f64, f64) {
        (self.theta0 - 0.5, self.theta0 + 0.5)
    }

    fn summary_from(&self, t: f64, rng: &mut StreamRng) -> SummaryVector {
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for _ in 0..self.root {
            let u = rng.random::<f64>();
            sum += u;
            min = min.min(u);
        }
        let rest = self.n - self.root;
        if rest > 0 {
            min = min.min(beta_one(rest as f64, rng));
        }
        SummaryVector::from_raw(vec![t + sum / self.root as f64, t + min])
    }
}

impl GenerativeModel for UniformRiskModel {
    fn param_dim(&self) -> usize {
        1
    }
    fn summary_dim(&self) -> usize {
        2
    }
    fn sample_size(&self) -> usize {
        self.n
    }

    fn prior_sample(&self, rng: &mut StreamRng) -> ParameterPoint {
        let (lo, _) = self.prior_bounds();
        ParameterPoint::scalar(lo + rng.random::<f64>())
    }

    fn prior_density(&self, theta: &ParameterPoint) -> f64 {
        let (lo, hi) = self.prior_bounds();
        uniform_density(theta.as_slice()[0], lo, hi)
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> Vec<f64> {
        let t = theta.as_slice()[0];
        (0..self.n).map(|_| t + rng.random::<f64>()).collect()
    }

    fn summarize(&self, data: &[f64]) -> Result<SummaryVector> {
        if data.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: data.len(),
            });
        }
        summarize_uniform_risk(data)
    }

    fn simulate_summary(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> SummaryVector {
        self.summary_from(theta.as_slice()[0], rng)
    }

    fn localize(
        &self,
        observed: &SummaryVector,
        epsilon: f64,
    ) -> Option<Box<dyn LocalProposal + '_>> {
        if !(epsilon > 0.0 && epsilon < 0.5) || observed.dim() != 2 {
            return None;
        }
        // min − θ > δ has probability (1−δ)^n ≤ e^{−nδ}
        let delta = LOCAL_TAIL / self.n as f64;
        let s2 = observed.as_slice()[1];
        let (plo, phi) = self.prior_bounds();
        let lo = (s2 - epsilon - delta).max(plo);
        let hi = (s2 + epsilon).min(phi);
        let width = (hi - lo).max(0.0);
        Some(Box::new(RiskLocal {
            model: *self,
            lo,
            width,
        }))
    }
}

struct RiskLocal {
    model: UniformRiskModel,
    lo: f64,
    width: f64,
}

impl LocalProposal for RiskLocal {
    fn mass(&self) -> f64 {
        // prior density is 1 on a unit-width support
        self.width
    }

    fn draw(&self, rng: &mut StreamRng) -> Option<(ParameterPoint, SummaryVector)> {
        if self.width <= 0.0 {
            return None;
        }
        let t = self.lo + self.width * rng.random::<f64>();
        Some((ParameterPoint::scalar(t), self.model.summary_from(t, rng)))
    }
}

/// Which tolerance regime an [`Example1Model`] is analysed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// `1/n ≪ ε ≪ 1/√n`: the mean counts as slow.
    One,
    /// `1/√n ≪ ε ≪ 1`: the mean counts as fast.
    Two,
}

/// Toy model with `k1` raw observations, the mean and the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Model {
    pub n: usize,
    pub k1: usize,
    pub scenario: Scenario,
}

impl Example1Model {
    pub fn new(n: usize, k1: usize, scenario: Scenario) -> Result<Self> {
        if n <= k1 {
            return Err(Error::Config(format!("n={n} must exceed k1={k1}")));
        }
        Ok(Self { n, k1, scenario })
    }

    pub fn rate_profile(&self) -> RateProfile {
        let k = self.k1 + 2;
        let mut exponents = vec![0.0; self.k1];
        exponents.extend([0.5, 1.0]);
        let mut offset = vec![0.0; k];
        offset[k - 1] = 0.5;
        let mut jac = DMatrix::zeros(k, 1);
        jac[(k - 2, 0)] = 1.0;
        jac[(k - 1, 0)] = 1.0;
        let k0 = match self.scenario {
            Scenario::One => self.k1 + 1,
            Scenario::Two => self.k1,
        };
        RateProfile::new(exponents, offset, jac, k0).expect("example-1 profile is valid")
    }
}

impl GenerativeModel for Example1Model {
    fn param_dim(&self) -> usize {
        1
    }
    fn summary_dim(&self) -> usize {
        self.k1 + 2
    }
    fn sample_size(&self) -> usize {
        self.n
    }

    fn prior_sample(&self, rng: &mut StreamRng) -> ParameterPoint {
        ParameterPoint::scalar(rng.random::<f64>())
    }

    fn prior_density(&self, theta: &ParameterPoint) -> f64 {
        uniform_density(theta.as_slice()[0], 0.0, 1.0)
    }

    fn simulate(&self, theta: &ParameterPoint, rng: &mut StreamRng) -> Vec<f64> {
        let t = theta.as_slice()[0];
        (0..self.n).map(|_| t - 0.5 + rng.random::<f64>()).collect()
    }

    fn summarize(&self, data: &[f64]) -> Result<SummaryVector> {
        if data.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                found: data.len(),
            });
        }
        let mut s = data[..self.k1].to_vec();
        s.push(data.iter().sum::<f64>() / data.len() as f64);
        s.push(data.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        SummaryVector::new(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use proptest::prelude::*;

    #[test]
    fn shape_summary_examples() {
        let s = summarize_uniform_shape(&[0.3, 0.1, 0.9], 1).unwrap();
        assert_eq!(s.as_slice(), &[0.3, 0.5]);
        let s = summarize_uniform_shape(&[0.2, 0.8], 0).unwrap();
        assert_eq!(s.as_slice(), &[0.5]);
        assert!(matches!(
            summarize_uniform_shape(&[0.2, 0.8], 2),
            Err(Error::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn shape_summary_is_shift_equivariant(
            data in prop::collection::vec(-1.0..1.0f64, 4..40),
            c in -5.0..5.0f64,
        ) {
            let k0 = 2;
            let base = summarize_uniform_shape(&data, k0).unwrap();
            let shifted: Vec<f64> = data.iter().map(|x| x + c).collect();
            let moved = summarize_uniform_shape(&shifted, k0).unwrap();
            for (a, b) in base.as_slice().iter().zip(moved.as_slice()) {
                prop_assert!((a + c - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn risk_summary_examples() {
        let s = summarize_uniform_risk(&[1.0, 3.0, 0.5, 2.0]).unwrap();
        assert_eq!(s.as_slice(), &[2.0, 0.5]);
        let s = summarize_uniform_risk(&[0.7; 9]).unwrap();
        assert!((s.as_slice()[0] - 0.7).abs() < 1e-15);
        assert_eq!(s.as_slice()[1], 0.7);
        assert!(matches!(
            summarize_uniform_risk(&[1.0, 2.0, 3.0]),
            Err(Error::Config(_))
        ));
        assert!(UniformRiskModel::new(10, 0.5).is_err());
    }

    #[test]
    fn risk_min_has_order_statistic_mean() {
        // E[min of n U(θ, θ+1)] = θ + 1/(n+1)
        let model = UniformRiskModel::new(100, 0.3).unwrap();
        let theta = ParameterPoint::scalar(0.3);
        let reps = 40_000;
        let mins: Vec<f64> = (0..reps)
            .map(|i| {
                model
                    .simulate_summary(&theta, &mut stream(1, Domain::Draw, i))
                    .as_slice()[1]
            })
            .collect();
        let mean = mins.iter().sum::<f64>() / reps as f64;
        let var = mins.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        let expected = 0.3 + 1.0 / 101.0;
        assert!(
            (mean - expected).abs() < 4.0 * se,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn rate_profile_examples() {
        let p = UniformShapeModel::new(10_000, 2, 0.5)
            .unwrap()
            .rate_profile();
        assert_eq!(p.rates(10_000), vec![1.0, 1.0, 10_000.0]);
        assert_eq!(p.k0(), 2);
        assert_eq!(p.gradient_fast()[(0, 0)], 1.0);

        let n = 10_000;
        let p = Example1Model::new(n, 0, Scenario::One)
            .unwrap()
            .rate_profile();
        assert_eq!(p.rates(n), vec![100.0, 10_000.0]);
        assert_eq!(p.k0(), 1);

        let p = UniformRiskModel::new(n, 0.5).unwrap().rate_profile();
        let r = p.rates(n);
        assert!((r[0] - 10.0).abs() < 1e-12 && r[1] == 10_000.0);
        assert_eq!(p.k0(), 1);
    }

    #[test]
    fn example1_limits() {
        let m = Example1Model::new(50, 2, Scenario::Two).unwrap();
        let p = m.rate_profile();
        assert_eq!(p.k0(), 2);
        assert_eq!(
            p.limit(&ParameterPoint::scalar(0.25)).unwrap(),
            vec![0.0, 0.0, 0.25, 0.75]
        );
        assert_eq!(p.gradient_fast().shape(), (2, 1));
    }

    #[test]
    fn midrange_mean_matches_limit_map() {
        let model = UniformShapeModel::new(1000, 2, 0.5).unwrap();
        let theta = ParameterPoint::scalar(0.37);
        let reps = 10_000u64;
        let mids: Vec<f64> = (0..reps)
            .map(|i| {
                model
                    .simulate_summary(&theta, &mut stream(2, Domain::Draw, i))
                    .as_slice()[2]
            })
            .collect();
        let mean = mids.iter().sum::<f64>() / reps as f64;
        let var = mids.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - 0.37).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn example1_mean_has_clt_variance() {
        // √n(mean − θ) → N(0, 1/12)
        let n = 10_000;
        let model = Example1Model::new(n, 0, Scenario::One).unwrap();
        let theta = ParameterPoint::scalar(0.4);
        let reps = 20_000u64;
        let scaled: Vec<f64> = (0..reps)
            .map(|i| {
                let s = model.simulate_summary(&theta, &mut stream(3, Domain::Draw, i));
                (n as f64).sqrt() * (s.as_slice()[0] - 0.4)
            })
            .collect();
        let mean = scaled.iter().sum::<f64>() / reps as f64;
        let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!((var * 12.0 - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn simulated_data_stays_in_support() {
        let mut rng = stream(4, Domain::Draw, 0);
        let shape = UniformShapeModel::new(500, 1, 0.5).unwrap();
        assert!(shape
            .simulate(&ParameterPoint::scalar(0.2), &mut rng)
            .iter()
            .all(|&y| (-0.3..0.7).contains(&y)));
        let risk = UniformRiskModel::new(400, 0.5).unwrap();
        assert!(risk
            .simulate(&ParameterPoint::scalar(0.2), &mut rng)
            .iter()
            .all(|&x| (0.2..1.2).contains(&x)));
        for i in 0..1000 {
            let s = shape.simulate_summary(
                &ParameterPoint::scalar(0.2),
                &mut stream(4, Domain::Draw, i),
            );
            assert!(s.as_slice().iter().all(|&y| (-0.3..0.7).contains(&y)));
        }
    }

    fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn exact_shortcut_matches_full_simulation() {
        // two-sample KS at 4000 vs 4000: 1% critical value ≈ 1.63·sqrt(2/4000) ≈ 0.036
        let shape = UniformShapeModel::new(300, 1, 0.5).unwrap();
        let risk = UniformRiskModel::new(400, 0.5).unwrap();
        let theta = ParameterPoint::scalar(0.45);
        let reps = 4000u64;
        for (label, m) in [("shape", &shape as &dyn GenerativeModel), ("risk", &risk)] {
            for coord in 0..m.summary_dim() {
                let fast: Vec<f64> = (0..reps)
                    .map(|i| {
                        m.simulate_summary(&theta, &mut stream(5, Domain::Draw, i))
                            .as_slice()[coord]
                    })
                    .collect();
                let full: Vec<f64> = (0..reps)
                    .map(|i| {
                        let data = m.simulate(&theta, &mut stream(6, Domain::Draw, i));
                        m.summarize(&data).unwrap().as_slice()[coord]
                    })
                    .collect();
                let d = ks_statistic(fast, full);
                assert!(d < 0.036, "{label} coordinate {coord}: KS {d}");
            }
        }
    }

    #[test]
    fn extremes_are_ordered() {
        for i in 0..1000 {
            let mut rng = stream(9, Domain::Draw, i);
            let (lo, hi) = uniform_extremes(1_000_000, &mut rng);
            assert!(0.0 <= lo && lo <= hi && hi <= 1.0);
        }
        let (lo, hi) = uniform_extremes(1, &mut stream(9, Domain::Draw, 0));
        assert_eq!(lo, hi);
    }
}

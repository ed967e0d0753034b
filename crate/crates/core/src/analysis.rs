//! Density estimates, discrepancies, posterior risk, power-law fits and the
//! brute-force grid oracle.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{distance_unchecked, GenerativeModel, ParameterPoint, SummaryVector};
use crate::error::{check_dim, Error, Result};
use crate::rng::{stream, Domain};
use crate::theory::TheoreticalPosterior;

/// Piecewise-constant density on equal-width bins.
///
/// `grid` holds bin centers; for oracle output it holds the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bin_width: f64,
}

const SUBSAMPLES: usize = 16;

impl DensityEstimate {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.bin_width
    }

    pub fn lower(&self) -> f64 {
        self.grid[0] - 0.5 * self.bin_width
    }

    pub fn upper(&self) -> f64 {
        self.grid[self.grid.len() - 1] + 0.5 * self.bin_width
    }

    /// Histogram value at `x`; zero outside the binned range.
    pub fn step_at(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let i = ((x - self.lower()) / self.bin_width).floor() as usize;
        self.values[i.min(self.values.len() - 1)]
    }

    /// Linear interpolation between grid points, flat to the outer bin
    /// edges and zero beyond.
    pub fn linear_at(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let last = self.grid.len() - 1;
        if x <= self.grid[0] {
            return self.values[0];
        }
        if x >= self.grid[last] {
            return self.values[last];
        }
        let pos = (x - self.grid[0]) / self.bin_width;
        let i = (pos.floor() as usize).min(last - 1);
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Normalized histogram on `bins` equal-width bins spanning `[min, max]`.
pub fn estimate_density(samples: &[f64], bins: usize) -> Result<DensityEstimate> {
    check_histogram_input(samples, bins)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Err(Error::Degenerate(format!(
            "all {} samples equal {lo}",
            samples.len()
        )));
    }
    histogram(samples, lo, hi, bins)
}

/// Normalized histogram on a fixed range; every sample must fall inside it.
pub fn estimate_density_on(
    samples: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<DensityEstimate> {
    check_histogram_input(samples, bins)?;
    if !(hi > lo) {
        return Err(Error::Config(format!("empty histogram range [{lo}, {hi}]")));
    }
    if let Some(x) = samples.iter().find(|&&x| x < lo || x > hi) {
        return Err(Error::Domain(format!(
            "sample {x} outside histogram range [{lo}, {hi}]"
        )));
    }
    histogram(samples, lo, hi, bins)
}

fn check_histogram_input(samples: &[f64], bins: usize) -> Result<()> {
    if samples.len() < 100 {
        return Err(Error::InsufficientData {
            needed: 100,
            found: samples.len(),
        });
    }
    if bins < 10 {
        return Err(Error::Config(format!("need at least 10 bins, got {bins}")));
    }
    Ok(())
}

fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<DensityEstimate> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let i = ((x - lo) / width).floor() as usize;
        counts[i.min(bins - 1)] += 1;
    }
    let scale = 1.0 / (samples.len() as f64 * width);
    Ok(DensityEstimate {
        grid: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        values: counts.iter().map(|&c| c as f64 * scale).collect(),
        bin_width: width,
    })
}

/// L1 distance between a histogram and a 1-d theoretical density.
///
/// The density is evaluated at bin centers; theoretical mass outside the
/// histogram range is added in full.
pub fn l1_discrepancy(estimate: &DensityEstimate, tp: &TheoreticalPosterior) -> Result<f64> {
    check_dim(1, tp.dim())?;
    let inside: f64 = estimate
        .grid
        .iter()
        .zip(&estimate.values)
        .map(|(&c, &v)| (v - tp.density_at(&[c])).abs())
        .sum::<f64>()
        * estimate.bin_width;
    let covered = tp.cdf_1d(estimate.upper())? - tp.cdf_1d(estimate.lower())?;
    Ok(inside + (1.0 - covered).max(0.0))
}

/// L1 distance between a histogram and a gridded reference density
/// (linearly interpolated), including reference mass outside the histogram.
pub fn l1_between(estimate: &DensityEstimate, reference: &DensityEstimate) -> f64 {
    let w = estimate.bin_width / SUBSAMPLES as f64;
    let mut diff = 0.0;
    let mut covered = 0.0;
    for (&c, &v) in estimate.grid.iter().zip(&estimate.values) {
        let left = c - 0.5 * estimate.bin_width;
        for s in 0..SUBSAMPLES {
            let r = reference.linear_at(left + (s as f64 + 0.5) * w);
            diff += (v - r).abs() * w;
            covered += r * w;
        }
    }
    diff + (reference.total_mass() - covered).max(0.0)
}

/// `√(mean ‖θ − θ0‖²)`.
pub fn posterior_risk(samples: &[ParameterPoint], theta0: &ParameterPoint) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            found: 0,
        });
    }
    let t0 = theta0.as_slice();
    let mut total = 0.0;
    for s in samples {
        check_dim(t0.len(), s.dim())?;
        total += s
            .as_slice()
            .iter()
            .zip(t0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok((total / samples.len() as f64).sqrt())
}

/// OLS line in log10–log10 space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
}

fn log_points(points: &[(f64, f64)], needed: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if points.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            found: points.len(),
        });
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Domain(format!(
            "log-log fit needs positive values, got {p:?}"
        )));
    }
    Ok(points.iter().map(|(x, y)| (x.log10(), y.log10())).unzip())
}

fn least_squares(design: DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let coef = design
        .clone()
        .svd(true, true)
        .solve(y, 1e-13)
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let sse = (design * &coef - y).norm_squared();
    Ok((coef, sse))
}

fn line_fit(x: &[f64], y: &[f64]) -> Result<(LogLogFit, f64)> {
    let design = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let (c, sse) = least_squares(design, &DVector::from_column_slice(y))?;
    Ok((
        LogLogFit {
            slope: c[1],
            intercept: c[0],
        },
        sse,
    ))
}

/// OLS fit of `log10 y` on `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    let (x, y) = log_points(points, 3)?;
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::DegenerateDesign("all x values are equal".into()));
    }
    Ok(line_fit(&x, &y)?.0)
}

/// Continuous two-segment line in log10–log10 space.
///
/// `y = intercept + slope_left·x + (slope_right − slope_left)·(x − breakpoint)₊`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentedFit {
    pub slope_left: f64,
    pub slope_right: f64,
    /// In log10 x units.
    pub breakpoint: f64,
    pub intercept: f64,
    pub sse: f64,
    /// SSE of the best single line on the same points.
    pub sse_single: f64,
    /// Spacing of the final breakpoint search grid.
    pub resolution: f64,
}

impl SegmentedFit {
    pub fn predict_log(&self, x: f64) -> f64 {
        self.intercept
            + self.slope_left * x
            + (self.slope_right - self.slope_left) * (x - self.breakpoint).max(0.0)
    }

    /// The segment slope of larger magnitude.
    pub fn steep_slope(&self) -> f64 {
        if self.slope_right.abs() >= self.slope_left.abs() {
            self.slope_right
        } else {
            self.slope_left
        }
    }
}

const REFINEMENT_POINTS: usize = 50;

fn hinge_fit(x: &[f64], y: &DVector<f64>, c: f64) -> Result<(DVector<f64>, f64)> {
    let design = DMatrix::from_fn(x.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => x[i],
        _ => (x[i] - c).max(0.0),
    });
    least_squares(design, y)
}

/// Continuous two-piece fit with an exhaustive breakpoint search.
///
/// Candidates are midpoints between consecutive sorted x values that leave
/// at least two points on each side; the best candidate is then refined on
/// a 50-point grid spanning its neighbouring candidates.
pub fn segmented_slope(points: &[(f64, f64)]) -> Result<SegmentedFit> {
    let (x, y) = log_points(points, 6)?;
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys = DVector::from_iterator(xs.len(), order.iter().map(|&i| y[i]));
    let n = xs.len();

    let mut candidates: Vec<f64> = (1..n - 2)
        .filter(|&i| xs[i + 1] > xs[i])
        .map(|i| 0.5 * (xs[i] + xs[i + 1]))
        .collect();
    candidates.dedup();
    if candidates.is_empty() {
        return Err(Error::DegenerateDesign(
            "no admissible breakpoint between distinct x values".into(),
        ));
    }

    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    fn consider(
        best: &mut Option<(f64, DVector<f64>, f64)>,
        xs: &[f64],
        ys: &DVector<f64>,
        c: f64,
    ) -> Result<()> {
        let (coef, sse) = hinge_fit(xs, ys, c)?;
        if best.as_ref().is_none_or(|b| sse < b.2) {
            *best = Some((c, coef, sse));
        }
        Ok(())
    }
    for &c in &candidates {
        consider(&mut best, &xs, &ys, c)?;
    }
    let coarse = best.as_ref().expect("at least one candidate").0;
    let pos = candidates
        .iter()
        .position(|&c| c == coarse)
        .expect("coarse is a candidate");
    let lo = if pos == 0 { xs[1] } else { candidates[pos - 1] };
    let hi = if pos + 1 == candidates.len() {
        xs[n - 2]
    } else {
        candidates[pos + 1]
    };
    let resolution = (hi - lo) / (REFINEMENT_POINTS - 1) as f64;
    for i in 0..REFINEMENT_POINTS {
        consider(&mut best, &xs, &ys, lo + i as f64 * resolution)?;
    }
    let (breakpoint, coef, sse) = best.expect("at least one candidate");
    let (_, sse_single) = line_fit(&xs, ys.as_slice())?;
    Ok(SegmentedFit {
        slope_left: coef[1],
        slope_right: coef[1] + coef[2],
        breakpoint,
        intercept: coef[0],
        sse: sse.min(sse_single),
        sse_single,
        resolution,
    })
}

/// Which posterior a risk curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskKind {
    Vanilla,
    Adjusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    pub epsilon: f64,
    pub risk: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub kind: RiskKind,
    pub points: Vec<RiskPoint>,
}

impl RiskCurve {
    pub fn new(kind: RiskKind, points: Vec<RiskPoint>) -> Result<Self> {
        if points.windows(2).any(|w| !(w[1].epsilon < w[0].epsilon)) {
            return Err(Error::Config(
                "risk-curve tolerances must be strictly decreasing".into(),
            ));
        }
        if let Some(p) = points.iter().find(|p| !(p.risk >= 0.0)) {
            return Err(Error::Domain(format!("negative or NaN risk {p:?}")));
        }
        Ok(Self { kind, points })
    }

    pub fn log_points(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.epsilon, p.risk)).collect()
    }
}

/// Monte Carlo estimates of `P_θ(‖η(z) − η(y)‖ ≤ ε)` at each grid point.
///
/// Grid point `i` uses the stream `(seed, Oracle, i)`.
pub fn acceptance_probabilities<M: GenerativeModel + ?Sized>(
    model: &M,
    observed: &SummaryVector,
    epsilon: f64,
    grid: &[f64],
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<f64>> {
    check_dim(1, model.param_dim())?;
    check_dim(model.summary_dim(), observed.dim())?;
    if reps < 1000 {
        return Err(Error::Config(format!(
            "need at least 1000 replicates per grid point, got {reps}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "tolerance must be positive, got {epsilon}"
        )));
    }
    let obs = observed.as_slice();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;
    Ok(pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &t)| {
                let theta = ParameterPoint::scalar(t);
                let mut rng = stream(seed, Domain::Oracle, i as u64);
                let hits = (0..reps)
                    .filter(|_| {
                        let s = model.simulate_summary(&theta, &mut rng);
                        distance_unchecked(obs, s.as_slice()) <= epsilon
                    })
                    .count();
                hits as f64 / reps as f64
            })
            .collect()
    }))
}

fn check_grid(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: grid.len(),
        });
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(Error::Config("grid must be ascending".into()));
    }
    for (i, &g) in grid.iter().enumerate() {
        if (g - (grid[0] + i as f64 * step)).abs() > 1e-9 * step.max(g.abs()) {
            return Err(Error::Config("grid must be equally spaced".into()));
        }
    }
    Ok(step)
}

/// Equally spaced `points` bin centers covering `[lo, hi]`.
pub fn centered_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let w = (hi - lo) / points as f64;
    (0..points).map(|i| lo + (i as f64 + 0.5) * w).collect()
}

/// Grid approximation of `π_ε(θ) ∝ π(θ)·P_θ(accept)` for 1-d models.
pub fn brute_force_posterior<M: GenerativeModel + ?Sized>(
    model: &M,
    observed: &SummaryVector,
    epsilon: f64,
    grid: &[f64],
    reps: usize,
    seed: u64,
    workers: usize,
) -> Result<DensityEstimate> {
    let step = check_grid(grid)?;
    let prior: Vec<f64> = grid
        .iter()
        .map(|&t| model.prior_density(&ParameterPoint::scalar(t)))
        .collect();
    if let Some(i) = prior.iter().position(|&p| p <= 0.0) {
        return Err(Error::Domain(format!(
            "grid point {} lies outside the prior support",
            grid[i]
        )));
    }
    let accept = acceptance_probabilities(model, observed, epsilon, grid, reps, seed, workers)?;
    let weights: Vec<f64> = prior.iter().zip(&accept).map(|(p, a)| p * a).collect();
    let total = weights.iter().sum::<f64>() * step;
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "no grid point has positive acceptance probability".into(),
        ));
    }
    Ok(DensityEstimate {
        grid: grid.to_vec(),
        values: weights.iter().map(|w| w / total).collect(),
        bin_width: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::UniformShapeModel;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn uniform_samples(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Domain::Draw, 0);
        (0..n).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn histogram_of_uniforms_is_flat() {
        let n = 10_000;
        let bins = 50;
        let est = estimate_density(&uniform_samples(n, 1), bins).unwrap();
        assert!((est.total_mass() - 1.0).abs() < 1e-9);
        // count per bin ~ Binomial(n, 1/50); density sd = sqrt(p(1−p)/n)/w
        let p = 1.0 / bins as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt() / est.bin_width;
        assert!(
            est.values.iter().all(|v| (v - 1.0).abs() < 4.0 * sd),
            "{:?}",
            est.values
        );
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(
            estimate_density(&[0.1, 0.2], 10),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            estimate_density(&vec![0.3; 200], 10),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            estimate_density(&uniform_samples(200, 1), 5),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            estimate_density_on(&uniform_samples(200, 1), 0.0, 0.5, 10),
            Err(Error::Domain(_))
        ));
    }

    fn inverse_cdf_samples(tp: &TheoreticalPosterior, n: usize, seed: u64) -> Vec<f64> {
        // tabulate the CDF by trapezoid on a fine grid, then invert by bisection
        let h = tp.half_width_1d().unwrap();
        let c = tp.theta0().as_slice()[0];
        let m = 20_000;
        let xs: Vec<f64> = (0..=m)
            .map(|i| c - h + 2.0 * h * i as f64 / m as f64)
            .collect();
        let mut cdf = vec![0.0; m + 1];
        for i in 1..=m {
            cdf[i] = cdf[i - 1]
                + 0.5
                    * (tp.density_at(&[xs[i - 1]]) + tp.density_at(&[xs[i]]))
                    * (xs[i] - xs[i - 1]);
        }
        let total = cdf[m];
        let mut rng = stream(seed, Domain::Draw, 0);
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let i = cdf.partition_point(|&v| v < u).clamp(1, m);
                let f = (u - cdf[i - 1]) / (cdf[i] - cdf[i - 1]).max(1e-300);
                xs[i - 1] + f * (xs[i] - xs[i - 1])
            })
            .collect()
    }

    #[test]
    fn histogram_of_theoretical_samples_matches_density() {
        for r in [0.0, 2.0] {
            let tp = TheoreticalPosterior::new(
                ParameterPoint::scalar(0.5),
                0.01,
                r,
                DMatrix::from_element(1, 1, 1.0),
            )
            .unwrap();
            let est = estimate_density(&inverse_cdf_samples(&tp, 40_000, 2), 50).unwrap();
            let l1 = l1_discrepancy(&est, &tp).unwrap();
            assert!(l1 < 0.05, "R={r}: L1 {l1}");
        }
    }

    #[test]
    fn l1_examples() {
        let tp = TheoreticalPosterior::new(
            ParameterPoint::scalar(2.5),
            0.5,
            0.0,
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let box01 = DensityEstimate {
            grid: centered_grid(0.0, 1.0, 10),
            values: vec![1.0; 10],
            bin_width: 0.1,
        };
        assert!((l1_discrepancy(&box01, &tp).unwrap() - 2.0).abs() < 1e-12);
        assert!(l1_between(&box01, &box01).abs() < 1e-12);
        let shifted = DensityEstimate {
            grid: centered_grid(2.0, 3.0, 10),
            ..box01.clone()
        };
        assert!((l1_between(&box01, &shifted) - 2.0).abs() < 1e-12);
        let unit = TheoreticalPosterior::new(
            ParameterPoint::scalar(0.5),
            0.5,
            0.0,
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        assert!(l1_discrepancy(&box01, &unit).unwrap() < 1e-12);
    }

    #[test]
    fn risk_examples() {
        let t0 = ParameterPoint::scalar(0.3);
        assert_eq!(posterior_risk(&[t0.clone(), t0.clone()], &t0).unwrap(), 0.0);
        let c = 0.25;
        let r = posterior_risk(
            &[
                ParameterPoint::scalar(0.3 - c),
                ParameterPoint::scalar(0.3 + c),
            ],
            &t0,
        )
        .unwrap();
        assert!((r - c).abs() < 1e-15);
        assert!(posterior_risk(&[], &t0).is_err());
    }

    #[test]
    fn loglog_examples() {
        let pts: Vec<_> = [0.01, 0.1, 1.0, 3.0]
            .iter()
            .map(|&x: &f64| (x, x * x))
            .collect();
        assert!((loglog_slope(&pts).unwrap().slope - 2.0).abs() < 1e-12);
        let flat: Vec<_> = [0.01, 0.1, 1.0].iter().map(|&x| (x, 7.0)).collect();
        assert!(loglog_slope(&flat).unwrap().slope.abs() < 1e-12);
        assert!(matches!(
            loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]),
            Err(Error::Domain(_))
        ));
        assert!(loglog_slope(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    fn piecewise_points(seed: u64, noise: f64) -> Vec<(f64, f64)> {
        // slope 2 above log10 ε = −1.6, flat below
        let mut rng = stream(seed, Domain::Draw, 0);
        (0..15)
            .map(|i| {
                let le = -2.2 + 1.4 * i as f64 / 14.0;
                let ly = -3.0 + 2.0 * (le + 1.6f64).max(0.0);
                let gauss: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
                (10f64.powf(le), 10f64.powf(ly + noise * gauss))
            })
            .collect()
    }

    #[test]
    fn segmented_recovers_synthetic_breakpoint() {
        for seed in 0..5 {
            let fit = segmented_slope(&piecewise_points(seed, 0.01)).unwrap();
            assert!(
                (fit.breakpoint + 1.6).abs() < 0.1 + fit.resolution,
                "{fit:?}"
            );
            assert!((fit.slope_right - 2.0).abs() < 0.05, "{fit:?}");
            assert!(fit.slope_left.abs() < 0.05, "{fit:?}");
            assert_eq!(fit.steep_slope(), fit.slope_right);
        }
    }

    #[test]
    fn segmented_on_collinear_points() {
        let pts: Vec<_> = (0..8)
            .map(|i| {
                let x = 10f64.powf(-2.0 + 0.2 * i as f64);
                (x, x.powf(1.5))
            })
            .collect();
        let fit = segmented_slope(&pts).unwrap();
        assert!((fit.slope_left - 1.5).abs() < 1e-9 && (fit.slope_right - 1.5).abs() < 1e-9);
        assert!(fit.sse < 1e-20);
        assert!(matches!(
            segmented_slope(&pts[..5]),
            Err(Error::InsufficientData { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn segmented_never_worse_than_a_line(seed in 0u64..100_000, noise in 0.0..0.5f64) {
            let fit = segmented_slope(&piecewise_points(seed, noise)).unwrap();
            prop_assert!(fit.sse <= fit.sse_single * (1.0 + 1e-12) + 1e-24);
        }

        #[test]
        fn loglog_slope_ignores_scale(seed in 0u64..100_000, c in 1e-3..1e3f64) {
            let pts = piecewise_points(seed, 0.1);
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x, c * y)).collect();
            let a = loglog_slope(&pts).unwrap();
            let b = loglog_slope(&scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-12);
            prop_assert!((b.intercept - a.intercept - c.log10()).abs() < 1e-10);
        }

        #[test]
        fn risk_is_translation_consistent(
            xs in prop::collection::vec(-1.0..1.0f64, 1..30),
            t0 in -1.0..1.0f64,
            shift in -100.0..100.0f64,
        ) {
            let pts: Vec<_> = xs.iter().map(|&x| ParameterPoint::scalar(x)).collect();
            let moved: Vec<_> = xs.iter().map(|&x| ParameterPoint::scalar(x + shift)).collect();
            let a = posterior_risk(&pts, &ParameterPoint::scalar(t0)).unwrap();
            let b = posterior_risk(&moved, &ParameterPoint::scalar(t0 + shift)).unwrap();
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + shift.abs()));
        }
    }

    #[test]
    fn risk_curve_validation() {
        let p = |e, r| RiskPoint {
            epsilon: e,
            risk: r,
            n_samples: 10,
        };
        assert!(RiskCurve::new(RiskKind::Vanilla, vec![p(0.1, 1.0), p(0.01, 0.1)]).is_ok());
        assert!(RiskCurve::new(RiskKind::Vanilla, vec![p(0.01, 1.0), p(0.1, 0.1)]).is_err());
        assert!(RiskCurve::new(RiskKind::Vanilla, vec![p(0.1, -1.0)]).is_err());
    }

    #[test]
    fn oracle_with_infinite_tolerance_is_the_prior() {
        let m = UniformShapeModel::new(100, 1, 0.5).unwrap();
        let obs = SummaryVector::new(vec![0.4, 0.5]).unwrap();
        let grid = centered_grid(0.0, 1.0, 40);
        let dens = brute_force_posterior(&m, &obs, f64::INFINITY, &grid, 1000, 1, 1).unwrap();
        assert!(dens.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn oracle_puts_no_mass_where_acceptance_is_impossible() {
        let m = UniformShapeModel::new(1000, 0, 0.5).unwrap();
        let obs = SummaryVector::new(vec![0.5]).unwrap();
        let grid = centered_grid(0.3, 0.7, 41);
        let dens = brute_force_posterior(&m, &obs, 0.05, &grid, 1000, 2, 1).unwrap();
        for (g, v) in grid.iter().zip(&dens.values) {
            // midrange lies within 0.5 of θ only up to O(1/n); |θ − 0.5| > 0.06 is unreachable
            if (g - 0.5).abs() > 0.06 {
                assert_eq!(*v, 0.0, "θ={g}");
            }
        }
        assert!((dens.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_errors() {
        let m = UniformShapeModel::new(100, 0, 0.5).unwrap();
        let obs = SummaryVector::new(vec![0.5]).unwrap();
        let grid = centered_grid(0.0, 1.0, 20);
        assert!(brute_force_posterior(&m, &obs, 0.1, &grid, 10, 1, 1).is_err());
        assert!(brute_force_posterior(&m, &obs, 0.1, &[0.1, 0.2, 0.4], 1000, 1, 1).is_err());
        assert!(matches!(
            brute_force_posterior(&m, &obs, 0.1, &centered_grid(0.5, 1.5, 10), 1000, 1, 1),
            Err(Error::Domain(_))
        ));
        let far = SummaryVector::new(vec![5.0]).unwrap();
        assert!(matches!(
            brute_force_posterior(&m, &far, 0.1, &grid, 1000, 1, 1),
            Err(Error::Degenerate(_))
        ));
    }
}

//! Closed-form asymptotic ABC posterior and acceptance-rate predictions.
//!
//! The asymptotic posterior is
//!
//! ```text
//! π(θ) ∝ 1{w(θ) ≤ 1} (1 − w(θ))^{R/2},   w(θ) = ‖G (θ − θ0)‖² / ε²
//! ```
//!
//! with `G = ∇b₍₂₎(θ0)` the gradient of the fast-statistic limits.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::{beta, beta_reg};

use crate::domain::{ParameterPoint, RateProfile};
use crate::error::{check_dim, Error, Result};
use crate::models::UniformShapeModel;
use crate::quadrature::{ball_integral, BallTolerance};

#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalPosterior {
    theta0: ParameterPoint,
    epsilon: f64,
    r: f64,
    gradient_fast: DMatrix<f64>,
    /// Lower Cholesky factor of GᵀG.
    metric_chol: DMatrix<f64>,
    normalizer: f64,
}

impl TheoreticalPosterior {
    pub fn new(
        theta0: ParameterPoint,
        epsilon: f64,
        r: f64,
        gradient_fast: DMatrix<f64>,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "tolerance must be positive and finite, got {epsilon}"
            )));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::Config(format!(
                "exponent R must be nonnegative, got {r}"
            )));
        }
        let d = theta0.dim();
        check_dim(d, gradient_fast.ncols())?;
        if gradient_fast.nrows() < d {
            return Err(Error::Rank(format!(
                "{} fast statistics cannot identify {d} parameters",
                gradient_fast.nrows()
            )));
        }
        let metric = gradient_fast.transpose() * &gradient_fast;
        let eig = metric.clone().symmetric_eigen().eigenvalues;
        if !(eig.max() > 0.0) || eig.min() <= 1e-12 * eig.max() {
            return Err(Error::Rank(
                "fast-statistic gradient is not of full column rank".into(),
            ));
        }
        let metric_chol = metric
            .cholesky()
            .ok_or_else(|| Error::Rank("GᵀG is not positive definite".into()))?
            .l();
        let mut tp = Self {
            theta0,
            epsilon,
            r,
            gradient_fast,
            metric_chol,
            normalizer: 1.0,
        };
        tp.normalizer = tp.normalize()?;
        Ok(tp)
    }

    pub fn theta0(&self) -> &ParameterPoint {
        &self.theta0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn exponent(&self) -> f64 {
        self.r
    }

    pub fn gradient_fast(&self) -> &DMatrix<f64> {
        &self.gradient_fast
    }

    pub fn dim(&self) -> usize {
        self.theta0.dim()
    }

    /// Cached normalizing constant.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `w(θ) = ‖G(θ − θ0)‖² / ε²`.
    pub fn scaled_radius_sq(&self, theta: &[f64]) -> f64 {
        let x = DVector::from_iterator(
            theta.len(),
            theta.iter().zip(self.theta0.as_slice()).map(|(a, b)| a - b),
        );
        (&self.gradient_fast * x).norm_squared() / (self.epsilon * self.epsilon)
    }

    fn kernel(&self, w: f64) -> f64 {
        if w > 1.0 {
            0.0
        } else if self.r == 0.0 {
            1.0
        } else {
            (1.0 - w).powf(0.5 * self.r)
        }
    }

    /// Normalized density; zero outside the ellipsoid `w ≤ 1`.
    pub fn density(&self, theta: &ParameterPoint) -> f64 {
        self.density_at(theta.as_slice())
    }

    pub fn density_at(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        self.kernel(self.scaled_radius_sq(theta)) / self.normalizer
    }

    /// Half-width of the support along the single axis when d = 1.
    pub fn half_width_1d(&self) -> Result<f64> {
        check_dim(1, self.dim())?;
        Ok(self.epsilon / self.gradient_fast.column(0).norm())
    }

    /// Integral of the unnormalized kernel over its support.
    ///
    /// d = 1 uses `(ε/a)·Beta(½, R/2+1)` with `a = ‖G‖`; higher dimensions
    /// use nested adaptive quadrature.
    pub fn normalize(&self) -> Result<f64> {
        if self.dim() == 1 {
            Ok(self.half_width_1d()? * beta(0.5, 0.5 * self.r + 1.0))
        } else {
            self.normalize_by_quadrature()
        }
    }

    /// Quadrature of the unnormalized kernel, available in every dimension.
    pub fn normalize_by_quadrature(&self) -> Result<f64> {
        let eps2 = self.epsilon * self.epsilon;
        // points come from inside the ball; clamp so rounding cannot drop them
        let kernel =
            |y: &[f64]| self.kernel((y.iter().map(|v| v * v).sum::<f64>() / eps2).min(1.0));
        let ball = ball_integral(&kernel, self.dim(), self.epsilon, BallTolerance::default())?;
        Ok(ball / self.metric_chol.determinant())
    }

    /// `∫ f(θ) dθ` over the support ellipsoid.
    pub fn integrate_over_support<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<f64> {
        let lt = self.metric_chol.transpose();
        let lt_inv = lt
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Rank("singular metric".into()))?;
        let theta0 = DVector::from_column_slice(self.theta0.as_slice());
        let mapped = |y: &[f64]| {
            let theta = &theta0 + &lt_inv * DVector::from_column_slice(y);
            f(theta.as_slice())
        };
        let ball = ball_integral(&mapped, self.dim(), self.epsilon, BallTolerance::default())?;
        Ok(ball / self.metric_chol.determinant())
    }

    /// Distribution function for d = 1.
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        let h = self.half_width_1d()?;
        let t = (x - self.theta0.as_slice()[0]) / h;
        if t <= -1.0 {
            return Ok(0.0);
        }
        if t >= 1.0 {
            return Ok(1.0);
        }
        // ∫_0^|t| (1−u²)^{R/2} du = ½ B(½, R/2+1) I_{t²}(½, R/2+1)
        let half = 0.5 * beta_reg(0.5, 0.5 * self.r + 1.0, t * t);
        Ok(if t >= 0.0 { 0.5 + half } else { 0.5 - half })
    }

    /// `(θ, density)` pairs over a 1-d grid.
    pub fn density_curve(&self, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        check_dim(1, self.dim())?;
        Ok(grid.iter().map(|&t| (t, self.density_at(&[t]))).collect())
    }
}

/// Asymptotic posterior of the shape model under `ε = C/√n`, with `R = k0`
/// and unit gradient.
pub fn shape_posterior_for(model: &UniformShapeModel, c: f64) -> Result<TheoreticalPosterior> {
    if !(c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {c}")));
    }
    TheoreticalPosterior::new(
        ParameterPoint::scalar(model.theta0),
        c / (model.n as f64).sqrt(),
        model.k0 as f64,
        DMatrix::from_element(1, 1, 1.0),
    )
}

/// Exponent of n in the acceptance probability under `ε_n ∝ n^{-1/2}`.
///
/// Only the regime with non-converging slow statistics (`v_nj = 1`) is
/// supported, where `α_n ∝ ε^{k0+d} ∝ n^{-(k0+d)/2}`.
pub fn predict_acceptance_exponent(profile: &RateProfile, d: usize) -> Result<f64> {
    let slow = &profile.rate_exponents()[..profile.k0()];
    if slow.iter().any(|&p| p != 0.0) {
        return Err(Error::UnsupportedRegime(format!(
            "slow statistics must have unit rates, got exponents {slow:?}"
        )));
    }
    Ok(-((profile.k0() + d) as f64) / 2.0)
}

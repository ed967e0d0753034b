//! Local-linear regression adjustment of ABC output.
//!
//! Fits `θ ≈ β0 + Bᵀ(S − S0)` by least squares over the accepted draws and
//! corrects each draw to `θ' = θ − Bᵀ(S − S0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{ParameterPoint, RateProfile, ReferenceTable, SummaryVector};
use crate::error::{check_dim, Error, Result};

/// Condition number above which the standardized normal equations get a ridge.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Ridge added to the standardized (unit-diagonal) covariance.
pub const RELATIVE_RIDGE: f64 = 1e-10;

/// Fitted `(β0, B)` of the local-linear correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentModel {
    /// Intercept, length d.
    pub beta0: Vec<f64>,
    /// Coefficients, `k` rows by `d` columns, stored row-major.
    pub coefficients: Vec<Vec<f64>>,
    /// Reference summary S0.
    pub s0: SummaryVector,
    /// Relative ridge applied; 0 unless the design was near-singular.
    pub ridge_used: f64,
}

impl AdjustmentModel {
    pub fn summary_dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn param_dim(&self) -> usize {
        self.beta0.len()
    }

    pub fn coefficient_matrix(&self) -> DMatrix<f64> {
        let k = self.summary_dim();
        let d = self.param_dim();
        DMatrix::from_fn(k, d, |i, j| self.coefficients[i][j])
    }

    fn from_parts(
        beta0: DVector<f64>,
        b: &DMatrix<f64>,
        s0: SummaryVector,
        ridge_used: f64,
    ) -> Self {
        Self {
            beta0: beta0.iter().copied().collect(),
            coefficients: b.row_iter().map(|r| r.iter().copied().collect()).collect(),
            s0,
            ridge_used,
        }
    }

    /// `m(S) = β0 + Bᵀ(S − S0)`.
    pub fn predict(&self, summary: &SummaryVector) -> Result<Vec<f64>> {
        check_dim(self.summary_dim(), summary.dim())?;
        let mut out = self.beta0.clone();
        for (row, (s, s0)) in self
            .coefficients
            .iter()
            .zip(summary.as_slice().iter().zip(self.s0.as_slice()))
        {
            for (o, b) in out.iter_mut().zip(row) {
                *o += b * (s - s0);
            }
        }
        Ok(out)
    }

    /// Frobenius distance between coefficient matrices.
    pub fn coefficient_distance(&self, other: &AdjustmentModel) -> Result<f64> {
        check_dim(self.summary_dim(), other.summary_dim())?;
        check_dim(self.param_dim(), other.param_dim())?;
        Ok((self.coefficient_matrix() - other.coefficient_matrix()).norm())
    }
}

/// Least-squares fit of the local-linear model on a reference table.
///
/// Columns are centered and scaled to unit variance before forming the
/// normal equations; a ridge of [`RELATIVE_RIDGE`] is added only when the
/// standardized covariance has condition number above [`CONDITION_LIMIT`].
pub fn fit_local_linear(table: &ReferenceTable) -> Result<AdjustmentModel> {
    let k = table.observed_summary.dim();
    let n = table.draws.len();
    if n < k + 2 {
        return Err(Error::InsufficientData {
            needed: k + 2,
            found: n,
        });
    }
    let d = table.draws[0].theta.dim();
    for draw in &table.draws {
        check_dim(k, draw.summary.dim())?;
        check_dim(d, draw.theta.dim())?;
    }

    let first = table.draws[0].summary.as_slice();
    if table.draws.iter().all(|dr| dr.summary.as_slice() == first) {
        return Err(Error::DegenerateDesign(
            "all accepted summaries are identical".into(),
        ));
    }

    let nf = n as f64;
    let mut s_mean = DVector::zeros(k);
    let mut t_mean = DVector::zeros(d);
    for draw in &table.draws {
        s_mean += DVector::from_column_slice(draw.summary.as_slice());
        t_mean += DVector::from_column_slice(draw.theta.as_slice());
    }
    s_mean /= nf;
    t_mean /= nf;

    let x = DMatrix::from_fn(n, k, |i, j| {
        table.draws[i].summary.as_slice()[j] - s_mean[j]
    });
    let y = DMatrix::from_fn(n, d, |i, j| table.draws[i].theta.as_slice()[j] - t_mean[j]);

    let mut scale = DVector::from_fn(k, |j, _| x.column(j).norm());
    for s in scale.iter_mut() {
        if *s == 0.0 {
            // constant column: leave unscaled, the ridge pins its coefficient to 0
            *s = 1.0;
        }
    }
    let xs = DMatrix::from_fn(n, k, |i, j| x[(i, j)] / scale[j]);
    let mut gram = xs.transpose() * &xs;
    let cross = xs.transpose() * &y;

    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let ridge = if lo <= 0.0 || hi / lo > CONDITION_LIMIT {
        let lambda = RELATIVE_RIDGE * gram.trace() / k as f64;
        for j in 0..k {
            gram[(j, j)] += lambda;
        }
        RELATIVE_RIDGE
    } else {
        0.0
    };

    let chol = gram.clone().cholesky().ok_or_else(|| {
        Error::Numeric("standardized normal equations are not positive definite".into())
    })?;
    let mut scaled_b = chol.solve(&cross);
    // one step of iterative refinement
    let resid = &cross - &gram * &scaled_b;
    scaled_b += chol.solve(&resid);

    let b = DMatrix::from_fn(k, d, |i, j| scaled_b[(i, j)] / scale[i]);
    let s0 = DVector::from_column_slice(table.observed_summary.as_slice());
    let beta0 = t_mean - b.transpose() * (s_mean - s0);
    Ok(AdjustmentModel::from_parts(
        beta0,
        &b,
        table.observed_summary.clone(),
        ridge,
    ))
}

/// `θ'_t = θ_t − Bᵀ(S_t − S0)` for every accepted draw.
pub fn adjust_samples(
    table: &ReferenceTable,
    model: &AdjustmentModel,
) -> Result<Vec<ParameterPoint>> {
    let k = model.summary_dim();
    let d = model.param_dim();
    check_dim(k, model.s0.dim())?;
    let s0 = model.s0.as_slice();
    table
        .draws
        .iter()
        .map(|draw| {
            check_dim(k, draw.summary.dim())?;
            check_dim(d, draw.theta.dim())?;
            let mut out = draw.theta.as_slice().to_vec();
            for (row, (s, r)) in model
                .coefficients
                .iter()
                .zip(draw.summary.as_slice().iter().zip(s0))
            {
                let delta = s - r;
                for (o, b) in out.iter_mut().zip(row) {
                    *o -= b * delta;
                }
            }
            ParameterPoint::new(out)
        })
        .collect()
}

/// Minimal-norm limit `B*` of the fitted coefficients: zero rows for slow
/// statistics and `Γ2 = G(GᵀG)⁻¹` for the fast block `G = ∇b₍₂₎`.
///
/// The returned model has zero `β0` and a zero reference summary.
pub fn oracle_adjustment(profile: &RateProfile) -> Result<AdjustmentModel> {
    let g = profile.gradient_fast();
    let k = profile.summary_dim();
    let d = profile.param_dim();
    let gtg = g.transpose() * &g;
    let inv = gtg
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Rank("∇b₍₂₎ᵀ∇b₍₂₎ is singular".into()))?
        .inverse();
    let eig = gtg.symmetric_eigen().eigenvalues;
    if eig.min() <= 1e-12 * eig.max() {
        return Err(Error::Rank(
            "fast-statistic gradient is rank deficient".into(),
        ));
    }
    let gamma = &g * inv;
    let mut b = DMatrix::zeros(k, d);
    b.rows_mut(profile.k0(), k - profile.k0()).copy_from(&gamma);
    let s0 = SummaryVector::new(vec![0.0; k])?;
    Ok(AdjustmentModel::from_parts(DVector::zeros(d), &b, s0, 0.0))
}

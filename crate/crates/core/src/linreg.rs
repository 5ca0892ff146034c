//! Least squares, two-stage least squares and Newey-West HAC variances.
//!
//! Coefficients are ordered intercept first (when requested) and then the
//! design columns in their given order.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{sym_pinv, PivotedQr};

/// Output of one least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub fitted: DVector<f64>,
    pub ssr: f64,
    pub n_obs: usize,
    pub n_params: usize,
    /// Numerical rank of the design, including the intercept column.
    pub rank: usize,
    /// Whether an intercept column was prepended to the design.
    pub intercept: bool,
}

fn with_intercept(design: &DMatrix<f64>, add_intercept: bool) -> DMatrix<f64> {
    if !add_intercept {
        return design.clone();
    }
    let n = design.nrows();
    let mut x = DMatrix::from_element(n, design.ncols() + 1, 1.0);
    x.columns_mut(1, design.ncols()).copy_from(design);
    x
}

/// Ordinary least squares of `response` on `design` (plus an intercept).
///
/// Rank-deficient designs are solved for the minimum-norm coefficient vector,
/// so fitted values stay well defined when columns are collinear.
pub fn ols(design: &DMatrix<f64>, response: &DVector<f64>, add_intercept: bool) -> Result<RegressionFit> {
    let n = design.nrows();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            what: "ols response",
            expected: n,
            found: response.len(),
        });
    }
    if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDesign("non-finite entry in design or response".into()));
    }
    let x = with_intercept(design, add_intercept);
    let p = x.ncols();
    if p == 0 {
        return Err(Error::DegenerateDesign("design has no columns".into()));
    }
    if p > n {
        return Err(Error::InsufficientSample {
            horizon: 0,
            available: n,
            needed: p,
        });
    }
    let qr = PivotedQr::new(x.clone());
    if qr.rank() == 0 {
        return Err(Error::DegenerateDesign("design has rank 0".into()));
    }
    let beta = DVector::from_vec(qr.solve(response.as_slice()));
    let fitted = &x * &beta;
    let residuals = response - &fitted;
    let ssr = residuals.norm_squared();
    Ok(RegressionFit {
        coefficients: beta,
        residuals,
        fitted,
        ssr,
        n_obs: n,
        n_params: p,
        rank: qr.rank(),
        intercept: add_intercept,
    })
}

/// Bartlett-kernel Newey-West variance of each coefficient in `fit`.
///
/// `design` is the matrix passed to [`ols`] (without the intercept column; it
/// is re-added when the fit carries one). No degrees-of-freedom correction is
/// applied and `lag_truncation = 0` gives the White sandwich.
pub fn newey_west_variance(fit: &RegressionFit, design: &DMatrix<f64>, lag_truncation: usize) -> Result<DVector<f64>> {
    let x = with_intercept(design, fit.intercept);
    let (n, p) = x.shape();
    if n != fit.n_obs || p != fit.n_params {
        return Err(Error::DimensionMismatch {
            what: "newey_west design",
            expected: fit.n_obs,
            found: n,
        });
    }
    if lag_truncation >= n {
        return Err(Error::param(format!(
            "lag truncation {lag_truncation} must be below the sample size {n}"
        )));
    }
    let cov = hac_covariance(&x, fit.residuals.as_slice(), lag_truncation)?;
    Ok(cov.diagonal())
}

/// Full HAC covariance matrix `B S B` with `B = (X'X)^+`.
pub(crate) fn hac_covariance(x: &DMatrix<f64>, u: &[f64], lag: usize) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    let xtx = x.transpose() * x;
    let bread = sym_pinv(&xtx);
    if p > 0 && bread.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateDesign("X'X is numerically zero".into()));
    }
    // Scores s_t = x_t u_t stored row-wise.
    let mut s = x.clone();
    for t in 0..n {
        for j in 0..p {
            s[(t, j)] *= u[t];
        }
    }
    let mut meat = s.transpose() * &s;
    for l in 1..=lag.min(n.saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let lead = s.rows(l, n - l);
        let lagged = s.rows(0, n - l);
        let gamma = lead.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * w;
    }
    Ok(&bread * meat * &bread)
}

/// Two-stage least squares output.
#[derive(Debug, Clone)]
pub struct IvFit {
    /// Second stage; coefficient 1 is the effect of the instrumented regressor.
    pub second_stage: RegressionFit,
    pub first_stage: RegressionFit,
    /// Classical t statistic of the instrument in the first stage.
    pub first_stage_t: f64,
}

impl IvFit {
    pub fn beta(&self) -> f64 {
        self.second_stage.coefficients[1]
    }
}

/// Two-stage least squares with the default weak-instrument policy (warn only).
pub fn tsls(
    response: &DVector<f64>,
    endogenous: &DVector<f64>,
    instrument: &DVector<f64>,
    controls: &DMatrix<f64>,
) -> Result<IvFit> {
    tsls_with_floor(response, endogenous, instrument, controls, 0.0)
}

/// Two-stage least squares, failing with [`Error::WeakFirstStage`] when the
/// first-stage |t| of the instrument is below `t_floor` (0 disables the check).
pub fn tsls_with_floor(
    response: &DVector<f64>,
    endogenous: &DVector<f64>,
    instrument: &DVector<f64>,
    controls: &DMatrix<f64>,
    t_floor: f64,
) -> Result<IvFit> {
    let n = response.len();
    for (what, len) in [
        ("tsls endogenous", endogenous.len()),
        ("tsls instrument", instrument.len()),
        ("tsls controls", controls.nrows()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch { what, expected: n, found: len });
        }
    }
    let c = controls.ncols();
    let mut first_design = DMatrix::zeros(n, 1 + c);
    first_design.set_column(0, instrument);
    first_design.columns_mut(1, c).copy_from(controls);
    let first = ols(&first_design, endogenous, true)?;

    let dof = first.n_obs.saturating_sub(first.rank).max(1) as f64;
    let x1 = with_intercept(&first_design, true);
    let cov = sym_pinv(&(x1.transpose() * &x1)) * (first.ssr / dof);
    let se = cov[(1, 1)].sqrt();
    let t = if se > 0.0 { first.coefficients[1] / se } else { f64::INFINITY };
    if t.abs() < t_floor {
        return Err(Error::WeakFirstStage { t_stat: t, floor: t_floor });
    }
    if t.abs() < 1.0 {
        log::warn!("weak first stage: instrument |t| = {:.3}", t.abs());
    }

    let mut second_design = DMatrix::zeros(n, 1 + c);
    second_design.set_column(0, &first.fitted);
    second_design.columns_mut(1, c).copy_from(controls);
    let second = ols(&second_design, response, true)?;
    Ok(IvFit {
        second_stage: second,
        first_stage: first,
        first_stage_t: t,
    })
}

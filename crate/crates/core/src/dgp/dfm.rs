//! Dynamic factor model.
//!
//! X_t = Λ f_t + v_t, f_t = Φ(L) f_{t−1} + ϑ_t, v_{it} = Δ_i(L) v_{i,t−1} + Ξ_i ξ_{it}.
//! The structural shock ε_t enters the factor innovations through a loading
//! vector s: ϑ_t = s ε_t + Σ_ϑ^{1/2} ζ_t, so Σ_ϑ is the covariance of the
//! innovation component orthogonal to ε.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesPanel;
use crate::dgp::fiscal::InstrumentMode;
use crate::dgp::{DGPOutput, TrueIrf};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

pub const DFM_BURN_IN: usize = 200;

/// Parameters of the factor model. Matrices are stored as rows so that the
/// struct reads naturally from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DFMParams {
    /// Λ, one row of `n_factors` loadings per series.
    pub loadings: Vec<Vec<f64>>,
    /// Φ_1, …, Φ_p, each `n_factors × n_factors`.
    pub factor_var: Vec<Vec<Vec<f64>>>,
    /// Σ_ϑ, `n_factors × n_factors`.
    pub innovation_cov: Vec<Vec<f64>>,
    /// Δ_i(L), one row of AR coefficients per series.
    pub idio_ar: Vec<Vec<f64>>,
    /// Ξ_i.
    pub idio_scale: Vec<f64>,
    /// s, mapping ε into the factor innovations.
    pub shock_loading: Vec<f64>,
    /// Series names; `x001`, `x002`, … when absent.
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

impl DFMParams {
    /// A stationary synthetic parameterisation: six factors with four VAR
    /// lags, random N(0,1) loadings drawn from `seed`, Σ_ϑ = I and AR(1)
    /// idiosyncratic noise with coefficient 0.3 (higher lags zero).
    pub fn synthetic(n_series: usize, seed: u64) -> Self {
        let nf = 6;
        let mut rng = stream(seed, &[purpose::PARAMS]);
        let loadings = (0..n_series)
            .map(|_| (0..nf).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        // Lower-triangular lag matrices keep the eigenvalues at those of the
        // scalar lag polynomial 1 − 0.5L − 0.2L² − 0.05L⁴.
        let diag = [0.5, 0.2, 0.0, 0.05];
        let factor_var = diag
            .iter()
            .enumerate()
            .map(|(l, &d)| {
                (0..nf)
                    .map(|i| {
                        (0..nf)
                            .map(|j| match () {
                                _ if i == j => d,
                                _ if l == 0 && i == j + 1 => 0.1,
                                _ => 0.0,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let innovation_cov = (0..nf)
            .map(|i| (0..nf).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut shock_loading = vec![0.0; nf];
        shock_loading[..3].copy_from_slice(&[1.0, 0.5, -0.3]);
        DFMParams {
            loadings,
            factor_var,
            innovation_cov,
            idio_ar: vec![vec![0.3, 0.0, 0.0, 0.0]; n_series],
            idio_scale: vec![1.0; n_series],
            shock_loading,
            names: None,
        }
    }

    pub fn n_series(&self) -> usize {
        self.loadings.len()
    }

    pub fn n_factors(&self) -> usize {
        self.shock_loading.len()
    }

    pub fn factor_var_lags(&self) -> usize {
        self.factor_var.len()
    }

    pub fn series_names(&self) -> Vec<String> {
        self.names
            .clone()
            .unwrap_or_else(|| (0..self.n_series()).map(|i| format!("x{:03}", i + 1)).collect())
    }

    fn matrix(rows: &[Vec<f64>], nr: usize, nc: usize, what: &str) -> Result<DMatrix<f64>> {
        if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
            return Err(Error::param(format!("{what} must be {nr} x {nc}")));
        }
        Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
    }

    fn lambda(&self) -> Result<DMatrix<f64>> {
        Self::matrix(&self.loadings, self.n_series(), self.n_factors(), "loadings")
    }

    fn phis(&self) -> Result<Vec<DMatrix<f64>>> {
        let nf = self.n_factors();
        self.factor_var
            .iter()
            .map(|m| Self::matrix(m, nf, nf, "factor VAR coefficient"))
            .collect()
    }

    /// Companion matrix of the factor VAR.
    pub fn companion(&self) -> Result<DMatrix<f64>> {
        let nf = self.n_factors();
        let p = self.factor_var_lags().max(1);
        let phis = self.phis()?;
        let mut c = DMatrix::zeros(nf * p, nf * p);
        for (l, phi) in phis.iter().enumerate() {
            c.view_mut((0, l * nf), (nf, nf)).copy_from(phi);
        }
        for i in nf..nf * p {
            c[(i, i - nf)] = 1.0;
        }
        Ok(c)
    }

    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(spectral_radius(&self.companion()?))
    }

    /// Checks dimensions, stationarity of the factor VAR and of every
    /// idiosyncratic AR, and positive semidefiniteness of Σ_ϑ.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_series();
        let nf = self.n_factors();
        if n == 0 || nf == 0 {
            return Err(Error::param("need at least one series and one factor"));
        }
        self.lambda()?;
        let rho = self.spectral_radius()?;
        if rho >= 1.0 {
            return Err(Error::NonStationary { spectral_radius: rho });
        }
        let cov = Self::matrix(&self.innovation_cov, nf, nf, "innovation covariance")?;
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::param("innovation covariance must be symmetric"));
        }
        let eig = cov.symmetric_eigenvalues();
        if eig.min() < -1e-10 * eig.amax().max(1.0) {
            return Err(Error::param("innovation covariance must be positive semidefinite"));
        }
        if self.idio_ar.len() != n || self.idio_scale.len() != n {
            return Err(Error::param(format!("idiosyncratic parameters must cover {n} series")));
        }
        for ar in &self.idio_ar {
            if ar.iter().any(|v| *v != 0.0) {
                let p = ar.len();
                let c = DMatrix::from_fn(p, p, |r, col| match r {
                    0 => ar[col],
                    _ if col + 1 == r => 1.0,
                    _ => 0.0,
                });
                let rho = spectral_radius(&c);
                if rho >= 1.0 {
                    return Err(Error::NonStationary { spectral_radius: rho });
                }
            }
        }
        if let Some(names) = &self.names {
            if names.len() != n {
                return Err(Error::param("one name per series required"));
            }
        }
        Ok(())
    }

    fn innovation_root(&self) -> Result<DMatrix<f64>> {
        let nf = self.n_factors();
        let cov = Self::matrix(&self.innovation_cov, nf, nf, "innovation covariance")?;
        let eig = cov.symmetric_eigen();
        let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose())
    }
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Response of every series to a unit ε at horizons 0..=H: Λ Ψ_h s with
/// Ψ_0 = I and Ψ_h = Σ_l Φ_l Ψ_{h−l}.
pub fn dfm_true_irf(params: &DFMParams, horizons: usize) -> Result<Vec<Vec<f64>>> {
    let lambda = params.lambda()?;
    let phis = params.phis()?;
    let s = DVector::from_column_slice(&params.shock_loading);
    // Factor responses ψ_h s, built directly.
    let mut f: Vec<DVector<f64>> = Vec::with_capacity(horizons + 1);
    for h in 0..=horizons {
        let mut v = if h == 0 { s.clone() } else { DVector::zeros(s.len()) };
        for (l, phi) in phis.iter().enumerate() {
            if h > l {
                v += phi * &f[h - 1 - l];
            }
        }
        f.push(v);
    }
    Ok((0..params.n_series())
        .map(|i| f.iter().map(|fh| lambda.row(i).dot(&fh.transpose())).collect())
        .collect())
}

/// Runs the model forward from zero initial conditions given ε (length n),
/// ζ (n × n_f) and ξ (n × N). Returns (X, ϑ) with time along the rows.
pub fn propagate_dfm(
    params: &DFMParams,
    eps: &[f64],
    zeta: &DMatrix<f64>,
    xi: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = eps.len();
    let nf = params.n_factors();
    let ns = params.n_series();
    if zeta.shape() != (n, nf) || xi.shape() != (n, ns) {
        return Err(Error::param("shock matrices do not match the sample length and model size"));
    }
    let lambda = params.lambda()?;
    let phis = params.phis()?;
    let root = params.innovation_root()?;
    let s = DVector::from_column_slice(&params.shock_loading);
    let mut f = DMatrix::<f64>::zeros(n, nf);
    let mut theta = DMatrix::<f64>::zeros(n, nf);
    for t in 0..n {
        let z = zeta.row(t).transpose();
        let th = &s * eps[t] + &root * z;
        let mut ft = th.clone();
        for (l, phi) in phis.iter().enumerate() {
            if t > l {
                ft += phi * f.row(t - 1 - l).transpose();
            }
        }
        theta.set_row(t, &th.transpose());
        f.set_row(t, &ft.transpose());
    }
    let mut x = &f * lambda.transpose();
    for i in 0..ns {
        let ar = &params.idio_ar[i];
        let mut v = vec![0.0; n];
        for t in 0..n {
            let mut vt = params.idio_scale[i] * xi[(t, i)];
            for (l, a) in ar.iter().enumerate() {
                if t > l {
                    vt += a * v[t - 1 - l];
                }
            }
            v[t] = vt;
            x[(t, i)] += vt;
        }
    }
    Ok((x, theta))
}

/// Simulated factor model over the returned sample plus full-span shocks.
#[derive(Debug, Clone, PartialEq)]
pub struct DfmSimulation {
    pub names: Vec<String>,
    /// Observables over the returned sample, one vector per series.
    pub x: Vec<Vec<f64>>,
    /// ε over the full span, burn-in included.
    pub eps: Vec<f64>,
    /// Factor innovations over the full span (rows are periods).
    pub theta: DMatrix<f64>,
    pub start: usize,
}

/// Simulates `t` periods after a burn-in of [`DFM_BURN_IN`].
pub fn simulate_dfm(t: usize, params: &DFMParams, seed: u64) -> Result<DfmSimulation> {
    params.validate()?;
    if t < 50 {
        return Err(Error::param(format!("sample length {t} below the minimum of 50")));
    }
    let n = t + DFM_BURN_IN;
    let mut rng = stream(seed, &[purpose::SHOCKS]);
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let zeta = DMatrix::from_fn(n, params.n_factors(), |_, _| rng.sample(StandardNormal));
    let xi = DMatrix::from_fn(n, params.n_series(), |_, _| rng.sample(StandardNormal));
    let (x, theta) = propagate_dfm(params, &eps, &zeta, &xi)?;
    Ok(DfmSimulation {
        names: params.series_names(),
        x: (0..params.n_series())
            .map(|i| x.column(i).rows(DFM_BURN_IN, t).iter().copied().collect())
            .collect(),
        eps,
        theta,
        start: DFM_BURN_IN,
    })
}

/// Weights forming η^Tax_t = w_tax'ϑ_t and η^Tech_t = w_tech'ϑ_t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contamination {
    pub tax: Vec<f64>,
    pub tech: Vec<f64>,
}

impl Contamination {
    /// Equal weights summing to one. An arbitrary default: the empirical
    /// calibration of these components is not reproduced.
    pub fn uniform(n_factors: usize) -> Self {
        let w = vec![1.0 / n_factors as f64; n_factors];
        Contamination { tax: w.clone(), tech: w }
    }

    pub fn zero(n_factors: usize) -> Self {
        Contamination {
            tax: vec![0.0; n_factors],
            tech: vec![0.0; n_factors],
        }
    }
}

/// Instrument over the full span of `eps`.
///
/// Strict: z_t = √0.5 ε_t + ν_t. Conditional: z_t = ε_t + ε_{t−1} +
/// η^Tax_{t−1} + 0.9 η^Tech_{t−1} + ν_t. ν ~ N(0, nu_sd²); pass 0 to switch it
/// off.
pub fn gen_dfm_instrument(
    eps: &[f64],
    theta: &DMatrix<f64>,
    mode: InstrumentMode,
    contamination: &Contamination,
    nu_sd: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = eps.len();
    if theta.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "factor innovations",
            expected: n,
            found: theta.nrows(),
        });
    }
    if mode == InstrumentMode::Conditional
        && (contamination.tax.len() != theta.ncols() || contamination.tech.len() != theta.ncols())
    {
        return Err(Error::param("contamination weights must have one entry per factor"));
    }
    let nu = Normal::new(0.0, nu_sd).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = stream(seed, &[purpose::INSTRUMENT]);
    let wt = DVector::from_column_slice(&contamination.tax);
    let wk = DVector::from_column_slice(&contamination.tech);
    Ok((0..n)
        .map(|t| {
            let noise = nu.sample(&mut rng);
            match mode {
                InstrumentMode::Strict => 0.5f64.sqrt() * eps[t] + noise,
                InstrumentMode::Conditional => {
                    let lagged = if t >= 1 {
                        let th = theta.row(t - 1);
                        eps[t - 1] + th.dot(&wt.transpose()) + 0.9 * th.dot(&wk.transpose())
                    } else {
                        0.0
                    };
                    eps[t] + lagged + noise
                }
            }
        })
        .collect())
}

/// One factor-model Monte Carlo dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfmDesign {
    #[serde(default = "default_t")]
    pub t: usize,
    pub params: DFMParams,
    pub instrument: InstrumentMode,
    /// Uniform weights when absent.
    #[serde(default)]
    pub contamination: Option<Contamination>,
    #[serde(default = "default_horizons")]
    pub horizons: usize,
}

fn default_t() -> usize {
    200
}

fn default_horizons() -> usize {
    6
}

impl DfmDesign {
    pub fn new(t: usize, params: DFMParams, instrument: InstrumentMode) -> Self {
        DfmDesign {
            t,
            params,
            instrument,
            contamination: None,
            horizons: default_horizons(),
        }
    }
}

/// Simulates the observables and an instrument `z`; ε stays hidden.
pub fn simulate_dfm_design(design: &DfmDesign, seed: u64) -> Result<DGPOutput> {
    let sim = simulate_dfm(design.t, &design.params, seed)?;
    let cont = design
        .contamination
        .clone()
        .unwrap_or_else(|| Contamination::uniform(design.params.n_factors()));
    let z = gen_dfm_instrument(&sim.eps, &sim.theta, design.instrument, &cont, 1.0, seed)?;
    let mut names = sim.names.clone();
    if names.iter().any(|n| n == "z") {
        return Err(Error::DuplicateName("z".into()));
    }
    names.push("z".into());
    let mut cols = sim.x.clone();
    cols.push(z[sim.start..].to_vec());
    let panel = TimeSeriesPanel::from_columns(names, cols)?;
    let irfs = dfm_true_irf(&design.params, design.horizons)?;
    Ok(DGPOutput {
        panel,
        shocks: vec![("eps".into(), sim.eps[sim.start..].to_vec())],
        truth: sim
            .names
            .iter()
            .zip(irfs)
            .map(|(v, r)| TrueIrf {
                variable: v.clone(),
                response: r,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(phi: f64, lambda: f64) -> DFMParams {
        DFMParams {
            loadings: vec![vec![lambda]],
            factor_var: vec![vec![vec![phi]]],
            innovation_cov: vec![vec![1.0]],
            idio_ar: vec![vec![0.0]],
            idio_scale: vec![0.0],
            shock_loading: vec![1.0],
            names: None,
        }
    }

    #[test]
    fn synthetic_defaults_are_stationary() {
        let p = DFMParams::synthetic(40, 1);
        p.validate().unwrap();
        assert!(p.spectral_radius().unwrap() < 1.0);
        assert_eq!(p.n_factors(), 6);
        assert_eq!(p.factor_var_lags(), 4);
    }

    #[test]
    fn rejects_explosive_factor() {
        assert!(matches!(
            scalar(1.01, 1.0).validate(),
            Err(Error::NonStationary { .. })
        ));
    }

    #[test]
    fn scalar_ar1_irf() {
        let irf = dfm_true_irf(&scalar(0.8, 2.0), 5).unwrap();
        for h in 0..=5 {
            assert_relative_eq!(irf[0][h], 2.0 * 0.8f64.powi(h as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn static_identity_model() {
        let p = DFMParams {
            loadings: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            factor_var: vec![vec![vec![0.0; 2]; 2]],
            innovation_cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            idio_ar: vec![vec![0.0]; 2],
            idio_scale: vec![0.0; 2],
            shock_loading: vec![0.4, -1.0],
            names: None,
        };
        let irf = dfm_true_irf(&p, 3).unwrap();
        assert_eq!(irf[0], vec![0.4, 0.0, 0.0, 0.0]);
        assert_eq!(irf[1], vec![-1.0, 0.0, 0.0, 0.0]);
        let n = 5;
        let zeta = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        let (x, theta) = propagate_dfm(&p, &[0.0; 5], &zeta, &DMatrix::zeros(n, 2)).unwrap();
        assert_eq!(x, theta);
    }

    #[test]
    fn counterfactual_matches_analytic() {
        let p = DFMParams::synthetic(12, 4);
        let n = 30;
        let t0 = 3;
        let mut eps = vec![0.0; n];
        eps[t0] = 1.0;
        let (x, _) = propagate_dfm(&p, &eps, &DMatrix::zeros(n, 6), &DMatrix::zeros(n, 12)).unwrap();
        let irf = dfm_true_irf(&p, 20).unwrap();
        for i in 0..12 {
            for h in 0..=20 {
                assert!((x[(t0 + h, i)] - irf[i][h]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn conditional_instrument_without_contamination() {
        let eps = [1.0, 2.0, -0.5];
        let theta = DMatrix::from_element(3, 2, 7.0);
        let z = gen_dfm_instrument(&eps, &theta, InstrumentMode::Conditional, &Contamination::zero(2), 0.0, 1).unwrap();
        assert_eq!(z, vec![1.0, 3.0, 1.5]);
    }

    #[test]
    fn strict_instrument_correlation() {
        let p = DFMParams::synthetic(5, 2);
        let sim = simulate_dfm(5000, &p, 11).unwrap();
        let z = gen_dfm_instrument(&sim.eps, &sim.theta, InstrumentMode::Strict, &Contamination::uniform(6), 1.0, 11).unwrap();
        let r = corr(&z, &sim.eps);
        assert!((r - (0.5f64 / 1.5).sqrt()).abs() < 0.05, "corr {r}");
    }

    #[test]
    fn conditional_instrument_loads_on_lagged_innovations() {
        let p = DFMParams::synthetic(5, 2);
        let sim = simulate_dfm(5000, &p, 12).unwrap();
        let z = gen_dfm_instrument(&sim.eps, &sim.theta, InstrumentMode::Conditional, &Contamination::uniform(6), 1.0, 12).unwrap();
        let lagged: Vec<f64> = (1..z.len()).map(|t| sim.theta.row(t - 1).sum()).collect();
        let r = corr(&z[1..], &lagged);
        assert!(r > 0.1, "corr {r}");
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }
}

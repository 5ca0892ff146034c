//! Error bands for RSLP estimates.
//!
//! The block bootstrap resamples first- and second-stage residuals in blocks
//! of length max(h, 1), applying the same block sequence to every draw so the
//! dependence between regressions survives resampling. Each draw is refitted
//! on the resampled data and the replication statistic is the weighted
//! ensemble average. The Buckland interval instead combines per-draw
//! Newey-West variances with the dispersion of coefficients across draws as if
//! the draws were perfectly correlated.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::lp::engine::{dot, Problem};
use crate::lp::{LPSpec, SubspaceEnsemble};
use crate::rng::{purpose, stream};
use crate::subspace::SelectionDraw;

/// Draws processed together in one parallel task. Fixed so the summation
/// order, and hence the result, does not depend on the number of threads.
const CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    pub nominal_level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_boot: 500,
            seed: 0,
            nominal_level: 0.90,
        }
    }
}

impl BootstrapConfig {
    pub fn new(n_boot: usize, seed: u64) -> Self {
        BootstrapConfig {
            n_boot,
            seed,
            ..Default::default()
        }
    }

    pub fn with_level(mut self, level: f64) -> Self {
        self.nominal_level = level;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_boot < 2 {
            return Err(Error::param("the bootstrap needs at least two replications"));
        }
        check_level(self.nominal_level)
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::param(format!("nominal level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Which interval to attach to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMethod {
    Bootstrap,
    Buckland,
}

impl std::str::FromStr for BandMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(BandMethod::Bootstrap),
            "buckland" => Ok(BandMethod::Buckland),
            _ => Err(Error::param(format!("unknown band method `{s}` (expected bootstrap or buckland)"))),
        }
    }
}

/// Symmetric normal-approximation bands around a point estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bands {
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bands {
    /// center ± z_{(1+level)/2} · sd.
    pub fn around(center: &[f64], sd: Vec<f64>, level: f64) -> Result<Bands> {
        check_level(level)?;
        let z = Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf((1.0 + level) / 2.0);
        let lower = center.iter().zip(&sd).map(|(c, s)| c - z * s).collect();
        let upper = center.iter().zip(&sd).map(|(c, s)| c + z * s).collect();
        Ok(Bands { sd, lower, upper })
    }
}

/// Weighted ensemble average, exact for identical draws and equal weights.
fn ensemble_center(ens: &SubspaceEnsemble) -> Vec<f64> {
    let identical = ens.draws.iter().all(|d| d.indices == ens.draws[0].indices);
    if identical {
        return ens.betas.row(0).iter().copied().collect();
    }
    if ens.weights.iter().all(|w| *w == ens.weights[0]) {
        return ens.mean();
    }
    (0..ens.betas.ncols())
        .map(|h| ens.betas.column(h).iter().zip(&ens.weights).map(|(b, w)| b * w).sum())
        .collect()
}

fn check_ensemble(ens: &SubspaceEnsemble, spec: &LPSpec) -> Result<()> {
    let n = ens.n_draws();
    if n == 0 || ens.betas.nrows() != n || ens.weights.len() != n {
        return Err(Error::DimensionMismatch {
            what: "ensemble draws",
            expected: n,
            found: ens.betas.nrows().min(ens.weights.len()),
        });
    }
    if ens.betas.ncols() != spec.horizons + 1 {
        return Err(Error::DimensionMismatch {
            what: "ensemble horizons",
            expected: spec.horizons + 1,
            found: ens.betas.ncols(),
        });
    }
    Ok(())
}

/// Moving-block bootstrap bands for an RSLP estimate.
///
/// `ensemble` must come from [`crate::lp::estimate_rslp`] on the same panel
/// and spec. The interval is centred on the point estimate.
pub fn block_bootstrap_bands(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    ensemble: &SubspaceEnsemble,
    config: &BootstrapConfig,
) -> Result<Bands> {
    config.validate()?;
    check_ensemble(ensemble, spec)?;
    let problem = Problem::new(panel, spec, std::slice::from_ref(&spec.response))?;
    let sd = bootstrap_sd(&problem, &ensemble.draws, &ensemble.weights, config)?.remove(0);
    Bands::around(&ensemble_center(ensemble), sd, config.nominal_level)
}

/// Block index maps: `maps[b][h]` lists, for every row of horizon h, the
/// row whose residuals it receives in replication b.
fn block_maps(problem: &Problem, config: &BootstrapConfig) -> Result<Vec<Vec<Vec<u32>>>> {
    let sizes: Vec<usize> = problem.horizons.iter().map(|hd| hd.sel.len()).collect();
    for (h, &n) in sizes.iter().enumerate() {
        let len = h.max(1);
        if n <= len {
            return Err(Error::InsufficientSample {
                horizon: h,
                available: n,
                needed: len + 1,
            });
        }
    }
    Ok((0..config.n_boot)
        .map(|b| {
            let mut rng = stream(config.seed, &[purpose::BOOTSTRAP, b as u64]);
            sizes
                .iter()
                .enumerate()
                .map(|(h, &n)| {
                    let len = h.max(1);
                    let starts = if h == 0 { n } else { n - h };
                    let blocks = n.div_ceil(len) + 1;
                    let mut map = Vec::with_capacity(blocks * len);
                    for _ in 0..blocks {
                        let s = rng.random_range(0..starts);
                        map.extend((s..s + len).map(|i| i.min(n - 1) as u32));
                    }
                    map.truncate(n);
                    map
                })
                .collect()
        })
        .collect())
}

/// Draws with their weights, collapsing an ensemble of identical draws.
fn distinct_draws<'a>(draws: &'a [SelectionDraw], weights: &[f64]) -> Vec<(&'a [usize], f64)> {
    if draws.iter().all(|d| d.indices == draws[0].indices) {
        return vec![(&draws[0].indices, weights.iter().sum())];
    }
    draws.iter().map(|d| d.indices.as_slice()).zip(weights.iter().copied()).collect()
}

fn dof_scale(n: usize, p: usize) -> f64 {
    if n > p {
        (n as f64 / (n - p) as f64).sqrt()
    } else {
        1.0
    }
}

/// Bootstrap standard deviation per response and horizon.
pub(crate) fn bootstrap_sd(
    problem: &Problem,
    draws: &[SelectionDraw],
    weights: &[f64],
    config: &BootstrapConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let maps = block_maps(problem, config)?;
    let hp1 = problem.n_horizons();
    let nr = problem.n_resp;
    let nb = config.n_boot;
    let items = distinct_draws(draws, weights);
    let chunk_sums = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; nb * hp1 * nr];
            for &(draw, w) in chunk {
                let (imp, _) = problem.first_stage(draw)?;
                for h in 0..hp1 {
                    let ef = problem.explicit(draw, &imp, h)?;
                    let n = ef.xperp.len();
                    let s1 = dof_scale(n, ef.n_first);
                    let s2 = dof_scale(n, ef.n_second);
                    let has_first = ef.b_e.ncols() > 0;
                    let mut eta = DVector::zeros(n);
                    let mut x = vec![0.0; n];
                    for (b, map) in maps.iter().enumerate() {
                        let map = &map[h];
                        if has_first {
                            for (e, &m) in eta.iter_mut().zip(map) {
                                *e = s1 * ef.eta[m as usize];
                            }
                            let shift = &ef.b_e * (&ef.p_e * &eta);
                            for ((xv, xp), s) in x.iter_mut().zip(&ef.xperp).zip(shift.iter()) {
                                *xv = xp + s;
                            }
                        } else {
                            x.copy_from_slice(&ef.xperp);
                        }
                        let den = dot(&x, &x);
                        for r in 0..nr {
                            let (fit, res) = (&ef.fitted[r], &ef.resid[r]);
                            let num: f64 = (0..n).map(|t| x[t] * (fit[t] + s2 * res[map[t] as usize])).sum();
                            acc[(b * hp1 + h) * nr + r] += w * num / den;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = vec![0.0; nb * hp1 * nr];
    for part in &chunk_sums {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    Ok((0..nr)
        .map(|r| {
            (0..hp1)
                .map(|h| {
                    let vals: Vec<f64> = (0..nb).map(|b| total[(b * hp1 + h) * nr + r]).collect();
                    sample_sd(&vals)
                })
                .collect()
        })
        .collect())
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Newey-West variance of a least-squares coefficient from its scores, with
/// Bartlett weights up to `lag`.
fn nw_from_scores(v: &[f64], lag: usize) -> f64 {
    let mut s: f64 = v.iter().map(|x| x * x).sum();
    for l in 1..=lag.min(v.len().saturating_sub(1)) {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        let c: f64 = (l..v.len()).map(|t| v[t] * v[t - l]).sum();
        s += 2.0 * w * c;
    }
    s.max(0.0)
}

/// Newey-West variance (lag h) of every draw's coefficient at every horizon,
/// one n_R × (H+1) matrix per response.
pub(crate) fn nw_variances(problem: &Problem, draws: &[SelectionDraw]) -> Result<Vec<DMatrix<f64>>> {
    let hp1 = problem.n_horizons();
    let nr = problem.n_resp;
    let identical = draws.iter().all(|d| d.indices == draws[0].indices);
    let unique = if identical { &draws[..1] } else { draws };
    let rows = unique
        .par_iter()
        .map(|d| {
            let (imp, _) = problem.first_stage(&d.indices)?;
            let mut out = vec![0.0; nr * hp1];
            for h in 0..hp1 {
                let ef = problem.explicit(&d.indices, &imp, h)?;
                let den = dot(&ef.xperp, &ef.xperp);
                for r in 0..nr {
                    let scores: Vec<f64> = ef.xperp.iter().zip(&ef.resid[r]).map(|(x, e)| x * e / den).collect();
                    out[r * hp1 + h] = nw_from_scores(&scores, h);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..nr)
        .map(|r| DMatrix::from_fn(draws.len(), hp1, |j, h| rows[if identical { 0 } else { j }][r * hp1 + h]))
        .collect())
}

/// Per-draw Newey-West variances for an ensemble from [`crate::lp::estimate_rslp`].
pub fn per_draw_nw_variance(panel: &TimeSeriesPanel, spec: &LPSpec, ensemble: &SubspaceEnsemble) -> Result<DMatrix<f64>> {
    check_ensemble(ensemble, spec)?;
    let problem = Problem::new(panel, spec, std::slice::from_ref(&spec.response))?;
    Ok(nw_variances(&problem, &ensemble.draws)?.remove(0))
}

/// Buckland standard deviation: Σ_j w_j sqrt(var_{j,h} + (β̂_{j,h} − β̄_h)²),
/// which with equal weights is the plain average over draws.
pub fn buckland_sd(ensemble: &SubspaceEnsemble, variances: &DMatrix<f64>) -> Result<Vec<f64>> {
    if variances.shape() != ensemble.betas.shape() {
        return Err(Error::DimensionMismatch {
            what: "per-draw variance matrix",
            expected: ensemble.betas.nrows(),
            found: variances.nrows(),
        });
    }
    if variances.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("per-draw variances must be nonnegative"));
    }
    let center = ensemble_center(ensemble);
    let n = ensemble.n_draws() as f64;
    let equal = ensemble.weights.iter().all(|w| *w == ensemble.weights[0]);
    Ok((0..ensemble.betas.ncols())
        .map(|h| {
            let terms = (0..ensemble.n_draws()).map(|j| {
                let d = ensemble.betas[(j, h)] - center[h];
                (variances[(j, h)] + d * d).sqrt()
            });
            if equal {
                terms.sum::<f64>() / n
            } else {
                terms.zip(&ensemble.weights).map(|(t, w)| t * w).sum()
            }
        })
        .collect())
}

/// Buckland bands at `level` for an RSLP estimate.
pub fn buckland_bands(panel: &TimeSeriesPanel, spec: &LPSpec, ensemble: &SubspaceEnsemble, level: f64) -> Result<Bands> {
    let var = per_draw_nw_variance(panel, spec, ensemble)?;
    let sd = buckland_sd(ensemble, &var)?;
    Bands::around(&ensemble_center(ensemble), sd, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{estimate_rslp, ControlRef, RslpOptions};
    use approx::assert_relative_eq;
    use rand_distr::StandardNormal;

    fn ensemble(betas: DMatrix<f64>) -> SubspaceEnsemble {
        let n = betas.nrows();
        SubspaceEnsemble {
            betas,
            bics: vec![f64::NAN; n],
            weights: vec![1.0 / n as f64; n],
            draws: (0..n).map(|j| SelectionDraw { indices: vec![j], p_total: n }).collect(),
        }
    }

    #[test]
    fn buckland_equal_draws() {
        let e = ensemble(DMatrix::from_element(4, 2, 0.3));
        let sd = buckland_sd(&e, &DMatrix::from_element(4, 2, 0.25)).unwrap();
        assert_relative_eq!(sd[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn buckland_pure_dispersion() {
        let e = ensemble(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]));
        let sd = buckland_sd(&e, &DMatrix::zeros(2, 1)).unwrap();
        assert_relative_eq!(sd[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn buckland_rejects_negative_variance() {
        let e = ensemble(DMatrix::zeros(2, 1));
        assert!(buckland_sd(&e, &DMatrix::from_column_slice(2, 1, &[0.1, -0.1])).is_err());
    }

    #[test]
    fn nw_scores_lag_zero_is_sum_of_squares() {
        assert_relative_eq!(nw_from_scores(&[1.0, -2.0, 3.0], 0), 14.0);
        // lag 1: 14 + 2 * 0.5 * (1*-2 + -2*3) = 6
        assert_relative_eq!(nw_from_scores(&[1.0, -2.0, 3.0], 1), 6.0);
    }

    #[test]
    fn level_and_size_checks() {
        assert!(BootstrapConfig::new(1, 0).validate().is_err());
        assert!(BootstrapConfig::new(10, 0).with_level(1.0).validate().is_err());
        let b = Bands::around(&[1.0], vec![1.0], 0.9).unwrap();
        assert_relative_eq!(b.upper[0] - 1.0, 1.6448536269514722, epsilon = 1e-9);
    }

    fn exact_panel(t: usize) -> (TimeSeriesPanel, LPSpec) {
        let mut rng = stream(3, &[1]);
        let x: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<Vec<f64>> = (0..4).map(|_| (0..t).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y: Vec<f64> = (0..t).map(|i| 0.5 * x[i] + 0.2 * c[0][i] - 0.1 * c[3][i]).collect();
        let mut names = vec!["y".to_string(), "x".to_string()];
        let mut cols = vec![y, x];
        for (i, col) in c.into_iter().enumerate() {
            names.push(format!("c{i}"));
            cols.push(col);
        }
        let panel = TimeSeriesPanel::from_columns(names, cols).unwrap();
        let spec = LPSpec::new("y", "x", 0).with_candidates(ControlRef::lags_of(&["c0", "c1", "c2", "c3"], [0]));
        (panel, spec)
    }

    #[test]
    fn zero_residuals_collapse_bands() {
        let (panel, spec) = exact_panel(80);
        let (est, ens) = estimate_rslp(&panel, &spec, &RslpOptions::new(4, 3, 1)).unwrap();
        let b = block_bootstrap_bands(&panel, &spec, &ens, &BootstrapConfig::new(20, 2)).unwrap();
        assert!(b.sd[0] < 1e-12);
        assert!((b.lower[0] - est.beta[0]).abs() < 1e-11);
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let (panel, _) = exact_panel(80);
        let mut rng = stream(5, &[2]);
        let noisy: Vec<f64> = panel
            .column("y")
            .unwrap()
            .iter()
            .map(|v| v + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut panel = panel;
        panel.push_column("yn", noisy).unwrap();
        let spec = LPSpec::new("yn", "x", 2).with_candidates(ControlRef::lags_of(&["c0", "c1", "c2", "c3"], [0]));
        let (_, ens) = estimate_rslp(&panel, &spec, &RslpOptions::new(2, 6, 1)).unwrap();
        let cfg = BootstrapConfig::new(30, 9);
        let a = block_bootstrap_bands(&panel, &spec, &ens, &cfg).unwrap();
        assert_eq!(a, block_bootstrap_bands(&panel, &spec, &ens, &cfg).unwrap());
        assert!(a.sd.iter().all(|s| *s > 0.0));
        assert!(a.lower.iter().zip(&a.upper).all(|(l, u)| l <= u));
    }
}

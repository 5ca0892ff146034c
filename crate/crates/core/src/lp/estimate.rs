use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::design::{build_design, build_first_stage};
use crate::data::panel::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::linreg::{ols, tsls_with_floor, RegressionFit};
use crate::lp::bic::{bic_softmax_weights, bic_value, first_stage_bic};
use crate::lp::engine::{DrawFit, Problem};
use crate::lp::spec::{Identification, LPSpec};
use crate::rng::{purpose, stream};
use crate::subspace::{draw_by_category, draw_uniform, CategoryLayout, SelectionDraw};

/// How draws are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Equal,
    /// Softmax of minus the first-stage BIC.
    Bic,
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Weighting::Equal => "equal",
            Weighting::Bic => "bic",
        })
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(Weighting::Equal),
            "bic" => Ok(Weighting::Bic),
            _ => Err(Error::param(format!("unknown weighting `{s}` (expected equal or bic)"))),
        }
    }
}

/// Provenance of an impulse response estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrfMeta {
    pub estimator: String,
    pub response: String,
    pub k: usize,
    pub n_draws: usize,
    pub seed: Option<u64>,
    pub weighting: Weighting,
    pub identification: Identification,
}

/// Impulse response by horizon, with optional bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IRFEstimate {
    pub horizons: Vec<usize>,
    pub beta: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub meta: IrfMeta,
}

impl IRFEstimate {
    /// Attaches bands, checking `lower <= beta <= upper`.
    pub fn with_bands(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = self.beta.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::DimensionMismatch {
                what: "band length",
                expected: n,
                found: lower.len().min(upper.len()),
            });
        }
        for h in 0..n {
            if !(lower[h] <= self.beta[h] && self.beta[h] <= upper[h]) {
                return Err(Error::param(format!("band at horizon {h} does not contain the estimate")));
            }
        }
        self.lower = Some(lower);
        self.upper = Some(upper);
        Ok(self)
    }

    /// Multiplies the estimate and any bands by `factor`.
    pub fn rescaled(&self, factor: f64) -> IRFEstimate {
        let scale = |v: &Vec<f64>| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        let (lower, upper) = match (&self.lower, &self.upper) {
            (Some(l), Some(u)) if factor < 0.0 => (Some(scale(u)), Some(scale(l))),
            (l, u) => (l.as_ref().map(scale), u.as_ref().map(scale)),
        };
        IRFEstimate {
            beta: scale(&self.beta),
            lower,
            upper,
            ..self.clone()
        }
    }

    /// Rescales so that `reference` equals one at horizon `h`, as when
    /// reporting responses per unit movement of a policy variable.
    pub fn normalized_to(&self, reference: &IRFEstimate, h: usize) -> Result<IRFEstimate> {
        let r = *reference
            .beta
            .get(h)
            .ok_or_else(|| Error::param(format!("reference has no horizon {h}")))?;
        if r == 0.0 || !r.is_finite() {
            return Err(Error::param("reference response is zero at the normalisation horizon"));
        }
        Ok(self.rescaled(1.0 / r))
    }
}

/// Per-draw results behind an RSLP estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEnsemble {
    /// n_R × (H+1) coefficients.
    pub betas: DMatrix<f64>,
    /// First-stage BIC per draw (`NaN` for an observed shock).
    pub bics: Vec<f64>,
    pub weights: Vec<f64>,
    pub draws: Vec<SelectionDraw>,
}

impl SubspaceEnsemble {
    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    /// Equal-weight column means.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.betas.nrows() as f64;
        (0..self.betas.ncols()).map(|h| self.betas.column(h).sum() / n).collect()
    }
}

/// Settings for [`estimate_rslp`].
#[derive(Debug, Clone, PartialEq)]
pub struct RslpOptions {
    pub k: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub weighting: Weighting,
    /// Stratify draws by category; the layout fixes the per-category sizes.
    pub categories: Option<CategoryLayout>,
}

impl Default for RslpOptions {
    fn default() -> Self {
        RslpOptions {
            k: 50,
            n_draws: 1000,
            seed: 0,
            weighting: Weighting::Equal,
            categories: None,
        }
    }
}

impl RslpOptions {
    pub fn new(k: usize, n_draws: usize, seed: u64) -> Self {
        RslpOptions {
            k,
            n_draws,
            seed,
            ..Default::default()
        }
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn with_categories(mut self, layout: CategoryLayout) -> Self {
        self.categories = Some(layout);
        self
    }
}

/// Generates the draws for an RSLP run from `seed`, sequentially.
///
/// `k` above `p_total` is clamped with a warning; `k = 0` yields empty draws.
pub fn generate_draws(
    p_total: usize,
    k: usize,
    n_draws: usize,
    seed: u64,
    categories: Option<&CategoryLayout>,
) -> Result<Vec<SelectionDraw>> {
    if n_draws == 0 {
        return Err(Error::InvalidDimension("number of draws must be positive".into()));
    }
    let mut rng = stream(seed, &[purpose::DRAWS]);
    if let Some(layout) = categories {
        if layout.p_total() != p_total {
            return Err(Error::DimensionMismatch {
                what: "category layout size",
                expected: p_total,
                found: layout.p_total(),
            });
        }
        return (0..n_draws).map(|_| draw_by_category(layout, &mut rng)).collect();
    }
    let k = if k > p_total {
        log::warn!("subspace dimension {k} exceeds {p_total} candidates; clamped");
        p_total
    } else {
        k
    };
    if k == 0 {
        return Ok(vec![SelectionDraw::empty(p_total); n_draws]);
    }
    (0..n_draws).map(|_| draw_uniform(p_total, k, &mut rng)).collect()
}

/// Draw weights under `weighting`.
pub(crate) fn draw_weights(fits: &[DrawFit], weighting: Weighting, spec: &LPSpec) -> Result<Vec<f64>> {
    let n = fits.len();
    match weighting {
        Weighting::Equal => Ok(vec![1.0 / n as f64; n]),
        Weighting::Bic => {
            if !spec.has_first_stage() {
                return Err(Error::spec("BIC weighting needs a first stage (IV or cumulative SVAR)"));
            }
            bic_softmax_weights(&fits.iter().map(|f| f.bic).collect::<Vec<_>>())
        }
    }
}

/// Weighted average of one response's coefficients across draws.
///
/// Identical draws return the common value, and equal weights use the plain
/// column mean, so degenerate ensembles reproduce single fits exactly.
pub(crate) fn aggregate(fits: &[DrawFit], weights: &[f64], r: usize, hp1: usize, identical: bool) -> Vec<f64> {
    let cols = r * hp1..(r + 1) * hp1;
    if identical {
        return fits[0].beta[cols].to_vec();
    }
    let n = fits.len();
    if weights.iter().all(|w| *w == weights[0]) {
        return cols
            .map(|c| fits.iter().map(|f| f.beta[c]).sum::<f64>() / n as f64)
            .collect();
    }
    cols.map(|c| fits.iter().zip(weights).map(|(f, w)| w * f.beta[c]).sum())
        .collect()
}

/// Output of one ensemble run over several responses.
pub(crate) struct RslpRun {
    pub draws: Vec<SelectionDraw>,
    pub fits: Vec<DrawFit>,
    pub weights: Vec<f64>,
    pub k: usize,
}

impl RslpRun {
    fn identical(&self) -> bool {
        self.draws.iter().all(|d| d.indices == self.draws[0].indices)
    }

    pub(crate) fn beta(&self, r: usize, hp1: usize) -> Vec<f64> {
        aggregate(&self.fits, &self.weights, r, hp1, self.identical())
    }

    pub(crate) fn ensemble(&self, r: usize, hp1: usize) -> SubspaceEnsemble {
        SubspaceEnsemble {
            betas: DMatrix::from_fn(self.fits.len(), hp1, |j, h| self.fits[j].beta[r * hp1 + h]),
            bics: self.fits.iter().map(|f| f.bic).collect(),
            weights: self.weights.clone(),
            draws: self.draws.clone(),
        }
    }
}

pub(crate) fn run_rslp(problem: &Problem, opts: &RslpOptions) -> Result<RslpRun> {
    let draws = generate_draws(
        problem.n_candidates(),
        opts.k,
        opts.n_draws,
        opts.seed,
        opts.categories.as_ref(),
    )?;
    run_draws(problem, draws, opts.weighting)
}

pub(crate) fn run_draws(problem: &Problem, draws: Vec<SelectionDraw>, weighting: Weighting) -> Result<RslpRun> {
    let k = draws.first().map_or(0, SelectionDraw::k);
    problem.check_sample(draws.iter().map(SelectionDraw::k).max().unwrap_or(0))?;
    let fits = problem.fit_draws(&draws)?;
    let weights = draw_weights(&fits, weighting, &problem.spec)?;
    Ok(RslpRun {
        draws,
        fits,
        weights,
        k,
    })
}

fn meta(spec: &LPSpec, response: &str, estimator: &str, k: usize, n: usize, seed: Option<u64>, w: Weighting) -> IrfMeta {
    IrfMeta {
        estimator: estimator.to_string(),
        response: response.to_string(),
        k,
        n_draws: n,
        seed,
        weighting: w,
        identification: spec.identification,
    }
}

/// Base local projection: only the essential controls.
pub fn estimate_base_lp(panel: &TimeSeriesPanel, spec: &LPSpec) -> Result<IRFEstimate> {
    Ok(estimate_base_lp_multi(panel, spec, std::slice::from_ref(&spec.response))?.remove(0))
}

/// [`estimate_base_lp`] for several responses sharing the rows where all are observed.
pub fn estimate_base_lp_multi(panel: &TimeSeriesPanel, spec: &LPSpec, responses: &[String]) -> Result<Vec<IRFEstimate>> {
    let problem = Problem::new(panel, spec, responses)?;
    base_from_problem(&problem, responses)
}

pub(crate) fn base_from_problem(problem: &Problem, responses: &[String]) -> Result<Vec<IRFEstimate>> {
    let run = run_draws(problem, vec![SelectionDraw::empty(problem.n_candidates())], Weighting::Equal)?;
    let hp1 = problem.n_horizons();
    Ok(responses
        .iter()
        .enumerate()
        .map(|(r, name)| IRFEstimate {
            horizons: problem.spec.horizon_list(),
            beta: run.beta(r, hp1),
            lower: None,
            upper: None,
            meta: meta(&problem.spec, name, "base", 0, 1, None, Weighting::Equal),
        })
        .collect())
}

/// Random subspace local projection.
///
/// `n_draws` subsets of `k` candidate controls are drawn from `seed`; the
/// projection (or its two-stage version) is estimated with the essential
/// controls plus each subset, and the coefficients are averaged.
pub fn estimate_rslp(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    opts: &RslpOptions,
) -> Result<(IRFEstimate, SubspaceEnsemble)> {
    Ok(estimate_rslp_multi(panel, spec, std::slice::from_ref(&spec.response), opts)?.remove(0))
}

/// [`estimate_rslp`] for several responses with the same draws.
pub fn estimate_rslp_multi(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    responses: &[String],
    opts: &RslpOptions,
) -> Result<Vec<(IRFEstimate, SubspaceEnsemble)>> {
    let problem = Problem::new(panel, spec, responses)?;
    let run = run_rslp(&problem, opts)?;
    Ok(rslp_outputs(&problem, &run, responses, opts))
}

pub(crate) fn rslp_outputs(
    problem: &Problem,
    run: &RslpRun,
    responses: &[String],
    opts: &RslpOptions,
) -> Vec<(IRFEstimate, SubspaceEnsemble)> {
    let hp1 = problem.n_horizons();
    responses
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let est = IRFEstimate {
                horizons: problem.spec.horizon_list(),
                beta: run.beta(r, hp1),
                lower: None,
                upper: None,
                meta: meta(
                    &problem.spec,
                    name,
                    "rslp",
                    run.k,
                    run.draws.len(),
                    Some(opts.seed),
                    opts.weighting,
                ),
            };
            (est, run.ensemble(r, hp1))
        })
        .collect()
}

/// One draw estimated directly by least squares, without the shared engine.
#[derive(Debug, Clone)]
pub struct DrawEstimate {
    /// Coefficient on the (fitted) impulse at each horizon.
    pub beta: Vec<f64>,
    /// Horizon-invariant first stage.
    pub first_stage: RegressionFit,
    /// First-stage BIC of the draw.
    pub bic: f64,
}

fn first_stage_fit(panel: &TimeSeriesPanel, spec: &LPSpec, draw: &SelectionDraw) -> Result<(RegressionFit, DMatrix<f64>)> {
    let fs = build_first_stage(panel, spec, Some(draw))?;
    let design = with_instrument(fs.instrument.as_ref(), &fs.controls);
    let fit = ols(&design, &fs.impulse, true)?;
    Ok((fit, design))
}

fn with_instrument(z: Option<&DVector<f64>>, controls: &DMatrix<f64>) -> DMatrix<f64> {
    match z {
        None => controls.clone(),
        Some(z) => {
            let mut d = DMatrix::zeros(controls.nrows(), controls.ncols() + 1);
            d.set_column(0, z);
            d.columns_mut(1, controls.ncols()).copy_from(controls);
            d
        }
    }
}

fn two_stage_draw(panel: &TimeSeriesPanel, spec: &LPSpec, draw: &SelectionDraw) -> Result<DrawEstimate> {
    let (first, _) = first_stage_fit(panel, spec, draw)?;
    let pi = &first.coefficients;
    let mut beta = Vec::with_capacity(spec.horizons + 1);
    for h in 0..=spec.horizons {
        let d = build_design(panel, spec, h, Some(draw))?;
        let w = with_instrument(d.instrument.as_ref(), &d.first_stage_controls);
        let xhat = DVector::from_fn(w.nrows(), |i, _| {
            pi[0] + (0..w.ncols()).map(|j| pi[j + 1] * w[(i, j)]).sum::<f64>()
        });
        let mut second = DMatrix::zeros(d.rows.len(), d.controls.ncols() + 1);
        second.set_column(0, &xhat);
        second.columns_mut(1, d.controls.ncols()).copy_from(&d.controls);
        beta.push(ols(&second, &d.response, true)?.coefficients[1]);
    }
    let p_v = spec.essential_controls.len();
    let bic = first_stage_bic(&first, draw.k(), p_v);
    if spec.weak_t_floor > 0.0 && matches!(spec.identification, Identification::Iv) {
        let d = build_design(panel, spec, 0, Some(draw))?;
        if let Some(z) = d.instrument.as_ref() {
            tsls_with_floor(&d.response, &d.impulse, z, &d.controls, spec.weak_t_floor)?;
        }
    }
    Ok(DrawEstimate {
        beta,
        first_stage: first,
        bic,
    })
}

/// IV local projection for one draw: the first stage regresses the impulse
/// on the instrument and controls once; its fitted values enter every
/// horizon's second stage.
pub fn estimate_lp_iv(panel: &TimeSeriesPanel, spec: &LPSpec, draw: &SelectionDraw) -> Result<DrawEstimate> {
    if !matches!(spec.identification, Identification::Iv) {
        return Err(Error::spec("estimate_lp_iv needs IV identification"));
    }
    two_stage_draw(panel, spec, draw)
}

/// Cumulative-SVAR local projection for one draw: υ_t is projected on the
/// contemporaneous controls, and υ̂_t enters each horizon's regression with
/// the lagged controls.
pub fn estimate_lp_svar(panel: &TimeSeriesPanel, spec: &LPSpec, draw: &SelectionDraw) -> Result<DrawEstimate> {
    if !matches!(spec.identification, Identification::CumulativeSvar { .. }) {
        return Err(Error::spec("estimate_lp_svar needs cumulative SVAR identification"));
    }
    two_stage_draw(panel, spec, draw)
}

/// BIC of the ensemble-average first stage for each `k` in `grid`.
///
/// Grid values above the number of candidates are dropped with a warning.
pub fn bic_by_k(panel: &TimeSeriesPanel, spec: &LPSpec, grid: &[usize], n_draws: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    if !spec.has_first_stage() {
        return Err(Error::spec("selecting k by BIC needs a first stage (IV or cumulative SVAR)"));
    }
    let problem = Problem::new(panel, spec, std::slice::from_ref(&spec.response))?;
    bic_grid(&problem, grid, n_draws, seed)
}

pub(crate) fn bic_grid(problem: &Problem, grid: &[usize], n_draws: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    use rayon::prelude::*;
    let p = problem.n_candidates();
    let kept: Vec<usize> = grid.iter().copied().filter(|&k| k <= p).collect();
    if kept.len() < grid.len() {
        log::warn!("grid values above {p} candidates dropped");
    }
    if kept.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let target: Vec<f64> = problem.x_fs.column(problem.layout.target).iter().copied().collect();
    let n = target.len();
    let mut out = Vec::with_capacity(kept.len());
    for k in kept {
        let draws = generate_draws(p, k, if k == 0 { 1 } else { n_draws }, seed, None)?;
        let fitted: Vec<Vec<f64>> = draws
            .par_iter()
            .map(|d| problem.first_stage(&d.indices).map(|(_, f)| f))
            .collect::<Result<_>>()?;
        let mut ssr = 0.0;
        for t in 0..n {
            let avg = fitted.iter().map(|f| f[t]).sum::<f64>() / fitted.len() as f64;
            ssr += (target[t] - avg).powi(2);
        }
        out.push((k, bic_value(ssr, n, k, problem.p_v())));
    }
    Ok(out)
}

/// Subspace dimension with the lowest ensemble first-stage BIC (ties go to
/// the smaller k).
pub fn select_k_by_bic(panel: &TimeSeriesPanel, spec: &LPSpec, grid: &[usize], n_draws: usize, seed: u64) -> Result<usize> {
    Ok(argmin_bic(&bic_by_k(panel, spec, grid, n_draws, seed)?))
}

pub(crate) fn argmin_bic(scores: &[(usize, f64)]) -> usize {
    let mut best = scores[0];
    for &(k, b) in &scores[1..] {
        if b < best.1 || (b == best.1 && k < best.0) {
            best = (k, b);
        }
    }
    best.0
}

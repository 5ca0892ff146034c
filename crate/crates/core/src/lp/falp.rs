use nalgebra::DMatrix;

use crate::data::panel::TimeSeriesPanel;
use crate::data::pca::{pca, PcaScaling};
use crate::error::{Error, Result};
use crate::lp::engine::Problem;
use crate::lp::estimate::{run_draws, IRFEstimate, IrfMeta, Weighting};
use crate::lp::spec::{ControlRef, LPSpec};
use crate::subspace::SelectionDraw;

/// Panel and spec with the candidate controls replaced by principal
/// components of the candidate series, entered at the candidates' lags.
pub(crate) fn factor_problem_inputs(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    n_factors: usize,
) -> Result<(TimeSeriesPanel, LPSpec)> {
    if spec.candidate_controls.is_empty() {
        return Err(Error::spec("factor-augmented LP needs candidate controls"));
    }
    let mut variables: Vec<&str> = Vec::new();
    let mut lags: Vec<usize> = Vec::new();
    for c in &spec.candidate_controls {
        if !variables.contains(&c.variable.as_str()) {
            variables.push(&c.variable);
        }
        if !lags.contains(&c.lag) {
            lags.push(c.lag);
        }
    }
    lags.sort_unstable();
    let cols: Vec<&[f64]> = variables.iter().map(|v| panel.column(v)).collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..panel.n_obs())
        .filter(|&t| cols.iter().all(|c| c[t].is_finite()))
        .collect();
    if n_factors == 0 || n_factors > rows.len().min(variables.len()) {
        return Err(Error::InvalidDimension(format!(
            "{n_factors} factors requested from {} series over {} complete rows",
            variables.len(),
            rows.len()
        )));
    }
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]]);
    let res = pca(&x, n_factors, PcaScaling::Correlation)?;
    let mut augmented = panel.clone();
    let mut candidates = Vec::new();
    for f in 0..n_factors {
        let mut series = vec![f64::NAN; panel.n_obs()];
        for (i, &t) in rows.iter().enumerate() {
            series[t] = res.factors[(i, f)];
        }
        let name = format!("__factor{}", f + 1);
        augmented.push_column(name.clone(), series)?;
        for &l in &lags {
            candidates.push(ControlRef::new(name.clone(), l));
        }
    }
    Ok((augmented, spec.clone().with_candidates(candidates)))
}

/// Factor-augmented LP: the candidate controls are replaced by the first
/// `n_factors` principal components of the candidate series, all included.
pub fn estimate_falp(panel: &TimeSeriesPanel, spec: &LPSpec, n_factors: usize) -> Result<IRFEstimate> {
    Ok(estimate_falp_multi(panel, spec, std::slice::from_ref(&spec.response), n_factors)?.remove(0))
}

/// [`estimate_falp`] for several responses.
pub fn estimate_falp_multi(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    responses: &[String],
    n_factors: usize,
) -> Result<Vec<IRFEstimate>> {
    let (augmented, fspec) = factor_problem_inputs(panel, spec, n_factors)?;
    let problem = Problem::new(&augmented, &fspec, responses)?;
    let p = problem.n_candidates();
    let run = run_draws(&problem, vec![SelectionDraw::full(p)], Weighting::Equal)?;
    let hp1 = problem.n_horizons();
    Ok(responses
        .iter()
        .enumerate()
        .map(|(r, name)| IRFEstimate {
            horizons: spec.horizon_list(),
            beta: run.beta(r, hp1),
            lower: None,
            upper: None,
            meta: IrfMeta {
                estimator: "falp".into(),
                response: name.clone(),
                k: n_factors,
                n_draws: 1,
                seed: None,
                weighting: Weighting::Equal,
                identification: spec.identification,
            },
        })
        .collect())
}

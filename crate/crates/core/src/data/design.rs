//! Aligned regression arrays for one local projection.

use nalgebra::{DMatrix, DVector};

use crate::data::panel::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::lp::spec::{ControlRef, Identification, LPSpec, LeadTransform};
use crate::lp::target::accumulate;
use crate::subspace::SelectionDraw;

/// Value of `series` at `t - lag`, missing before the sample.
pub(crate) fn lagged(series: &[f64], t: usize, lag: usize) -> f64 {
    if t >= lag {
        series[t - lag]
    } else {
        f64::NAN
    }
}

/// Left-hand side at horizon `h` for row `t`.
pub(crate) fn response_value(series: &[f64], t: usize, h: usize, transform: LeadTransform) -> f64 {
    let lead = match series.get(t + h) {
        Some(v) => *v,
        None => return f64::NAN,
    };
    match transform {
        LeadTransform::Lead => lead,
        LeadTransform::LevelChange if t >= 1 => lead - series[t - 1],
        LeadTransform::LevelChange => f64::NAN,
    }
}

/// The regressor of interest before any first stage: the impulse, or its
/// accumulation over the spec's lead.
pub(crate) fn target_series(panel: &TimeSeriesPanel, spec: &LPSpec) -> Result<Vec<f64>> {
    let x = panel.column(&spec.impulse)?;
    Ok(accumulate(x, spec.target_lead()))
}

pub(crate) fn control_column(panel: &TimeSeriesPanel, c: &ControlRef) -> Result<Vec<f64>> {
    let s = panel.column(&c.variable)?;
    Ok((0..s.len()).map(|t| lagged(s, t, c.lag)).collect())
}

/// Controls entering the first stage: the second-stage set, shifted one
/// period later under cumulative SVAR identification.
pub(crate) fn first_stage_refs(spec: &LPSpec, refs: &[ControlRef]) -> Vec<ControlRef> {
    let shift = spec.first_stage_shift();
    refs.iter()
        .map(|c| ControlRef::new(c.variable.clone(), c.lag - shift))
        .collect()
}

pub(crate) fn selected_candidates(spec: &LPSpec, draw: Option<&SelectionDraw>) -> Result<Vec<ControlRef>> {
    match draw {
        None => Ok(Vec::new()),
        Some(d) => {
            if d.p_total != spec.n_candidates() {
                return Err(Error::DimensionMismatch {
                    what: "draw candidate count",
                    expected: spec.n_candidates(),
                    found: d.p_total,
                });
            }
            Ok(d.indices.iter().map(|&i| spec.candidate_controls[i].clone()).collect())
        }
    }
}

/// Aligned arrays for one horizon.
#[derive(Debug, Clone)]
pub struct Design {
    /// Panel row `t` of each observation.
    pub rows: Vec<usize>,
    /// y_{t+h} or y_{t+h} − y_{t−1}.
    pub response: DVector<f64>,
    /// Impulse, or its accumulation υ_t.
    pub impulse: DVector<f64>,
    pub instrument: Option<DVector<f64>>,
    /// Second-stage controls: essential, then the selected candidates.
    pub controls: DMatrix<f64>,
    /// First-stage controls in the same order (equal to `controls` except
    /// under cumulative SVAR identification).
    pub first_stage_controls: DMatrix<f64>,
    pub control_names: Vec<String>,
}

/// Horizon-invariant first-stage arrays.
#[derive(Debug, Clone)]
pub struct FirstStageDesign {
    pub rows: Vec<usize>,
    pub impulse: DVector<f64>,
    pub instrument: Option<DVector<f64>>,
    pub controls: DMatrix<f64>,
}

struct Columns {
    target: Vec<f64>,
    instrument: Option<Vec<f64>>,
    controls: Vec<Vec<f64>>,
    first_controls: Vec<Vec<f64>>,
    names: Vec<String>,
}

fn columns(panel: &TimeSeriesPanel, spec: &LPSpec, draw: Option<&SelectionDraw>) -> Result<Columns> {
    spec.validate()?;
    let mut refs = spec.essential_controls.clone();
    refs.extend(selected_candidates(spec, draw)?);
    let controls = refs.iter().map(|c| control_column(panel, c)).collect::<Result<Vec<_>>>()?;
    let first_controls = if spec.first_stage_shift() == 0 {
        controls.clone()
    } else {
        first_stage_refs(spec, &refs)
            .iter()
            .map(|c| control_column(panel, c))
            .collect::<Result<Vec<_>>>()?
    };
    let instrument = match (&spec.identification, &spec.instrument) {
        (Identification::Iv, Some(z)) => Some(panel.column(z)?.to_vec()),
        _ => None,
    };
    Ok(Columns {
        target: target_series(panel, spec)?,
        instrument,
        controls,
        first_controls,
        names: refs.iter().map(ToString::to_string).collect(),
    })
}

fn gather(col: &[f64], rows: &[usize]) -> DVector<f64> {
    DVector::from_iterator(rows.len(), rows.iter().map(|&t| col[t]))
}

fn gather_matrix(cols: &[Vec<f64>], rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| cols[j][rows[i]])
}

fn first_stage_complete(c: &Columns, spec: &LPSpec, t: usize) -> bool {
    c.target[t].is_finite()
        && c.instrument.as_ref().is_none_or(|z| z[t].is_finite())
        && c.controls.iter().all(|s| s[t].is_finite())
        && (!spec.has_first_stage() || c.first_controls.iter().all(|s| s[t].is_finite()))
}

/// Builds the aligned response, impulse, instrument and control arrays for
/// horizon `h`, keeping only rows where every one of them is observed.
pub fn build_design(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    h: usize,
    draw: Option<&SelectionDraw>,
) -> Result<Design> {
    let c = columns(panel, spec, draw)?;
    let y = panel.column(&spec.response)?;
    let rows: Vec<usize> = (0..panel.n_obs())
        .filter(|&t| response_value(y, t, h, spec.transform).is_finite() && first_stage_complete(&c, spec, t))
        .collect();
    let needed = c.controls.len() + 3;
    if rows.len() < needed {
        return Err(Error::InsufficientSample {
            horizon: h,
            available: rows.len(),
            needed,
        });
    }
    Ok(Design {
        response: DVector::from_iterator(rows.len(), rows.iter().map(|&t| response_value(y, t, h, spec.transform))),
        impulse: gather(&c.target, &rows),
        instrument: c.instrument.as_ref().map(|z| gather(z, &rows)),
        controls: gather_matrix(&c.controls, &rows),
        first_stage_controls: gather_matrix(&c.first_controls, &rows),
        control_names: c.names,
        rows,
    })
}

/// Rows and arrays for the first stage, which does not depend on the horizon.
pub fn build_first_stage(
    panel: &TimeSeriesPanel,
    spec: &LPSpec,
    draw: Option<&SelectionDraw>,
) -> Result<FirstStageDesign> {
    let c = columns(panel, spec, draw)?;
    let rows: Vec<usize> = (0..panel.n_obs()).filter(|&t| first_stage_complete(&c, spec, t)).collect();
    let needed = c.controls.len() + 3;
    if rows.len() < needed {
        return Err(Error::InsufficientSample {
            horizon: 0,
            available: rows.len(),
            needed,
        });
    }
    Ok(FirstStageDesign {
        impulse: gather(&c.target, &rows),
        instrument: c.instrument.as_ref().map(|z| gather(z, &rows)),
        controls: gather_matrix(&c.first_controls, &rows),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> TimeSeriesPanel {
        TimeSeriesPanel::from_columns(
            vec!["y".into(), "x".into(), "w".into()],
            vec![
                vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0],
                vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
                vec![1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn contemporaneous_response_without_controls() {
        let d = build_design(&panel(), &LPSpec::new("y", "x", 0), 0, None).unwrap();
        assert_eq!(d.response.as_slice(), panel().column("y").unwrap());
        assert_eq!(d.controls.ncols(), 0);
    }

    #[test]
    fn level_change_index_arithmetic() {
        let spec = LPSpec::new("y", "x", 1).with_transform(LeadTransform::LevelChange);
        let d = build_design(&panel(), &spec, 1, None).unwrap();
        let i = d.rows.iter().position(|&t| t == 2).unwrap();
        // y_3 − y_1 = 8 − 2
        assert_eq!(d.response[i], 6.0);
        assert_eq!(d.rows[0], 1);
    }

    #[test]
    fn empty_draw_keeps_only_essentials() {
        let spec = LPSpec::new("y", "x", 0)
            .with_essential(vec![ControlRef::new("w", 1)])
            .with_candidates(vec![ControlRef::new("x", 1), ControlRef::new("y", 1)]);
        let draw = SelectionDraw::empty(2);
        let d = build_design(&panel(), &spec, 0, Some(&draw)).unwrap();
        assert_eq!(d.control_names, vec!["w:1"]);
    }

    #[test]
    fn rows_shrink_with_horizon() {
        let spec = LPSpec::new("y", "x", 3).with_essential(vec![ControlRef::new("w", 1)]);
        let mut prev = usize::MAX;
        for h in 0..=3 {
            let n = build_design(&panel(), &spec, h, None).unwrap().rows.len();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn missing_variable_reported() {
        let err = build_design(&panel(), &LPSpec::new("nope", "x", 0), 0, None).unwrap_err();
        assert!(matches!(err, Error::MissingVariable(v) if v == "nope"));
    }
}

//! FRED transformation codes.
//!
//! | code | transform |
//! |------|-----------|
//! | 1 | x |
//! | 2 | Δx |
//! | 3 | Δ²x |
//! | 4 | ln x |
//! | 5 | Δ ln x |
//! | 6 | Δ² ln x |
//! | 7 | Δ(x_t / x_{t-1} − 1) |
//!
//! Observations consumed by differencing, and logs of nonpositive values,
//! become missing.

use crate::data::panel::TimeSeriesPanel;
use crate::error::{Error, Result};

fn diff(x: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; x.len()];
    for t in 1..x.len() {
        out[t] = x[t] - x[t - 1];
    }
    out
}

fn ln(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v > 0.0 { v.ln() } else { f64::NAN }).collect()
}

/// Applies one transform code to a series.
pub fn transform_series(series: &[f64], code: i64, name: &str) -> Result<Vec<f64>> {
    Ok(match code {
        1 => series.to_vec(),
        2 => diff(series),
        3 => diff(&diff(series)),
        4 => ln(series),
        5 => diff(&ln(series)),
        6 => diff(&diff(&ln(series))),
        7 => {
            let mut growth = vec![f64::NAN; series.len()];
            for t in 1..series.len() {
                growth[t] = series[t] / series[t - 1] - 1.0;
            }
            diff(&growth)
        }
        _ => {
            return Err(Error::UnknownTcode {
                series: name.to_string(),
                code,
            })
        }
    })
}

/// Inverts a transform where that is possible without initial conditions
/// (codes 1 and 4).
pub fn invert_series(series: &[f64], code: i64, name: &str) -> Result<Vec<f64>> {
    match code {
        1 => Ok(series.to_vec()),
        4 => Ok(series.iter().map(|v| v.exp()).collect()),
        2..=7 => Err(Error::param(format!(
            "transform code {code} of `{name}` needs initial values to invert"
        ))),
        _ => Err(Error::UnknownTcode {
            series: name.to_string(),
            code,
        }),
    }
}

/// Transforms every series by its code. Codes are kept as metadata.
pub fn apply_tcodes(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    let codes = panel
        .tcodes()
        .ok_or_else(|| Error::param("panel carries no transform codes"))?;
    let columns = panel
        .columns()
        .iter()
        .zip(codes)
        .zip(panel.names())
        .map(|((c, &code), name)| transform_series(c, code, name))
        .collect::<Result<Vec<_>>>()?;
    Ok(panel.replace_columns(columns))
}

/// Inverse of [`apply_tcodes`] for panels whose codes are all 1 or 4.
pub fn undo_tcodes(panel: &TimeSeriesPanel) -> Result<TimeSeriesPanel> {
    let codes = panel
        .tcodes()
        .ok_or_else(|| Error::param("panel carries no transform codes"))?;
    let columns = panel
        .columns()
        .iter()
        .zip(codes)
        .zip(panel.names())
        .map(|((c, &code), name)| invert_series(c, code, name))
        .collect::<Result<Vec<_>>>()?;
    Ok(panel.replace_columns(columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn level_is_identity() {
        assert_eq!(transform_series(&[1.0, 2.0], 1, "x").unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn log_difference() {
        let e = std::f64::consts::E;
        let out = transform_series(&[1.0, e, e * e], 5, "x").unwrap();
        assert!(out[0].is_nan());
        assert_relative_eq!(out[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(out[2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn difference_of_constant() {
        let out = transform_series(&[4.0; 4], 2, "x").unwrap();
        assert!(out[0].is_nan());
        assert_eq!(&out[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn second_differences_and_growth() {
        let out = transform_series(&[1.0, 2.0, 4.0, 8.0], 3, "x").unwrap();
        assert!(out[0].is_nan() && out[1].is_nan());
        assert_eq!(&out[2..], &[1.0, 2.0]);
        let g = transform_series(&[1.0, 2.0, 4.0, 12.0], 7, "x").unwrap();
        assert_eq!(&g[2..], &[0.0, 1.0]);
    }

    #[test]
    fn nonpositive_log_is_missing() {
        let out = transform_series(&[-1.0, 0.0, 1.0], 4, "x").unwrap();
        assert!(out[0].is_nan() && out[1].is_nan());
        assert_eq!(out[2], 0.0);
    }

    #[test]
    fn unknown_code() {
        let p = TimeSeriesPanel::from_columns(vec!["x".into()], vec![vec![1.0]])
            .unwrap()
            .with_tcodes(vec![9])
            .unwrap();
        assert!(matches!(apply_tcodes(&p), Err(Error::UnknownTcode { code: 9, .. })));
    }

    proptest! {
        #[test]
        fn invertible_codes_round_trip(values in prop::collection::vec(0.01f64..1e6, 1..30), log in any::<bool>()) {
            let code = if log { 4 } else { 1 };
            let p = TimeSeriesPanel::from_columns(vec!["x".into()], vec![values.clone()])
                .unwrap()
                .with_tcodes(vec![code])
                .unwrap();
            let back = undo_tcodes(&apply_tcodes(&p).unwrap()).unwrap();
            for (a, b) in back.column("x").unwrap().iter().zip(&values) {
                prop_assert!((a - b).abs() <= 1e-12 * b.abs());
            }
        }
    }
}

use crate::error::{Error, Result};

/// Accumulated future movement υ_t = x_t + x_{t+1} + … + x_{t+lead}.
///
/// The output is aligned with the input: entry `t` holds υ_t, and the last
/// `lead` entries, whose window runs past the sample, are missing (`NaN`).
/// A window containing a missing value is missing.
pub fn make_cumulative_target(series: &[f64], lead: usize) -> Result<Vec<f64>> {
    if lead == 0 {
        return Err(Error::param("accumulation lead must be at least 1"));
    }
    if series.len() <= lead + 1 {
        return Err(Error::InsufficientSample {
            horizon: lead,
            available: series.len(),
            needed: lead + 2,
        });
    }
    Ok(accumulate(series, lead))
}

/// Sums over `t..=t+lead`; `lead = 0` returns the series itself.
pub(crate) fn accumulate(series: &[f64], lead: usize) -> Vec<f64> {
    let n = series.len();
    (0..n)
        .map(|t| {
            if t + lead >= n {
                f64::NAN
            } else {
                series[t..=t + lead].iter().sum()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_stay_zero() {
        let u = make_cumulative_target(&[0.0; 8], 2).unwrap();
        assert!(u[..6].iter().all(|v| *v == 0.0));
        assert!(u[6..].iter().all(|v| v.is_nan()));
    }

    #[test]
    fn unit_impulse_window() {
        let mut x = vec![0.0; 10];
        x[5] = 1.0;
        let u = make_cumulative_target(&x, 2).unwrap();
        for (t, v) in u.iter().enumerate().take(8) {
            let expect = if (3..=5).contains(&t) { 1.0 } else { 0.0 };
            assert_eq!(*v, expect, "t = {t}");
        }
    }

    #[test]
    fn constant_series_triples() {
        let u = make_cumulative_target(&[1.5; 6], 2).unwrap();
        assert!(u[..4].iter().all(|v| *v == 4.5));
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            make_cumulative_target(&[1.0, 2.0, 3.0], 2),
            Err(Error::InsufficientSample { .. })
        ));
    }
}

use crate::error::{Error, Result};
use crate::linreg::RegressionFit;

/// `T ln(ssr/T) + ln(T) (2 + p_v + k)`; a perfect fit gives `-inf`.
pub(crate) fn bic_value(ssr: f64, n_obs: usize, k: usize, p_v: usize) -> f64 {
    let t = n_obs as f64;
    if ssr <= 0.0 {
        log::warn!("first stage fits perfectly; BIC is -inf");
        return f64::NEG_INFINITY;
    }
    t * (ssr / t).ln() + t.ln() * (2 + p_v + k) as f64
}

/// BIC of a first-stage fit with `k` candidate and `p_v` essential controls.
///
/// A perfect fit (`ssr = 0`) returns `-inf`, so the draw dominates any
/// BIC-weighted average.
pub fn first_stage_bic(fit: &RegressionFit, k: usize, p_v: usize) -> f64 {
    bic_value(fit.ssr, fit.n_obs, k, p_v)
}

/// Softmax weights `exp(-(BIC_j - min BIC))`, normalised to sum to one.
///
/// Draws at `-inf` share all the weight equally.
pub fn bic_softmax_weights(bics: &[f64]) -> Result<Vec<f64>> {
    if bics.is_empty() {
        return Err(Error::param("no BIC values"));
    }
    if bics.iter().any(|b| b.is_nan() || *b == f64::INFINITY) {
        return Err(Error::param("BIC values must be finite or -inf"));
    }
    let min = bics.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = if min == f64::NEG_INFINITY {
        bics.iter().map(|&b| if b == f64::NEG_INFINITY { 1.0 } else { 0.0 }).collect()
    } else {
        bics.iter().map(|&b| (-(b - min)).exp()).collect()
    };
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

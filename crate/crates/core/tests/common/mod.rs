//! Small synthetic panel shared by the integration tests.

use rand_distr::{Distribution, StandardNormal};
use rslp::data::TimeSeriesPanel;
use rslp::lp::{ControlRef, Identification, LPSpec};
use rslp::rng::stream;

pub const T: usize = 160;
pub const P_G: usize = 6;

/// x (endogenous), z (instrument), y and g0..g5 candidates.
pub fn panel(seed: u64) -> TimeSeriesPanel {
    let mut rng = stream(seed, &[7]);
    let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
    let e: Vec<f64> = (0..T).map(|_| n()).collect();
    let g: Vec<Vec<f64>> = (0..P_G).map(|_| (0..T).map(|_| n()).collect()).collect();
    let z: Vec<f64> = (0..T).map(|t| e[t] + 0.5 * n()).collect();
    let x: Vec<f64> = (0..T).map(|t| e[t] + 0.4 * g[0][t.saturating_sub(1)] + 0.3 * n()).collect();
    let mut y = vec![0.0; T];
    for t in 1..T {
        y[t] = 0.5 * y[t - 1] + x[t] - 0.5 * x[t - 1] + 0.3 * g[1][t - 1] + 0.2 * g[2][t - 1] + n();
    }
    let mut names = vec!["x".to_string(), "z".to_string(), "y".to_string()];
    let mut cols = vec![x, z, y];
    for (i, s) in g.into_iter().enumerate() {
        names.push(format!("g{i}"));
        cols.push(s);
    }
    TimeSeriesPanel::from_columns(names, cols).unwrap()
}

pub fn candidates() -> Vec<ControlRef> {
    (0..P_G).map(|i| ControlRef::new(format!("g{i}"), 1)).collect()
}

pub fn essential() -> Vec<ControlRef> {
    ControlRef::lags_of(&["y", "x"], [1, 2])
}

pub fn ols_spec() -> LPSpec {
    LPSpec::new("y", "x", 4)
        .with_identification(Identification::ObservedShock)
        .with_essential(essential())
        .with_candidates(candidates())
}

pub fn iv_spec() -> LPSpec {
    ols_spec().with_identification(Identification::Iv).with_instrument("z")
}

//! Engine results against direct least-squares solutions and the exact
//! equivalences between estimators.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rslp::data::TimeSeriesPanel;
use rslp::linreg::{ols, tsls};
use rslp::lp::{
    estimate_base_lp, estimate_lp_iv, estimate_rslp, make_cumulative_target, ControlRef, Identification, LPSpec,
    RslpOptions, Weighting,
};
use rslp::subspace::SelectionDraw;

mod common;

use common::{candidates, essential, iv_spec, ols_spec, panel, P_G, T};

fn lagged(p: &TimeSeriesPanel, c: &ControlRef, t: usize) -> f64 {
    p.column(&c.variable).unwrap()[t - c.lag]
}

/// Rows 2..T-h with regressors [1, x_t, controls] and y_{t+h}.
fn design(p: &TimeSeriesPanel, controls: &[ControlRef], h: usize, lead: &str) -> (DMatrix<f64>, DVector<f64>) {
    let rows: Vec<usize> = (2..T - h).collect();
    let k = 2 + controls.len();
    let mut x = DMatrix::zeros(rows.len(), k);
    let mut y = DVector::zeros(rows.len());
    for (i, &t) in rows.iter().enumerate() {
        x[(i, 0)] = 1.0;
        x[(i, 1)] = p.column(lead).unwrap()[t];
        for (j, c) in controls.iter().enumerate() {
            x[(i, 2 + j)] = lagged(p, c, t);
        }
        y[i] = p.column("y").unwrap()[t + h];
    }
    (x, y)
}

fn svd_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-12).unwrap()
}

fn direct_ols(p: &TimeSeriesPanel, controls: &[ControlRef], h: usize) -> f64 {
    let (x, y) = design(p, controls, h, "x");
    svd_solve(&x, &y)[1]
}

/// The first stage is fitted once on every usable row (as for h = 0) and
/// its fitted values carried into each horizon's second stage.
fn direct_tsls(p: &TimeSeriesPanel, controls: &[ControlRef], h: usize) -> f64 {
    let (x0, _) = design(p, controls, 0, "x");
    let (z0, _) = design(p, controls, 0, "z");
    let xhat = &z0 * svd_solve(&z0, &x0.column(1).into_owned());
    let (mut second, y) = design(p, controls, h, "x");
    let n = second.nrows();
    second.set_column(1, &xhat.rows(0, n).into_owned());
    svd_solve(&second, &y)[1]
}

#[test]
fn base_lp_matches_direct_ols() {
    let p = panel(1);
    let est = estimate_base_lp(&p, &ols_spec()).unwrap();
    for h in 0..=4 {
        assert_relative_eq!(est.beta[h], direct_ols(&p, &essential(), h), epsilon = 1e-10);
    }
}

#[test]
fn base_iv_matches_direct_tsls() {
    let p = panel(2);
    let est = estimate_base_lp(&p, &iv_spec()).unwrap();
    for h in 0..=4 {
        assert_relative_eq!(est.beta[h], direct_tsls(&p, &essential(), h), epsilon = 1e-10);
    }
}

#[test]
fn every_draw_matches_direct_tsls() {
    let p = panel(3);
    let spec = iv_spec();
    let (_, ens) = estimate_rslp(&p, &spec, &RslpOptions::new(3, 12, 5)).unwrap();
    for (j, draw) in ens.draws.iter().enumerate() {
        let mut controls = essential();
        controls.extend(draw.indices.iter().map(|&i| candidates()[i].clone()));
        for h in 0..=4 {
            assert_relative_eq!(ens.betas[(j, h)], direct_tsls(&p, &controls, h), epsilon = 1e-10);
        }
        let single = estimate_lp_iv(&p, &spec, draw).unwrap();
        for h in 0..=4 {
            assert_relative_eq!(single.beta[h], ens.betas[(j, h)], epsilon = 1e-12);
        }
    }
}

#[test]
fn full_subset_equals_full_control_lp() {
    let p = panel(4);
    for spec in [ols_spec(), iv_spec()] {
        let (rslp, ens) = estimate_rslp(&p, &spec, &RslpOptions::new(P_G, 20, 9)).unwrap();
        let full = spec.clone().with_essential([essential(), candidates()].concat()).with_candidates(vec![]);
        let full = estimate_base_lp(&p, &full).unwrap();
        for h in 0..=4 {
            assert!((rslp.beta[h] - full.beta[h]).abs() < 1e-12, "h={h}");
        }
        assert!(ens.draws.iter().all(|d| d.indices == (0..P_G).collect::<Vec<_>>()));
    }
}

#[test]
fn oversized_k_is_clamped() {
    let p = panel(5);
    let spec = iv_spec();
    let (a, _) = estimate_rslp(&p, &spec, &RslpOptions::new(P_G, 5, 1)).unwrap();
    let (b, _) = estimate_rslp(&p, &spec, &RslpOptions::new(P_G + 10, 5, 1)).unwrap();
    assert_eq!(a.beta, b.beta);
}

#[test]
fn empty_candidate_set_equals_base_lp() {
    let p = panel(6);
    for spec in [ols_spec(), iv_spec()] {
        let spec = spec.with_candidates(vec![]);
        let base = estimate_base_lp(&p, &spec).unwrap();
        let (rslp, _) = estimate_rslp(&p, &spec, &RslpOptions::new(3, 10, 2)).unwrap();
        assert_eq!(rslp.beta, base.beta);
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

#[test]
fn draws_reweight_the_enumeration_exactly() {
    let p = panel(7);
    let spec = iv_spec();
    let all = subsets(P_G, 3);
    assert_eq!(all.len(), 20);
    let betas: Vec<Vec<f64>> = all
        .iter()
        .map(|s| {
            let d = SelectionDraw {
                indices: s.clone(),
                p_total: P_G,
            };
            estimate_lp_iv(&p, &spec, &d).unwrap().beta
        })
        .collect();

    let n_draws = 4000;
    let (rslp, ens) = estimate_rslp(&p, &spec, &RslpOptions::new(3, n_draws, 13)).unwrap();
    let counts: Vec<usize> = all
        .iter()
        .map(|s| ens.draws.iter().filter(|d| &d.indices == s).count())
        .collect();
    assert_eq!(counts.iter().sum::<usize>(), n_draws);
    for h in 0..=4 {
        let reweighted: f64 = counts.iter().zip(&betas).map(|(c, b)| *c as f64 * b[h]).sum::<f64>() / n_draws as f64;
        assert_relative_eq!(rslp.beta[h], reweighted, epsilon = 1e-12);

        // The limit is the plain average over all subsets.
        let exact: f64 = betas.iter().map(|b| b[h]).sum::<f64>() / all.len() as f64;
        let var: f64 = betas.iter().map(|b| (b[h] - exact).powi(2)).sum::<f64>() / all.len() as f64;
        let se = (var / n_draws as f64).sqrt();
        assert!((rslp.beta[h] - exact).abs() <= 4.0 * se + 1e-12, "h={h}");
    }
}

#[test]
fn perfect_instrument_is_ols() {
    let p = panel(8);
    let spec = LPSpec::new("y", "x", 3)
        .with_instrument("x")
        .with_essential(essential())
        .with_candidates(candidates());
    let (iv, _) = estimate_rslp(&p, &spec, &RslpOptions::new(3, 15, 4)).unwrap();
    let obs = spec.clone().with_identification(Identification::ObservedShock);
    let (ls, _) = estimate_rslp(&p, &obs, &RslpOptions::new(3, 15, 4)).unwrap();
    for h in 0..=3 {
        assert_relative_eq!(iv.beta[h], ls.beta[h], epsilon = 1e-10);
    }

    let x = DVector::from_column_slice(p.column("x").unwrap());
    let y = DVector::from_column_slice(p.column("y").unwrap());
    let w = DMatrix::from_fn(T, 1, |i, _| p.column("g0").unwrap()[i]);
    let fit = tsls(&y, &x, &x, &w).unwrap();
    let design = DMatrix::from_fn(T, 2, |i, j| if j == 0 { x[i] } else { w[(i, 0)] });
    let direct = ols(&design, &y, true).unwrap();
    assert_relative_eq!(fit.beta(), direct.coefficients[1], epsilon = 1e-10);
}

#[test]
fn cumulative_target_unit_impulse() {
    let mut s = vec![0.0; 12];
    s[6] = 1.0;
    let u = make_cumulative_target(&s, 2).unwrap();
    for (t, v) in u.iter().enumerate() {
        if t >= 10 {
            assert!(v.is_nan());
        } else {
            assert_eq!(*v, if (4..=6).contains(&t) { 1.0 } else { 0.0 }, "t={t}");
        }
    }
}

#[test]
fn equal_bics_reproduce_equal_weights() {
    // Candidates that are exact copies of each other give every draw the
    // same first stage, hence identical BICs.
    let p0 = panel(9);
    let g = p0.column("g3").unwrap().to_vec();
    let mut p = p0.select(&["x", "z", "y"]).unwrap();
    for i in 0..4 {
        p.push_column(format!("c{i}"), g.clone()).unwrap();
    }
    let spec = iv_spec().with_candidates((0..4).map(|i| ControlRef::new(format!("c{i}"), 1)).collect());
    let (eq, _) = estimate_rslp(&p, &spec, &RslpOptions::new(1, 16, 3)).unwrap();
    let (bic, ens) = estimate_rslp(&p, &spec, &RslpOptions::new(1, 16, 3).with_weighting(Weighting::Bic)).unwrap();
    assert!(ens.weights.iter().all(|w| (w - 1.0 / 16.0).abs() < 1e-15));
    for h in 0..=4 {
        assert_relative_eq!(eq.beta[h], bic.beta[h], epsilon = 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ensemble_mean_is_the_estimate(seed in 0u64..1000, k in 1usize..=P_G, n in 1usize..30) {
        let p = panel(seed);
        let (est, ens) = estimate_rslp(&p, &iv_spec(), &RslpOptions::new(k, n, seed)).unwrap();
        prop_assert_eq!(ens.betas.nrows(), n);
        for (a, b) in est.beta.iter().zip(ens.mean()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reruns_are_bit_identical(seed in 0u64..1000, k in 1usize..=P_G) {
        let p = panel(seed);
        let opts = RslpOptions::new(k, 20, seed);
        let a = estimate_rslp(&p, &iv_spec(), &opts).unwrap().0;
        let b = estimate_rslp(&p, &iv_spec(), &opts).unwrap().0;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn bic_weights_form_a_distribution(seed in 0u64..1000, k in 1usize..=P_G) {
        let p = panel(seed);
        let opts = RslpOptions::new(k, 25, seed).with_weighting(Weighting::Bic);
        let (_, ens) = estimate_rslp(&p, &iv_spec(), &opts).unwrap();
        prop_assert!(ens.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((ens.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

//! Shared estimation engine for base LP, RSLP and FALP.
//!
//! Every regressor any draw could use is laid out once as a column of a
//! first-stage matrix over the rows where all of them are observed. Cross
//! products over the first-stage rows and over each horizon's rows are formed
//! once, so a draw only gathers sub-blocks and solves small symmetric systems.
//! The coefficient of interest is obtained by partialling out the
//! second-stage controls (Frisch-Waugh-Lovell).

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::design::{control_column, first_stage_refs, response_value, target_series};
use crate::data::panel::TimeSeriesPanel;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, sym_pinv};
use crate::lp::bic::bic_value;
use crate::lp::spec::{ControlRef, Identification, LPSpec};
use crate::subspace::SelectionDraw;

/// Factorised symmetric positive semidefinite matrix.
pub(crate) enum SymFactor {
    Cholesky { l: Vec<f64>, n: usize },
    Pinv(DMatrix<f64>),
}

impl SymFactor {
    /// Cholesky when well conditioned, otherwise the pseudo-inverse.
    pub(crate) fn new(a: Vec<f64>, n: usize) -> SymFactor {
        let mut l = a.clone();
        if cholesky_in_place(&mut l, n, 1e-11) {
            SymFactor::Cholesky { l, n }
        } else {
            SymFactor::Pinv(sym_pinv(&DMatrix::from_row_slice(n, n, &a)))
        }
    }

    pub(crate) fn solve(&self, b: &mut [f64]) {
        match self {
            SymFactor::Cholesky { l, n } => cholesky_solve(l, *n, b),
            SymFactor::Pinv(p) => {
                let x = p * DVector::from_column_slice(b);
                b.copy_from_slice(x.as_slice());
            }
        }
    }
}

/// Column positions of every regressor in the first-stage matrix.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub target: usize,
    pub instrument: Option<usize>,
    pub v1: Vec<usize>,
    pub g1: Vec<usize>,
    pub v2: Vec<usize>,
    pub g2: Vec<usize>,
    pub n_x: usize,
}

pub(crate) const INTERCEPT: usize = 0;

pub(crate) struct HorizonData {
    /// Positions within the first-stage rows.
    pub sel: Vec<usize>,
    /// Regressors then responses on this horizon's rows.
    pub z: DMatrix<f64>,
    pub gram: DMatrix<f64>,
}

/// A prepared estimation problem shared by all draws.
pub(crate) struct Problem {
    pub spec: LPSpec,
    pub layout: Layout,
    pub n_resp: usize,
    pub rows_fs: Vec<usize>,
    pub x_fs: DMatrix<f64>,
    pub gram_fs: DMatrix<f64>,
    pub horizons: Vec<HorizonData>,
}

/// Result of one draw: coefficients for every response and horizon
/// (`beta[r * (H + 1) + h]`) and the first-stage BIC.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DrawFit {
    pub beta: Vec<f64>,
    pub bic: f64,
}

/// The instrumented regressor as a combination of first-stage columns.
pub(crate) struct Impulse {
    pub comb: Vec<(usize, f64)>,
    /// First-stage columns (empty for an observed shock).
    pub w: Vec<usize>,
    pub bic: f64,
}

/// Per-draw, per-horizon quantities needed by the error-band methods.
pub(crate) struct ExplicitFit {
    /// Fitted impulse net of the second-stage controls.
    pub xperp: Vec<f64>,
    /// Second-stage residuals per response.
    pub resid: Vec<Vec<f64>>,
    /// Second-stage fitted values per response.
    pub fitted: Vec<Vec<f64>>,
    /// First-stage residuals on this horizon's rows (empty without a first stage).
    pub eta: Vec<f64>,
    /// Controls-residualised first-stage columns that the second stage lacks.
    pub b_e: DMatrix<f64>,
    /// Rows of the first-stage projection for those columns.
    pub p_e: DMatrix<f64>,
    pub n_first: usize,
    pub n_second: usize,
}

fn gather_sym(g: &DMatrix<f64>, idx: &[usize]) -> Vec<f64> {
    let n = idx.len();
    let mut out = Vec::with_capacity(n * n);
    for &i in idx {
        for &j in idx {
            out.push(g[(i, j)]);
        }
    }
    out
}

impl Problem {
    pub(crate) fn new(panel: &TimeSeriesPanel, spec: &LPSpec, responses: &[String]) -> Result<Problem> {
        spec.validate()?;
        if responses.is_empty() {
            return Err(Error::spec("at least one response is required"));
        }
        let t_len = panel.n_obs();
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; t_len], target_series(panel, spec)?];
        let mut index: HashMap<ControlRef, usize> = HashMap::new();
        let mut add = |c: &ControlRef, cols: &mut Vec<Vec<f64>>| -> Result<usize> {
            if let Some(&i) = index.get(c) {
                return Ok(i);
            }
            cols.push(control_column(panel, c)?);
            index.insert(c.clone(), cols.len() - 1);
            Ok(cols.len() - 1)
        };
        let instrument = match (&spec.identification, &spec.instrument) {
            (Identification::Iv, Some(z)) => Some(add(&ControlRef::new(z.clone(), 0), &mut cols)?),
            _ => None,
        };
        let v2 = spec
            .essential_controls
            .iter()
            .map(|c| add(c, &mut cols))
            .collect::<Result<Vec<_>>>()?;
        let g2 = spec
            .candidate_controls
            .iter()
            .map(|c| add(c, &mut cols))
            .collect::<Result<Vec<_>>>()?;
        let (v1, g1) = if spec.first_stage_shift() > 0 {
            let v1 = first_stage_refs(spec, &spec.essential_controls)
                .iter()
                .map(|c| add(c, &mut cols))
                .collect::<Result<Vec<_>>>()?;
            let g1 = first_stage_refs(spec, &spec.candidate_controls)
                .iter()
                .map(|c| add(c, &mut cols))
                .collect::<Result<Vec<_>>>()?;
            (v1, g1)
        } else {
            (v2.clone(), g2.clone())
        };
        let n_x = cols.len();
        let layout = Layout {
            target: 1,
            instrument,
            v1,
            g1,
            v2,
            g2,
            n_x,
        };

        let rows_fs: Vec<usize> = (0..t_len).filter(|&t| cols.iter().all(|c| c[t].is_finite())).collect();
        let x_fs = DMatrix::from_fn(rows_fs.len(), n_x, |i, j| cols[j][rows_fs[i]]);
        let gram_fs = x_fs.transpose() * &x_fs;

        let ys: Vec<&[f64]> = responses.iter().map(|r| panel.column(r)).collect::<Result<_>>()?;
        let n_resp = ys.len();
        let mut horizons = Vec::with_capacity(spec.horizons + 1);
        for h in 0..=spec.horizons {
            let mut sel = Vec::new();
            let mut yv: Vec<Vec<f64>> = vec![Vec::new(); n_resp];
            for (i, &t) in rows_fs.iter().enumerate() {
                let vals: Vec<f64> = ys.iter().map(|y| response_value(y, t, h, spec.transform)).collect();
                if vals.iter().all(|v| v.is_finite()) {
                    sel.push(i);
                    for (r, v) in vals.into_iter().enumerate() {
                        yv[r].push(v);
                    }
                }
            }
            let z = DMatrix::from_fn(sel.len(), n_x + n_resp, |i, j| {
                if j < n_x {
                    x_fs[(sel[i], j)]
                } else {
                    yv[j - n_x][i]
                }
            });
            let gram = z.transpose() * &z;
            horizons.push(HorizonData { sel, z, gram });
        }
        Ok(Problem {
            spec: spec.clone(),
            layout,
            n_resp,
            rows_fs,
            x_fs,
            gram_fs,
            horizons,
        })
    }

    pub(crate) fn n_candidates(&self) -> usize {
        self.layout.g2.len()
    }

    pub(crate) fn n_horizons(&self) -> usize {
        self.horizons.len()
    }

    /// Essential-control count entering the BIC penalty.
    pub(crate) fn p_v(&self) -> usize {
        self.layout.v1.len()
    }

    fn first_stage_params(&self, k: usize) -> usize {
        1 + usize::from(self.layout.instrument.is_some()) + self.layout.v1.len() + k
    }

    fn second_stage_params(&self, k: usize) -> usize {
        2 + self.layout.v2.len() + k
    }

    /// Fails when some horizon has fewer than `params + slack` usable rows.
    pub(crate) fn check_sample(&self, k: usize) -> Result<()> {
        let slack = self.spec.min_slack;
        if self.spec.has_first_stage() {
            let needed = self.first_stage_params(k) + slack;
            if self.rows_fs.len() < needed {
                return Err(Error::InsufficientSample {
                    horizon: 0,
                    available: self.rows_fs.len(),
                    needed,
                });
            }
        }
        let needed = self.second_stage_params(k) + slack;
        for (h, hd) in self.horizons.iter().enumerate() {
            if hd.sel.len() < needed {
                return Err(Error::InsufficientSample {
                    horizon: h,
                    available: hd.sel.len(),
                    needed,
                });
            }
        }
        Ok(())
    }

    fn w_index(&self, draw: &[usize]) -> Vec<usize> {
        let l = &self.layout;
        let mut w = Vec::with_capacity(2 + l.v1.len() + draw.len());
        w.push(INTERCEPT);
        w.extend(l.instrument);
        w.extend(&l.v1);
        w.extend(draw.iter().map(|&i| l.g1[i]));
        w
    }

    fn c_index(&self, draw: &[usize]) -> Vec<usize> {
        let l = &self.layout;
        let mut c = Vec::with_capacity(1 + l.v2.len() + draw.len());
        c.push(INTERCEPT);
        c.extend(&l.v2);
        c.extend(draw.iter().map(|&i| l.g2[i]));
        c
    }

    /// First stage for one draw, with explicit fitted values on the
    /// first-stage rows.
    pub(crate) fn first_stage(&self, draw: &[usize]) -> Result<(Impulse, Vec<f64>)> {
        let l = &self.layout;
        if !self.spec.has_first_stage() {
            let x = self.x_fs.column(l.target).iter().copied().collect();
            return Ok((
                Impulse {
                    comb: vec![(l.target, 1.0)],
                    w: Vec::new(),
                    bic: f64::NAN,
                },
                x,
            ));
        }
        let w = self.w_index(draw);
        let q = w.len();
        let factor = SymFactor::new(gather_sym(&self.gram_fs, &w), q);
        let mut pi: Vec<f64> = w.iter().map(|&c| self.gram_fs[(c, l.target)]).collect();
        factor.solve(&mut pi);
        let n = self.rows_fs.len();
        let mut fitted = vec![0.0; n];
        for (&c, &p) in w.iter().zip(&pi) {
            let col = self.x_fs.column(c);
            for (f, v) in fitted.iter_mut().zip(col.iter()) {
                *f += p * v;
            }
        }
        let x = self.x_fs.column(l.target);
        let mut ssr = 0.0;
        let mut tss = 0.0;
        for (f, v) in fitted.iter().zip(x.iter()) {
            ssr += (v - f) * (v - f);
            tss += v * v;
        }
        if ssr <= 100.0 * f64::EPSILON * f64::EPSILON * tss {
            ssr = 0.0;
        }
        if self.spec.weak_t_floor > 0.0 {
            if let Some(zc) = l.instrument {
                let pos = w.iter().position(|&c| c == zc).expect("instrument in first stage");
                let mut e = vec![0.0; q];
                e[pos] = 1.0;
                factor.solve(&mut e);
                let dof = n.saturating_sub(q).max(1) as f64;
                let se = (ssr / dof * e[pos]).sqrt();
                let t = if se > 0.0 { pi[pos] / se } else { f64::INFINITY };
                if t.abs() < self.spec.weak_t_floor {
                    return Err(Error::WeakFirstStage {
                        t_stat: t,
                        floor: self.spec.weak_t_floor,
                    });
                }
            }
        }
        let bic = bic_value(ssr, n, draw.len(), self.p_v());
        let comb = w.iter().copied().zip(pi).collect();
        Ok((Impulse { comb, w, bic }, fitted))
    }

    /// Coefficients at every horizon for one draw.
    pub(crate) fn fit_draw(&self, draw: &[usize]) -> Result<DrawFit> {
        let (imp, _) = self.first_stage(draw)?;
        let c = self.c_index(draw);
        let m = c.len();
        let hp1 = self.n_horizons();
        let mut beta = vec![0.0; self.n_resp * hp1];
        let n_x = self.layout.n_x;
        for (h, hd) in self.horizons.iter().enumerate() {
            let g = &hd.gram;
            let factor = SymFactor::new(gather_sym(g, &c), m);
            let mut cx = vec![0.0; m];
            for (i, &ci) in c.iter().enumerate() {
                cx[i] = imp.comb.iter().map(|&(a, w)| w * g[(ci, a)]).sum();
            }
            let mut xx = 0.0;
            for &(a, wa) in &imp.comb {
                for &(b, wb) in &imp.comb {
                    xx += wa * wb * g[(a, b)];
                }
            }
            let mut gx = cx.clone();
            factor.solve(&mut gx);
            let den = xx - dot(&cx, &gx);
            if !(den > 1e-12 * xx.abs()) {
                return Err(Error::DegenerateDesign(format!(
                    "impulse is collinear with the controls at horizon {h}"
                )));
            }
            for r in 0..self.n_resp {
                let yc = n_x + r;
                let xy: f64 = imp.comb.iter().map(|&(a, w)| w * g[(a, yc)]).sum();
                let cy: f64 = c.iter().zip(&gx).map(|(&ci, gi)| g[(ci, yc)] * gi).sum();
                beta[r * hp1 + h] = (xy - cy) / den;
            }
        }
        Ok(DrawFit { beta, bic: imp.bic })
    }

    /// Fits every draw in parallel; identical draws are solved once.
    pub(crate) fn fit_draws(&self, draws: &[SelectionDraw]) -> Result<Vec<DrawFit>> {
        if let Some(first) = draws.first() {
            if draws.iter().all(|d| d.indices == first.indices) {
                let fit = self.fit_draw(&first.indices)?;
                return Ok(vec![fit; draws.len()]);
            }
        }
        draws.par_iter().map(|d| self.fit_draw(&d.indices)).collect()
    }

    /// Everything the error-band methods need for one draw at one horizon.
    pub(crate) fn explicit(&self, draw: &[usize], imp: &Impulse, h: usize) -> Result<ExplicitFit> {
        let hd = &self.horizons[h];
        let n = hd.sel.len();
        let n_x = self.layout.n_x;
        let g = &hd.gram;
        let c = self.c_index(draw);
        let m = c.len();
        let factor = SymFactor::new(gather_sym(g, &c), m);

        let mut xhat = vec![0.0; n];
        for &(a, w) in &imp.comb {
            for (i, v) in hd.z.column(a).iter().enumerate() {
                xhat[i] += w * v;
            }
        }
        let residualise = |v: &mut Vec<f64>, cross: Vec<f64>| {
            let mut gam = cross;
            factor.solve(&mut gam);
            for (&ci, gi) in c.iter().zip(&gam) {
                for (i, z) in hd.z.column(ci).iter().enumerate() {
                    v[i] -= gi * z;
                }
            }
        };
        let mut xperp = xhat.clone();
        let cx: Vec<f64> = c
            .iter()
            .map(|&ci| imp.comb.iter().map(|&(a, w)| w * g[(ci, a)]).sum())
            .collect();
        residualise(&mut xperp, cx);
        let den = dot(&xperp, &xperp);
        if !(den > 0.0) {
            return Err(Error::DegenerateDesign(format!(
                "impulse is collinear with the controls at horizon {h}"
            )));
        }
        let mut resid = Vec::with_capacity(self.n_resp);
        let mut fitted = Vec::with_capacity(self.n_resp);
        for r in 0..self.n_resp {
            let y: Vec<f64> = hd.z.column(n_x + r).iter().copied().collect();
            let mut yperp = y.clone();
            residualise(&mut yperp, c.iter().map(|&ci| g[(ci, n_x + r)]).collect());
            let b = dot(&xperp, &yperp) / den;
            let xi: Vec<f64> = yperp.iter().zip(&xperp).map(|(yp, xp)| yp - b * xp).collect();
            fitted.push(y.iter().zip(&xi).map(|(y, e)| y - e).collect());
            resid.push(xi);
        }

        let (eta, b_e, p_e) = if imp.w.is_empty() {
            (Vec::new(), DMatrix::zeros(n, 0), DMatrix::zeros(0, n))
        } else {
            let eta: Vec<f64> = hd
                .z
                .column(self.layout.target)
                .iter()
                .zip(&xhat)
                .map(|(x, f)| x - f)
                .collect();
            let e: Vec<usize> = imp.w.iter().copied().filter(|w| !c.contains(w)).collect();
            let mut b_e = DMatrix::zeros(n, e.len());
            for (j, &ej) in e.iter().enumerate() {
                let mut col: Vec<f64> = hd.z.column(ej).iter().copied().collect();
                residualise(&mut col, c.iter().map(|&ci| g[(ci, ej)]).collect());
                b_e.set_column(j, &DVector::from_vec(col));
            }
            let q = imp.w.len();
            let wf = SymFactor::new(gather_sym(g, &imp.w), q);
            let mut p_e = DMatrix::zeros(e.len(), n);
            for (j, &ej) in e.iter().enumerate() {
                let pos = imp.w.iter().position(|&w| w == ej).expect("E is a subset of W");
                let mut s = vec![0.0; q];
                s[pos] = 1.0;
                wf.solve(&mut s);
                for (&wc, sv) in imp.w.iter().zip(&s) {
                    for (i, z) in hd.z.column(wc).iter().enumerate() {
                        p_e[(j, i)] += sv * z;
                    }
                }
            }
            (eta, b_e, p_e)
        };
        Ok(ExplicitFit {
            xperp,
            resid,
            fitted,
            eta,
            b_e,
            p_e,
            n_first: imp.w.len(),
            n_second: m + 1,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

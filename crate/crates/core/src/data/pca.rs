use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::panel::TimeSeriesPanel;
use crate::error::{Error, Result};

/// Whether series are standardized before the eigen decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaScaling {
    /// Eigen decomposition of the correlation matrix.
    #[default]
    Correlation,
    /// Eigen decomposition of the covariance matrix (series only demeaned).
    Covariance,
}

/// Principal components of a T×N panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PCAResult {
    /// T×m component scores.
    pub factors: DMatrix<f64>,
    /// N×m eigenvectors (rows follow the kept columns).
    pub loadings: DMatrix<f64>,
    /// Share of total variance of each component, decreasing.
    pub explained: Vec<f64>,
    /// Column indices dropped for having zero variance.
    pub dropped: Vec<usize>,
    /// Column indices used.
    pub kept: Vec<usize>,
}

/// Demeaned (and optionally scaled) copy of the kept columns.
fn normalise(x: &DMatrix<f64>, scaling: PcaScaling) -> (DMatrix<f64>, Vec<usize>, Vec<usize>) {
    let (t, n) = x.shape();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    let mut cols = Vec::new();
    for j in 0..n {
        let c = x.column(j);
        let mean = c.mean();
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t.max(2) - 1) as f64;
        if !(var > 1e-14 * (1.0 + mean * mean)) {
            dropped.push(j);
            continue;
        }
        let scale = match scaling {
            PcaScaling::Correlation => var.sqrt(),
            PcaScaling::Covariance => 1.0,
        };
        cols.push(c.map(|v| (v - mean) / scale));
        kept.push(j);
    }
    let z = if cols.is_empty() {
        DMatrix::zeros(t, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (z, kept, dropped)
}

/// Top-`m` principal components of the columns of `x` (rows are periods).
///
/// Zero-variance columns are dropped with a warning; their indices are
/// reported in [`PCAResult::dropped`].
pub fn pca(x: &DMatrix<f64>, m: usize, scaling: PcaScaling) -> Result<PCAResult> {
    let (t, _) = x.shape();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("pca input contains missing or non-finite values"));
    }
    let (z, kept, dropped) = normalise(x, scaling);
    if !dropped.is_empty() {
        log::warn!("pca: dropped {} zero-variance column(s): {:?}", dropped.len(), dropped);
    }
    let n = z.ncols();
    if n == 0 {
        return Err(Error::DegenerateColumn("every column has zero variance".into()));
    }
    if m == 0 || m > n.min(t) {
        return Err(Error::InvalidDimension(format!(
            "{m} components requested from {n} usable series and {t} periods"
        )));
    }
    let cov = (z.transpose() * &z) / (t - 1) as f64;
    let trace = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut loadings = DMatrix::zeros(n, m);
    let mut explained = Vec::with_capacity(m);
    for (c, &k) in order.iter().take(m).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().cloned().fold((0.0_f64, 0.0_f64), |(best, val), e| {
            if e.abs() > best + 1e-12 {
                (e.abs(), e)
            } else {
                (best, val)
            }
        });
        if pivot.1 < 0.0 {
            v = -v;
        }
        loadings.set_column(c, &v);
        explained.push(eig.eigenvalues[k].max(0.0) / trace);
    }
    let factors = &z * &loadings;
    Ok(PCAResult {
        factors,
        loadings,
        explained,
        dropped,
        kept,
    })
}

/// Cumulative share of variance explained by the first 1..m components.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorCurve {
    pub cumulative: Vec<f64>,
    pub n_series: usize,
    pub n_obs: usize,
}

/// Correlation-PCA factor-structure curve of all series in `panel`, using
/// rows where every series is observed. `max_components` above the number of
/// usable series or periods is clamped with a warning.
pub fn factor_structure_report(panel: &TimeSeriesPanel, max_components: usize) -> Result<FactorCurve> {
    let rows: Vec<usize> = (0..panel.n_obs())
        .filter(|&t| panel.columns().iter().all(|c| c[t].is_finite()))
        .collect();
    let x = DMatrix::from_fn(rows.len(), panel.n_series(), |i, j| panel.columns()[j][rows[i]]);
    let (_, kept, _) = normalise(&x, PcaScaling::Correlation);
    let limit = kept.len().min(rows.len());
    let m = if limit == 0 {
        max_components
    } else if max_components > limit {
        log::warn!("factor structure: {max_components} components requested, clamped to {limit}");
        limit
    } else {
        max_components
    };
    let res = pca(&x, m, PcaScaling::Correlation)?;
    let mut acc = 0.0;
    let cumulative = res
        .explained
        .iter()
        .map(|e| {
            acc += e;
            acc.min(1.0)
        })
        .collect();
    Ok(FactorCurve {
        cumulative,
        n_series: kept.len(),
        n_obs: rows.len(),
    })
}

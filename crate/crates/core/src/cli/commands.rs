//! Command implementations and result writers.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cli::config::{
    resolve, CandidateRule, EstimateConfig, EstimatorChoice, ExperimentFile, Loaded, SimulateConfig,
};
use crate::data::{
    apply_tcodes, factor_structure_report, format_number, load_csv, write_csv, LoadOptions, TimeSeriesPanel,
};
use crate::error::{Error, Result};
use crate::inference::{block_bootstrap_bands, buckland_bands, BandMethod, BootstrapConfig};
use crate::lp::{estimate_base_lp, estimate_falp, estimate_rslp, select_k_by_bic, IRFEstimate, RslpOptions};
use crate::mc::{run_experiment, sweep_subspace_dimension};
use crate::subspace::CategoryLayout;

/// Provenance written next to every set of results.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest<C: Serialize>(
    out_dir: &Path,
    command: &str,
    seed: u64,
    config: &C,
    inputs: &[(String, Vec<u8>)],
    outputs: &[&str],
) -> Result<()> {
    let m = RunManifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: serde_json::to_value(config)?,
        inputs: inputs
            .iter()
            .map(|(p, b)| InputDigest {
                path: p.clone(),
                sha256: sha256_hex(b),
            })
            .collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&m)?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(())
}

fn write_text(out_dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::write(out_dir.join(name), text)?;
    Ok(())
}

/// `horizon,estimate,lower,upper`; the band columns are empty without bands.
pub fn irf_csv(est: &IRFEstimate) -> String {
    let mut out = String::from("horizon,estimate,lower,upper\n");
    for (i, h) in est.horizons.iter().enumerate() {
        let band = |b: &Option<Vec<f64>>| b.as_ref().map(|v| format_number(v[i])).unwrap_or_default();
        out.push_str(&format!(
            "{h},{},{},{}\n",
            format_number(est.beta[i]),
            band(&est.lower),
            band(&est.upper)
        ));
    }
    out
}

fn load_panel(cfg: &EstimateConfig, base: &Path) -> Result<TimeSeriesPanel> {
    let panel = load_csv(resolve(base, &cfg.panel), &cfg.load.options())?;
    if cfg.load.apply_tcodes {
        apply_tcodes(&panel)
    } else {
        Ok(panel)
    }
}

fn with_rule(spec: &crate::lp::LPSpec, rule: Option<&CandidateRule>, panel: &TimeSeriesPanel) -> crate::lp::LPSpec {
    match rule {
        None => spec.clone(),
        Some(r) => {
            let mut s = spec.clone();
            for c in r.expand(panel) {
                if !s.candidate_controls.contains(&c) {
                    s.candidate_controls.push(c);
                }
            }
            s
        }
    }
}

fn category_layout(panel: &TimeSeriesPanel, spec: &crate::lp::LPSpec, k: usize) -> Result<CategoryLayout> {
    let cats = panel
        .categories()
        .ok_or_else(|| Error::spec("drawing by category needs a panel with a category row"))?;
    let labels: Vec<&str> = spec
        .candidate_controls
        .iter()
        .map(|c| panel.index_of(&c.variable).map(|i| cats[i].as_str()))
        .collect::<Result<_>>()?;
    CategoryLayout::from_labels(&labels, k)
}

pub fn estimate(loaded: &Loaded<EstimateConfig>, out_dir: &Path) -> Result<IRFEstimate> {
    let cfg = &loaded.config;
    let panel = load_panel(cfg, &loaded.base_dir)?;
    let spec = with_rule(&cfg.spec, cfg.candidates.as_ref(), &panel);
    let mut resolved = cfg.clone();
    let est = match cfg.estimator {
        EstimatorChoice::Base => estimate_base_lp(&panel, &spec)?,
        EstimatorChoice::Falp => estimate_falp(&panel, &spec, cfg.falp.n_factors)?,
        EstimatorChoice::Rslp => {
            let k = match &cfg.rslp.select_k {
                Some(grid) => {
                    let k = select_k_by_bic(&panel, &spec, grid, cfg.rslp.n_draws, cfg.seed)?;
                    log::info!("subspace dimension {k} selected by BIC");
                    k
                }
                None => cfg.rslp.k,
            };
            resolved.rslp.k = k;
            let mut opts = RslpOptions::new(k, cfg.rslp.n_draws, cfg.seed).with_weighting(cfg.rslp.weighting);
            if cfg.rslp.by_category {
                opts = opts.with_categories(category_layout(&panel, &spec, k)?);
            }
            let (est, ens) = estimate_rslp(&panel, &spec, &opts)?;
            match cfg.bands.method.method() {
                None => est,
                Some(BandMethod::Bootstrap) => {
                    let bc = BootstrapConfig::new(cfg.bands.n_boot, cfg.seed).with_level(cfg.bands.level);
                    let b = block_bootstrap_bands(&panel, &spec, &ens, &bc)?;
                    est.with_bands(b.lower, b.upper)?
                }
                Some(BandMethod::Buckland) => {
                    let b = buckland_bands(&panel, &spec, &ens, cfg.bands.level)?;
                    est.with_bands(b.lower, b.upper)?
                }
            }
        }
    };
    if cfg.estimator != EstimatorChoice::Rslp && cfg.bands.method.method().is_some() {
        log::warn!("bands are only computed for the rslp estimator");
    }
    std::fs::create_dir_all(out_dir)?;
    write_text(out_dir, "irf.csv", &irf_csv(&est))?;
    write_manifest(out_dir, "estimate", cfg.seed, &resolved, &loaded.inputs, &["irf.csv"])?;
    Ok(est)
}

/// `horizon,<variable>...` with the analytic responses.
pub fn truth_csv(truth: &[crate::dgp::TrueIrf]) -> String {
    let mut out = String::from("horizon");
    for t in truth {
        out.push(',');
        out.push_str(&t.variable);
    }
    out.push('\n');
    let hp1 = truth.first().map_or(0, |t| t.response.len());
    for h in 0..hp1 {
        out.push_str(&h.to_string());
        for t in truth {
            out.push(',');
            out.push_str(&format_number(t.response[h]));
        }
        out.push('\n');
    }
    out
}

pub fn simulate(loaded: &Loaded<SimulateConfig>, out_dir: &Path) -> Result<()> {
    let cfg = &loaded.config;
    let out = cfg.dgp.simulate(cfg.seed)?;
    std::fs::create_dir_all(out_dir)?;
    write_csv(&out.panel, out_dir.join("panel.csv"))?;
    write_text(out_dir, "truth.csv", &truth_csv(&out.truth))?;
    write_manifest(out_dir, "simulate", cfg.seed, cfg, &loaded.inputs, &["panel.csv", "truth.csv"])
}

pub fn experiment(loaded: &Loaded<ExperimentFile>, out_dir: &Path) -> Result<()> {
    let cfg = &loaded.config.experiment;
    let table = run_experiment(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    write_text(out_dir, "scores.csv", &table.to_csv_string())?;
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    write_text(out_dir, "scores.json", &json)?;
    let failed: usize = table.rows.iter().map(|r| r.n_failed).max().unwrap_or(0);
    if failed > 0 {
        log::warn!("{} replication failure(s) excluded from scores", table.failures.len());
    }
    write_manifest(out_dir, "experiment", cfg.seed, cfg, &loaded.inputs, &["scores.csv", "scores.json"])
}

pub fn sweep(loaded: &Loaded<ExperimentFile>, out_dir: &Path) -> Result<()> {
    let cfg = &loaded.config.experiment;
    let grid = loaded
        .config
        .grid
        .clone()
        .unwrap_or_else(|| (0..=10).map(|i| i * 10).collect());
    let table = sweep_subspace_dimension(cfg, &grid)?;
    std::fs::create_dir_all(out_dir)?;
    write_text(out_dir, "sweep.csv", &table.to_csv_string())?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        #[serde(flatten)]
        experiment: &'a crate::mc::ExperimentConfig,
        grid: &'a [usize],
    }
    let resolved = Resolved {
        experiment: cfg,
        grid: &table.grid,
    };
    write_manifest(out_dir, "sweep", cfg.seed, &resolved, &loaded.inputs, &["sweep.csv"])
}

/// `component,cumulative_share`.
pub fn curve_csv(curve: &crate::data::FactorCurve) -> String {
    let mut out = String::from("component,cumulative_share\n");
    for (i, c) in curve.cumulative.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, format_number(*c)));
    }
    out
}

pub fn factor_structure(panel_path: &PathBuf, options: &LoadOptions, max: usize, out_dir: &Path) -> Result<()> {
    let bytes = std::fs::read(panel_path)?;
    let panel = load_csv(panel_path, options)?;
    let curve = factor_structure_report(&panel, max)?;
    std::fs::create_dir_all(out_dir)?;
    write_text(out_dir, "curve.csv", &curve_csv(&curve))?;
    #[derive(Serialize)]
    struct Resolved<'a> {
        panel: &'a Path,
        max_components: usize,
        date_column: bool,
    }
    let resolved = Resolved {
        panel: panel_path,
        max_components: max,
        date_column: options.date_column,
    };
    write_manifest(
        out_dir,
        "factor-structure",
        0,
        &resolved,
        &[(panel_path.display().to_string(), bytes)],
        &["curve.csv"],
    )
}

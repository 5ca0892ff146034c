//! Monte Carlo harness: simulate, estimate, score.
//!
//! Replication `i` draws everything from a seed derived from the master seed
//! and `i`, so any replication can be rerun on its own and results do not
//! depend on how replications are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::format_number;
use crate::dgp::{info_name, simulate_dfm_design, simulate_fiscal_design, DGPOutput, DfmDesign, FiscalDesign};
use crate::error::{Error, Result};
use crate::inference::{bootstrap_sd, buckland_sd, nw_variances, BandMethod, Bands, BootstrapConfig};
use crate::lp::engine::Problem;
use crate::lp::estimate::{argmin_bic, base_from_problem, bic_grid, run_draws, run_rslp};
use crate::lp::{estimate_falp_multi, generate_draws, ControlRef, Identification, LPSpec, RslpOptions, Weighting};
use crate::rng::{derive_seed, purpose};
use crate::subspace::SelectionDraw;

/// Data-generating process of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpConfig {
    Fiscal(FiscalDesign),
    Dfm(DfmDesign),
}

impl DgpConfig {
    pub fn simulate(&self, seed: u64) -> Result<DGPOutput> {
        match self {
            DgpConfig::Fiscal(d) => simulate_fiscal_design(d, seed),
            DgpConfig::Dfm(d) => simulate_dfm_design(d, seed),
        }
    }

    pub fn horizons(&self) -> usize {
        match self {
            DgpConfig::Fiscal(d) => d.horizons,
            DgpConfig::Dfm(d) => d.horizons,
        }
    }

    fn default_variables(&self) -> Vec<String> {
        match self {
            DgpConfig::Fiscal(_) => vec!["tax".into(), "capital".into()],
            DgpConfig::Dfm(d) => d.params.series_names().into_iter().take(3).collect(),
        }
    }

    /// The projection used when a config does not spell one out.
    ///
    /// Fiscal: tax impulse accumulated over the foresight lead, two lags of
    /// tax and capital as essential controls (plus two lags of `z` under IV)
    /// and the first lag of every informational series as candidates.
    /// Factor model: the first variable is the impulse, two lags of it and
    /// of `z` are essential, and the first lag of every other series is a
    /// candidate.
    pub fn default_spec(&self, identification: Identification, variables: &[String]) -> Result<LPSpec> {
        let h = self.horizons();
        match self {
            DgpConfig::Fiscal(d) => {
                let infos: Vec<String> = (0..d.n_info).map(info_name).collect();
                let candidates = ControlRef::lags_of(&infos, [1]);
                match identification {
                    Identification::Iv => Ok(LPSpec::new("tax", "tax", h)
                        .with_instrument("z")
                        .with_impulse_accumulation(d.params.foresight_lead)
                        .with_essential(ControlRef::lags_of(&["tax", "capital", "z"], [1, 2]))
                        .with_candidates(candidates)),
                    Identification::CumulativeSvar { lead } => Ok(LPSpec::new("tax", "tax", h)
                        .with_identification(Identification::CumulativeSvar { lead })
                        .with_essential(ControlRef::lags_of(&["tax", "capital"], [1, 2]))
                        .with_candidates(candidates)),
                    Identification::ObservedShock => {
                        Err(Error::spec("the fiscal experiment needs IV or cumulative SVAR identification"))
                    }
                }
            }
            DgpConfig::Dfm(d) => {
                let impulse = variables
                    .first()
                    .ok_or_else(|| Error::spec("at least one variable is required"))?;
                let names: Vec<String> = d.params.series_names().into_iter().filter(|n| n != impulse).collect();
                let candidates = ControlRef::lags_of(&names, [1]);
                let spec = LPSpec::new(impulse.clone(), impulse.clone(), h).with_candidates(candidates);
                match identification {
                    Identification::Iv => Ok(spec
                        .with_instrument("z")
                        .with_essential(ControlRef::lags_of(&[impulse.as_str(), "z"], [1, 2]))),
                    Identification::CumulativeSvar { lead } => Ok(spec
                        .with_identification(Identification::CumulativeSvar { lead })
                        .with_essential(ControlRef::lags_of(&[impulse.as_str()], [1, 2]))),
                    Identification::ObservedShock => Err(Error::spec("the structural shock is not observed")),
                }
            }
        }
    }
}

/// Band settings for an RSLP estimator inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandsConfig {
    pub method: BandMethod,
    #[serde(default = "default_n_boot")]
    pub n_boot: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_n_boot() -> usize {
    500
}
fn default_level() -> f64 {
    0.90
}
fn default_k() -> usize {
    50
}
fn default_n_draws() -> usize {
    1000
}
fn default_factors() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Base,
    Rslp {
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_n_draws")]
        n_draws: usize,
        #[serde(default)]
        weighting: Weighting,
        /// Choose k per replication from this grid by ensemble BIC.
        #[serde(default)]
        select_k: Option<Vec<usize>>,
        #[serde(default)]
        bands: Option<BandsConfig>,
    },
    Falp {
        #[serde(default = "default_factors")]
        n_factors: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: EstimatorKind,
}

impl EstimatorConfig {
    pub fn base() -> Self {
        EstimatorConfig {
            name: "base".into(),
            kind: EstimatorKind::Base,
        }
    }

    pub fn rslp(k: usize, n_draws: usize) -> Self {
        EstimatorConfig {
            name: "rslp".into(),
            kind: EstimatorKind::Rslp {
                k,
                n_draws,
                weighting: Weighting::Equal,
                select_k: None,
                bands: None,
            },
        }
    }

    pub fn falp(n_factors: usize) -> Self {
        EstimatorConfig {
            name: "falp".into(),
            kind: EstimatorKind::Falp { n_factors },
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Attaches bands to an RSLP estimator; other kinds are returned unchanged.
    pub fn with_bands(mut self, bands: BandsConfig) -> Self {
        if let EstimatorKind::Rslp { bands: b, .. } = &mut self.kind {
            *b = Some(bands);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                key: format!("estimators.{}.{field}", self.name),
                message: message.into(),
            })
        };
        match &self.kind {
            EstimatorKind::Base => Ok(()),
            EstimatorKind::Falp { n_factors } if *n_factors == 0 => bad("n_factors", "must be at least 1"),
            EstimatorKind::Falp { .. } => Ok(()),
            EstimatorKind::Rslp {
                n_draws,
                select_k,
                bands,
                ..
            } => {
                if *n_draws == 0 {
                    return bad("n_draws", "must be at least 1");
                }
                if select_k.as_ref().is_some_and(|g| g.is_empty()) {
                    return bad("select_k", "grid is empty");
                }
                if let Some(b) = bands {
                    BootstrapConfig::new(b.n_boot, 0)
                        .with_level(b.level)
                        .validate()
                        .or_else(|e| bad("bands", &e.to_string()))?;
                }
                Ok(())
            }
        }
    }
}

fn default_replications() -> usize {
    1000
}

fn default_identification() -> Identification {
    Identification::Iv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dgp: DgpConfig,
    #[serde(default = "default_identification")]
    pub identification: Identification,
    #[serde(default = "default_replications")]
    pub n_replications: usize,
    pub estimators: Vec<EstimatorConfig>,
    /// Estimator whose RMSE is the denominator of relative RMSE; defaults to
    /// the first RSLP estimator, else the first estimator.
    #[serde(default)]
    pub baseline: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Responses to score; defaults to tax and capital (fiscal) or the first
    /// three series (factor model).
    #[serde(default)]
    pub variables: Option<Vec<String>>,
    /// Overrides the default projection for the DGP.
    #[serde(default)]
    pub spec: Option<LPSpec>,
}

impl ExperimentConfig {
    /// Base LP, RSLP (k = 50) and FALP (two factors) on one DGP, scored
    /// relative to RSLP.
    pub fn new(dgp: DgpConfig, n_replications: usize, n_draws: usize, seed: u64) -> Self {
        ExperimentConfig {
            dgp,
            identification: Identification::Iv,
            n_replications,
            estimators: vec![
                EstimatorConfig::base(),
                EstimatorConfig::rslp(50, n_draws),
                EstimatorConfig::falp(2),
            ],
            baseline: None,
            seed,
            variables: None,
            spec: None,
        }
    }

    pub fn with_identification(mut self, identification: Identification) -> Self {
        self.identification = identification;
        self
    }

    pub fn with_estimators(mut self, estimators: Vec<EstimatorConfig>) -> Self {
        self.estimators = estimators;
        self
    }

    pub fn variables(&self) -> Vec<String> {
        self.variables.clone().unwrap_or_else(|| self.dgp.default_variables())
    }

    pub fn lp_spec(&self) -> Result<LPSpec> {
        match &self.spec {
            Some(s) => Ok(s.clone()),
            None => self.dgp.default_spec(self.identification, &self.variables()),
        }
    }

    pub fn baseline_name(&self) -> Result<String> {
        if let Some(b) = &self.baseline {
            if !self.estimators.iter().any(|e| &e.name == b) {
                return Err(Error::Config {
                    key: "baseline".into(),
                    message: format!("no estimator named `{b}`"),
                });
            }
            return Ok(b.clone());
        }
        self.estimators
            .iter()
            .find(|e| matches!(e.kind, EstimatorKind::Rslp { .. }))
            .or(self.estimators.first())
            .map(|e| e.name.clone())
            .ok_or(Error::Config {
                key: "estimators".into(),
                message: "at least one estimator is required".into(),
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_replications == 0 {
            return Err(Error::Config {
                key: "n_replications".into(),
                message: "must be at least 1".into(),
            });
        }
        let mut names: Vec<&str> = self.estimators.iter().map(|e| e.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config {
                key: "estimators".into(),
                message: format!("duplicate estimator name `{}`", w[0]),
            });
        }
        for e in &self.estimators {
            e.validate()?;
        }
        self.baseline_name()?;
        if self.variables().is_empty() {
            return Err(Error::Config {
                key: "variables".into(),
                message: "at least one variable is required".into(),
            });
        }
        self.lp_spec()?.validate()
    }
}

/// Seed of replication `i`.
pub fn replication_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, &[purpose::REPLICATION, i as u64])
}

/// One estimator's output for one variable in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    pub replication: usize,
    pub estimator: String,
    pub variable: String,
    pub beta: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub estimator: String,
    pub message: String,
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub estimates: Vec<ReplicationEstimate>,
    pub failures: Vec<Failure>,
}

/// Truth per variable, scaled to a unit movement of the regressor of
/// interest (the impulse accumulated over the target lead).
fn scaled_truth(out: &DGPOutput, spec: &LPSpec, variables: &[String]) -> Result<Vec<Vec<f64>>> {
    let imp = out
        .truth_for(&spec.impulse)
        .ok_or_else(|| Error::MissingVariable(format!("no true response for impulse `{}`", spec.impulse)))?;
    let lead = match spec.identification {
        Identification::CumulativeSvar { lead } => lead,
        _ => spec.impulse_accumulation,
    };
    if imp.len() <= lead {
        return Err(Error::spec("truth horizon shorter than the impulse accumulation"));
    }
    let scale: f64 = imp[..=lead].iter().sum();
    if scale == 0.0 {
        return Err(Error::spec("the impulse does not respond to the shock over the accumulation window"));
    }
    variables
        .iter()
        .map(|v| {
            out.truth_for(v)
                .map(|t| t.iter().map(|x| x / scale).collect())
                .ok_or_else(|| Error::MissingVariable(format!("no true response for `{v}`")))
        })
        .collect()
}

/// Population responses the estimators target, per variable.
pub fn experiment_truth(config: &ExperimentConfig) -> Result<Vec<Vec<f64>>> {
    let out = config.dgp.simulate(replication_seed(config.seed, 0))?;
    scaled_truth(&out, &config.lp_spec()?, &config.variables())
}

fn rslp_estimates(
    problem: &Problem,
    kind: &EstimatorKind,
    seed: u64,
    variables: &[String],
) -> Result<Vec<(Vec<f64>, Option<Bands>)>> {
    let EstimatorKind::Rslp {
        k,
        n_draws,
        weighting,
        select_k,
        bands,
    } = kind
    else {
        unreachable!("called with an RSLP estimator")
    };
    let k = match select_k {
        Some(grid) => argmin_bic(&bic_grid(problem, grid, *n_draws, seed)?),
        None => *k,
    };
    let opts = RslpOptions::new(k, *n_draws, seed).with_weighting(*weighting);
    let run = run_rslp(problem, &opts)?;
    let hp1 = problem.n_horizons();
    let betas: Vec<Vec<f64>> = (0..variables.len()).map(|r| run.beta(r, hp1)).collect();
    let sds: Option<Vec<Vec<f64>>> = match bands {
        None => None,
        Some(b) => Some(match b.method {
            BandMethod::Bootstrap => {
                let cfg = BootstrapConfig::new(b.n_boot, seed).with_level(b.level);
                bootstrap_sd(problem, &run.draws, &run.weights, &cfg)?
            }
            BandMethod::Buckland => {
                let vars = nw_variances(problem, &run.draws)?;
                (0..variables.len())
                    .map(|r| buckland_sd(&run.ensemble(r, hp1), &vars[r]))
                    .collect::<Result<_>>()?
            }
        }),
    };
    betas
        .into_iter()
        .enumerate()
        .map(|(r, beta)| {
            let bands = match (&sds, bands) {
                (Some(sd), Some(b)) => Some(Bands::around(&beta, sd[r].clone(), b.level)?),
                _ => None,
            };
            Ok((beta, bands))
        })
        .collect()
}

/// Simulates replication `i` and runs every estimator on it.
pub fn run_replication(config: &ExperimentConfig, i: usize) -> Result<ReplicationOutcome> {
    let seed = replication_seed(config.seed, i);
    let out = config.dgp.simulate(seed)?;
    let spec = config.lp_spec()?;
    let variables = config.variables();
    let problem = Problem::new(&out.panel, &spec, &variables).map_err(|e| e.to_string());
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for est in &config.estimators {
        let res: std::result::Result<Vec<(Vec<f64>, Option<Bands>)>, String> = match &est.kind {
            EstimatorKind::Base => problem.as_ref().map_err(Clone::clone).and_then(|p| {
                base_from_problem(p, &variables)
                    .map(|v| v.into_iter().map(|e| (e.beta, None)).collect())
                    .map_err(|e| e.to_string())
            }),
            kind @ EstimatorKind::Rslp { .. } => problem
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|p| rslp_estimates(p, kind, seed, &variables).map_err(|e| e.to_string())),
            EstimatorKind::Falp { n_factors } => estimate_falp_multi(&out.panel, &spec, &variables, *n_factors)
                .map(|v| v.into_iter().map(|e| (e.beta, None)).collect())
                .map_err(|e| e.to_string()),
        };
        match res {
            Ok(per_var) => {
                for (v, (beta, bands)) in variables.iter().zip(per_var) {
                    estimates.push(ReplicationEstimate {
                        replication: i,
                        estimator: est.name.clone(),
                        variable: v.clone(),
                        beta,
                        lower: bands.as_ref().map(|b| b.lower.clone()),
                        upper: bands.map(|b| b.upper),
                    });
                }
            }
            Err(message) => failures.push(Failure {
                replication: i,
                estimator: est.name.clone(),
                message,
            }),
        }
    }
    Ok(ReplicationOutcome { estimates, failures })
}

/// Scores for one estimator and variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub estimator: String,
    pub variable: String,
    /// sqrt of the squared error averaged over horizons and replications.
    pub rmse: f64,
    pub rmse_by_horizon: Vec<f64>,
    /// Mean of estimate minus truth per horizon.
    pub bias: Vec<f64>,
    pub relative_rmse: f64,
    /// Share of replications whose band covers the truth, per horizon.
    pub coverage: Option<Vec<f64>>,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub baseline: String,
    pub horizons: Vec<usize>,
    pub truth: Vec<(String, Vec<f64>)>,
    pub rows: Vec<ScoreRow>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub estimates: Vec<ReplicationEstimate>,
}

fn rmse_parts(estimates: &[&ReplicationEstimate], truth: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let hp1 = truth.len();
    let n = estimates.len() as f64;
    let mut sq = vec![0.0; hp1];
    let mut bias = vec![0.0; hp1];
    for e in estimates {
        for h in 0..hp1 {
            let d = e.beta[h] - truth[h];
            sq[h] += d * d;
            bias[h] += d;
        }
    }
    let mse: Vec<f64> = sq.iter().map(|s| s / n).collect();
    let rmse = (mse.iter().sum::<f64>() / hp1 as f64).sqrt();
    (
        rmse,
        mse.iter().map(|m| m.sqrt()).collect(),
        bias.iter().map(|b| b / n).collect(),
    )
}

impl ScoreTable {
    pub fn row(&self, estimator: &str, variable: &str) -> Option<&ScoreRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.variable == variable)
    }

    /// Mean estimate per horizon over successful replications.
    pub fn mean_estimate(&self, estimator: &str, variable: &str) -> Option<Vec<f64>> {
        let es: Vec<&ReplicationEstimate> = self
            .estimates
            .iter()
            .filter(|e| e.estimator == estimator && e.variable == variable)
            .collect();
        let first = es.first()?;
        let n = es.len() as f64;
        Some(
            (0..first.beta.len())
                .map(|h| es.iter().map(|e| e.beta[h]).sum::<f64>() / n)
                .collect(),
        )
    }

    /// RMSE recomputed from the stored per-replication estimates.
    pub fn rmse_from_estimates(&self, estimator: &str, variable: &str) -> Option<f64> {
        let truth = &self.truth.iter().find(|(v, _)| v == variable)?.1;
        let es: Vec<&ReplicationEstimate> = self
            .estimates
            .iter()
            .filter(|e| e.estimator == estimator && e.variable == variable)
            .collect();
        if es.is_empty() {
            return None;
        }
        let mut total = 0.0;
        for e in &es {
            total += e.beta.iter().zip(truth).map(|(b, t)| (b - t).powi(2)).sum::<f64>();
        }
        Some((total / (es.len() * truth.len()) as f64).sqrt())
    }

    /// CSV with one row per estimator and variable, keyed `estimator:variable`.
    pub fn to_csv_string(&self) -> String {
        let hp1 = self.horizons.len();
        let with_cov = self.rows.iter().any(|r| r.coverage.is_some());
        let mut header = vec!["key", "rmse", "relative_rmse", "n_ok", "n_failed"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend((0..hp1).map(|h| format!("rmse_h{h}")));
        header.extend((0..hp1).map(|h| format!("bias_h{h}")));
        if with_cov {
            header.extend((0..hp1).map(|h| format!("coverage_h{h}")));
        }
        let mut out = header.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![
                format!("{}:{}", r.estimator, r.variable),
                format_number(r.rmse),
                format_number(r.relative_rmse),
                r.n_ok.to_string(),
                r.n_failed.to_string(),
            ];
            cells.extend(r.rmse_by_horizon.iter().map(|v| format_number(*v)));
            cells.extend(r.bias.iter().map(|v| format_number(*v)));
            if with_cov {
                match &r.coverage {
                    Some(c) => cells.extend(c.iter().map(|v| format_number(*v))),
                    None => cells.extend(std::iter::repeat_n(String::new(), hp1)),
                }
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn collect_outcomes(config: &ExperimentConfig) -> Vec<Result<ReplicationOutcome>> {
    (0..config.n_replications)
        .into_par_iter()
        .map(|i| run_replication(config, i))
        .collect()
}

/// Runs every replication and scores each estimator against the truth.
///
/// A replication where an estimator fails is excluded from that estimator's
/// scores and counted in `n_failed`. Fails only when nothing succeeded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ScoreTable> {
    config.validate()?;
    let variables = config.variables();
    let truth = experiment_truth(config)?;
    let baseline = config.baseline_name()?;
    let mut estimates = Vec::new();
    let mut failures = Vec::new();
    for (i, o) in collect_outcomes(config).into_iter().enumerate() {
        match o {
            Ok(o) => {
                estimates.extend(o.estimates);
                failures.extend(o.failures);
            }
            Err(e) => failures.extend(config.estimators.iter().map(|est| Failure {
                replication: i,
                estimator: est.name.clone(),
                message: e.to_string(),
            })),
        }
    }
    if estimates.is_empty() {
        return Err(Error::Infeasible(format!(
            "all {} replications failed; first error: {}",
            config.n_replications,
            failures.first().map_or("none", |f| f.message.as_str())
        )));
    }
    for f in &failures {
        log::warn!("replication {} {}: {}", f.replication, f.estimator, f.message);
    }
    let mut rows = Vec::new();
    for est in &config.estimators {
        let n_failed = failures.iter().filter(|f| f.estimator == est.name).count();
        for (v, tr) in variables.iter().zip(&truth) {
            let es: Vec<&ReplicationEstimate> = estimates
                .iter()
                .filter(|e| e.estimator == est.name && &e.variable == v)
                .collect();
            let (rmse, by_h, bias) = if es.is_empty() {
                (f64::NAN, vec![f64::NAN; tr.len()], vec![f64::NAN; tr.len()])
            } else {
                rmse_parts(&es, tr)
            };
            let coverage = es.first().and_then(|e| e.lower.as_ref()).map(|_| {
                (0..tr.len())
                    .map(|h| {
                        let hits = es
                            .iter()
                            .filter(|e| match (&e.lower, &e.upper) {
                                (Some(l), Some(u)) => l[h] <= tr[h] && tr[h] <= u[h],
                                _ => false,
                            })
                            .count();
                        hits as f64 / es.len() as f64
                    })
                    .collect()
            });
            rows.push(ScoreRow {
                estimator: est.name.clone(),
                variable: v.clone(),
                rmse,
                rmse_by_horizon: by_h,
                bias,
                relative_rmse: f64::NAN,
                coverage,
                n_ok: es.len(),
                n_failed,
            });
        }
    }
    for v in &variables {
        let base = rows
            .iter()
            .find(|r| r.estimator == baseline && &r.variable == v)
            .map(|r| r.rmse)
            .unwrap_or(f64::NAN);
        for r in rows.iter_mut().filter(|r| &r.variable == v) {
            r.relative_rmse = if r.estimator == baseline { 1.0 } else { r.rmse / base };
        }
    }
    Ok(ScoreTable {
        baseline,
        horizons: (0..truth[0].len()).collect(),
        truth: variables.into_iter().zip(truth).collect(),
        rows,
        failures,
        estimates,
    })
}

/// RMSE of RSLP per subspace dimension, relative to base LP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub grid: Vec<usize>,
    pub variables: Vec<String>,
    pub base_rmse: Vec<f64>,
    /// `rmse[i][v]` for grid value i and variable v.
    pub rmse: Vec<Vec<f64>>,
    pub relative: Vec<Vec<f64>>,
    pub n_ok: usize,
    pub n_failed: usize,
}

impl SweepTable {
    /// Grid value with the smallest relative RMSE for `variable` (ties go to
    /// the smaller k).
    pub fn argmin(&self, variable: &str) -> Option<usize> {
        let v = self.variables.iter().position(|x| x == variable)?;
        let mut best: Option<(usize, f64)> = None;
        for (i, &k) in self.grid.iter().enumerate() {
            let r = self.relative[i][v];
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((k, r));
            }
        }
        best.map(|b| b.0)
    }

    pub fn to_csv_string(&self) -> String {
        let mut header = vec!["k".to_string()];
        for v in &self.variables {
            header.push(format!("relative_{v}"));
        }
        for v in &self.variables {
            header.push(format!("rmse_{v}"));
        }
        let mut out = header.join(",");
        out.push('\n');
        for (i, k) in self.grid.iter().enumerate() {
            let mut cells = vec![k.to_string()];
            cells.extend(self.relative[i].iter().map(|v| format_number(*v)));
            cells.extend(self.rmse[i].iter().map(|v| format_number(*v)));
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Draw count and weighting for a sweep: those of the config's first RSLP
/// estimator, else 1000 equal-weight draws.
fn sweep_settings(config: &ExperimentConfig) -> (usize, Weighting) {
    config
        .estimators
        .iter()
        .find_map(|e| match &e.kind {
            EstimatorKind::Rslp { n_draws, weighting, .. } => Some((*n_draws, *weighting)),
            _ => None,
        })
        .unwrap_or((default_n_draws(), Weighting::Equal))
}

/// Relative RMSE of RSLP against base LP for every k in `grid`.
///
/// Every replication fits base LP once and RSLP at each k on the same data;
/// a replication failing at any k is dropped from every k. At k = 0 RSLP is
/// base LP, so that row's ratio is exactly 1.
pub fn sweep_subspace_dimension(config: &ExperimentConfig, grid: &[usize]) -> Result<SweepTable> {
    config.validate()?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut grid = grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let variables = config.variables();
    let spec = config.lp_spec()?;
    let truth = experiment_truth(config)?;
    let (n_draws, weighting) = sweep_settings(config);
    let nv = variables.len();
    let per_rep: Vec<Result<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)>> = (0..config.n_replications)
        .into_par_iter()
        .map(|i| {
            let seed = replication_seed(config.seed, i);
            let out = config.dgp.simulate(seed)?;
            let problem = Problem::new(&out.panel, &spec, &variables)?;
            let hp1 = problem.n_horizons();
            let base = run_draws(&problem, vec![SelectionDraw::empty(problem.n_candidates())], Weighting::Equal)?;
            let base_b: Vec<Vec<f64>> = (0..nv).map(|r| base.beta(r, hp1)).collect();
            let mut by_k = Vec::with_capacity(grid.len());
            for &k in &grid {
                let draws = generate_draws(problem.n_candidates(), k, n_draws, seed, None)?;
                let run = run_draws(&problem, draws, weighting)?;
                by_k.push((0..nv).map(|r| run.beta(r, hp1)).collect());
            }
            Ok((base_b, by_k))
        })
        .collect();
    let ok: Vec<_> = per_rep.iter().filter_map(|r| r.as_ref().ok()).collect();
    let n_failed = per_rep.len() - ok.len();
    for (i, r) in per_rep.iter().enumerate() {
        if let Err(e) = r {
            log::warn!("sweep replication {i}: {e}");
        }
    }
    if ok.is_empty() {
        return Err(Error::Infeasible("every sweep replication failed".into()));
    }
    let rmse_of = |pick: &dyn Fn(&(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)) -> &Vec<f64>, v: usize| -> f64 {
        let tr = &truth[v];
        let mut total = 0.0;
        for rep in &ok {
            total += pick(rep).iter().zip(tr).map(|(b, t)| (b - t).powi(2)).sum::<f64>();
        }
        (total / (ok.len() * tr.len()) as f64).sqrt()
    };
    let base_rmse: Vec<f64> = (0..nv).map(|v| rmse_of(&|rep| &rep.0[v], v)).collect();
    let rmse: Vec<Vec<f64>> = (0..grid.len())
        .map(|i| (0..nv).map(|v| rmse_of(&|rep| &rep.1[i][v], v)).collect())
        .collect();
    let relative = rmse
        .iter()
        .map(|row| row.iter().zip(&base_rmse).map(|(r, b)| r / b).collect())
        .collect();
    Ok(SweepTable {
        grid,
        variables,
        base_rmse,
        rmse,
        relative,
        n_ok: ok.len(),
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{FiscalParams, InstrumentMode};

    fn small(mode: InstrumentMode) -> ExperimentConfig {
        let mut d = FiscalDesign::new(120, FiscalParams::default(), mode);
        d.n_info = 20;
        ExperimentConfig::new(DgpConfig::Fiscal(d), 4, 10, 3).with_estimators(vec![
            EstimatorConfig::base(),
            EstimatorConfig::rslp(5, 10),
        ])
    }

    #[test]
    fn rmse_formula() {
        let e = ReplicationEstimate {
            replication: 0,
            estimator: "a".into(),
            variable: "v".into(),
            beta: vec![1.5],
            lower: None,
            upper: None,
        };
        let (rmse, _, bias) = rmse_parts(&[&e], &[1.0]);
        assert_eq!(rmse, 0.5);
        assert_eq!(bias, vec![0.5]);
    }

    #[test]
    fn baseline_ratio_is_one_and_stored_rmse_agrees() {
        let cfg = small(InstrumentMode::Strict);
        let t = run_experiment(&cfg).unwrap();
        assert_eq!(t.baseline, "rslp");
        for v in ["tax", "capital"] {
            assert_eq!(t.row("rslp", v).unwrap().relative_rmse, 1.0);
            for est in ["base", "rslp"] {
                let r = t.row(est, v).unwrap();
                assert!((r.rmse - t.rmse_from_estimates(est, v).unwrap()).abs() < 1e-12);
                assert_eq!(r.n_ok, 4);
            }
        }
        assert_eq!(t.truth[0].1, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn replication_rerun_is_bitwise_identical() {
        let cfg = small(InstrumentMode::Conditional);
        let t = run_experiment(&cfg).unwrap();
        let again = run_replication(&cfg, 2).unwrap();
        let stored: Vec<_> = t.estimates.iter().filter(|e| e.replication == 2).cloned().collect();
        assert_eq!(stored, again.estimates);
    }

    #[test]
    fn sweep_k_zero_is_base() {
        let cfg = small(InstrumentMode::Conditional);
        let s = sweep_subspace_dimension(&cfg, &[5, 0, 10]).unwrap();
        assert_eq!(s.grid, vec![0, 5, 10]);
        assert_eq!(s.relative[0], vec![1.0, 1.0]);
    }

    #[test]
    fn failures_are_counted() {
        let mut cfg = small(InstrumentMode::Strict);
        cfg.estimators.push(EstimatorConfig::falp(500).named("falp_bad"));
        let t = run_experiment(&cfg).unwrap();
        let r = t.row("falp_bad", "tax").unwrap();
        assert_eq!((r.n_ok, r.n_failed), (0, 4));
        assert!(r.rmse.is_nan());
        assert_eq!(t.failures.len(), 4);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small(InstrumentMode::Strict);
        cfg.baseline = Some("nope".into());
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let mut cfg = small(InstrumentMode::Strict);
        cfg.n_replications = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = small(InstrumentMode::Conditional);
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let minimal: ExperimentConfig = toml::from_str(
            "[dgp]\nkind = \"fiscal\"\ninstrument = \"strict\"\n[[estimators]]\nname = \"r\"\nkind = \"rslp\"\n",
        )
        .unwrap();
        assert_eq!(minimal.n_replications, 1000);
        assert_eq!(minimal.estimators[0].kind, EstimatorConfig::rslp(50, 1000).kind);
        let DgpConfig::Fiscal(d) = minimal.dgp else { panic!() };
        assert_eq!(d.t, 200);
        d.params.validate().unwrap();
    }
}

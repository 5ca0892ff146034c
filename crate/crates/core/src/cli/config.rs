//! Configuration files and flag overrides.
//!
//! Files are TOML. Flags are written into the parsed document before it is
//! deserialised, so a flag and the equivalent file key behave identically and
//! the manifest records the merged result with every default filled in.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::data::{LoadOptions, TimeSeriesPanel};
use crate::dgp::DFMParams;
use crate::inference::BandMethod;
use crate::lp::{ControlRef, LPSpec, Weighting};
use crate::mc::{DgpConfig, ExperimentConfig};

/// Errors before any computation starts (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn key(key: &str, message: impl std::fmt::Display) -> Self {
        ConfigError(format!("configuration error in `{key}`: {message}"))
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

/// Flag values that override configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub n_draws: Option<usize>,
    pub bands: Option<String>,
    pub weighting: Option<Weighting>,
    pub select_k: Option<Vec<usize>>,
    pub grid: Option<Vec<usize>>,
}

fn read_toml(path: &Path) -> ConfigResult<(toml::Table, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError(format!("{} is not UTF-8", path.display())))?;
    let table = text
        .parse::<toml::Table>()
        .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))?;
    Ok((table, bytes))
}

fn table_mut<'a>(root: &'a mut toml::Table, key: &str) -> ConfigResult<&'a mut toml::Table> {
    root.entry(key.to_string())
        .or_insert_with(|| Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| ConfigError::key(key, "expected a table"))
}

fn int(v: usize) -> Value {
    Value::Integer(v as i64)
}

fn int_list(v: &[usize]) -> Value {
    Value::Array(v.iter().map(|x| int(*x)).collect())
}

fn seed_value(seed: u64) -> Value {
    // TOML integers are signed; seeds above i64::MAX do not fit.
    Value::Integer(seed as i64)
}

fn deserialize<T: serde::de::DeserializeOwned>(table: toml::Table, what: &str) -> ConfigResult<T> {
    T::deserialize(Value::Table(table)).map_err(|e| ConfigError(format!("invalid {what} configuration: {e}")))
}

/// A config file's content plus where it came from.
pub struct Loaded<T> {
    pub config: T,
    /// Files read, with their bytes, for the manifest.
    pub inputs: Vec<(String, Vec<u8>)>,
    pub base_dir: PathBuf,
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Resolves a path relative to the config file's directory.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    Base,
    #[default]
    Rslp,
    Falp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default = "yes")]
    pub date_column: bool,
    #[serde(default)]
    pub tcode_row: Option<bool>,
    /// Transform every series by its code before estimation.
    #[serde(default)]
    pub apply_tcodes: bool,
}

fn yes() -> bool {
    true
}

impl Default for LoadConfig {
    fn default() -> Self {
        LoadConfig {
            date_column: true,
            tcode_row: None,
            apply_tcodes: false,
        }
    }
}

impl LoadConfig {
    pub fn options(&self) -> LoadOptions {
        LoadOptions {
            date_column: self.date_column,
            tcode_row: self.tcode_row,
        }
    }
}

/// Every panel series not listed in `exclude`, at each of `lags`, appended
/// to the candidate controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRule {
    pub lags: Vec<usize>,
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl CandidateRule {
    pub fn expand(&self, panel: &TimeSeriesPanel) -> Vec<ControlRef> {
        let names: Vec<&String> = panel.names().iter().filter(|n| !self.exclude.contains(n)).collect();
        ControlRef::lags_of(&names, self.lags.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RslpSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub select_k: Option<Vec<usize>>,
    /// Draw within the panel's series categories.
    #[serde(default)]
    pub by_category: bool,
}

fn default_k() -> usize {
    50
}
fn default_n_draws() -> usize {
    1000
}

impl Default for RslpSection {
    fn default() -> Self {
        RslpSection {
            k: default_k(),
            n_draws: default_n_draws(),
            weighting: Weighting::Equal,
            select_k: None,
            by_category: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalpSection {
    #[serde(default = "default_factors")]
    pub n_factors: usize,
}

fn default_factors() -> usize {
    2
}

impl Default for FalpSection {
    fn default() -> Self {
        FalpSection {
            n_factors: default_factors(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandChoice {
    #[default]
    None,
    Bootstrap,
    Buckland,
}

impl BandChoice {
    pub fn method(self) -> Option<BandMethod> {
        match self {
            BandChoice::None => None,
            BandChoice::Bootstrap => Some(BandMethod::Bootstrap),
            BandChoice::Buckland => Some(BandMethod::Buckland),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandsSection {
    #[serde(default)]
    pub method: BandChoice,
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

impl Default for BandsSection {
    fn default() -> Self {
        BandsSection {
            method: BandChoice::None,
            n_boot: default_n_boot(),
            level: default_level(),
        }
    }
}

/// `estimate` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Panel CSV, relative to the config file.
    pub panel: PathBuf,
    #[serde(default)]
    pub load: LoadConfig,
    #[serde(default)]
    pub estimator: EstimatorChoice,
    pub spec: LPSpec,
    #[serde(default)]
    pub candidates: Option<CandidateRule>,
    #[serde(default)]
    pub rslp: RslpSection,
    #[serde(default)]
    pub falp: FalpSection,
    #[serde(default)]
    pub bands: BandsSection,
    #[serde(default)]
    pub seed: u64,
}

pub fn load_estimate(path: &Path, o: &Overrides) -> ConfigResult<Loaded<EstimateConfig>> {
    let (mut t, bytes) = read_toml(path)?;
    if let Some(s) = o.seed {
        t.insert("seed".into(), seed_value(s));
    }
    {
        let r = table_mut(&mut t, "rslp")?;
        if let Some(k) = o.k {
            r.insert("k".into(), int(k));
        }
        if let Some(n) = o.n_draws {
            r.insert("n_draws".into(), int(n));
        }
        if let Some(w) = o.weighting {
            r.insert("weighting".into(), Value::String(w.to_string()));
        }
        if let Some(g) = &o.select_k {
            r.insert("select_k".into(), int_list(g));
        }
    }
    if let Some(b) = &o.bands {
        table_mut(&mut t, "bands")?.insert("method".into(), Value::String(b.clone()));
    }
    let config: EstimateConfig = deserialize(t, "estimate")?;
    if config.bands.n_boot < 2 {
        return Err(ConfigError::key("bands.n_boot", "must be at least 2"));
    }
    if !(config.bands.level > 0.0 && config.bands.level < 1.0) {
        return Err(ConfigError::key("bands.level", "must lie in (0, 1)"));
    }
    if config.rslp.n_draws == 0 {
        return Err(ConfigError::key("rslp.n_draws", "must be positive"));
    }
    config.spec.validate().map_err(|e| ConfigError::key("spec", e))?;
    let base = base_dir(path);
    let panel_bytes = std::fs::read(resolve(&base, &config.panel))
        .map_err(|e| ConfigError::key("panel", format!("cannot read {}: {e}", config.panel.display())))?;
    Ok(Loaded {
        inputs: vec![
            (path.display().to_string(), bytes),
            (config.panel.display().to_string(), panel_bytes),
        ],
        config,
        base_dir: base,
    })
}

/// Replaces a factor-model `dgp` table's `synthetic_series`/`params_seed` or
/// `params_file` keys with an explicit `params` table.
fn resolve_dfm(dgp: &mut toml::Table, base: &Path, inputs: &mut Vec<(String, Vec<u8>)>) -> ConfigResult<()> {
    if dgp.get("kind").and_then(Value::as_str) != Some("dfm") {
        return Ok(());
    }
    let synthetic = dgp.remove("synthetic_series");
    let params_seed = dgp.remove("params_seed");
    let file = dgp.remove("params_file");
    let given = usize::from(synthetic.is_some()) + usize::from(file.is_some()) + usize::from(dgp.contains_key("params"));
    if given != 1 {
        return Err(ConfigError::key(
            "dgp",
            "a factor model needs exactly one of `params`, `params_file` or `synthetic_series`",
        ));
    }
    let params = if let Some(n) = synthetic {
        let n = n
            .as_integer()
            .filter(|n| *n > 0)
            .ok_or_else(|| ConfigError::key("dgp.synthetic_series", "expected a positive integer"))?;
        let seed = match params_seed {
            None => 0,
            Some(v) => v
                .as_integer()
                .ok_or_else(|| ConfigError::key("dgp.params_seed", "expected an integer"))? as u64,
        };
        DFMParams::synthetic(n as usize, seed)
    } else if let Some(f) = file {
        let rel = f
            .as_str()
            .ok_or_else(|| ConfigError::key("dgp.params_file", "expected a path"))?;
        let full = resolve(base, Path::new(rel));
        let bytes =
            std::fs::read(&full).map_err(|e| ConfigError::key("dgp.params_file", format!("cannot read {rel}: {e}")))?;
        let text = String::from_utf8_lossy(&bytes).to_string();
        let p: DFMParams = if rel.ends_with(".json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::key("dgp.params_file", e))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::key("dgp.params_file", e))?
        };
        inputs.push((rel.to_string(), bytes));
        p
    } else {
        return Ok(());
    };
    let v = Value::try_from(&params).map_err(|e| ConfigError::key("dgp.params", e))?;
    dgp.insert("params".into(), v);
    Ok(())
}

/// `simulate` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub dgp: DgpConfig,
    #[serde(default)]
    pub seed: u64,
}

pub fn load_simulate(path: Option<&Path>, o: &Overrides) -> ConfigResult<Loaded<SimulateConfig>> {
    let (mut t, mut inputs, base) = match path {
        Some(p) => {
            let (t, bytes) = read_toml(p)?;
            (t, vec![(p.display().to_string(), bytes)], base_dir(p))
        }
        None => {
            let t: toml::Table = "[dgp]\nkind = \"fiscal\"\ninstrument = \"strict\"\n"
                .parse()
                .expect("default simulate config parses");
            (t, Vec::new(), PathBuf::new())
        }
    };
    resolve_dfm(table_mut(&mut t, "dgp")?, &base, &mut inputs)?;
    if let Some(s) = o.seed {
        t.insert("seed".into(), seed_value(s));
    }
    let config: SimulateConfig = deserialize(t, "simulate")?;
    validate_dgp(&config.dgp)?;
    Ok(Loaded {
        config,
        inputs,
        base_dir: base,
    })
}

fn validate_dgp(dgp: &DgpConfig) -> ConfigResult<()> {
    match dgp {
        DgpConfig::Fiscal(d) => d.params.validate().map_err(|e| ConfigError::key("dgp.params", e)),
        DgpConfig::Dfm(d) => d.params.validate().map_err(|e| ConfigError::key("dgp.params", e)),
    }
}

/// `experiment` and `sweep` configuration.
pub struct ExperimentFile {
    pub experiment: ExperimentConfig,
    pub grid: Option<Vec<usize>>,
}

pub fn load_experiment(path: &Path, o: &Overrides) -> ConfigResult<Loaded<ExperimentFile>> {
    let (mut t, bytes) = read_toml(path)?;
    let base = base_dir(path);
    let mut inputs = vec![(path.display().to_string(), bytes)];
    resolve_dfm(table_mut(&mut t, "dgp")?, &base, &mut inputs)?;
    if let Some(s) = o.seed {
        t.insert("seed".into(), seed_value(s));
    }
    let grid_value = t.remove("grid");
    let mut grid = match grid_value {
        None => None,
        Some(v) => Some(
            Vec::<usize>::deserialize(v).map_err(|e| ConfigError::key("grid", e))?,
        ),
    };
    if let Some(g) = &o.grid {
        grid = Some(g.clone());
    }
    if let Some(Value::Array(ests)) = t.get_mut("estimators") {
        for e in ests.iter_mut().filter_map(Value::as_table_mut) {
            if e.get("kind").and_then(Value::as_str) != Some("rslp") {
                continue;
            }
            if let Some(k) = o.k {
                e.insert("k".into(), int(k));
            }
            if let Some(n) = o.n_draws {
                e.insert("n_draws".into(), int(n));
            }
            if let Some(w) = o.weighting {
                e.insert("weighting".into(), Value::String(w.to_string()));
            }
            if let Some(g) = &o.select_k {
                e.insert("select_k".into(), int_list(g));
            }
            match o.bands.as_deref() {
                None => {}
                Some("none") => {
                    e.remove("bands");
                }
                Some(m) => {
                    let b = e
                        .entry("bands")
                        .or_insert_with(|| Value::Table(toml::Table::new()))
                        .as_table_mut()
                        .ok_or_else(|| ConfigError::key("estimators.bands", "expected a table"))?;
                    b.insert("method".into(), Value::String(m.to_string()));
                }
            }
        }
    }
    let experiment: ExperimentConfig = deserialize(t, "experiment")?;
    validate_dgp(&experiment.dgp)?;
    experiment.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(Loaded {
        config: ExperimentFile { experiment, grid },
        inputs,
        base_dir: base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn estimate_overrides_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "p.csv", "date,y,x\n1,1,2\n2,3,4\n");
        let cfg = write(
            dir.path(),
            "e.toml",
            "panel = \"p.csv\"\n[spec]\nresponse = \"y\"\nimpulse = \"x\"\nhorizons = 2\nidentification = { kind = \"observed_shock\" }\ncandidate_controls = [\"x:1\"]\n",
        );
        let o = Overrides {
            k: Some(7),
            bands: Some("buckland".into()),
            ..Default::default()
        };
        let l = load_estimate(&cfg, &o).unwrap();
        assert_eq!(l.config.rslp.k, 7);
        assert_eq!(l.config.rslp.n_draws, 1000);
        assert_eq!(l.config.bands.method, BandChoice::Buckland);
        assert_eq!(l.config.spec.candidate_controls, vec![ControlRef::new("x", 1)]);
        assert_eq!(l.inputs.len(), 2);
    }

    #[test]
    fn unknown_keys_are_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "p.csv", "date,y\n1,1\n");
        let cfg = write(
            dir.path(),
            "e.toml",
            "panel = \"p.csv\"\nbogus_key = 1\n[spec]\nresponse = \"y\"\nimpulse = \"y\"\nhorizons = 1\nidentification = { kind = \"observed_shock\" }\n",
        );
        let err = load_estimate(&cfg, &Overrides::default()).err().unwrap();
        assert!(err.0.contains("bogus_key"), "{}", err.0);
    }

    #[test]
    fn synthetic_dfm_is_expanded() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(
            dir.path(),
            "s.toml",
            "seed = 3\n[dgp]\nkind = \"dfm\"\ninstrument = \"strict\"\nsynthetic_series = 8\n",
        );
        let l = load_simulate(Some(&cfg), &Overrides::default()).unwrap();
        let DgpConfig::Dfm(d) = &l.config.dgp else { panic!() };
        assert_eq!(d.params.n_series(), 8);
        assert_eq!(l.config.seed, 3);
    }

    #[test]
    fn experiment_flags_reach_every_rslp_estimator() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(
            dir.path(),
            "x.toml",
            "n_replications = 2\ngrid = [0, 5]\n[dgp]\nkind = \"fiscal\"\ninstrument = \"strict\"\n[[estimators]]\nname = \"a\"\nkind = \"rslp\"\n[[estimators]]\nname = \"b\"\nkind = \"base\"\n",
        );
        let o = Overrides {
            n_draws: Some(9),
            bands: Some("bootstrap".into()),
            ..Default::default()
        };
        let l = load_experiment(&cfg, &o).unwrap();
        assert_eq!(l.config.grid, Some(vec![0, 5]));
        match &l.config.experiment.estimators[0].kind {
            crate::mc::EstimatorKind::Rslp { n_draws, bands, .. } => {
                assert_eq!(*n_draws, 9);
                assert_eq!(bands.unwrap().method, BandMethod::Bootstrap);
            }
            _ => panic!(),
        }
    }
}

//! The `rslp` binary: outputs, manifests and exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

use rslp::data::{load_csv, LoadOptions};

fn rslp(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rslp"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const EXPERIMENT: &str = r#"
n_replications = 4
seed = 3
baseline = "rslp"

[dgp]
kind = "fiscal"
instrument = "strict"
t = 150
n_info = 30

[[estimators]]
name = "base"
kind = "base"

[[estimators]]
name = "rslp"
kind = "rslp"
k = 10
n_draws = 20
"#;

const ESTIMATE: &str = r#"
panel = "sim/panel.csv"
seed = 5

[spec]
response = "capital"
impulse = "tax"
instrument = "z"
impulse_accumulation = 2
essential_controls = ["tax:1", "tax:2", "capital:1", "capital:2", "z:1", "z:2"]
horizons = 4
identification = { kind = "iv" }

[candidates]
lags = [1]
exclude = ["tax", "capital", "z"]

[rslp]
k = 10
n_draws = 30

[bands]
method = "bootstrap"
n_boot = 20
"#;

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = write(d, "sim.toml", "seed = 4\n[dgp]\nkind = \"fiscal\"\ninstrument = \"strict\"\nt = 120\nn_info = 20\n");
    let out = rslp(&["simulate", "--config", sim.to_str().unwrap(), "--out-dir", "sim"], d);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let panel = load_csv(d.join("sim/panel.csv"), &LoadOptions::default()).unwrap();
    assert_eq!(panel.n_obs(), 120);
    assert_eq!(&panel.names()[..3], ["tax", "capital", "z"]);
    let truth = std::fs::read_to_string(d.join("sim/truth.csv")).unwrap();
    assert!(truth.starts_with("horizon,tax,capital\n0,0e0,"));

    write(d, "est.toml", ESTIMATE);
    let out = rslp(&["estimate", "--config", "est.toml", "--out-dir", "est"], d);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let irf = load_csv(d.join("est/irf.csv"), &LoadOptions::default()).unwrap();
    assert_eq!(irf.names(), ["estimate", "lower", "upper"]);
    assert_eq!(irf.n_obs(), 5);
    for t in 0..5 {
        let [b, l, u] = ["estimate", "lower", "upper"].map(|c| irf.column(c).unwrap()[t]);
        assert!(l <= b && b <= u);
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("est/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "estimate");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["outputs"][0], "irf.csv");
    assert_eq!(manifest["config"]["rslp"]["k"], 10);
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert!(inputs.iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(rslp(&["simulate", "--seed", "1", "--out-dir", "sim"], d).status.code(), Some(0));
    write(d, "est.toml", ESTIMATE);
    let out = rslp(
        &["estimate", "--config", "est.toml", "--out-dir", "o", "--k", "4", "--bands", "none", "--seed", "9"],
        d,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let irf = std::fs::read_to_string(d.join("o/irf.csv")).unwrap();
    assert!(irf.lines().nth(1).unwrap().ends_with(",,"), "no bands: {irf}");
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["rslp"]["k"], 4);
    assert_eq!(m["seed"], 9);

    let out = rslp(
        &["estimate", "--config", "est.toml", "--out-dir", "s", "--select-k", "0,5,10", "--bands", "buckland"],
        d,
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("s/manifest.json")).unwrap()).unwrap();
    assert!([0, 5, 10].contains(&m["config"]["rslp"]["k"].as_u64().unwrap()));
}

#[test]
fn experiment_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "mc.toml", EXPERIMENT);
    let out = rslp(&["experiment", "--config", "mc.toml", "--out-dir", "ex"], d);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let scores = load_csv(d.join("ex/scores.csv"), &LoadOptions::default()).unwrap();
    let keys: Vec<String> = scores.dates().iter().map(|p| p.to_string()).collect();
    assert_eq!(keys, ["base:tax", "base:capital", "rslp:tax", "rslp:capital"]);
    assert_eq!(scores.column("relative_rmse").unwrap()[2], 1.0);
    assert!(d.join("ex/scores.json").exists());

    let out = rslp(&["sweep", "--config", "mc.toml", "--grid", "20,0,10", "--out-dir", "sw"], d);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = load_csv(d.join("sw/sweep.csv"), &LoadOptions::default()).unwrap();
    assert_eq!(sweep.n_obs(), 3);
    assert_eq!(sweep.column("relative_tax").unwrap()[0], 1.0);
    assert_eq!(sweep.column("relative_capital").unwrap()[0], 1.0);
}

#[test]
fn factor_structure_curve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(rslp(&["simulate", "--out-dir", "sim"], d).status.code(), Some(0));
    let out = rslp(&["factor-structure", "--panel", "sim/panel.csv", "--max-components", "6", "--out-dir", "fs"], d);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = load_csv(d.join("fs/curve.csv"), &LoadOptions::default()).unwrap();
    let c = curve.column("cumulative_share").unwrap();
    assert_eq!(c.len(), 6);
    assert!(c.windows(2).all(|w| w[0] <= w[1]) && c[5] <= 1.0 + 1e-12);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Configuration problems exit with 2.
    assert_eq!(rslp(&["estimate"], d).status.code(), Some(2));
    assert_eq!(rslp(&["estimate", "--config", "missing.toml"], d).status.code(), Some(2));
    assert_eq!(rslp(&["bogus"], d).status.code(), Some(2));
    assert_eq!(rslp(&["simulate", "--threads", "0"], d).status.code(), Some(2));
    write(d, "bad.toml", "panel = \"p.csv\"\nunknown_key = 1\n");
    let out = rslp(&["estimate", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown_key"));
    write(d, "neg.toml", &EXPERIMENT.replace("k = 10", "k = 0").replace("n_draws = 20", "n_draws = 0"));
    assert_eq!(rslp(&["experiment", "--config", "neg.toml"], d).status.code(), Some(2));

    // A config pointing at a missing panel is a configuration error; a panel
    // that lacks the projected series fails at run time.
    write(d, "est.toml", ESTIMATE);
    assert_eq!(rslp(&["estimate", "--config", "est.toml"], d).status.code(), Some(2));
    std::fs::create_dir(d.join("sim")).unwrap();
    write(d, "sim/panel.csv", "date,a\n0,1\n1,2\n");
    let out = rslp(&["estimate", "--config", "est.toml", "--out-dir", "o"], d);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    write(d, "p.csv", "date,a,b\n0,1,1\n1,1,1\n2,1,1\n");
    let out = rslp(&["factor-structure", "--panel", "p.csv", "--out-dir", "o"], d);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(rslp(&["--help"], d).status.code(), Some(0));
}

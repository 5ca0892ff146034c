//! Simulate the dynamic factor model with a contaminated instrument and
//! recover the response of one series with RSLP.
//!
//! ```text
//! cargo run --release --example dfm_simulation
//! ```

use rslp::dgp::{DFMParams, DfmDesign, InstrumentMode};
use rslp::lp::{estimate_base_lp, estimate_rslp, Identification, RslpOptions};
use rslp::mc::DgpConfig;

fn main() -> rslp::Result<()> {
    let params = DFMParams::synthetic(60, 3);
    params.validate()?;
    println!(
        "{} series, {} factors, {} VAR lags, companion spectral radius {:.3}",
        params.n_series(),
        params.n_factors(),
        params.factor_var_lags(),
        params.spectral_radius()?
    );

    let dgp = DgpConfig::Dfm(DfmDesign::new(250, params, InstrumentMode::Conditional));
    let data = dgp.simulate(9)?;
    let names = data.panel.names();
    let vars = vec!["x001".to_string(), "x002".to_string()];
    let spec = dgp.default_spec(Identification::Iv, &vars)?.for_response("x002");
    println!("panel: {} periods x {} columns ({} ... {})", data.panel.n_obs(), names.len(), names[0], names[names.len() - 1]);

    let base = estimate_base_lp(&data.panel, &spec)?;
    let (rslp, _) = estimate_rslp(&data.panel, &spec, &RslpOptions::new(20, 300, 4))?;
    let truth = data.truth_for("x002").expect("truth");
    let scale: f64 = data.truth_for("x001").expect("truth")[0];
    println!("response of x002 per unit impact on x001");
    for h in 0..truth.len() {
        println!(
            "  h={h} truth {:>7.3}  base {:>7.3}  rslp {:>7.3}",
            truth[h] / scale,
            base.beta[h],
            rslp.beta[h]
        );
    }
    Ok(())
}

//! Block-bootstrap and Buckland bands around one RSLP estimate.
//!
//! Buckland bands treat every draw's Newey-West variance as perfectly
//! correlated across draws and add the spread of the draws, so they are
//! usually the wider of the two.
//!
//! ```text
//! cargo run --release --example error_bands
//! ```

use rslp::dgp::{simulate_fiscal_design, FiscalDesign, FiscalParams, InstrumentMode};
use rslp::inference::{block_bootstrap_bands, buckland_bands, BootstrapConfig};
use rslp::lp::{estimate_rslp, ControlRef, LPSpec, RslpOptions};

fn main() -> rslp::Result<()> {
    let design = FiscalDesign::new(200, FiscalParams::default(), InstrumentMode::Strict);
    let data = simulate_fiscal_design(&design, 11)?;
    let infos: Vec<&String> = data.panel.names().iter().filter(|n| n.starts_with("info")).collect();
    let spec = LPSpec::new("capital", "tax", 6)
        .with_instrument("z")
        .with_impulse_accumulation(2)
        .with_essential(ControlRef::lags_of(&["tax", "capital", "z"], [1, 2]))
        .with_candidates(ControlRef::lags_of(&infos, [1]));

    let (est, ensemble) = estimate_rslp(&data.panel, &spec, &RslpOptions::new(50, 200, 3))?;
    let boot = block_bootstrap_bands(&data.panel, &spec, &ensemble, &BootstrapConfig::new(200, 3))?;
    let buck = buckland_bands(&data.panel, &spec, &ensemble, 0.9)?;
    let truth = data.truth_for("capital").expect("capital truth");

    println!("90% bands for the capital response");
    println!("{:>3} {:>8} {:>8} {:>19} {:>19}", "h", "truth", "rslp", "bootstrap", "buckland");
    for h in 0..est.beta.len() {
        println!(
            "{h:>3} {:>8.3} {:>8.3} [{:>7.3}, {:>7.3}] [{:>7.3}, {:>7.3}]",
            truth[h], est.beta[h], boot.lower[h], boot.upper[h], buck.lower[h], buck.upper[h]
        );
    }
    Ok(())
}

//! Estimate the capital response to a tax shock on one simulated fiscal
//! dataset, comparing the base LP, RSLP and the analytic response.
//!
//! ```text
//! cargo run --release --example estimate_rslp
//! ```

use rslp::dgp::{simulate_fiscal_design, FiscalDesign, FiscalParams, InstrumentMode};
use rslp::lp::{estimate_base_lp, estimate_rslp, ControlRef, LPSpec, RslpOptions};

fn main() -> rslp::Result<()> {
    let design = FiscalDesign::new(200, FiscalParams::default(), InstrumentMode::Strict);
    let data = simulate_fiscal_design(&design, 42)?;

    let infos: Vec<&String> = data.panel.names().iter().filter(|n| n.starts_with("info")).collect();
    let spec = LPSpec::new("capital", "tax", 6)
        .with_instrument("z")
        .with_impulse_accumulation(2)
        .with_essential(ControlRef::lags_of(&["tax", "capital", "z"], [1, 2]))
        .with_candidates(ControlRef::lags_of(&infos, [1]));

    let base = estimate_base_lp(&data.panel, &spec)?;
    let (rslp, ensemble) = estimate_rslp(&data.panel, &spec, &RslpOptions::new(50, 500, 7))?;
    let truth = data.truth_for("capital").expect("capital truth");

    println!("{} candidates, {} draws of k = 50", spec.n_candidates(), ensemble.n_draws());
    println!("{:>3} {:>9} {:>9} {:>9}", "h", "truth", "base", "rslp");
    for h in 0..=6 {
        println!(
            "{h:>3} {:>9.4} {:>9.4} {:>9.4}",
            truth[h], base.beta[h], rslp.beta[h]
        );
    }
    Ok(())
}

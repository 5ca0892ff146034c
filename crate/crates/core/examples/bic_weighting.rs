//! Two extensions of equal-weight RSLP: softmax weights on minus the
//! first-stage BIC of each draw, and choosing k by the BIC of the averaged
//! first stage.
//!
//! ```text
//! cargo run --release --example bic_weighting
//! ```

use rslp::dgp::{simulate_fiscal_design, FiscalDesign, FiscalParams, InstrumentMode};
use rslp::lp::{bic_by_k, estimate_rslp, select_k_by_bic, RslpOptions, Weighting};
use rslp::lp::{ControlRef, LPSpec};

fn main() -> rslp::Result<()> {
    let design = FiscalDesign::new(200, FiscalParams::default(), InstrumentMode::Conditional);
    let data = simulate_fiscal_design(&design, 23)?;
    let infos: Vec<&String> = data.panel.names().iter().filter(|n| n.starts_with("info")).collect();
    let spec = LPSpec::new("capital", "tax", 6)
        .with_instrument("z")
        .with_impulse_accumulation(2)
        .with_essential(ControlRef::lags_of(&["tax", "capital", "z"], [1, 2]))
        .with_candidates(ControlRef::lags_of(&infos, [1]));

    let (equal, _) = estimate_rslp(&data.panel, &spec, &RslpOptions::new(50, 300, 2))?;
    let opts = RslpOptions::new(50, 300, 2).with_weighting(Weighting::Bic);
    let (bic, ens) = estimate_rslp(&data.panel, &spec, &opts)?;
    let top = ens.weights.iter().cloned().fold(0.0, f64::max);
    println!("largest BIC weight {top:.4} (equal weight would be {:.4})", 1.0 / ens.n_draws() as f64);
    for h in 0..equal.beta.len() {
        println!("  h={h} equal {:>7.3}  bic-weighted {:>7.3}", equal.beta[h], bic.beta[h]);
    }

    let grid = [0, 10, 20, 30, 40, 50, 60];
    for (k, b) in bic_by_k(&data.panel, &spec, &grid, 100, 2)? {
        println!("  k={k:>2} first-stage BIC {b:.2}");
    }
    println!("selected k = {}", select_k_by_bic(&data.panel, &spec, &grid, 100, 2)?);
    Ok(())
}

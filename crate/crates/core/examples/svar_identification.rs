//! Cumulative SVAR identification without an instrument: the impulse is
//! the tax movement over the foresight window, purged of everything known
//! at the start of it.
//!
//! The informational series reveal last period's tax shock, so the news
//! identified at t is the shock that moves the tax rate at t+1. Responses
//! are normalised to a unit tax move at h=1 and set against the true
//! responses one period ahead.
//!
//! ```text
//! cargo run --release --example svar_identification
//! ```

use rslp::dgp::{simulate_fiscal_design, FiscalDesign, FiscalParams, InstrumentMode};
use rslp::lp::{estimate_base_lp, estimate_rslp, Identification, RslpOptions};
use rslp::mc::DgpConfig;

fn main() -> rslp::Result<()> {
    let design = FiscalDesign::new(200, FiscalParams::default(), InstrumentMode::Conditional);
    let data = simulate_fiscal_design(&design, 8)?;
    let dgp = DgpConfig::Fiscal(design);
    let vars = ["tax".to_string(), "capital".to_string()];
    let spec = dgp.default_spec(Identification::CumulativeSvar { lead: 2 }, &vars)?;
    let opts = RslpOptions::new(50, 300, 1);

    let tax_spec = spec.for_response("tax");
    let base_ref = estimate_base_lp(&data.panel, &tax_spec)?;
    let (rslp_ref, _) = estimate_rslp(&data.panel, &tax_spec, &opts)?;

    for response in &vars {
        let s = spec.for_response(response);
        let base = estimate_base_lp(&data.panel, &s)?.normalized_to(&base_ref, 1)?;
        let (rslp, _) = estimate_rslp(&data.panel, &s, &opts)?;
        let rslp = rslp.normalized_to(&rslp_ref, 1)?;
        let truth = data.truth_for(response).expect("truth");
        println!("{response}");
        for h in 0..truth.len() - 1 {
            println!(
                "  h={h} truth(h+1) {:>7.3}  base {:>7.3}  rslp {:>7.3}",
                truth[h + 1],
                base.beta[h],
                rslp.beta[h]
            );
        }
    }
    Ok(())
}

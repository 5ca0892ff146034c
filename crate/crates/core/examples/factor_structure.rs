//! Cumulative variance share of the leading correlation principal
//! components of the informational series, strong against weak comovement.
//!
//! The conditional-instrument design drives the series with the lagged
//! unit-variance structural shocks. With equal noise variance σ² the
//! population correlation matrix then has two equicorrelated blocks with
//! correlation 1/(1+σ²). Their top eigenvalues 1+(m-1)ρ sum to 2+(n-2)ρ
//! whatever the block sizes, which gives the benchmark printed alongside.
//!
//! ```text
//! cargo run --release --example factor_structure
//! ```

use rslp::data::factor_structure_report;
use rslp::dgp::{simulate_fiscal_design, FiscalDesign, FiscalParams, InfoNoise, InstrumentMode, NoiseCase};

fn main() -> rslp::Result<()> {
    for case in [NoiseCase::Strong, NoiseCase::Weak] {
        let noise = InfoNoise::homogeneous_for_case(case);
        let mut design = FiscalDesign::new(200, FiscalParams::default().with_noise_case(case), InstrumentMode::Conditional);
        design.info_noise = Some(noise);
        let data = simulate_fiscal_design(&design, 17)?;
        let infos: Vec<&str> = data
            .panel
            .names()
            .iter()
            .filter(|n| n.starts_with("info"))
            .map(String::as_str)
            .collect();
        let curve = factor_structure_report(&data.panel.select(&infos)?, 5)?;

        let InfoNoise::Homogeneous { sd } = noise else { unreachable!() };
        let rho = 1.0 / (1.0 + sd * sd);
        let n = infos.len() as f64;
        let population = (2.0 + (n - 2.0) * rho) / n;
        println!("{case:?}: cumulative shares {:.3?}", curve.cumulative);
        println!("    first two {:.3}, population {:.3}", curve.cumulative[1], population);
    }
    Ok(())
}

//! A small Monte Carlo on the fiscal foresight design: RMSE of the base LP,
//! RSLP and a factor-augmented LP, relative to RSLP.
//!
//! ```text
//! cargo run --release --example fiscal_monte_carlo -- [replications] [draws]
//! ```

use rslp::dgp::{FiscalDesign, FiscalParams, InstrumentMode};
use rslp::mc::{run_experiment, DgpConfig, ExperimentConfig};

fn main() -> rslp::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(40);
    let draws = args.next().and_then(|a| a.parse().ok()).unwrap_or(200);

    let design = FiscalDesign::new(200, FiscalParams::default(), InstrumentMode::Conditional);
    let config = ExperimentConfig::new(DgpConfig::Fiscal(design), reps, draws, 2024);
    let table = run_experiment(&config)?;

    println!("{reps} replications, conditional instrument, strong factor structure\n");
    println!("{:<18} {:>10} {:>10}", "estimator", "rmse", "rel. rmse");
    for row in &table.rows {
        println!("{:<18} {:>10.4} {:>10.3}", format!("{}:{}", row.estimator, row.variable), row.rmse, row.relative_rmse);
    }
    if let Some(mean) = table.mean_estimate("base", "tax") {
        println!("\nbase LP mean tax response at h = 2: {:.3} (truth 1)", mean[2]);
    }
    if let Some(mean) = table.mean_estimate("rslp", "tax") {
        println!("RSLP mean tax response at h = 2:    {:.3}", mean[2]);
    }
    Ok(())
}

//! RSLP RMSE relative to the base LP across subspace dimensions. `k = 0`
//! is the base LP itself, so its ratio is exactly one.
//!
//! ```text
//! cargo run --release --example subspace_sweep -- [replications] [draws]
//! ```

use rslp::dgp::{FiscalDesign, FiscalParams, InstrumentMode, NoiseCase};
use rslp::mc::{sweep_subspace_dimension, DgpConfig, ExperimentConfig};

fn main() -> rslp::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(30);
    let draws = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);

    let params = FiscalParams::default().with_noise_case(NoiseCase::Weak);
    let design = FiscalDesign::new(200, params, InstrumentMode::Conditional);
    let config = ExperimentConfig::new(DgpConfig::Fiscal(design), reps, draws, 5);
    let grid: Vec<usize> = (0..=8).map(|i| i * 10).collect();
    let sweep = sweep_subspace_dimension(&config, &grid)?;

    print!("{}", sweep.to_csv_string());
    for v in &sweep.variables {
        if let Some(k) = sweep.argmin(v) {
            println!("# {v}: smallest relative RMSE at k = {k}");
        }
    }
    Ok(())
}

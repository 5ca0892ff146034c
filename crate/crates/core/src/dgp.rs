//! Simulation designs with analytically known impulse responses.

pub mod dfm;
pub mod fiscal;

use serde::Serialize;

use crate::data::TimeSeriesPanel;

pub use dfm::{
    dfm_true_irf, gen_dfm_instrument, propagate_dfm, simulate_dfm, simulate_dfm_design, Contamination, DFMParams,
    DfmDesign, DfmSimulation, DFM_BURN_IN,
};
pub use fiscal::{
    gen_informational, gen_instrument, info_name, instrument_from_parts, propagate_fiscal, simulate_fiscal,
    simulate_fiscal_design, true_fiscal_irf, FiscalDesign, FiscalInstrument, FiscalParams, FiscalShocks,
    FiscalSimulation, InfoNoise, InformationalPanel, InstrumentMode, NoiseCase, FISCAL_BURN_IN,
};

/// Population response of one observable to a unit structural shock.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueIrf {
    pub variable: String,
    /// Horizons 0..=H.
    pub response: Vec<f64>,
}

/// A simulated dataset. The structural shocks are kept apart from the panel
/// so estimators only ever see observables and instruments.
#[derive(Debug, Clone, PartialEq)]
pub struct DGPOutput {
    pub panel: TimeSeriesPanel,
    pub shocks: Vec<(String, Vec<f64>)>,
    pub truth: Vec<TrueIrf>,
}

impl DGPOutput {
    pub fn truth_for(&self, variable: &str) -> Option<&[f64]> {
        self.truth
            .iter()
            .find(|t| t.variable == variable)
            .map(|t| t.response.as_slice())
    }

    pub fn shock(&self, name: &str) -> Option<&[f64]> {
        self.shocks.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }
}

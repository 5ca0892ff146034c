//! Fiscal-foresight model.
//!
//! Agents learn of tax changes two periods before they take effect:
//! τ̂_t = u_{τ,t−2} and k_t = α k_{t−1} + u_{a,t} − κ(θ u_{τ,t} + u_{τ,t−1})
//! with κ = τ(1−θ)/(1−τ). The econometrician sees the tax rate, capital, an
//! instrument for u_τ and a panel of noisy informational series.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::TimeSeriesPanel;
use crate::dgp::{DGPOutput, TrueIrf};
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};

/// Periods simulated and discarded before the returned sample.
pub const FISCAL_BURN_IN: usize = 100;

/// Spread of the informational series' idiosyncratic noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseCase {
    /// σ_i ~ U(0, 1)
    #[default]
    Strong,
    /// σ_i ~ U(0, 4)
    Weak,
}

/// How the informational series' noise scales σ_i are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InfoNoise {
    /// σ_i ~ U(0, upper), drawn once per series.
    Uniform { upper: f64 },
    /// σ_i = sd for every series (the block-equicorrelated population design).
    Homogeneous { sd: f64 },
}

impl InfoNoise {
    /// U(0,1) in the strong case, U(0,4) in the weak case.
    pub fn for_case(case: NoiseCase) -> Self {
        match case {
            NoiseCase::Strong => InfoNoise::Uniform { upper: 1.0 },
            NoiseCase::Weak => InfoNoise::Uniform { upper: 4.0 },
        }
    }

    /// σ = 0.5 (strong) or 2 (weak): noise variance 0.25 or 4.
    pub fn homogeneous_for_case(case: NoiseCase) -> Self {
        match case {
            NoiseCase::Strong => InfoNoise::Homogeneous { sd: 0.5 },
            NoiseCase::Weak => InfoNoise::Homogeneous { sd: 2.0 },
        }
    }
}

/// Which instrument the econometrician observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentMode {
    /// z_t = 0.7 u_{τ,t} + ν_{1,t−1} + ν_{2,t−1} + ε_z, exogenous without controls.
    Strict,
    /// z_t = 0.7 u_{τ,t} + u_{a,t−1} + u_{τ,t−1} + ε_z, exogenous only given lagged shocks.
    Conditional,
}

/// Model parameters. When read from a file, omitted fields take their
/// defaults and an omitted `kappa` is derived from `theta` and `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawFiscalParams")]
pub struct FiscalParams {
    pub theta: f64,
    pub tau: f64,
    pub alpha: f64,
    pub kappa: f64,
    pub noise_case: NoiseCase,
    pub foresight_lead: usize,
}

#[derive(Deserialize)]
struct RawFiscalParams {
    #[serde(default = "default_theta")]
    theta: f64,
    #[serde(default = "default_tau")]
    tau: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    kappa: Option<f64>,
    #[serde(default)]
    noise_case: NoiseCase,
    #[serde(default = "default_lead")]
    foresight_lead: usize,
}

fn default_theta() -> f64 {
    0.2673
}
fn default_tau() -> f64 {
    0.25
}
fn default_alpha() -> f64 {
    0.36
}
fn default_lead() -> usize {
    2
}

impl From<RawFiscalParams> for FiscalParams {
    fn from(r: RawFiscalParams) -> Self {
        let mut p = FiscalParams::new(r.theta, r.tau, r.alpha, r.noise_case);
        if let Some(k) = r.kappa {
            p.kappa = k;
        }
        p.foresight_lead = r.foresight_lead;
        p
    }
}

impl Default for FiscalParams {
    fn default() -> Self {
        FiscalParams::new(default_theta(), default_tau(), default_alpha(), NoiseCase::Strong)
    }
}

impl FiscalParams {
    pub fn new(theta: f64, tau: f64, alpha: f64, noise_case: NoiseCase) -> Self {
        FiscalParams {
            theta,
            tau,
            alpha,
            kappa: tau * (1.0 - theta) / (1.0 - tau),
            noise_case,
            foresight_lead: 2,
        }
    }

    pub fn with_noise_case(mut self, case: NoiseCase) -> Self {
        self.noise_case = case;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("theta", self.theta), ("tau", self.tau), ("alpha", self.alpha)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        let kappa = self.tau * (1.0 - self.theta) / (1.0 - self.tau);
        if (kappa - self.kappa).abs() > 1e-12 {
            return Err(Error::param(format!(
                "kappa {} disagrees with tau(1-theta)/(1-tau) = {kappa}",
                self.kappa
            )));
        }
        if self.foresight_lead != 2 {
            return Err(Error::param("the fiscal-foresight model has a foresight lead of 2"));
        }
        Ok(())
    }
}

/// Structural shocks over the full simulated span, burn-in included.
#[derive(Debug, Clone, PartialEq)]
pub struct FiscalShocks {
    pub u_tau: Vec<f64>,
    pub u_a: Vec<f64>,
    /// Index of the first returned period.
    pub start: usize,
}

impl FiscalShocks {
    pub fn sample_len(&self) -> usize {
        self.u_tau.len() - self.start
    }

    /// Shock series restricted to the returned sample.
    pub fn kept(&self, full: &[f64]) -> Vec<f64> {
        full[self.start..].to_vec()
    }
}

/// Tax and capital over the returned sample, plus the shocks behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct FiscalSimulation {
    pub tax: Vec<f64>,
    pub capital: Vec<f64>,
    pub shocks: FiscalShocks,
}

/// Runs the model forward from given shocks with k and past shocks zero
/// before the first period. Returns (tax, capital) over the full span.
pub fn propagate_fiscal(params: &FiscalParams, u_tau: &[f64], u_a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = u_tau.len().min(u_a.len());
    let mut tax = vec![0.0; n];
    let mut k = vec![0.0; n];
    for t in 0..n {
        tax[t] = if t >= 2 { u_tau[t - 2] } else { 0.0 };
        let k_prev = if t >= 1 { k[t - 1] } else { 0.0 };
        let tau_prev = if t >= 1 { u_tau[t - 1] } else { 0.0 };
        k[t] = params.alpha * k_prev + u_a[t] - params.kappa * (params.theta * u_tau[t] + tau_prev);
    }
    (tax, k)
}

/// Simulates `t` periods after a burn-in of [`FISCAL_BURN_IN`].
pub fn simulate_fiscal(t: usize, params: &FiscalParams, seed: u64) -> Result<FiscalSimulation> {
    params.validate()?;
    if t < 50 {
        return Err(Error::param(format!("sample length {t} below the minimum of 50")));
    }
    let n = t + FISCAL_BURN_IN;
    let mut rng = stream(seed, &[purpose::SHOCKS]);
    let u_tau: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let u_a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let (tax, capital) = propagate_fiscal(params, &u_tau, &u_a);
    Ok(FiscalSimulation {
        tax: tax[FISCAL_BURN_IN..].to_vec(),
        capital: capital[FISCAL_BURN_IN..].to_vec(),
        shocks: FiscalShocks {
            u_tau,
            u_a,
            start: FISCAL_BURN_IN,
        },
    })
}

/// Responses of the tax rate and capital to a unit tax shock, horizons 0..=H.
pub fn true_fiscal_irf(params: &FiscalParams, horizons: usize) -> (Vec<f64>, Vec<f64>) {
    let tax = (0..=horizons).map(|h| if h == 2 { 1.0 } else { 0.0 }).collect();
    let mut cap = Vec::with_capacity(horizons + 1);
    for h in 0..=horizons {
        let c = match h {
            0 => -params.kappa * params.theta,
            1 => params.alpha * cap[0] - params.kappa,
            _ => params.alpha * cap[h - 1],
        };
        cap.push(c);
    }
    (tax, cap)
}

/// Instrument over the returned sample and the auxiliary shocks behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct FiscalInstrument {
    pub z: Vec<f64>,
    /// ν₁ and ν₂ over the full span (also drawn in conditional mode so both
    /// modes consume the same streams).
    pub nu1: Vec<f64>,
    pub nu2: Vec<f64>,
}

/// z_t from explicit components over the full span; entry 0 uses zero lags.
pub fn instrument_from_parts(
    mode: InstrumentMode,
    u_tau: &[f64],
    u_a: &[f64],
    nu1: &[f64],
    nu2: &[f64],
    eps: &[f64],
) -> Vec<f64> {
    let lag = |v: &[f64], t: usize| if t >= 1 { v[t - 1] } else { 0.0 };
    (0..u_tau.len())
        .map(|t| {
            let contamination = match mode {
                InstrumentMode::Strict => lag(nu1, t) + lag(nu2, t),
                InstrumentMode::Conditional => lag(u_a, t) + lag(u_tau, t),
            };
            0.7 * u_tau[t] + contamination + eps[t]
        })
        .collect()
}

/// Draws ν₁, ν₂ ~ N(0, 4) and ε_z ~ N(0, 0.01) and forms the instrument.
pub fn gen_instrument(shocks: &FiscalShocks, mode: InstrumentMode, seed: u64) -> FiscalInstrument {
    let n = shocks.u_tau.len();
    let mut rng = stream(seed, &[purpose::INSTRUMENT]);
    let nu = Normal::new(0.0, 2.0).expect("valid sd");
    let ez = Normal::new(0.0, 0.1).expect("valid sd");
    let nu1: Vec<f64> = (0..n).map(|_| nu.sample(&mut rng)).collect();
    let nu2: Vec<f64> = (0..n).map(|_| nu.sample(&mut rng)).collect();
    let eps: Vec<f64> = (0..n).map(|_| ez.sample(&mut rng)).collect();
    let z = instrument_from_parts(mode, &shocks.u_tau, &shocks.u_a, &nu1, &nu2, &eps);
    FiscalInstrument {
        z: z[shocks.start..].to_vec(),
        nu1,
        nu2,
    }
}

/// Informational series and the draws behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationalPanel {
    /// `n` series over the returned sample.
    pub series: Vec<Vec<f64>>,
    /// Whether series i loads on the first driver.
    pub b: Vec<bool>,
    pub sigma: Vec<f64>,
}

/// y*_{it} = b_i s_{1t} + (1 − b_i) s_{2t} + ξ_{it}, with b_i ~ Bernoulli(0.1)
/// and ξ_{it} ~ N(0, σ_i²). `drivers` are (s₁, s₂) over the returned sample.
pub fn gen_informational(drivers: (&[f64], &[f64]), n: usize, noise: InfoNoise, seed: u64) -> Result<InformationalPanel> {
    let (s1, s2) = drivers;
    if s1.len() != s2.len() {
        return Err(Error::DimensionMismatch {
            what: "informational drivers",
            expected: s1.len(),
            found: s2.len(),
        });
    }
    let mut rng = stream(seed, &[purpose::INFORMATIONAL]);
    let bern = Bernoulli::new(0.1).expect("valid probability");
    let b: Vec<bool> = (0..n).map(|_| bern.sample(&mut rng)).collect();
    let sigma: Vec<f64> = match noise {
        InfoNoise::Uniform { upper } => {
            if !(upper >= 0.0 && upper.is_finite()) {
                return Err(Error::param("uniform noise bound must be nonnegative"));
            }
            if upper == 0.0 {
                vec![0.0; n]
            } else {
                let u = Uniform::new(0.0, upper).map_err(|e| Error::param(e.to_string()))?;
                (0..n).map(|_| u.sample(&mut rng)).collect()
            }
        }
        InfoNoise::Homogeneous { sd } => {
            if !(sd >= 0.0 && sd.is_finite()) {
                return Err(Error::param("noise sd must be nonnegative"));
            }
            vec![sd; n]
        }
    };
    let series = (0..n)
        .map(|i| {
            (0..s1.len())
                .map(|t| {
                    let xi: f64 = rng.sample(StandardNormal);
                    let signal = if b[i] { s1[t] } else { s2[t] };
                    signal + sigma[i] * xi
                })
                .collect()
        })
        .collect();
    Ok(InformationalPanel { series, b, sigma })
}

/// Name of informational series `i` (0-based): `info001`, `info002`, …
pub fn info_name(i: usize) -> String {
    format!("info{:03}", i + 1)
}

/// One fiscal Monte Carlo dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiscalDesign {
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default)]
    pub params: FiscalParams,
    pub instrument: InstrumentMode,
    #[serde(default = "default_n_info")]
    pub n_info: usize,
    /// Defaults to [`InfoNoise::for_case`] of the params' noise case.
    #[serde(default)]
    pub info_noise: Option<InfoNoise>,
    #[serde(default = "default_horizons")]
    pub horizons: usize,
}

fn default_t() -> usize {
    200
}
fn default_n_info() -> usize {
    100
}
fn default_horizons() -> usize {
    6
}

impl FiscalDesign {
    pub fn new(t: usize, params: FiscalParams, instrument: InstrumentMode) -> Self {
        FiscalDesign {
            t,
            params,
            instrument,
            n_info: default_n_info(),
            info_noise: None,
            horizons: default_horizons(),
        }
    }

    pub fn noise(&self) -> InfoNoise {
        self.info_noise.unwrap_or_else(|| InfoNoise::for_case(self.params.noise_case))
    }
}

/// Simulates tax, capital, the instrument `z` and the informational series.
///
/// In strict mode the informational series track (ν₁, ν₂); otherwise they
/// track (u_{τ,t−1}, u_{a,t−1}). The structural shocks are identical across
/// modes for the same seed.
pub fn simulate_fiscal_design(design: &FiscalDesign, seed: u64) -> Result<DGPOutput> {
    let sim = simulate_fiscal(design.t, &design.params, seed)?;
    let instr = gen_instrument(&sim.shocks, design.instrument, seed);
    let sh = &sim.shocks;
    let (s1, s2) = match design.instrument {
        InstrumentMode::Strict => (sh.kept(&instr.nu1), sh.kept(&instr.nu2)),
        InstrumentMode::Conditional => (
            sh.u_tau[sh.start - 1..sh.u_tau.len() - 1].to_vec(),
            sh.u_a[sh.start - 1..sh.u_a.len() - 1].to_vec(),
        ),
    };
    let info = gen_informational((&s1, &s2), design.n_info, design.noise(), seed)?;
    let mut names = vec!["tax".to_string(), "capital".to_string(), "z".to_string()];
    let mut cols = vec![sim.tax.clone(), sim.capital.clone(), instr.z.clone()];
    for (i, s) in info.series.into_iter().enumerate() {
        names.push(info_name(i));
        cols.push(s);
    }
    let panel = TimeSeriesPanel::from_columns(names, cols)?;
    let (tax_irf, cap_irf) = true_fiscal_irf(&design.params, design.horizons);
    Ok(DGPOutput {
        panel,
        shocks: vec![
            ("u_tau".into(), sh.kept(&sh.u_tau)),
            ("u_a".into(), sh.kept(&sh.u_a)),
        ],
        truth: vec![
            TrueIrf {
                variable: "tax".into(),
                response: tax_irf,
            },
            TrueIrf {
                variable: "capital".into(),
                response: cap_irf,
            },
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kappa_at_defaults() {
        let p = FiscalParams::default();
        assert_relative_eq!(p.kappa, 0.25 * 0.7327 / 0.75, epsilon = 1e-15);
        assert!((p.kappa - 0.244233).abs() < 1e-6);
        p.validate().unwrap();
        let mut bad = p.clone();
        bad.kappa += 1e-9;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn truth_values() {
        let (tax, cap) = true_fiscal_irf(&FiscalParams::default(), 6);
        assert_eq!(tax, vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((cap[0] + 0.06528).abs() < 1e-5);
        assert!((cap[1] + 0.26774).abs() < 1e-5);
        assert_relative_eq!(cap[4], 0.36 * cap[3], epsilon = 1e-15);
    }

    #[test]
    fn zero_shocks_give_zero_paths() {
        let (tax, k) = propagate_fiscal(&FiscalParams::default(), &[0.0; 20], &[0.0; 20]);
        assert!(tax.iter().chain(&k).all(|v| *v == 0.0));
    }

    #[test]
    fn forced_conditional_instrument() {
        let ut = [0.5, -1.0, 2.0];
        let ua = [1.0, 0.25, -0.5];
        let z = instrument_from_parts(InstrumentMode::Conditional, &ut, &ua, &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        assert_eq!(z[2], 0.7 * 2.0 + 0.25 - 1.0);
    }

    #[test]
    fn zero_noise_series_equal_driver() {
        let s1 = [1.0, 2.0, 3.0];
        let s2 = [-1.0, -2.0, -3.0];
        let p = gen_informational((&s1, &s2), 20, InfoNoise::Uniform { upper: 0.0 }, 3).unwrap();
        for (i, s) in p.series.iter().enumerate() {
            assert_eq!(s.as_slice(), if p.b[i] { &s1 } else { &s2 });
        }
    }

    #[test]
    fn modes_share_structural_shocks() {
        let d = FiscalDesign::new(60, FiscalParams::default(), InstrumentMode::Strict);
        let a = simulate_fiscal_design(&d, 9).unwrap();
        let mut d2 = d.clone();
        d2.instrument = InstrumentMode::Conditional;
        let b = simulate_fiscal_design(&d2, 9).unwrap();
        assert_eq!(a.panel.column("capital").unwrap(), b.panel.column("capital").unwrap());
        assert_ne!(a.panel.column("z").unwrap(), b.panel.column("z").unwrap());
        assert_eq!(a, simulate_fiscal_design(&d, 9).unwrap());
    }
    #[test]
    fn law_of_motion_holds_exactly() {
        let p = FiscalParams::default();
        let sim = simulate_fiscal(200, &p, 5).unwrap();
        let sh = &sim.shocks;
        let ut = sh.kept(&sh.u_tau);
        let ua = sh.kept(&sh.u_a);
        for t in 1..200 {
            let r = sim.capital[t] - p.alpha * sim.capital[t - 1] - ua[t] + p.kappa * (p.theta * ut[t] + ut[t - 1]);
            assert!(r.abs() < 1e-12);
            assert_eq!(sim.tax[t], sh.u_tau[sh.start + t - 2]);
        }
    }

    #[test]
    fn counterfactual_matches_truth() {
        let p = FiscalParams::default();
        let sim = simulate_fiscal(80, &p, 6).unwrap();
        let (base_tax, base_k) = propagate_fiscal(&p, &sim.shocks.u_tau, &sim.shocks.u_a);
        let t0 = 120;
        let mut bumped = sim.shocks.u_tau.clone();
        bumped[t0] += 1.0;
        let (tax, k) = propagate_fiscal(&p, &bumped, &sim.shocks.u_a);
        let (tt, tk) = true_fiscal_irf(&p, 10);
        for h in 0..=10 {
            assert!((tax[t0 + h] - base_tax[t0 + h] - tt[h]).abs() < 1e-10);
            assert!((k[t0 + h] - base_k[t0 + h] - tk[h]).abs() < 1e-10);
        }
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma).powi(2);
            sbb += (y - mb).powi(2);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn strict_instrument_moments() {
        let sim = simulate_fiscal(5000, &FiscalParams::default(), 7).unwrap();
        let var = sim.tax.iter().map(|v| v * v).sum::<f64>() / 5000.0;
        assert!((var - 1.0).abs() < 0.1);
        let ins = gen_instrument(&sim.shocks, InstrumentMode::Strict, 7);
        let sh = &sim.shocks;
        let ut = sh.kept(&sh.u_tau);
        let r = corr(&ins.z, &ut);
        assert!((r - 0.7 / 8.5f64.sqrt()).abs() < 3.0 / 5000f64.sqrt(), "corr {r}");
        let ua = sh.kept(&sh.u_a);
        let band = 3.0 / 4999f64.sqrt();
        assert!(corr(&ins.z, &ua).abs() < band);
        assert!(corr(&ins.z[1..], &ua[..4999]).abs() < band);
        assert!(corr(&ins.z[..4999], &ua[1..]).abs() < band);
    }

    #[test]
    fn bernoulli_share_near_tenth() {
        let s = vec![0.0; 10];
        let mut count = 0;
        for seed in 0..50 {
            let p = gen_informational((&s, &s), 100, InfoNoise::Uniform { upper: 1.0 }, seed).unwrap();
            count += p.b.iter().filter(|b| **b).count();
            assert!(p.sigma.iter().all(|v| (0.0..1.0).contains(v)));
        }
        let mean = count as f64 / 50.0;
        assert!((mean - 10.0).abs() < 1.5, "mean {mean}");
    }

    #[test]
    fn short_samples_rejected() {
        assert!(simulate_fiscal(49, &FiscalParams::default(), 0).is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the left-hand side at horizon h is formed from the response series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadTransform {
    /// y_{t+h}
    #[default]
    Lead,
    /// y_{t+h} − y_{t−1}, for responses in levels.
    LevelChange,
}

/// A series at a given lag, written `name:lag` (lag defaults to 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ControlRef {
    pub variable: String,
    pub lag: usize,
}

impl ControlRef {
    pub fn new(variable: impl Into<String>, lag: usize) -> Self {
        ControlRef {
            variable: variable.into(),
            lag,
        }
    }

    /// Every `(variable, lag)` pair for the given variables and lags.
    pub fn lags_of<S: AsRef<str>>(variables: &[S], lags: impl IntoIterator<Item = usize> + Clone) -> Vec<ControlRef> {
        let mut out = Vec::new();
        for v in variables {
            for l in lags.clone() {
                out.push(ControlRef::new(v.as_ref(), l));
            }
        }
        out
    }
}

impl fmt::Display for ControlRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.variable, self.lag)
    }
}

impl FromStr for ControlRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.rsplit_once(':') {
            Some((name, lag)) if !name.is_empty() => {
                let lag = lag
                    .trim()
                    .parse()
                    .map_err(|_| Error::spec(format!("bad lag in control `{s}`")))?;
                Ok(ControlRef::new(name.trim(), lag))
            }
            Some(_) => Err(Error::spec(format!("bad control `{s}`"))),
            None if s.is_empty() => Err(Error::spec("empty control reference")),
            None => Ok(ControlRef::new(s, 0)),
        }
    }
}

impl TryFrom<String> for ControlRef {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ControlRef> for String {
    fn from(c: ControlRef) -> String {
        c.to_string()
    }
}

/// How the impulse is identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Identification {
    /// The impulse series is itself the shock (or a valid proxy regressor).
    ObservedShock,
    /// The impulse is instrumented by the spec's instrument.
    Iv,
    /// The impulse is the accumulated movement υ_t = x_t + … + x_{t+lead},
    /// projected on contemporaneous controls in a first stage; the second
    /// stage uses the lagged controls.
    CumulativeSvar { lead: usize },
}

impl fmt::Display for Identification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Identification::ObservedShock => f.write_str("observed_shock"),
            Identification::Iv => f.write_str("iv"),
            Identification::CumulativeSvar { lead } => write!(f, "cumulative_svar({lead})"),
        }
    }
}

/// One local-projection problem.
///
/// Under [`Identification::CumulativeSvar`] the first stage uses every
/// control one period later than listed (`x:1` enters the first stage as
/// `x:0`), so all control lags must be at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LPSpec {
    pub response: String,
    #[serde(default)]
    pub transform: LeadTransform,
    pub impulse: String,
    /// Regress on x_t + … + x_{t+a} instead of x_t (IV and observed shock).
    #[serde(default)]
    pub impulse_accumulation: usize,
    #[serde(default)]
    pub instrument: Option<String>,
    #[serde(default)]
    pub essential_controls: Vec<ControlRef>,
    #[serde(default)]
    pub candidate_controls: Vec<ControlRef>,
    /// Largest horizon H; horizons are 0..=H.
    pub horizons: usize,
    pub identification: Identification,
    /// Required surplus of observations over parameters at every horizon.
    #[serde(default = "default_slack")]
    pub min_slack: usize,
    /// First-stage |t| floor below which IV estimation fails (0 disables).
    #[serde(default)]
    pub weak_t_floor: f64,
}

fn default_slack() -> usize {
    10
}

impl LPSpec {
    /// Observed-shock LP of `response` on `impulse` with no controls.
    pub fn new(response: impl Into<String>, impulse: impl Into<String>, horizons: usize) -> Self {
        LPSpec {
            response: response.into(),
            transform: LeadTransform::Lead,
            impulse: impulse.into(),
            impulse_accumulation: 0,
            instrument: None,
            essential_controls: Vec::new(),
            candidate_controls: Vec::new(),
            horizons,
            identification: Identification::ObservedShock,
            min_slack: default_slack(),
            weak_t_floor: 0.0,
        }
    }

    pub fn with_instrument(mut self, instrument: impl Into<String>) -> Self {
        self.instrument = Some(instrument.into());
        self.identification = Identification::Iv;
        self
    }

    pub fn with_identification(mut self, identification: Identification) -> Self {
        self.identification = identification;
        self
    }

    pub fn with_essential(mut self, controls: Vec<ControlRef>) -> Self {
        self.essential_controls = controls;
        self
    }

    pub fn with_candidates(mut self, controls: Vec<ControlRef>) -> Self {
        self.candidate_controls = controls;
        self
    }

    pub fn with_transform(mut self, transform: LeadTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_impulse_accumulation(mut self, periods: usize) -> Self {
        self.impulse_accumulation = periods;
        self
    }

    /// Same problem for another response series.
    pub fn for_response(&self, response: &str) -> Self {
        LPSpec {
            response: response.to_string(),
            ..self.clone()
        }
    }

    pub fn n_candidates(&self) -> usize {
        self.candidate_controls.len()
    }

    pub fn horizon_list(&self) -> Vec<usize> {
        (0..=self.horizons).collect()
    }

    pub fn has_first_stage(&self) -> bool {
        !matches!(self.identification, Identification::ObservedShock)
    }

    /// The leads accumulated into the regressor of interest.
    pub(crate) fn target_lead(&self) -> usize {
        match self.identification {
            Identification::CumulativeSvar { lead } => lead,
            _ => self.impulse_accumulation,
        }
    }

    /// Lag shift between second-stage and first-stage controls.
    pub(crate) fn first_stage_shift(&self) -> usize {
        usize::from(matches!(self.identification, Identification::CumulativeSvar { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        match self.identification {
            Identification::Iv if self.instrument.is_none() => {
                return Err(Error::spec("IV identification requires an instrument"))
            }
            Identification::CumulativeSvar { lead } => {
                if lead == 0 {
                    return Err(Error::spec("cumulative SVAR requires an accumulation lead of at least 1"));
                }
                if self.impulse_accumulation != 0 {
                    return Err(Error::spec(
                        "impulse_accumulation must be 0 under cumulative SVAR; use the SVAR lead",
                    ));
                }
                if let Some(c) = self
                    .essential_controls
                    .iter()
                    .chain(&self.candidate_controls)
                    .find(|c| c.lag == 0)
                {
                    return Err(Error::spec(format!(
                        "control `{c}` has lag 0; cumulative SVAR controls must be lagged"
                    )));
                }
            }
            _ => {}
        }
        for c in &self.candidate_controls {
            if self.essential_controls.contains(c) {
                return Err(Error::spec(format!("control `{c}` is both essential and a candidate")));
            }
        }
        for (i, c) in self.candidate_controls.iter().enumerate() {
            if self.candidate_controls[..i].contains(c) {
                return Err(Error::spec(format!("candidate control `{c}` listed twice")));
            }
        }
        for (i, c) in self.essential_controls.iter().enumerate() {
            if self.essential_controls[..i].contains(c) {
                return Err(Error::spec(format!("essential control `{c}` listed twice")));
            }
        }
        if !self.weak_t_floor.is_finite() || self.weak_t_floor < 0.0 {
            return Err(Error::spec("weak_t_floor must be a nonnegative number"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_refs_parse() {
        assert_eq!("tax:2".parse::<ControlRef>().unwrap(), ControlRef::new("tax", 2));
        assert_eq!("tax".parse::<ControlRef>().unwrap(), ControlRef::new("tax", 0));
        assert!("tax:x".parse::<ControlRef>().is_err());
        assert_eq!(ControlRef::new("a", 3).to_string(), "a:3");
    }

    #[test]
    fn validation() {
        let base = LPSpec::new("y", "x", 4);
        assert!(base.validate().is_ok());
        assert!(base.clone().with_identification(Identification::Iv).validate().is_err());
        assert!(base
            .clone()
            .with_identification(Identification::CumulativeSvar { lead: 0 })
            .validate()
            .is_err());
        let overlap = base
            .clone()
            .with_essential(vec![ControlRef::new("a", 1)])
            .with_candidates(vec![ControlRef::new("a", 1)]);
        assert!(overlap.validate().is_err());
        let svar_lag0 = base
            .with_identification(Identification::CumulativeSvar { lead: 2 })
            .with_essential(vec![ControlRef::new("a", 0)]);
        assert!(svar_lag0.validate().is_err());
    }
}

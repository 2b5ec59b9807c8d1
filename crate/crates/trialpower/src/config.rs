//! JSON scenario configuration: a `design` block describing the trial and a
//! `run` block with execution options. Units are months, patients/month, and
//! decimal probabilities; two-sided alpha is halved internally.

use crate::design::{DesignError, TrialDesign};
use crate::models::PiecewiseExponentialModel;
use crate::power::ApproxMethod;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Design(#[from] DesignError),
}

/// Piecewise-constant hazard given as interval cut points and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardSpec {
    #[serde(default)]
    pub cuts: Vec<f64>,
    pub hazards: Vec<f64>,
}

impl HazardSpec {
    pub fn to_model(&self) -> Result<PiecewiseExponentialModel<f64>, ConfigError> {
        PiecewiseExponentialModel::new(self.cuts.clone(), self.hazards.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn from_model(model: &PiecewiseExponentialModel<f64>) -> Self {
        Self { cuts: model.cuts().to_vec(), hazards: model.hazards().to_vec() }
    }
}

/// Dropout given as the probability of withdrawal over a reference period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub probability: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// Constant hazard ratio experimental : control. May be omitted when
    /// both per-arm hazards are given and are proportional.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hazard_ratio: Option<f64>,
    /// Exponential control survival via its median; mutually exclusive with
    /// `control_hazard`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_hazard: Option<HazardSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experimental_hazard: Option<HazardSpec>,
    /// Randomization ratio experimental : control (default 1).
    #[serde(default = "default_phi")]
    pub phi: f64,
    pub accrual_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Target events; mutually exclusive with `event_patient_ratio`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event_patient_ratio: Option<f64>,
    pub dropout: DropoutSpec,
    /// Two-sided significance level; halved internally.
    #[serde(default = "default_alpha_two_sided")]
    pub alpha_two_sided: f64,
    #[serde(default = "default_power")]
    pub power: f64,
}

fn default_phi() -> f64 {
    1.0
}

fn default_alpha_two_sided() -> f64 {
    0.05
}

fn default_power() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSpec {
    pub methods: Vec<ApproxMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u32>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: OutputFormat,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            methods: vec![
                ApproxMethod::Schoenfeld,
                ApproxMethod::Freedman,
                ApproxMethod::Rubinstein,
                ApproxMethod::Empirical,
            ],
            replicates: None,
            seed: 132,
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub design: DesignSpec,
    #[serde(default)]
    pub run: RunSpec,
}

impl ScenarioConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.design;
        match (&d.control_median, &d.control_hazard) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either control_median or control_hazard, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "one of control_median or control_hazard is required".into(),
                ))
            }
            _ => {}
        }
        if d.experimental_hazard.is_some() && d.control_hazard.is_none() {
            return Err(ConfigError::Invalid(
                "experimental_hazard requires control_hazard".into(),
            ));
        }
        if d.hazard_ratio.is_none() && d.experimental_hazard.is_none() {
            return Err(ConfigError::Invalid(
                "one of hazard_ratio or experimental_hazard is required".into(),
            ));
        }
        match (&d.events, &d.event_patient_ratio) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "give either events or event_patient_ratio, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ConfigError::Invalid(
                    "one of events or event_patient_ratio is required".into(),
                ))
            }
            _ => {}
        }
        if d.events.is_some() && d.n.is_none() {
            return Err(ConfigError::Invalid(
                "explicit events requires an explicit n".into(),
            ));
        }
        if !(d.alpha_two_sided > 0.0 && d.alpha_two_sided < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "two-sided alpha must lie in (0, 1), got {}",
                d.alpha_two_sided
            )));
        }
        Ok(())
    }

    /// Hazard ratio, taken from the explicit field or derived from
    /// proportional per-arm hazards.
    pub fn hazard_ratio(&self) -> Result<f64, ConfigError> {
        if let Some(hr) = self.design.hazard_ratio {
            if let (Some(c), Some(e)) =
                (&self.design.control_hazard, &self.design.experimental_hazard)
            {
                check_proportional(c, e, Some(hr))?;
            }
            return Ok(hr);
        }
        let c = self.design.control_hazard.as_ref().expect("validated");
        let e = self.design.experimental_hazard.as_ref().expect("validated");
        check_proportional(c, e, None)
    }

    pub fn to_design(&self) -> Result<TrialDesign, ConfigError> {
        let d = &self.design;
        let control = match (&d.control_median, &d.control_hazard) {
            (Some(median), None) => PiecewiseExponentialModel::from_median(*median)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            (None, Some(spec)) => spec.to_model()?,
            _ => unreachable!("validated"),
        };
        let hr = self.hazard_ratio()?;
        let mut builder = TrialDesign::builder()
            .hazard_ratio(hr)
            .control_survival(control)
            .phi(d.phi)
            .dropout_probability(d.dropout.probability, d.dropout.period)
            .accrual_rate(d.accrual_rate)
            .alpha_one_sided(d.alpha_two_sided / 2.0)
            .target_power(d.power);
        if let Some(n) = d.n {
            builder = builder.n(n);
        }
        if let Some(events) = d.events {
            builder = builder.events(events);
        }
        if let Some(ratio) = d.event_patient_ratio {
            builder = builder.event_patient_ratio(ratio);
        }
        Ok(builder.build()?)
    }

    /// Write the config back out; the result re-parses to an identical
    /// design.
    pub fn from_design(design: &TrialDesign, run: RunSpec) -> Self {
        let exponential_control = design.control_survival.num_intervals() == 1;
        let (control_median, control_hazard) = if exponential_control {
            (
                Some(std::f64::consts::LN_2 / design.control_survival.hazards()[0]),
                None,
            )
        } else {
            (None, Some(HazardSpec::from_model(&design.control_survival)))
        };
        // re-express the exponential dropout hazard as %/12 months
        let eta = design.dropout.hazards()[0];
        let dropout = DropoutSpec {
            probability: -((-eta * 12.0).exp() - 1.0),
            period: 12.0,
        };
        Self {
            design: DesignSpec {
                hazard_ratio: Some(design.hazard_ratio),
                control_median,
                control_hazard,
                experimental_hazard: None,
                phi: design.phi,
                accrual_rate: design.accrual_rate,
                n: Some(design.n),
                events: Some(design.d),
                event_patient_ratio: None,
                dropout,
                alpha_two_sided: design.alpha_one_sided * 2.0,
                power: design.target_power,
            },
            run,
        }
    }
}

fn check_proportional(
    control: &HazardSpec,
    experimental: &HazardSpec,
    expected: Option<f64>,
) -> Result<f64, ConfigError> {
    if control.cuts != experimental.cuts
        || control.hazards.len() != experimental.hazards.len()
    {
        return Err(ConfigError::Invalid(
            "per-arm hazards must share the same cut points".into(),
        ));
    }
    let mut ratio = expected;
    for (e, c) in experimental.hazards.iter().zip(&control.hazards) {
        let r = e / c;
        match ratio {
            None => ratio = Some(r),
            Some(r0) if (r - r0).abs() > 1e-9 * r0.abs().max(1.0) => {
                return Err(ConfigError::Invalid(format!(
                    "per-arm hazards are not proportional: ratios {r0} and {r}"
                )));
            }
            _ => {}
        }
    }
    ratio.ok_or_else(|| ConfigError::Invalid("empty hazard vectors".into()))
}

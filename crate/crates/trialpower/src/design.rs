//! Trial designs, the scenario-grid constructor, and the edge-case design
//! comparisons: prolonged trial, accelerated accrual, increased enrollment.

use crate::events::{trial_duration, EventCurveInputs, EventError};
use crate::models::{ModelError, PiecewiseExponentialModel};
use crate::num::find_root;
use crate::power::{required_events, ApproxMethod, PowerError};
use crate::sim::{calibrate_events, SimError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid design: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A complete two-arm event-driven design under proportional hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDesign {
    pub control_survival: PiecewiseExponentialModel<f64>,
    /// Hazard ratio experimental : control, constant over time.
    pub hazard_ratio: f64,
    /// Randomization ratio `phi`:1, experimental : control.
    pub phi: f64,
    pub dropout: PiecewiseExponentialModel<f64>,
    /// Patients per month.
    pub accrual_rate: f64,
    pub n: u32,
    /// Target number of events driving the analysis cutoff.
    pub d: u32,
    pub alpha_one_sided: f64,
    pub target_power: f64,
}

impl TrialDesign {
    pub fn builder() -> TrialDesignBuilder {
        TrialDesignBuilder::default()
    }

    pub fn theta(&self) -> f64 {
        self.hazard_ratio.ln()
    }

    /// Experimental allocation fraction `pi = phi / (1 + phi)`.
    pub fn pi(&self) -> f64 {
        self.phi / (1.0 + self.phi)
    }

    /// `n_e = round(n pi)`; the control arm gets the remainder.
    pub fn n_experimental(&self) -> u32 {
        (self.n as f64 * self.pi()).round() as u32
    }

    pub fn n_control(&self) -> u32 {
        self.n - self.n_experimental()
    }

    pub fn accrual_duration(&self) -> f64 {
        self.n as f64 / self.accrual_rate
    }

    pub fn experimental_survival(&self) -> PiecewiseExponentialModel<f64> {
        self.control_survival
            .scaled(self.hazard_ratio)
            .expect("positive hazard ratio preserves model validity")
    }

    /// Event-curve inputs `[experimental, control]` with rounded arm sizes.
    pub fn arm_inputs(&self) -> Result<[EventCurveInputs<f64>; 2], EventError> {
        let r = self.accrual_duration();
        Ok([
            EventCurveInputs::new(
                self.experimental_survival(),
                &self.dropout,
                r,
                self.n_experimental() as f64,
            )?,
            EventCurveInputs::new(
                self.control_survival.clone(),
                &self.dropout,
                r,
                self.n_control() as f64,
            )?,
        ])
    }

    /// Like [`Self::arm_inputs`] but at an arbitrary allocation treated as
    /// continuous in `phi`; used by allocation solvers.
    pub fn arm_inputs_fractional(
        &self,
        phi: f64,
    ) -> Result<[EventCurveInputs<f64>; 2], EventError> {
        let pi = phi / (1.0 + phi);
        let r = self.accrual_duration();
        Ok([
            EventCurveInputs::new(
                self.experimental_survival(),
                &self.dropout,
                r,
                self.n as f64 * pi,
            )?,
            EventCurveInputs::new(
                self.control_survival.clone(),
                &self.dropout,
                r,
                self.n as f64 * (1.0 - pi),
            )?,
        ])
    }

    /// Deterministic expected trial duration `t_d` at event target `d`.
    pub fn expected_duration(&self, d: f64) -> Result<f64, EventError> {
        trial_duration(&self.arm_inputs()?, d)
    }

    /// Expected total events as calendar time grows without bound.
    pub fn max_expected_events(&self) -> f64 {
        self.arm_inputs()
            .map(|arms| arms.iter().map(|a| a.asymptote()).sum())
            .unwrap_or(0.0)
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self { phi, ..self.clone() }
    }

    pub fn with_rate(&self, accrual_rate: f64) -> Self {
        Self { accrual_rate, ..self.clone() }
    }

    pub fn with_n(&self, n: u32) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_events(&self, d: u32) -> Self {
        Self { d, ..self.clone() }
    }

    pub fn with_hazard_ratio(&self, hazard_ratio: f64) -> Self {
        Self { hazard_ratio, ..self.clone() }
    }
}

/// Builder with the §-style parameterization: hazard ratio plus control
/// survival, allocation, accrual, dropout, and error rates.
#[derive(Debug, Default, Clone)]
pub struct TrialDesignBuilder {
    hazard_ratio: Option<f64>,
    control_survival: Option<PiecewiseExponentialModel<f64>>,
    phi: Option<f64>,
    dropout: Option<PiecewiseExponentialModel<f64>>,
    accrual_rate: Option<f64>,
    n: Option<u32>,
    event_patient_ratio: Option<f64>,
    d: Option<u32>,
    alpha_one_sided: Option<f64>,
    target_power: Option<f64>,
}

impl TrialDesignBuilder {
    pub fn hazard_ratio(mut self, hr: f64) -> Self {
        self.hazard_ratio = Some(hr);
        self
    }

    pub fn control_median(mut self, median: f64) -> Self {
        self.control_survival = PiecewiseExponentialModel::from_median(median).ok();
        self
    }

    pub fn control_survival(mut self, model: PiecewiseExponentialModel<f64>) -> Self {
        self.control_survival = Some(model);
        self
    }

    pub fn phi(mut self, phi: f64) -> Self {
        self.phi = Some(phi);
        self
    }

    pub fn dropout_probability(mut self, p: f64, period: f64) -> Self {
        self.dropout = PiecewiseExponentialModel::from_dropout_probability(p, period).ok();
        self
    }

    pub fn dropout(mut self, model: PiecewiseExponentialModel<f64>) -> Self {
        self.dropout = Some(model);
        self
    }

    pub fn accrual_rate(mut self, rate: f64) -> Self {
        self.accrual_rate = Some(rate);
        self
    }

    pub fn n(mut self, n: u32) -> Self {
        self.n = Some(n);
        self
    }

    /// Derive `n` from the event target: `n = ceil(d / ratio)`.
    pub fn event_patient_ratio(mut self, ratio: f64) -> Self {
        self.event_patient_ratio = Some(ratio);
        self
    }

    pub fn events(mut self, d: u32) -> Self {
        self.d = Some(d);
        self
    }

    pub fn alpha_one_sided(mut self, alpha: f64) -> Self {
        self.alpha_one_sided = Some(alpha);
        self
    }

    pub fn target_power(mut self, power: f64) -> Self {
        self.target_power = Some(power);
        self
    }

    pub fn build(self) -> Result<TrialDesign, DesignError> {
        let hazard_ratio = self
            .hazard_ratio
            .ok_or_else(|| DesignError::Invalid("hazard ratio is required".into()))?;
        if !(hazard_ratio > 0.0 && hazard_ratio.is_finite()) {
            return Err(DesignError::Invalid(format!(
                "hazard ratio must be positive, got {hazard_ratio}"
            )));
        }
        let control_survival = self
            .control_survival
            .ok_or_else(|| DesignError::Invalid("control survival is required".into()))?;
        let phi = self.phi.unwrap_or(1.0);
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(DesignError::Invalid(format!("phi must be positive, got {phi}")));
        }
        let dropout = self
            .dropout
            .ok_or_else(|| DesignError::Invalid("dropout model is required".into()))?;
        let accrual_rate = self
            .accrual_rate
            .ok_or_else(|| DesignError::Invalid("accrual rate is required".into()))?;
        if !(accrual_rate > 0.0 && accrual_rate.is_finite()) {
            return Err(DesignError::Invalid(format!(
                "accrual rate must be positive, got {accrual_rate}"
            )));
        }
        let alpha_one_sided = self.alpha_one_sided.unwrap_or(0.025);
        if !(alpha_one_sided > 0.0 && alpha_one_sided < 0.5) {
            return Err(DesignError::Invalid(format!(
                "one-sided alpha must lie in (0, 0.5), got {alpha_one_sided}"
            )));
        }
        let target_power = self.target_power.unwrap_or(0.8);
        if !(target_power > alpha_one_sided && target_power < 1.0) {
            return Err(DesignError::Invalid(format!(
                "target power must lie in (alpha, 1), got {target_power}"
            )));
        }
        // event target defaults to the 1:1 Schoenfeld requirement
        let schoenfeld_d = {
            let theta = hazard_ratio.ln();
            let z = crate::num::normal_quantile(1.0 - alpha_one_sided)
                .map_err(PowerError::from)?
                + crate::num::normal_quantile(target_power).map_err(PowerError::from)?;
            (z * z * 4.0 / (theta * theta)).ceil() as u32
        };
        let d = self.d.unwrap_or(schoenfeld_d);
        let n = match (self.n, self.event_patient_ratio) {
            (Some(n), None) => n,
            (None, Some(ratio)) => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(DesignError::Invalid(format!(
                        "event-patient ratio must lie in (0, 1], got {ratio}"
                    )));
                }
                (d as f64 / ratio).ceil() as u32
            }
            (Some(_), Some(_)) => {
                return Err(DesignError::Invalid(
                    "give either n or an event-patient ratio, not both".into(),
                ))
            }
            (None, None) => {
                return Err(DesignError::Invalid(
                    "either n or an event-patient ratio is required".into(),
                ))
            }
        };
        if n < 2 {
            return Err(DesignError::Invalid(format!("need at least 2 patients, got {n}")));
        }
        if d == 0 || d > n {
            return Err(DesignError::Invalid(format!(
                "event target must satisfy 0 < d <= n, got d={d}, n={n}"
            )));
        }
        Ok(TrialDesign {
            control_survival,
            hazard_ratio,
            phi,
            dropout,
            accrual_rate,
            n,
            d,
            alpha_one_sided,
            target_power,
        })
    }
}

/// Accrual rate for a grid scenario: 20 patients/month at HR 0.5 rising
/// linearly to 50 at HR 0.8.
pub fn grid_accrual_rate(hr: f64) -> f64 {
    20.0 + (50.0 - 20.0) * (hr - 0.5) / (0.8 - 0.5)
}

/// Construct a 1:1 scenario from the (HR, control median, d/n) grid rules:
/// Schoenfeld event target, `n = ceil(d / (d/n))`, linear accrual-rate rule.
pub fn build_grid_design(
    hr: f64,
    control_median: f64,
    event_patient_ratio: f64,
    alpha_one_sided: f64,
    target_power: f64,
    dropout: Option<PiecewiseExponentialModel<f64>>,
) -> Result<TrialDesign, DesignError> {
    let dropout = match dropout {
        Some(m) => m,
        None => PiecewiseExponentialModel::from_dropout_probability(0.01, 12.0)?,
    };
    TrialDesign::builder()
        .hazard_ratio(hr)
        .control_median(control_median)
        .phi(1.0)
        .dropout(dropout)
        .accrual_rate(grid_accrual_rate(hr))
        .event_patient_ratio(event_patient_ratio)
        .alpha_one_sided(alpha_one_sided)
        .target_power(target_power)
        .build()
}

/// How the variant event size is determined when comparing designs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventSizeMethod {
    /// Monte Carlo calibration to the target power.
    Empirical { replicates: u32, seed: u64 },
    Rubinstein,
    Schoenfeld,
}

/// The three §-case families of alternative designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCase {
    ProlongedTrial,
    AcceleratedAccrual,
    IncreasedEnrollment,
}

impl std::fmt::Display for EdgeCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeCase::ProlongedTrial => "Prolonged trial",
            EdgeCase::AcceleratedAccrual => "Accelerated accrual",
            EdgeCase::IncreasedEnrollment => "Increased enrollment",
        })
    }
}

/// The free parameter solved for an edge-case variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolvedValue {
    /// Prolonged trial: the new expected duration in months.
    Duration(f64),
    /// Accelerated accrual: the accrual rate holding duration fixed.
    AccrualRate(f64),
    /// Increased enrollment: the sample size holding duration fixed.
    SampleSize(u32),
}

/// An edge-case variant with its solved free parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignComparison {
    pub edge_case: EdgeCase,
    pub variant: TrialDesign,
    pub d_variant: u32,
    pub solved_value: SolvedValue,
    pub feasible: bool,
    /// Percent change of the solved quantity versus the base design.
    pub relative_change: f64,
    /// Deterministic expected duration of the variant at `d_variant`.
    pub expected_duration: f64,
}

/// Variant event size for the base design at allocation `phi_variant`.
pub fn variant_event_size(
    base: &TrialDesign,
    phi_variant: f64,
    method: EventSizeMethod,
) -> Result<u32, DesignError> {
    let variant = base.with_phi(phi_variant);
    let d = match method {
        EventSizeMethod::Empirical { replicates, seed } => calibrate_events(
            &variant,
            base.target_power,
            base.alpha_one_sided,
            replicates,
            seed,
        )?,
        EventSizeMethod::Rubinstein => {
            required_events(ApproxMethod::Rubinstein, &variant, base.target_power)?
        }
        EventSizeMethod::Schoenfeld => {
            required_events(ApproxMethod::Schoenfeld, &variant, base.target_power)?
        }
    };
    Ok(d)
}

fn require_one_to_one(base: &TrialDesign) -> Result<(), DesignError> {
    if (base.phi - 1.0).abs() > 1e-12 {
        return Err(DesignError::Invalid(format!(
            "edge cases start from a 1:1 base design, got phi = {}",
            base.phi
        )));
    }
    Ok(())
}

/// Hold `n` and the accrual rate fixed; the trial simply runs longer.
pub fn edge_case_prolonged(
    base: &TrialDesign,
    phi_variant: f64,
    method: EventSizeMethod,
) -> Result<DesignComparison, DesignError> {
    require_one_to_one(base)?;
    let d_variant = variant_event_size(base, phi_variant, method)?;
    let variant = base.with_phi(phi_variant).with_events(d_variant);
    let duration = variant.expected_duration(d_variant as f64)?;
    let base_duration = base.expected_duration(base.d as f64)?;
    Ok(DesignComparison {
        edge_case: EdgeCase::ProlongedTrial,
        variant,
        d_variant,
        solved_value: SolvedValue::Duration(duration),
        feasible: true,
        relative_change: (duration - base_duration) / base_duration * 100.0,
        expected_duration: duration,
    })
}

/// Accrual duration used to stand in for "instantaneous" enrollment when
/// probing feasibility.
const INSTANT_ACCRUAL_MONTHS: f64 = 1e-6;

/// Hold `n` fixed and solve the accrual rate so the expected duration
/// matches `fixed_duration`. Infeasibility (even instantaneous accrual is
/// too slow) is reported as a result, not an error.
pub fn edge_case_accelerated(
    base: &TrialDesign,
    phi_variant: f64,
    method: EventSizeMethod,
    fixed_duration: f64,
) -> Result<DesignComparison, DesignError> {
    require_one_to_one(base)?;
    let d_variant = variant_event_size(base, phi_variant, method)?;
    let variant = base.with_phi(phi_variant).with_events(d_variant);
    let duration_at = |accrual_months: f64| -> Result<f64, EventError> {
        variant
            .with_rate(variant.n as f64 / accrual_months)
            .expected_duration(d_variant as f64)
    };
    let instant = duration_at(INSTANT_ACCRUAL_MONTHS)?;
    if instant > fixed_duration {
        let v = variant.with_rate(variant.n as f64 / INSTANT_ACCRUAL_MONTHS);
        return Ok(DesignComparison {
            edge_case: EdgeCase::AcceleratedAccrual,
            variant: v,
            d_variant,
            solved_value: SolvedValue::AccrualRate(f64::INFINITY),
            feasible: false,
            relative_change: f64::INFINITY,
            expected_duration: instant,
        });
    }
    // duration grows with the accrual window; expand the upper bracket in
    // case the variant needs a slower rate than the base
    let mut hi = base.accrual_duration();
    while duration_at(hi)? < fixed_duration {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(DesignError::Invalid(
                "no accrual window reaches the target duration".into(),
            ));
        }
    }
    let r_star = find_root(
        |r| duration_at(r).expect("valid accrual window") - fixed_duration,
        INSTANT_ACCRUAL_MONTHS,
        hi,
        1e-10,
        1e-6,
    )
    .map_err(PowerError::from)?;
    let rate = variant.n as f64 / r_star;
    let v = variant.with_rate(rate);
    let duration = v.expected_duration(d_variant as f64)?;
    Ok(DesignComparison {
        edge_case: EdgeCase::AcceleratedAccrual,
        variant: v,
        d_variant,
        solved_value: SolvedValue::AccrualRate(rate),
        feasible: true,
        relative_change: (rate - base.accrual_rate) / base.accrual_rate * 100.0,
        expected_duration: duration,
    })
}

/// Hold the accrual rate fixed and solve the smallest integer `n` whose
/// expected duration does not exceed `fixed_duration`.
pub fn edge_case_increased_n(
    base: &TrialDesign,
    phi_variant: f64,
    method: EventSizeMethod,
    fixed_duration: f64,
) -> Result<DesignComparison, DesignError> {
    require_one_to_one(base)?;
    let d_variant = variant_event_size(base, phi_variant, method)?;
    let variant = base.with_phi(phi_variant).with_events(d_variant);
    let duration_at = |n: u32| -> Result<f64, EventError> {
        variant.with_n(n).expected_duration(d_variant as f64)
    };
    // Adding patients beyond rate * duration cannot shorten the trial:
    // they would enroll after the cutoff. This caps the search.
    let n_cap = (base.accrual_rate * fixed_duration).ceil() as u32 + 1;
    if duration_at(n_cap)? > fixed_duration {
        return Ok(DesignComparison {
            edge_case: EdgeCase::IncreasedEnrollment,
            variant: variant.with_n(n_cap),
            d_variant,
            solved_value: SolvedValue::SampleSize(n_cap),
            feasible: false,
            relative_change: f64::INFINITY,
            expected_duration: duration_at(n_cap)?,
        });
    }
    let (mut lo, mut hi) = (base.n, n_cap);
    if duration_at(lo)? <= fixed_duration {
        hi = lo;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if duration_at(mid)? <= fixed_duration {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    // downward scan for minimality in case of local flatness
    let mut n_star = hi;
    while n_star > base.n && duration_at(n_star - 1)? <= fixed_duration {
        n_star -= 1;
    }
    let v = variant.with_n(n_star);
    Ok(DesignComparison {
        edge_case: EdgeCase::IncreasedEnrollment,
        variant: v.clone(),
        d_variant,
        solved_value: SolvedValue::SampleSize(n_star),
        feasible: true,
        relative_change: (n_star as f64 - base.n as f64) / base.n as f64 * 100.0,
        expected_duration: v.expected_duration(d_variant as f64)?,
    })
}

/// One output row of the scenario grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub hazard_ratio: f64,
    pub control_median: f64,
    pub event_patient_ratio: f64,
    pub phi: f64,
    pub edge_case: EdgeCase,
    pub d_base: u32,
    pub d_variant: u32,
    pub d_change_pct: f64,
    pub base_duration: f64,
    pub variant_duration: f64,
    pub duration_change_pct: f64,
    /// Solved accrual rate (accelerated) or sample size (increased n).
    pub solved_value: Option<f64>,
    pub solved_change_pct: Option<f64>,
    pub feasible: bool,
}

/// Grid bounds and options for [`summarize_grid`].
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub hazard_ratios: Vec<f64>,
    pub control_medians: Vec<f64>,
    pub event_patient_ratios: Vec<f64>,
    pub phis: Vec<f64>,
    pub alpha_one_sided: f64,
    pub target_power: f64,
    pub method: EventSizeMethod,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            hazard_ratios: vec![0.5, 0.6, 0.7, 0.8],
            control_medians: vec![6.0, 12.0, 24.0],
            event_patient_ratios: vec![0.5, 0.6, 0.7, 0.8],
            phis: vec![1.5, 2.0],
            alpha_one_sided: 0.025,
            target_power: 0.8,
            method: EventSizeMethod::Rubinstein,
        }
    }
}

/// One row per (HR, CM, d/n, phi, edge case) cell; per-cell infeasibility
/// is recorded inline.
pub fn summarize_grid(config: &GridConfig) -> Result<Vec<GridRow>, DesignError> {
    let mut rows = Vec::new();
    for &hr in &config.hazard_ratios {
        for &cm in &config.control_medians {
            for &dn in &config.event_patient_ratios {
                let base = build_grid_design(
                    hr,
                    cm,
                    dn,
                    config.alpha_one_sided,
                    config.target_power,
                    None,
                )?;
                let base_duration = base.expected_duration(base.d as f64)?;
                for &phi in &config.phis {
                    let comparisons = [
                        edge_case_prolonged(&base, phi, config.method)?,
                        edge_case_accelerated(&base, phi, config.method, base_duration)?,
                        edge_case_increased_n(&base, phi, config.method, base_duration)?,
                    ];
                    for cmp in comparisons {
                        let (solved_value, solved_change_pct) = match cmp.solved_value {
                            SolvedValue::Duration(_) => (None, None),
                            SolvedValue::AccrualRate(v) => {
                                (Some(v), Some(cmp.relative_change))
                            }
                            SolvedValue::SampleSize(v) => {
                                (Some(v as f64), Some(cmp.relative_change))
                            }
                        };
                        rows.push(GridRow {
                            hazard_ratio: hr,
                            control_median: cm,
                            event_patient_ratio: dn,
                            phi,
                            edge_case: cmp.edge_case,
                            d_base: base.d,
                            d_variant: cmp.d_variant,
                            d_change_pct: (cmp.d_variant as f64 - base.d as f64)
                                / base.d as f64
                                * 100.0,
                            base_duration,
                            variant_duration: cmp.expected_duration,
                            duration_change_pct: (cmp.expected_duration - base_duration)
                                / base_duration
                                * 100.0,
                            solved_value,
                            solved_change_pct,
                            feasible: cmp.feasible,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm017() -> TrialDesign {
        TrialDesign::builder()
            .hazard_ratio(7.0 / 11.4)
            .control_median(7.0)
            .phi(1.0)
            .dropout_probability(0.05, 12.0)
            .accrual_rate(22.0)
            .n(186)
            .events(133)
            .alpha_one_sided(0.025)
            .target_power(0.8)
            .build()
            .unwrap()
    }

    #[test]
    fn grid_rate_rule_endpoints() {
        assert!((grid_accrual_rate(0.5) - 20.0).abs() < 1e-12);
        assert!((grid_accrual_rate(0.8) - 50.0).abs() < 1e-12);
        assert!((grid_accrual_rate(0.65) - 35.0).abs() < 1e-12);
    }

    #[test]
    fn grid_design_follows_the_rules() {
        let d = build_grid_design(0.5, 12.0, 0.7, 0.025, 0.8, None).unwrap();
        assert_eq!(d.d, 66);
        assert_eq!(d.n, (66.0f64 / 0.7).ceil() as u32);
        assert!((d.accrual_rate - 20.0).abs() < 1e-12);
        assert!((d.dropout.survivor(12.0) - 0.99).abs() < 1e-12);
        let d = build_grid_design(0.7, 12.0, 0.7, 0.025, 0.8, None).unwrap();
        assert_eq!(d.n, (d.d as f64 / 0.7).ceil() as u32);
    }

    #[test]
    fn builder_validation() {
        assert!(TrialDesign::builder().build().is_err());
        let b = || {
            TrialDesign::builder()
                .hazard_ratio(0.7)
                .control_median(10.0)
                .dropout_probability(0.01, 12.0)
                .accrual_rate(20.0)
        };
        assert!(b().n(300).build().is_ok());
        assert!(b().n(300).event_patient_ratio(0.7).build().is_err());
        assert!(b().build().is_err()); // neither n nor ratio
        assert!(b().n(100).alpha_one_sided(0.6).build().is_err());
        assert!(b().n(10).events(50).build().is_err()); // d > n
    }

    #[test]
    fn arm_counts_round_and_sum() {
        let d = cm017().with_phi(1.5);
        assert_eq!(d.n_experimental(), 112);
        assert_eq!(d.n_control(), 74);
        assert_eq!(d.n_experimental() + d.n_control(), d.n);
    }

    /// CM-017 with its event target recomputed by the same method the
    /// edge-case comparison will use, so phi = 1 variants are true no-ops.
    fn cm017_rubinstein_base() -> TrialDesign {
        let base = cm017();
        let d = crate::power::required_events(
            crate::power::ApproxMethod::Rubinstein,
            &base,
            base.target_power,
        )
        .unwrap();
        base.with_events(d)
    }

    #[test]
    fn prolonged_with_phi_one_is_a_noop() {
        let base = cm017_rubinstein_base();
        let cmp =
            edge_case_prolonged(&base, 1.0, EventSizeMethod::Rubinstein).unwrap();
        // same d and essentially the base duration
        assert_eq!(cmp.d_variant, base.d);
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        assert!((cmp.expected_duration - base_duration).abs() < 1e-6);
        assert!(cmp.relative_change.abs() < 1e-4);
    }

    #[test]
    fn accelerated_with_phi_one_keeps_the_rate() {
        let base = cm017_rubinstein_base();
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        let cmp = edge_case_accelerated(
            &base,
            1.0,
            EventSizeMethod::Rubinstein,
            base_duration,
        )
        .unwrap();
        if let SolvedValue::AccrualRate(rate) = cmp.solved_value {
            assert!((rate - 22.0).abs() / 22.0 < 1e-4, "rate {rate}");
        } else {
            panic!("expected an accrual-rate solution");
        }
        assert!(cmp.feasible);
        assert!((cmp.expected_duration - base_duration).abs() < 0.05);
    }

    #[test]
    fn increased_n_with_phi_one_keeps_n() {
        let base = cm017_rubinstein_base();
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        let cmp = edge_case_increased_n(
            &base,
            1.0,
            EventSizeMethod::Rubinstein,
            base_duration + 1e-6,
        )
        .unwrap();
        if let SolvedValue::SampleSize(n) = cmp.solved_value {
            assert_eq!(n, base.n);
        } else {
            panic!("expected a sample-size solution");
        }
    }

    #[test]
    fn edge_cases_require_one_to_one_base() {
        let base = cm017().with_phi(1.5);
        assert!(edge_case_prolonged(&base, 2.0, EventSizeMethod::Rubinstein).is_err());
    }

    #[test]
    fn prolonged_duration_dominates_base_for_effective_treatment() {
        let base = cm017();
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        for &phi in &[1.5, 2.0] {
            let cmp =
                edge_case_prolonged(&base, phi, EventSizeMethod::Rubinstein).unwrap();
            assert!(cmp.expected_duration >= base_duration, "phi {phi}");
        }
    }

    #[test]
    fn exactly_one_parameter_differs_per_edge_case() {
        let base = cm017();
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        let m = EventSizeMethod::Rubinstein;
        let pro = edge_case_prolonged(&base, 1.5, m).unwrap();
        assert_eq!(pro.variant.n, base.n);
        assert_eq!(pro.variant.accrual_rate, base.accrual_rate);
        let acc = edge_case_accelerated(&base, 1.5, m, base_duration).unwrap();
        assert_eq!(acc.variant.n, base.n);
        assert_ne!(acc.variant.accrual_rate, base.accrual_rate);
        let inc = edge_case_increased_n(&base, 1.5, m, base_duration).unwrap();
        assert_eq!(inc.variant.accrual_rate, base.accrual_rate);
        assert_ne!(inc.variant.n, base.n);
    }

    #[test]
    fn solved_values_are_monotone_in_allowed_duration() {
        let base = cm017();
        let base_duration = base.expected_duration(base.d as f64).unwrap();
        let m = EventSizeMethod::Rubinstein;
        let mut last_rate = f64::INFINITY;
        let mut last_n = u32::MAX;
        for slack in [0.0, 0.5, 1.0] {
            let acc =
                edge_case_accelerated(&base, 1.5, m, base_duration + slack).unwrap();
            if let SolvedValue::AccrualRate(rate) = acc.solved_value {
                assert!(rate <= last_rate + 1e-9);
                last_rate = rate;
            }
            let inc =
                edge_case_increased_n(&base, 1.5, m, base_duration + slack).unwrap();
            if let SolvedValue::SampleSize(n) = inc.solved_value {
                assert!(n <= last_n);
                last_n = n;
            }
        }
    }
}

//! Monte Carlo engine: patient-level event-driven trial simulation,
//! the d-th-event data cutoff, the logrank statistic, empirical power,
//! and common-random-number event-size calibration.
//!
//! Replicates are independent and run in parallel; every random draw is
//! addressed by `(seed, replicate, patient, purpose)` so results do not
//! depend on the degree of parallelism and candidate event sizes share
//! identical latent patient histories.

use crate::design::TrialDesign;
use crate::models::Arm;
use crate::num::{normal_quantile, NumError};
use crate::rng::{uniform, Purpose};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("dataset has no events")]
    NoEvents,
    #[error("logrank variance is zero; statistic undefined")]
    ZeroVariance,
    #[error(
        "target power {target} unreachable: estimated power {achieved:.4} \
         at the maximal event size {max_events}"
    )]
    Unreachable { target: f64, achieved: f64, max_events: u32 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Latent history for one simulated patient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientRecord {
    pub arm: Arm,
    /// Calendar entry time in months since first patient in.
    pub entry: f64,
    /// Event time measured from entry.
    pub latent_event: f64,
    /// Dropout time measured from entry.
    pub latent_dropout: f64,
}

/// One analyzed patient after the data cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Observation {
    pub arm: Arm,
    pub entry: f64,
    /// Observed follow-up time from entry.
    pub time: f64,
    /// true = event, false = censored.
    pub event: bool,
}

impl Observation {
    /// 0 = control, 1 = experimental, matching the usual arm indexing.
    pub fn arm_index(&self) -> usize {
        match self.arm {
            Arm::Control => 0,
            Arm::Experimental => 1,
        }
    }
}

/// Patient-level data after the event-driven cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    pub observations: Vec<Observation>,
    /// Calendar time of the data cutoff.
    pub cutoff: f64,
    pub events_observed: u32,
    /// Fewer events than requested ever occur in this replicate; the
    /// analysis ran at maximal follow-up instead.
    pub shortfall: bool,
}

/// Empirical power with its Monte Carlo error and summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerEstimate {
    pub power: f64,
    /// `sqrt(p (1-p) / analyzable)`
    pub mc_se: f64,
    pub replicates: u32,
    /// Replicates contributing a defined logrank statistic.
    pub analyzable: u32,
    pub shortfall_replicates: u32,
    /// Mean calendar cutoff time across replicates.
    pub mean_duration: f64,
    pub mean_events_experimental: f64,
    pub mean_events_control: f64,
}

/// Draw the latent patient histories for one replicate.
///
/// Arm assignment is deterministic by exact counts: the first `n_e`
/// patient indices are experimental.
pub fn latent_patients(design: &TrialDesign, seed: u64, replicate: u64) -> Vec<PatientRecord> {
    let n = design.n as u64;
    let n_e = design.n_experimental() as u64;
    let r = design.accrual_duration();
    let experimental = design.experimental_survival();
    let control = &design.control_survival;
    let dropout = &design.dropout;
    (0..n)
        .map(|i| {
            let arm = if i < n_e { Arm::Experimental } else { Arm::Control };
            let survival = if i < n_e { &experimental } else { control };
            PatientRecord {
                arm,
                entry: r * uniform(seed, replicate, i, Purpose::Entry),
                latent_event: survival.quantile(uniform(seed, replicate, i, Purpose::Event)),
                latent_dropout: dropout.quantile(uniform(seed, replicate, i, Purpose::Dropout)),
            }
        })
        .collect()
}

/// Apply the d-th-event cutoff to latent histories.
pub fn dataset_at_events(patients: &[PatientRecord], d: u32) -> TrialDataset {
    let mut event_times: Vec<f64> = patients
        .iter()
        .filter(|p| p.latent_event < p.latent_dropout)
        .map(|p| p.entry + p.latent_event)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (cutoff, shortfall) = if (d as usize) <= event_times.len() && d >= 1 {
        (event_times[d as usize - 1], false)
    } else {
        // not enough events ever occur: analyze at maximal follow-up
        let max_follow = patients
            .iter()
            .map(|p| p.entry + p.latent_event.min(p.latent_dropout))
            .fold(0.0f64, f64::max);
        (max_follow, true)
    };
    let mut observations = Vec::with_capacity(patients.len());
    let mut events_observed = 0u32;
    for p in patients {
        if p.entry >= cutoff {
            continue; // not yet enrolled at cutoff
        }
        let admin = cutoff - p.entry;
        // compare in calendar time so the event defining the cutoff is not
        // lost to rounding in `cutoff - entry`
        let event = p.latent_event < p.latent_dropout && p.entry + p.latent_event <= cutoff;
        let time = if event {
            p.latent_event
        } else {
            p.latent_dropout.min(admin)
        };
        if event {
            events_observed += 1;
        }
        observations.push(Observation { arm: p.arm, entry: p.entry, time, event });
    }
    TrialDataset { observations, cutoff, events_observed, shortfall }
}

/// Simulate one replicate of an event-driven trial.
pub fn simulate_trial(design: &TrialDesign, d: u32, seed: u64, replicate: u64) -> TrialDataset {
    dataset_at_events(&latent_patients(design, seed, replicate), d)
}

/// Logrank Z statistic with hypergeometric handling of tied event times.
///
/// Negative values favor the experimental arm when its hazard is lower.
pub fn logrank_statistic(dataset: &TrialDataset) -> Result<f64, SimError> {
    let mut obs: Vec<&Observation> = dataset.observations.iter().collect();
    if !obs.iter().any(|o| o.event) {
        return Err(SimError::NoEvents);
    }
    obs.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());
    let total = obs.len();
    let total_exp = obs.iter().filter(|o| o.arm == Arm::Experimental).count();

    let mut numer = 0.0; // sum of O - E for the experimental arm
    let mut var = 0.0;
    let mut at_risk = total as f64;
    let mut at_risk_exp = total_exp as f64;
    let mut i = 0;
    while i < total {
        let t = obs[i].time;
        let mut tied_events = 0.0;
        let mut tied_events_exp = 0.0;
        let mut removed = 0.0;
        let mut removed_exp = 0.0;
        while i < total && obs[i].time == t {
            removed += 1.0;
            if obs[i].arm == Arm::Experimental {
                removed_exp += 1.0;
            }
            if obs[i].event {
                tied_events += 1.0;
                if obs[i].arm == Arm::Experimental {
                    tied_events_exp += 1.0;
                }
            }
            i += 1;
        }
        if tied_events > 0.0 {
            let p = at_risk_exp / at_risk;
            numer += tied_events_exp - tied_events * p;
            if at_risk > 1.0 {
                var += tied_events * p * (1.0 - p) * (at_risk - tied_events)
                    / (at_risk - 1.0);
            }
        }
        at_risk -= removed;
        at_risk_exp -= removed_exp;
    }
    if var <= 0.0 {
        return Err(SimError::ZeroVariance);
    }
    Ok(numer / var.sqrt())
}

/// One replicate's contribution to the power estimate.
#[derive(Debug, Clone, Copy)]
struct ReplicateOutcome {
    rejected: Option<bool>, // None when the statistic is undefined
    duration: f64,
    events_experimental: u32,
    events_control: u32,
    shortfall: bool,
}

fn run_replicate(
    design: &TrialDesign,
    d: u32,
    z_crit: f64,
    direction: f64,
    seed: u64,
    replicate: u64,
) -> ReplicateOutcome {
    let dataset = simulate_trial(design, d, seed, replicate);
    let rejected = logrank_statistic(&dataset)
        .ok()
        .map(|z| direction * z >= z_crit);
    let events_experimental = dataset
        .observations
        .iter()
        .filter(|o| o.event && o.arm == Arm::Experimental)
        .count() as u32;
    ReplicateOutcome {
        rejected,
        duration: dataset.cutoff,
        events_experimental,
        events_control: dataset.events_observed - events_experimental,
        shortfall: dataset.shortfall,
    }
}

/// Rejection direction: the tail credited as a win for the alternative.
fn rejection_direction(design: &TrialDesign) -> f64 {
    if design.theta() > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Estimate power by simulation, with directional credit at one-sided
/// `alpha` (equivalently two-sided `2 alpha`).
pub fn empirical_power(
    design: &TrialDesign,
    d: u32,
    alpha_one_sided: f64,
    replicates: u32,
    seed: u64,
) -> Result<PowerEstimate, SimError> {
    if replicates == 0 {
        return Err(SimError::InvalidArgument("need at least one replicate".into()));
    }
    if !(alpha_one_sided > 0.0 && alpha_one_sided < 0.5) {
        return Err(SimError::InvalidArgument(format!(
            "one-sided alpha must lie in (0, 0.5), got {alpha_one_sided}"
        )));
    }
    let z_crit = normal_quantile(1.0 - alpha_one_sided)?;
    let direction = rejection_direction(design);
    let outcomes: Vec<ReplicateOutcome> = (0..replicates as u64)
        .into_par_iter()
        .map(|rep| run_replicate(design, d, z_crit, direction, seed, rep))
        .collect();
    // sequential aggregation keeps sums independent of thread scheduling
    let mut rejections = 0u32;
    let mut analyzable = 0u32;
    let mut shortfalls = 0u32;
    let mut sum_duration = 0.0;
    let mut sum_ee = 0.0;
    let mut sum_ec = 0.0;
    for o in &outcomes {
        if let Some(r) = o.rejected {
            analyzable += 1;
            if r {
                rejections += 1;
            }
        }
        if o.shortfall {
            shortfalls += 1;
        }
        sum_duration += o.duration;
        sum_ee += o.events_experimental as f64;
        sum_ec += o.events_control as f64;
    }
    if analyzable == 0 {
        return Err(SimError::ZeroVariance);
    }
    let p = rejections as f64 / analyzable as f64;
    Ok(PowerEstimate {
        power: p,
        mc_se: (p * (1.0 - p) / analyzable as f64).sqrt(),
        replicates,
        analyzable,
        shortfall_replicates: shortfalls,
        mean_duration: sum_duration / replicates as f64,
        mean_events_experimental: sum_ee / replicates as f64,
        mean_events_control: sum_ec / replicates as f64,
    })
}

/// Smallest event target whose estimated power reaches `target_power`.
///
/// Integer bisection over `d` with common random numbers: every candidate
/// reuses the same latent patient draws, only the cutoff moves, so the
/// estimated power curve is monotone across candidates.
pub fn calibrate_events(
    design: &TrialDesign,
    target_power: f64,
    alpha_one_sided: f64,
    replicates: u32,
    seed: u64,
) -> Result<u32, SimError> {
    if !(target_power > alpha_one_sided && target_power < 1.0) {
        return Err(SimError::InvalidArgument(format!(
            "target power must lie in (alpha, 1), got {target_power}"
        )));
    }
    let max_expected = design.max_expected_events();
    let hi_cap = (max_expected * 0.995).floor().max(1.0) as u32;
    let power_at = |d: u32| -> Result<f64, SimError> {
        Ok(empirical_power(design, d, alpha_one_sided, replicates, seed)?.power)
    };
    let top = power_at(hi_cap)?;
    if top < target_power {
        return Err(SimError::Unreachable {
            target: target_power,
            achieved: top,
            max_events: hi_cap,
        });
    }
    let mut lo = 1u32;
    let mut hi = hi_cap;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if power_at(mid)? >= target_power {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Dump one replicate's analyzed dataset as CSV for external validation.
pub fn write_dataset_csv<W: std::io::Write>(
    dataset: &TrialDataset,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "arm,entry,time,event,cutoff")?;
    for o in &dataset.observations {
        let arm = match o.arm {
            Arm::Experimental => "experimental",
            Arm::Control => "control",
        };
        writeln!(
            w,
            "{arm},{},{},{},{}",
            crate::report::sig6(o.entry),
            crate::report::sig6(o.time),
            u8::from(o.event),
            crate::report::sig6(dataset.cutoff)
        )?;
    }
    Ok(())
}

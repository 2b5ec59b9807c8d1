//! Large-sample approximations of the logrank statistic mean, power,
//! required-event and optimal-allocation solvers, the piecewise-exponential
//! MLE fit, and the baseline-imbalance calculator.

use crate::design::TrialDesign;
use crate::events::{
    expected_events, expected_events_window, trial_duration, EventError,
};
use crate::num::{find_root, normal_cdf, normal_quantile, real, NumError, Real};
use crate::sim::{Observation, TrialDataset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(
        "allocation bracket failure: balance {balance_lo:.6} at phi={phi_lo}, \
         {balance_hi:.6} at phi={phi_hi}"
    )]
    BracketFailure { phi_lo: f64, phi_hi: f64, balance_lo: f64, balance_hi: f64 },
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// The power approximation being used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxMethod {
    Schoenfeld,
    Freedman,
    Rubinstein,
    #[serde(rename = "piecewise-mle")]
    PiecewiseMle,
    Empirical,
}

impl std::fmt::Display for ApproxMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ApproxMethod::Schoenfeld => "schoenfeld",
            ApproxMethod::Freedman => "freedman",
            ApproxMethod::Rubinstein => "rubinstein",
            ApproxMethod::PiecewiseMle => "piecewise-mle",
            ApproxMethod::Empirical => "empirical",
        };
        f.write_str(s)
    }
}

/// Mean of the asymptotically unit-variance normal for the logrank statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct MuValue<F> {
    pub mu: F,
    pub method: ApproxMethod,
    /// Per-interval `(experimental, control)` event counts, when the
    /// piecewise form was used.
    pub components: Option<Vec<(F, F)>>,
}

/// `mu = theta / (1 + phi) * sqrt(d * phi)`.
pub fn mu_schoenfeld<F: Real>(theta: F, d: F, phi: F) -> Result<MuValue<F>, PowerError> {
    check_positive(d, "d")?;
    check_positive(phi, "phi")?;
    Ok(MuValue {
        mu: theta / (F::one() + phi) * (d * phi).sqrt(),
        method: ApproxMethod::Schoenfeld,
        components: None,
    })
}

/// `mu = (e^theta - 1) / (1 + e^theta phi) * sqrt(d * phi)`.
pub fn mu_freedman<F: Real>(theta: F, d: F, phi: F) -> Result<MuValue<F>, PowerError> {
    check_positive(d, "d")?;
    check_positive(phi, "phi")?;
    let psi = theta.exp();
    Ok(MuValue {
        mu: (psi - F::one()) / (F::one() + psi * phi) * (d * phi).sqrt(),
        method: ApproxMethod::Freedman,
        components: None,
    })
}

/// `mu = theta * (1/E_e + 1/E_c)^{-1/2}` with expected per-arm event counts.
pub fn mu_rubinstein<F: Real>(
    theta: F,
    expected_e: F,
    expected_c: F,
) -> Result<MuValue<F>, PowerError> {
    check_positive(expected_e, "expected experimental events")?;
    check_positive(expected_c, "expected control events")?;
    Ok(MuValue {
        mu: theta / (expected_e.recip() + expected_c.recip()).sqrt(),
        method: ApproxMethod::Rubinstein,
        components: None,
    })
}

/// `mu = theta * (sum_j (1/D_{e,j} + 1/D_{c,j})^{-1})^{1/2}`.
///
/// Intervals where either arm has zero events contribute no information;
/// with one interval this is the Rubinstein form on observed counts.
pub fn mu_piecewise<F: Real>(
    theta: F,
    d_e_by_interval: &[F],
    d_c_by_interval: &[F],
) -> Result<MuValue<F>, PowerError> {
    if d_e_by_interval.len() != d_c_by_interval.len() {
        return Err(PowerError::InvalidArgument(format!(
            "interval count mismatch: {} vs {}",
            d_e_by_interval.len(),
            d_c_by_interval.len()
        )));
    }
    let mut info = F::zero();
    let mut any = false;
    let mut components = Vec::with_capacity(d_e_by_interval.len());
    for (&de, &dc) in d_e_by_interval.iter().zip(d_c_by_interval) {
        if de < F::zero() || dc < F::zero() {
            return Err(PowerError::InvalidArgument(
                "event counts must be nonnegative".into(),
            ));
        }
        if de > F::zero() && dc > F::zero() {
            info = info + (de.recip() + dc.recip()).recip();
            any = true;
        }
        components.push((de, dc));
    }
    if !any {
        return Err(PowerError::InvalidArgument(
            "no interval with events in both arms".into(),
        ));
    }
    Ok(MuValue {
        mu: theta * info.sqrt(),
        method: ApproxMethod::PiecewiseMle,
        components: Some(components),
    })
}

/// One-sided power `Phi(|mu| - z_{1-alpha})`.
pub fn power_from_mu<F: Real>(mu: &MuValue<F>, alpha_one_sided: F) -> Result<F, PowerError> {
    let half = real::<F>(0.5);
    if !(alpha_one_sided > F::zero() && alpha_one_sided < half) {
        return Err(PowerError::InvalidArgument(format!(
            "one-sided alpha must lie in (0, 0.5), got {:?}",
            alpha_one_sided.to_f64()
        )));
    }
    let z = normal_quantile(F::one() - alpha_one_sided)?;
    Ok(normal_cdf(mu.mu.abs() - z))
}

fn check_positive<F: Real>(x: F, name: &str) -> Result<(), PowerError> {
    if x > F::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(PowerError::InvalidArgument(format!(
            "{name} must be positive and finite, got {:?}",
            x.to_f64()
        )))
    }
}

/// Rubinstein ingredients for a concrete design and event target: trial
/// duration and the expected per-arm event split at that time.
pub fn event_split_at_duration(
    design: &TrialDesign,
    d: f64,
) -> Result<(f64, f64, f64), PowerError> {
    let arms = design.arm_inputs()?;
    let t_d = trial_duration(&arms, d)?;
    let e_e = expected_events(&arms[0], t_d)?;
    let e_c = expected_events(&arms[1], t_d)?;
    Ok((t_d, e_e, e_c))
}

/// Expected per-interval event counts `(experimental, control)` at the
/// event-driven cutoff, intervals taken from the control survival cuts.
pub fn expected_interval_counts(
    design: &TrialDesign,
    d: f64,
) -> Result<Vec<(f64, f64)>, PowerError> {
    let arms = design.arm_inputs()?;
    let t_d = trial_duration(&arms, d)?;
    let cuts = design.control_survival.cuts().to_vec();
    let mut edges = vec![0.0];
    edges.extend_from_slice(&cuts);
    edges.push(f64::INFINITY);
    let mut out = Vec::with_capacity(edges.len() - 1);
    for w in edges.windows(2) {
        let e = expected_events_window(&arms[0], t_d, w[0], w[1])?;
        let c = expected_events_window(&arms[1], t_d, w[0], w[1])?;
        out.push((e, c));
    }
    Ok(out)
}

/// The analytic mean of the logrank statistic for a design under `method`.
pub fn mu_for_design(
    method: ApproxMethod,
    design: &TrialDesign,
    d: u32,
) -> Result<MuValue<f64>, PowerError> {
    let theta = design.theta();
    let df = d as f64;
    match method {
        ApproxMethod::Schoenfeld => mu_schoenfeld(theta, df, design.phi),
        ApproxMethod::Freedman => mu_freedman(theta, df, design.phi),
        ApproxMethod::Rubinstein => {
            let (_, e_e, e_c) = event_split_at_duration(design, df)?;
            mu_rubinstein(theta, e_e, e_c)
        }
        ApproxMethod::PiecewiseMle => {
            let counts = expected_interval_counts(design, df)?;
            let (e, c): (Vec<f64>, Vec<f64>) = counts.into_iter().unzip();
            mu_piecewise(theta, &e, &c)
        }
        ApproxMethod::Empirical => Err(PowerError::InvalidArgument(
            "empirical power requires the simulator".into(),
        )),
    }
}

/// Analytic power of a design at event target `d`.
pub fn analytic_power(
    method: ApproxMethod,
    design: &TrialDesign,
    d: u32,
) -> Result<f64, PowerError> {
    let mu = mu_for_design(method, design, d)?;
    power_from_mu(&mu, design.alpha_one_sided)
}

/// Smallest integer event target reaching `target_power` under `method`.
pub fn required_events(
    method: ApproxMethod,
    design: &TrialDesign,
    target_power: f64,
) -> Result<u32, PowerError> {
    if !(target_power > design.alpha_one_sided && target_power < 1.0) {
        return Err(PowerError::InvalidArgument(format!(
            "target power must lie in (alpha, 1), got {target_power}"
        )));
    }
    let theta = design.theta();
    let phi = design.phi;
    let z = normal_quantile(1.0 - design.alpha_one_sided)?
        + normal_quantile(target_power)?;
    match method {
        ApproxMethod::Schoenfeld => {
            let d = z * z * (1.0 + phi).powi(2) / (phi * theta * theta);
            Ok(d.ceil() as u32)
        }
        ApproxMethod::Freedman => {
            let psi = theta.exp();
            let d = z * z * (1.0 + psi * phi).powi(2) / (phi * (psi - 1.0).powi(2));
            Ok(d.ceil() as u32)
        }
        ApproxMethod::Rubinstein | ApproxMethod::PiecewiseMle => {
            // Power is monotone in d; walk from the Schoenfeld seed, which
            // may sit on either side of the answer.
            let seed = required_events(ApproxMethod::Schoenfeld, design, target_power)?;
            let max_events = design
                .arm_inputs()?
                .iter()
                .map(|a| a.asymptote())
                .sum::<f64>();
            let reachable = |d: u32| (d as f64) <= max_events * (1.0 - 1e-9);
            let power_at = |d: u32| analytic_power(method, design, d);
            let mut d = seed.max(2);
            if !reachable(d) {
                d = (max_events * (1.0 - 1e-9)).floor() as u32;
            }
            if power_at(d)? >= target_power {
                while d > 2 && power_at(d - 1)? >= target_power {
                    d -= 1;
                }
                Ok(d)
            } else {
                loop {
                    d += 1;
                    if !reachable(d) {
                        return Err(PowerError::Event(EventError::Unreachable {
                            requested: d as f64,
                            max: max_events,
                        }));
                    }
                    if power_at(d)? >= target_power {
                        return Ok(d);
                    }
                }
            }
        }
        ApproxMethod::Empirical => Err(PowerError::InvalidArgument(
            "empirical event calibration lives in the simulator".into(),
        )),
    }
}

/// A solved power-maximizing randomization ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSolution {
    pub phi_star: f64,
    /// `E(D_e)/E(D_c)` at the event-driven cutoff under `phi_star`.
    pub achieved_balance: f64,
    pub method: ApproxMethod,
}

/// Expected event ratio experimental/control at the `d`-event cutoff,
/// treating allocation as continuous in `phi`.
pub fn balance_at_phi(design: &TrialDesign, phi: f64, d: f64) -> Result<f64, PowerError> {
    let arms = design.arm_inputs_fractional(phi)?;
    let t_d = trial_duration(&arms, d)?;
    Ok(expected_events(&arms[0], t_d)? / expected_events(&arms[1], t_d)?)
}

/// The randomization ratio maximizing power under `method`.
pub fn optimal_rr(
    method: ApproxMethod,
    design: &TrialDesign,
    d: u32,
) -> Result<AllocationSolution, PowerError> {
    let df = d as f64;
    match method {
        ApproxMethod::Schoenfeld => Ok(AllocationSolution {
            phi_star: 1.0,
            achieved_balance: balance_at_phi(design, 1.0, df)?,
            method,
        }),
        ApproxMethod::Freedman => {
            let phi_star = (-design.theta()).exp();
            Ok(AllocationSolution {
                phi_star,
                achieved_balance: balance_at_phi(design, phi_star, df)?,
                method,
            })
        }
        ApproxMethod::Rubinstein => {
            let g = |phi: f64| balance_at_phi(design, phi, df).map(|b| b.ln());
            let (mut lo, mut hi) = (0.2, 5.0);
            let (mut g_lo, mut g_hi) = (g(lo)?, g(hi)?);
            // expand the default bracket if the balance does not change sign
            while g_lo > 0.0 && lo > 1e-3 {
                lo /= 2.0;
                g_lo = g(lo)?;
            }
            while g_hi < 0.0 && hi < 1e3 {
                hi *= 2.0;
                g_hi = g(hi)?;
            }
            if g_lo > 0.0 || g_hi < 0.0 {
                return Err(PowerError::BracketFailure {
                    phi_lo: lo,
                    phi_hi: hi,
                    balance_lo: g_lo.exp(),
                    balance_hi: g_hi.exp(),
                });
            }
            let phi_star = find_root(
                |phi| balance_at_phi(design, phi, df).map(|b| b.ln()).unwrap(),
                lo,
                hi,
                1e-13,
                1e-9,
            )?;
            Ok(AllocationSolution {
                phi_star,
                achieved_balance: balance_at_phi(design, phi_star, df)?,
                method,
            })
        }
        ApproxMethod::PiecewiseMle => {
            let phi_star = minimize_pe_mu(design, df)?;
            Ok(AllocationSolution {
                phi_star,
                achieved_balance: balance_at_phi(design, phi_star, df)?,
                method,
            })
        }
        ApproxMethod::Empirical => Err(PowerError::InvalidArgument(
            "empirical optimum requires a simulated power curve".into(),
        )),
    }
}

/// `|mu_PE|` at a continuous allocation `phi`, expected interval counts.
pub fn pe_mu_magnitude_at_phi(
    design: &TrialDesign,
    phi: f64,
    d: f64,
) -> Result<f64, PowerError> {
    let arms = design.arm_inputs_fractional(phi)?;
    let t_d = trial_duration(&arms, d)?;
    let mut edges = vec![0.0];
    edges.extend_from_slice(design.control_survival.cuts());
    edges.push(f64::INFINITY);
    let mut e = Vec::new();
    let mut c = Vec::new();
    for w in edges.windows(2) {
        e.push(expected_events_window(&arms[0], t_d, w[0], w[1])?);
        c.push(expected_events_window(&arms[1], t_d, w[0], w[1])?);
    }
    Ok(mu_piecewise(design.theta(), &e, &c)?.mu.abs())
}

/// Golden-section maximizer of `|mu_PE|` over the allocation ratio.
fn minimize_pe_mu(design: &TrialDesign, d: f64) -> Result<f64, PowerError> {
    let f = |phi: f64| pe_mu_magnitude_at_phi(design, phi, d);
    let (mut a, mut b) = (0.2, 5.0);
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > 1e-7 {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok((a + b) / 2.0)
}

/// Equivalent 1:1 sample size and baseline-difference variance factor for
/// an unequally allocated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineImbalance {
    /// `n_pi * pi (1 - pi) / 0.25`
    pub equivalent_n: f64,
    /// `1 / (pi (1 - pi) n_pi)`, the multiplier on sigma in the variance
    /// of the baseline mean difference.
    pub variance_factor: f64,
}

pub fn baseline_imbalance_equivalent_n(
    n_pi: f64,
    pi: f64,
) -> Result<BaselineImbalance, PowerError> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(PowerError::InvalidArgument(format!(
            "allocation fraction must lie in (0, 1), got {pi}"
        )));
    }
    if !(n_pi > 0.0) {
        return Err(PowerError::InvalidArgument(format!(
            "sample size must be positive, got {n_pi}"
        )));
    }
    Ok(BaselineImbalance {
        equivalent_n: n_pi * pi * (1.0 - pi) / 0.25,
        variance_factor: 1.0 / (pi * (1.0 - pi) * n_pi),
    })
}

/// Piecewise-exponential proportional-hazards MLE fit of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub psi_hat: f64,
    /// Per-interval control hazards `D_{0j} / R_{0j}`.
    pub lambda_hat: Vec<f64>,
    pub var_log_psi: f64,
    /// Events per interval, `[control, experimental]`.
    pub interval_events: [Vec<f64>; 2],
    /// Time at risk per interval, `[control, experimental]`.
    pub interval_exposure: [Vec<f64>; 2],
    /// Interval boundaries retained after dropping zero-exposure intervals.
    pub edges: Vec<f64>,
}

pub fn fit_piecewise_mle(dataset: &TrialDataset, knots: &[f64]) -> Result<MleFit, PowerError> {
    let mut edges = vec![0.0];
    for &k in knots {
        if k <= *edges.last().unwrap() {
            return Err(PowerError::InvalidArgument(
                "knots must be strictly increasing and positive".into(),
            ));
        }
        edges.push(k);
    }
    edges.push(f64::INFINITY);
    let j_total = edges.len() - 1;
    let mut events = [vec![0.0; j_total], vec![0.0; j_total]];
    let mut exposure = [vec![0.0; j_total], vec![0.0; j_total]];
    for obs in &dataset.observations {
        let i = obs.arm_index();
        for j in 0..j_total {
            let at_risk = (edges[j + 1].min(obs.time) - edges[j]).max(0.0);
            exposure[i][j] += at_risk;
            if obs.event && obs.time >= edges[j] && obs.time < edges[j + 1] {
                events[i][j] += 1.0;
            }
        }
    }
    // drop intervals nobody was at risk in
    let keep: Vec<usize> = (0..j_total)
        .filter(|&j| exposure[0][j] + exposure[1][j] > 0.0)
        .collect();
    let filter = |v: &Vec<f64>| keep.iter().map(|&j| v[j]).collect::<Vec<f64>>();
    let events = [filter(&events[0]), filter(&events[1])];
    let exposure = [filter(&exposure[0]), filter(&exposure[1])];
    let kept_edges: Vec<f64> = keep
        .iter()
        .map(|&j| edges[j])
        .chain(std::iter::once(edges[keep.last().map_or(0, |&j| j + 1)]))
        .collect();

    let d0: f64 = events[0].iter().sum();
    let d1: f64 = events[1].iter().sum();
    if d0 == 0.0 || d1 == 0.0 {
        return Err(PowerError::DegenerateFit(format!(
            "need events in both arms, got control {d0}, experimental {d1}"
        )));
    }
    let lambda_hat: Vec<f64> = events[0]
        .iter()
        .zip(&exposure[0])
        .map(|(&d, &r)| if r > 0.0 { d / r } else { 0.0 })
        .collect();
    let denom: f64 = lambda_hat
        .iter()
        .zip(&exposure[1])
        .map(|(&l, &r)| l * r)
        .sum();
    if denom == 0.0 {
        return Err(PowerError::DegenerateFit(
            "no experimental exposure in intervals with control events".into(),
        ));
    }
    let psi_hat = d1 / denom;
    let info: f64 = events[1]
        .iter()
        .zip(&events[0])
        .filter(|(&e, &c)| e > 0.0 && c > 0.0)
        .map(|(&e, &c)| 1.0 / (1.0 / e + 1.0 / c))
        .sum();
    if info == 0.0 {
        return Err(PowerError::DegenerateFit(
            "no interval carries information on the hazard ratio".into(),
        ));
    }
    Ok(MleFit {
        psi_hat,
        lambda_hat,
        var_log_psi: 1.0 / info,
        interval_events: events,
        interval_exposure: exposure,
        edges: kept_edges,
    })
}

/// Convenience: build a dataset view from raw observations for fitting.
pub fn dataset_from_observations(observations: Vec<Observation>) -> TrialDataset {
    let events_observed = observations.iter().filter(|o| o.event).count() as u32;
    let cutoff = observations
        .iter()
        .map(|o| o.time)
        .fold(0.0f64, f64::max);
    TrialDataset { observations, cutoff, events_observed, shortfall: false }
}

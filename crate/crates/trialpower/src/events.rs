//! Expected event-count curves per arm over calendar time, the
//! event-driven trial-duration solver, and the limiting event ratios.
//!
//! The calendar-time curve for one arm is
//! `E(D_a(t)) = n_a ∫ a(x) ∫ f(y) Lbar(y) dy dx` with uniform accrual
//! density `a`, event density `f`, and dropout survivor `Lbar`. With
//! exponential dropout the inner integral has a closed form per hazard
//! segment; the outer integral is exact for exponential survival and is
//! otherwise evaluated by adaptive quadrature.

use crate::models::{ModelError, PiecewiseExponentialModel};
use crate::num::{find_root, integrate, real, NumError, Real};
use thiserror::Error;

/// Absolute tolerance for the quadrature event curve, in events.
const QUAD_TOL: f64 = 1e-8;
/// Events-scale tolerance for the trial-duration solver.
const DURATION_TOL: f64 = 1e-7;

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("dropout model must be exponential (one interval), got {0} intervals")]
    DropoutNotExponential(usize),
    #[error("closed form requires exponential survival, got {0} intervals; use the quadrature form")]
    SurvivalNotExponential(usize),
    #[error("{requested} events unreachable: expected events converge to {max:.6}")]
    Unreachable { requested: f64, max: f64 },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Everything needed to evaluate one arm's expected event curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCurveInputs<F> {
    pub survival: PiecewiseExponentialModel<F>,
    pub dropout_hazard: F,
    pub accrual_duration: F,
    /// Patients in this arm. Fractional values are allowed so allocation
    /// solvers can treat the curve as continuous in the randomization ratio.
    pub n_arm: F,
}

impl<F: Real> EventCurveInputs<F> {
    pub fn new(
        survival: PiecewiseExponentialModel<F>,
        dropout: &PiecewiseExponentialModel<F>,
        accrual_duration: F,
        n_arm: F,
    ) -> Result<Self, EventError> {
        if dropout.num_intervals() != 1 {
            return Err(EventError::DropoutNotExponential(dropout.num_intervals()));
        }
        Ok(Self {
            survival,
            dropout_hazard: dropout.hazards()[0],
            accrual_duration,
            n_arm,
        })
    }

    /// P(event by follow-up time `s`, before dropping out): the inner
    /// integral `∫_0^s f(y) Lbar(y) dy`, exact per hazard segment.
    pub fn event_before_dropout_cdf(&self, s: F) -> F {
        if s <= F::zero() {
            return F::zero();
        }
        let eta = self.dropout_hazard;
        let mut total = F::zero();
        let mut cum = F::zero(); // survival cumulative hazard at segment start
        for (a, b, h) in self.survival.intervals() {
            if s <= a {
                break;
            }
            let end = if s < b { s } else { b };
            let c = h + eta;
            let span = end - a;
            let tail = if span.is_finite() {
                -(-(c * span)).exp_m1()
            } else {
                F::one()
            };
            total = total + h / c * (-cum - eta * a).exp() * tail;
            if b.is_finite() {
                cum = cum + h * (b - a);
            }
        }
        total
    }

    /// Probability a patient ever experiences an observed event.
    pub fn event_probability(&self) -> F {
        self.event_before_dropout_cdf(F::infinity())
    }

    /// Limit of the expected event count as calendar time grows.
    pub fn asymptote(&self) -> F {
        self.n_arm * self.event_probability()
    }
}

/// Closed-form expected events by calendar time `t` for exponential
/// survival, exponential dropout, and uniform accrual.
pub fn expected_events_closed_form<F: Real>(
    inputs: &EventCurveInputs<F>,
    t: F,
) -> Result<F, EventError> {
    if inputs.survival.num_intervals() != 1 {
        return Err(EventError::SurvivalNotExponential(
            inputs.survival.num_intervals(),
        ));
    }
    if !(t >= F::zero()) {
        return Err(EventError::NegativeTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    let lambda = inputs.survival.hazards()[0];
    let eta = inputs.dropout_hazard;
    let c = lambda + eta;
    let q = lambda / c;
    let r = inputs.accrual_duration;
    let n = inputs.n_arm;
    if t == F::zero() {
        return Ok(F::zero());
    }
    if r == F::zero() {
        // instantaneous accrual limit
        return Ok(n * q * -(-(c * t)).exp_m1());
    }
    if t <= r {
        Ok(n / r * q / c * (c * t + (-(c * t)).exp_m1()))
    } else {
        let ramp = -(-(c * r)).exp_m1() / (c * r);
        Ok(n * q * (F::one() - (-(c * (t - r))).exp() * ramp))
    }
}

/// Expected events by calendar time `t` whose follow-up time falls in
/// `[window_lo, window_hi)`, by adaptive quadrature over the accrual axis.
pub fn expected_events_window<F: Real>(
    inputs: &EventCurveInputs<F>,
    t: F,
    window_lo: F,
    window_hi: F,
) -> Result<F, EventError> {
    if !(t >= F::zero()) {
        return Err(EventError::NegativeTime(t.to_f64().unwrap_or(f64::NAN)));
    }
    let r = inputs.accrual_duration;
    let clip = |s: F, cap: F| if s < cap { s } else { cap };
    let g = |s: F| {
        inputs.event_before_dropout_cdf(clip(window_hi, s))
            - inputs.event_before_dropout_cdf(clip(window_lo, s))
    };
    if r == F::zero() {
        return Ok(inputs.n_arm * g(t));
    }
    // Entry at x contributes follow-up t - x; integrate over s = t - x.
    let s_lo = if t > r { t - r } else { F::zero() };
    if t <= s_lo {
        return Ok(F::zero());
    }
    // Split at integrand kinks: survival cuts and the window edges.
    let mut breaks: Vec<F> = vec![s_lo, t];
    for &c in inputs.survival.cuts() {
        if c > s_lo && c < t {
            breaks.push(c);
        }
    }
    for &w in &[window_lo, window_hi] {
        if w > s_lo && w < t && w.is_finite() {
            breaks.push(w);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = inputs.n_arm / r;
    let tol = real::<F>(QUAD_TOL) / scale / real::<F>(breaks.len() as f64);
    let mut total = F::zero();
    for pair in breaks.windows(2) {
        total = total + integrate(&g, pair[0], pair[1], tol);
    }
    Ok(scale * total)
}

/// Expected events by calendar time `t`, quadrature route. Agrees with
/// [`expected_events_closed_form`] on exponential inputs and extends to
/// piecewise survival.
pub fn expected_events_quadrature<F: Real>(
    inputs: &EventCurveInputs<F>,
    t: F,
) -> Result<F, EventError> {
    expected_events_window(inputs, t, F::zero(), F::infinity())
}

/// Expected events by calendar time `t`, using the exact form when the
/// survival model is exponential.
pub fn expected_events<F: Real>(inputs: &EventCurveInputs<F>, t: F) -> Result<F, EventError> {
    if inputs.survival.num_intervals() == 1 {
        expected_events_closed_form(inputs, t)
    } else {
        expected_events_quadrature(inputs, t)
    }
}

/// Earliest calendar time at which the summed expected event count over
/// all arms reaches `d`.
pub fn trial_duration<F: Real>(arms: &[EventCurveInputs<F>], d: F) -> Result<F, EventError> {
    let total = |t: F| {
        arms.iter()
            .map(|a| expected_events(a, t).expect("t >= 0 by construction"))
            .fold(F::zero(), |acc, v| acc + v)
    };
    if d <= F::zero() {
        return Ok(F::zero());
    }
    let max: F = arms.iter().map(|a| a.asymptote()).fold(F::zero(), |acc, v| acc + v);
    if d > max * (F::one() - real::<F>(1e-9)) {
        return Err(EventError::Unreachable {
            requested: d.to_f64().unwrap(),
            max: max.to_f64().unwrap(),
        });
    }
    let mut hi = arms
        .iter()
        .map(|a| a.accrual_duration)
        .fold(F::one(), |acc, v| if v > acc { v } else { acc });
    for _ in 0..200 {
        if total(hi) >= d {
            break;
        }
        hi = hi * real::<F>(2.0);
    }
    let t = find_root(
        |t| total(t) - d,
        F::zero(),
        hi,
        real::<F>(1e-12),
        real::<F>(DURATION_TOL),
    )?;
    Ok(t)
}

/// Ratio of expected events, experimental over control, in the short-trial
/// and long-trial limits: `(φ λ_e / λ_c, φ [λ_e/(λ_e+η)] / [λ_c/(λ_c+η)])`.
pub fn event_ratio_limits<F: Real>(lambda_e: F, lambda_c: F, eta: F, phi: F) -> (F, F) {
    let short = phi * lambda_e / lambda_c;
    let long = phi * (lambda_e / (lambda_e + eta)) / (lambda_c / (lambda_c + eta));
    (short, long)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PiecewiseExponentialModel;

    fn inputs(
        lambda: f64,
        eta: f64,
        r: f64,
        n: f64,
    ) -> EventCurveInputs<f64> {
        EventCurveInputs::new(
            PiecewiseExponentialModel::exponential(lambda).unwrap(),
            &PiecewiseExponentialModel::exponential(eta.max(1e-300)).unwrap(),
            r,
            n,
        )
        .unwrap()
    }

    fn cm017_control() -> EventCurveInputs<f64> {
        // 93 patients, control median 7.0 months, 5% dropout per 12 months,
        // accrual 186 patients at 22/month
        EventCurveInputs::new(
            PiecewiseExponentialModel::from_median(7.0).unwrap(),
            &PiecewiseExponentialModel::from_dropout_probability(0.05, 12.0).unwrap(),
            186.0 / 22.0,
            93.0,
        )
        .unwrap()
    }

    /// Independent oracle: brute-force composite-Simpson evaluation of the
    /// accrual/event double integral, sharing no code with the curve ops.
    fn double_integral_oracle(inp: &EventCurveInputs<f64>, t: f64) -> f64 {
        let r = inp.accrual_duration;
        let eta = inp.dropout_hazard;
        let outer_hi = r.min(t);
        let steps = 4000;
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
            let h = (b - a) / steps as f64;
            let mut sum = f(a) + f(b);
            for i in 1..steps {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                sum += w * f(a + i as f64 * h);
            }
            sum * h / 3.0
        };
        let inner = |x: f64| {
            let upper = t - x;
            if upper <= 0.0 {
                return 0.0;
            }
            simpson(
                &|y: f64| inp.survival.density(y) * (-eta * y).exp(),
                0.0,
                upper,
            )
        };
        inp.n_arm / r * simpson(&inner, 0.0, outer_hi)
    }

    #[test]
    fn zero_time_gives_zero_events() {
        let inp = cm017_control();
        assert_eq!(expected_events_closed_form(&inp, 0.0).unwrap(), 0.0);
        assert_eq!(expected_events_quadrature(&inp, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn no_dropout_everyone_events_eventually() {
        let inp = inputs(0.1, 0.0, 8.0, 120.0);
        let v = expected_events_closed_form(&inp, 1e6).unwrap();
        assert!((v - 120.0).abs() < 1e-6);
        assert!((inp.asymptote() - 120.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_matches_double_integral_oracle() {
        let inp = cm017_control();
        let t = 21.7;
        let oracle = double_integral_oracle(&inp, t);
        let v = expected_events_closed_form(&inp, t).unwrap();
        assert!(
            ((v - oracle) / oracle).abs() < 1e-6,
            "closed form {v} vs oracle {oracle}"
        );
    }

    #[test]
    fn quadrature_agrees_with_closed_form_on_exponential_inputs() {
        for &(lambda, eta, r, n) in &[
            (0.09902, 0.004274, 8.4545, 93.0),
            (0.3, 0.0, 2.0, 40.0),
            (0.02, 0.01, 30.0, 500.0),
        ] {
            let inp = inputs(lambda, eta, r, n);
            for &t in &[0.1, 1.0, 10.0, 100.0] {
                let cf = expected_events_closed_form(&inp, t).unwrap();
                let q = expected_events_quadrature(&inp, t).unwrap();
                let denom = cf.abs().max(1e-12);
                assert!(
                    ((cf - q) / denom).abs() < 1e-6,
                    "lambda={lambda} t={t}: {cf} vs {q}"
                );
            }
        }
    }

    #[test]
    fn closed_form_rejects_piecewise_survival() {
        let inp = EventCurveInputs::new(
            PiecewiseExponentialModel::new(vec![4.0], vec![0.1, 0.05]).unwrap(),
            &PiecewiseExponentialModel::exponential(0.001).unwrap(),
            8.0,
            100.0,
        )
        .unwrap();
        assert!(matches!(
            expected_events_closed_form(&inp, 5.0),
            Err(EventError::SurvivalNotExponential(2))
        ));
    }

    #[test]
    fn piecewise_dropout_rejected() {
        let e = EventCurveInputs::new(
            PiecewiseExponentialModel::exponential(0.1).unwrap(),
            &PiecewiseExponentialModel::new(vec![6.0], vec![0.01, 0.02]).unwrap(),
            8.0,
            100.0,
        );
        assert!(matches!(e, Err(EventError::DropoutNotExponential(2))));
    }

    #[test]
    fn long_follow_up_approaches_dropout_free_probability() {
        // t >> r with fast events: value tends to n * P(event before dropout)
        let inp = inputs(5.0, 0.01, 4.0, 80.0);
        let v = expected_events_quadrature(&inp, 1000.0).unwrap();
        assert!((v - inp.asymptote()).abs() < 1e-6);
    }

    #[test]
    fn two_segment_curve_matches_monte_carlo() {
        // control survival with a knot at 4 months, evaluated at t = 24
        let surv = PiecewiseExponentialModel::new(
            vec![4.0],
            vec![2.0f64.ln() / 12.0, 2.0f64.ln() / 18.0],
        )
        .unwrap();
        let dropout = PiecewiseExponentialModel::from_dropout_probability(0.01, 12.0).unwrap();
        let r = 8.0;
        let inp = EventCurveInputs::new(surv.clone(), &dropout, r, 1.0).unwrap();
        let t = 24.0;
        let expect = expected_events_quadrature(&inp, t).unwrap(); // per-patient probability
        let n = 1_000_000u64;
        let eta = dropout.hazards()[0];
        let mut hits = 0u64;
        for i in 0..n {
            let entry = r * crate::rng::uniform(5, 0, i, crate::rng::Purpose::Entry);
            let ev = surv.quantile(crate::rng::uniform(5, 0, i, crate::rng::Purpose::Event));
            let dr = -(crate::rng::uniform(5, 0, i, crate::rng::Purpose::Dropout)).ln() / eta;
            if ev < dr && entry + ev <= t {
                hits += 1;
            }
        }
        let p_hat = hits as f64 / n as f64;
        let se = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!(
            (p_hat - expect).abs() < 3.0 * se,
            "MC {p_hat} vs quadrature {expect} (se {se})"
        );
    }

    #[test]
    fn cm017_duration_near_reported_value() {
        let control = cm017_control();
        let experimental = EventCurveInputs::new(
            PiecewiseExponentialModel::from_median(11.4).unwrap(),
            &PiecewiseExponentialModel::from_dropout_probability(0.05, 12.0).unwrap(),
            186.0 / 22.0,
            93.0,
        )
        .unwrap();
        let arms = [experimental, control];
        let t = trial_duration(&arms, 133.0).unwrap();
        assert!((t - 21.7).abs() < 0.3, "t_d = {t}");
        // the solution actually balances the books
        let sum: f64 = arms
            .iter()
            .map(|a| expected_events(a, t).unwrap())
            .sum();
        assert!((sum - 133.0).abs() < 1e-6);
    }

    #[test]
    fn duration_edge_cases() {
        let arms = [inputs(0.1, 0.01, 8.0, 100.0)];
        assert_eq!(trial_duration(&arms, 0.0).unwrap(), 0.0);
        let max = arms[0].asymptote();
        assert!(matches!(
            trial_duration(&arms, max + 0.5),
            Err(EventError::Unreachable { .. })
        ));
    }

    #[test]
    fn ratio_limits_special_cases() {
        // no dropout: long-run limit is phi
        let (_, long) = event_ratio_limits(0.05f64, 0.1, 0.0, 1.7);
        assert!((long - 1.7).abs() < 1e-12);
        // phi = e^{-theta}: short-trial limit is 1
        let (lambda_e, lambda_c) = (0.06f64, 0.1f64);
        let phi = 1.0 / (lambda_e / lambda_c);
        let (short, _) = event_ratio_limits(lambda_e, lambda_c, 0.004, phi);
        assert!((short - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curve_ratio_converges_to_limits() {
        let (lambda_e, lambda_c, eta, phi) = (0.0608, 0.09902, 0.004274, 1.4);
        let n = 200.0;
        let pi = phi / (1.0 + phi);
        let r = 9.0;
        let e = inputs(lambda_e, eta, r, n * pi);
        let c = inputs(lambda_c, eta, r, n * (1.0 - pi));
        let (short, long) = event_ratio_limits(lambda_e, lambda_c, eta, phi);
        let ratio_at = |t: f64| {
            expected_events_closed_form(&e, t).unwrap()
                / expected_events_closed_form(&c, t).unwrap()
        };
        assert!(((ratio_at(1e-4) - short) / short).abs() < 1e-3);
        assert!(((ratio_at(1e4) - long) / long).abs() < 1e-3);
    }
}

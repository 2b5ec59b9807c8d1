//! Probability-model primitives: piecewise exponential survival/dropout,
//! uniform accrual, and the two-arm labelling.
//!
//! All times are in months. Evaluation is pure; sampling takes an explicit
//! uniform draw (or an `rand::Rng`), never shared state.

use crate::num::{real, Real};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("hazards must be strictly positive and finite, got {0}")]
    InvalidHazard(f64),
    #[error("cut times must be strictly increasing and positive")]
    InvalidCuts,
    #[error("need one hazard per interval: {hazards} hazards for {cuts} cuts")]
    LengthMismatch { hazards: usize, cuts: usize },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("allocation fraction must lie in (0, 1), got {0}")]
    InvalidAllocation(f64),
    #[error("accrual model requires {0} > 0")]
    InvalidAccrual(&'static str),
}

/// Treatment arm label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Experimental,
    Control,
}

/// Piecewise exponential time-to-event distribution.
///
/// Interval `j` runs from `cuts[j-1]` (0 for the first) to `cuts[j]` with
/// constant hazard `hazards[j]`; the last interval extends to infinity.
/// With no cuts this is the plain exponential distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseExponentialModel<F> {
    cuts: Vec<F>,
    hazards: Vec<F>,
}

/// Pointwise evaluation of a survival model at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint<F> {
    pub hazard: F,
    pub cumulative_hazard: F,
    pub survivor: F,
    pub density: F,
}

impl<F: Real> PiecewiseExponentialModel<F> {
    pub fn new(cuts: Vec<F>, hazards: Vec<F>) -> Result<Self, ModelError> {
        if hazards.len() != cuts.len() + 1 {
            return Err(ModelError::LengthMismatch {
                hazards: hazards.len(),
                cuts: cuts.len(),
            });
        }
        for &h in &hazards {
            if !(h > F::zero()) || !h.is_finite() {
                return Err(ModelError::InvalidHazard(h.to_f64().unwrap_or(f64::NAN)));
            }
        }
        let mut prev = F::zero();
        for &c in &cuts {
            if !(c > prev) || !c.is_finite() {
                return Err(ModelError::InvalidCuts);
            }
            prev = c;
        }
        Ok(Self { cuts, hazards })
    }

    /// Exponential distribution with constant `rate`.
    pub fn exponential(rate: F) -> Result<Self, ModelError> {
        Self::new(Vec::new(), vec![rate])
    }

    /// Exponential distribution with the given median.
    pub fn from_median(median: F) -> Result<Self, ModelError> {
        if !(median > F::zero()) {
            return Err(ModelError::InvalidHazard(median.to_f64().unwrap_or(f64::NAN)));
        }
        Self::exponential(real::<F>(std::f64::consts::LN_2) / median)
    }

    /// Exponential dropout with probability `p` of dropping out every
    /// `period` months: hazard `-ln(1-p) / period`, so the survivor at
    /// `period` is exactly `1 - p`.
    pub fn from_dropout_probability(p: F, period: F) -> Result<Self, ModelError> {
        if !(p > F::zero() && p < F::one()) {
            return Err(ModelError::InvalidProbability(p.to_f64().unwrap_or(f64::NAN)));
        }
        if !(period > F::zero()) {
            return Err(ModelError::InvalidCuts);
        }
        Self::exponential(-(F::one() - p).ln() / period)
    }

    /// Same cut structure with every hazard multiplied by `ratio`
    /// (proportional hazards).
    pub fn scaled(&self, ratio: F) -> Result<Self, ModelError> {
        Self::new(
            self.cuts.clone(),
            self.hazards.iter().map(|&h| h * ratio).collect(),
        )
    }

    pub fn num_intervals(&self) -> usize {
        self.hazards.len()
    }

    pub fn cuts(&self) -> &[F] {
        &self.cuts
    }

    pub fn hazards(&self) -> &[F] {
        &self.hazards
    }

    /// Interval boundaries including the implicit 0 and the open tail.
    /// Returns `(start_j, end_j)` pairs with `end` of the last = +inf.
    pub fn intervals(&self) -> impl Iterator<Item = (F, F, F)> + '_ {
        let starts = std::iter::once(F::zero()).chain(self.cuts.iter().copied());
        let ends = self
            .cuts
            .iter()
            .copied()
            .chain(std::iter::once(F::infinity()));
        starts
            .zip(ends)
            .zip(self.hazards.iter().copied())
            .map(|((a, b), h)| (a, b, h))
    }

    /// Hazard at `t` (right-continuous). `t` must be >= 0.
    pub fn hazard(&self, t: F) -> F {
        debug_assert!(t >= F::zero());
        let mut idx = 0;
        for (j, &c) in self.cuts.iter().enumerate() {
            if t >= c {
                idx = j + 1;
            } else {
                break;
            }
        }
        self.hazards[idx]
    }

    /// Cumulative hazard at `t`, piecewise linear and continuous. `t >= 0`.
    pub fn cumulative_hazard(&self, t: F) -> F {
        debug_assert!(t >= F::zero());
        let mut total = F::zero();
        for (a, b, h) in self.intervals() {
            if t <= a {
                break;
            }
            let end = if t < b { t } else { b };
            total = total + h * (end - a);
        }
        total
    }

    pub fn survivor(&self, t: F) -> F {
        (-self.cumulative_hazard(t)).exp()
    }

    pub fn density(&self, t: F) -> F {
        self.hazard(t) * self.survivor(t)
    }

    /// Hazard, cumulative hazard, survivor, and density at `t`.
    pub fn eval(&self, t: F) -> Result<SurvivalPoint<F>, ModelError> {
        if !(t >= F::zero()) {
            return Err(ModelError::NegativeTime(t.to_f64().unwrap_or(f64::NAN)));
        }
        let hazard = self.hazard(t);
        let cumulative_hazard = self.cumulative_hazard(t);
        let survivor = (-cumulative_hazard).exp();
        Ok(SurvivalPoint {
            hazard,
            cumulative_hazard,
            survivor,
            density: hazard * survivor,
        })
    }

    /// Time at which the cumulative hazard reaches `target` (inverse of Λ).
    pub fn inverse_cumulative_hazard(&self, target: F) -> F {
        debug_assert!(target >= F::zero());
        let mut acc = F::zero();
        for (a, b, h) in self.intervals() {
            let seg = if b.is_finite() { h * (b - a) } else { F::infinity() };
            if acc + seg >= target {
                return a + (target - acc) / h;
            }
            acc = acc + seg;
        }
        // Unreachable: the last interval has infinite mass.
        F::infinity()
    }

    /// Inverse-CDF transform of a uniform draw `u` in (0, 1).
    pub fn quantile(&self, u: F) -> F {
        debug_assert!(u > F::zero() && u < F::one());
        self.inverse_cumulative_hazard(-(F::one() - u).ln())
    }

    /// Sample an event time from an RNG via the inverse CDF.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> F {
        let u: f64 = rng.sample(rand::distributions::OpenClosed01);
        // OpenClosed01 excludes 0, so ln never sees it; u = 1 maps to t = 0.
        self.inverse_cumulative_hazard(real::<F>(-u.ln()))
    }
}

/// Uniform patient entry over `[0, duration]` at a constant rate.
///
/// `duration = n / rate`; a zero duration is the degenerate
/// instantaneous-accrual edge case (all patients enter at time 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformAccrualModel<F> {
    duration: F,
    n: u32,
}

impl<F: Real> UniformAccrualModel<F> {
    pub fn from_rate(rate: F, n: u32) -> Result<Self, ModelError> {
        if !(rate > F::zero()) {
            return Err(ModelError::InvalidAccrual("rate"));
        }
        if n == 0 {
            return Err(ModelError::InvalidAccrual("n"));
        }
        Ok(Self { duration: real::<F>(n as f64) / rate, n })
    }

    pub fn from_duration(duration: F, n: u32) -> Result<Self, ModelError> {
        if !(duration >= F::zero()) {
            return Err(ModelError::InvalidAccrual("duration"));
        }
        if n == 0 {
            return Err(ModelError::InvalidAccrual("n"));
        }
        Ok(Self { duration, n })
    }

    pub fn duration(&self) -> F {
        self.duration
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn rate(&self) -> F {
        real::<F>(self.n as f64) / self.duration
    }

    /// CDF of entry time: `A(t) = min(t / r, 1)`.
    pub fn cdf(&self, t: F) -> F {
        if t < F::zero() {
            F::zero()
        } else if t >= self.duration {
            F::one()
        } else {
            t / self.duration
        }
    }

    /// Entry time for a uniform draw `u` in (0, 1).
    pub fn quantile(&self, u: F) -> F {
        self.duration * u
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> F {
        let u: f64 = rng.sample(rand::distributions::Open01);
        self.quantile(real(u))
    }
}

/// One treatment arm: its survival model and allocation fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel<F> {
    pub label: Arm,
    pub survival: PiecewiseExponentialModel<F>,
    pub allocation_fraction: F,
}

impl<F: Real> ArmModel<F> {
    pub fn new(
        label: Arm,
        survival: PiecewiseExponentialModel<F>,
        allocation_fraction: F,
    ) -> Result<Self, ModelError> {
        if !(allocation_fraction > F::zero() && allocation_fraction < F::one()) {
            return Err(ModelError::InvalidAllocation(
                allocation_fraction.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self { label, survival, allocation_fraction })
    }
}

//! Power, allocation, and duration calculations for event-driven two-arm
//! survival trials under proportional hazards, with Monte Carlo simulation
//! and design comparison utilities.
//!
//! The analytic core (`num`, `models`, `events`, and the mean-value
//! approximations in `power`) is generic over the scalar type through the
//! [`num::Real`] trait; everything design- and simulation-facing works in
//! `f64`, and the aliases below fix the generic types at `f64` for ordinary
//! use.

pub mod config;
pub mod design;
pub mod events;
pub mod models;
pub mod num;
pub mod power;
pub mod report;
pub mod rng;
pub mod sim;

pub use config::{OutputFormat, ScenarioConfig};
pub use design::{
    build_grid_design, edge_case_accelerated, edge_case_increased_n,
    edge_case_prolonged, DesignComparison, EdgeCase, EventSizeMethod, TrialDesign,
};
pub use events::{event_ratio_limits, expected_events, trial_duration};
pub use models::Arm;
pub use power::{
    analytic_power, fit_piecewise_mle, optimal_rr, required_events, ApproxMethod,
};
pub use sim::{calibrate_events, empirical_power, logrank_statistic, simulate_trial};

/// Concrete `f64` aliases for the generic analytic core.
pub type PiecewiseExponential = models::PiecewiseExponentialModel<f64>;
pub type UniformAccrual = models::UniformAccrualModel<f64>;
pub type EventCurveInputs = events::EventCurveInputs<f64>;
pub type MuValue = power::MuValue<f64>;

//! End-to-end acceptance checks with pinned tolerances. Each test prints a
//! PASS line on success; a panic marks the criterion failed.

use trialpower::design::{
    build_grid_design, edge_case_accelerated, edge_case_increased_n,
    edge_case_prolonged, grid_accrual_rate, EventSizeMethod, SolvedValue,
    TrialDesign,
};
use trialpower::events::{expected_events, trial_duration, EventCurveInputs};
use trialpower::models::{Arm, PiecewiseExponentialModel};
use trialpower::power::{
    analytic_power, balance_at_phi, fit_piecewise_mle, mu_rubinstein, optimal_rr,
    required_events, ApproxMethod,
};
use trialpower::rng::{uniform, Purpose};
use trialpower::sim::{
    calibrate_events, dataset_at_events, empirical_power, latent_patients,
    logrank_statistic, simulate_trial, Observation,
};

const SEED: u64 = 132;

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
fn criterion_01_design_comparison_table() {
    let base = cm017();
    let replicates = 10_000;
    let alpha = base.alpha_one_sided;
    let method = EventSizeMethod::Empirical { replicates, seed: SEED };

    // calibrated event sizes at 1:1, 3:2, and 2:1
    let d_equal = calibrate_events(&base, 0.8, alpha, replicates, SEED).unwrap();
    let d_32 =
        calibrate_events(&base.with_phi(1.5), 0.8, alpha, replicates, SEED).unwrap();
    let d_21 =
        calibrate_events(&base.with_phi(2.0), 0.8, alpha, replicates, SEED).unwrap();
    assert!(d_equal.abs_diff(133) <= 2, "1:1 events {d_equal}");
    assert!(d_32.abs_diff(134) <= 2, "3:2 events {d_32}");
    assert!(d_21.abs_diff(142) <= 2, "2:1 events {d_21}");

    let sim_duration = |design: &TrialDesign, d: u32| {
        empirical_power(design, d, alpha, replicates, SEED)
            .unwrap()
            .mean_duration
    };
    let base_duration = sim_duration(&base, base.d);
    assert!((base_duration - 21.7).abs() <= 0.3, "base duration {base_duration}");

    let mut durations = vec![base_duration];
    for &phi in &[1.5, 2.0] {
        let pro = edge_case_prolonged(&base, phi, method).unwrap();
        durations.push(sim_duration(&pro.variant, pro.d_variant));
        let acc = edge_case_accelerated(&base, phi, method, base_duration).unwrap();
        if phi == 1.5 {
            let SolvedValue::AccrualRate(rate) = acc.solved_value else {
                panic!("expected an accrual-rate solution");
            };
            let months = acc.variant.n as f64 / rate;
            assert!((months - 6.1).abs() <= 0.2, "3:2 accrual {months}");
            durations.push(base_duration);
        } else {
            assert!(!acc.feasible, "2:1 acceleration should be infeasible");
            durations.push(sim_duration(&acc.variant, acc.d_variant));
        }
        let inc = edge_case_increased_n(&base, phi, method, base_duration).unwrap();
        let SolvedValue::SampleSize(n) = inc.solved_value else {
            panic!("expected a sample-size solution");
        };
        if phi == 1.5 {
            assert!(n.abs_diff(196) <= 2, "3:2 n {n}");
        } else {
            assert!(n.abs_diff(210) <= 3, "2:1 n {n}");
        }
        durations.push(base_duration);
    }
    let expected = [21.7, 23.0, 21.7, 21.7, 26.6, 22.2, 21.7];
    for (i, (&got, &want)) in durations.iter().zip(&expected).enumerate() {
        assert!((got - want).abs() <= 0.3, "duration row {i}: {got} vs {want}");
    }
    println!("ACCEPTANCE 01 design comparison table: PASS");
}

#[test]
fn criterion_02_required_events_integers() {
    let base = cm017();
    assert_eq!(
        required_events(ApproxMethod::Rubinstein, &base.with_phi(1.5), 0.8).unwrap(),
        134
    );
    assert_eq!(
        required_events(ApproxMethod::Rubinstein, &base.with_phi(2.0), 0.8).unwrap(),
        141
    );
    assert_eq!(
        required_events(ApproxMethod::Schoenfeld, &base.with_phi(1.5), 0.8).unwrap(),
        138
    );
    assert_eq!(
        required_events(ApproxMethod::Schoenfeld, &base.with_phi(2.0), 0.8).unwrap(),
        149
    );
    println!("ACCEPTANCE 02 required events cross-check: PASS");
}

#[test]
fn criterion_03_bias_grid_spot_checks() {
    let replicates = 10_000;
    let cells = [
        (0.5, 0.5, 1.0),
        (0.7, 0.6, 1.0),
        (0.7, 0.5, 1.5),
        (0.5, 0.5, 2.0),
        (0.6, 0.7, 2.0),
        (0.8, 0.8, 2.0),
    ];
    for &(hr, dn, phi) in &cells {
        let design = build_grid_design(hr, 12.0, dn, 0.025, 0.8, None)
            .unwrap()
            .with_phi(phi);
        let est =
            empirical_power(&design, design.d, 0.025, replicates, SEED).unwrap();
        let noise = 3.0 * est.mc_se;
        let s = analytic_power(ApproxMethod::Schoenfeld, &design, design.d).unwrap();
        let r = analytic_power(ApproxMethod::Rubinstein, &design, design.d).unwrap();
        let s_bias = s - est.power;
        let r_bias = r - est.power;
        assert!(
            r_bias.abs() <= 0.01 + noise,
            "Rubinstein bias {r_bias} at ({hr}, {dn}, {phi})"
        );
        if phi == 1.0 {
            assert!(
                s_bias.abs() <= noise,
                "Schoenfeld 1:1 bias {s_bias} at ({hr}, {dn})"
            );
        }
        if phi == 2.0 && hr == 0.5 && dn == 0.5 {
            assert!(
                s_bias <= -0.04 + noise,
                "Schoenfeld 2:1 bias {s_bias} not strongly negative"
            );
        }
    }
    println!("ACCEPTANCE 03 bias-grid spot checks: PASS");
}

#[test]
fn criterion_04_constant_schoenfeld_difference() {
    for &hr in &[0.5, 0.6, 0.7, 0.8] {
        for &dn in &[0.5, 0.6, 0.7, 0.8] {
            let design = build_grid_design(hr, 12.0, dn, 0.025, 0.8, None).unwrap();
            let p_equal =
                analytic_power(ApproxMethod::Schoenfeld, &design, design.d).unwrap();
            let p_21 = analytic_power(
                ApproxMethod::Schoenfeld,
                &design.with_phi(2.0),
                design.d,
            )
            .unwrap();
            let diff = p_21 - p_equal;
            assert!(
                (diff + 0.048).abs() <= 0.001,
                "difference {diff} at ({hr}, {dn})"
            );
        }
    }
    println!("ACCEPTANCE 04 constant Schoenfeld difference: PASS");
}

#[test]
fn criterion_05_analytic_optima() {
    let base = cm017();
    let s = optimal_rr(ApproxMethod::Schoenfeld, &base, base.d).unwrap();
    assert_eq!(s.phi_star, 1.0);

    for &hr in &[0.5, 2.0 / 3.0] {
        let design = base.with_hazard_ratio(hr);
        let f = optimal_rr(ApproxMethod::Freedman, &design, design.d).unwrap();
        assert!(
            (f.phi_star - 1.0 / hr).abs() < 1e-9,
            "Freedman phi* {} at HR {hr}",
            f.phi_star
        );
    }

    let r = optimal_rr(ApproxMethod::Rubinstein, &base, base.d).unwrap();
    assert!(
        (r.achieved_balance - 1.0).abs() < 1e-6,
        "balance {}",
        r.achieved_balance
    );
    // dense-grid oracle: |mu_R| from fractional allocation is maximized at
    // phi* to within one 0.01 step
    let d = base.d as f64;
    let mu_mag = |phi: f64| {
        let arms = base.arm_inputs_fractional(phi).unwrap();
        let t_d = trial_duration(&arms, d).unwrap();
        let e = expected_events(&arms[0], t_d).unwrap();
        let c = expected_events(&arms[1], t_d).unwrap();
        mu_rubinstein(base.theta(), e, c).unwrap().mu.abs()
    };
    let mut best_phi = 0.5;
    let mut best = f64::NEG_INFINITY;
    let mut phi = 0.5;
    while phi <= 3.0 + 1e-9 {
        let m = mu_mag(phi);
        if m > best {
            best = m;
            best_phi = phi;
        }
        phi += 0.01;
    }
    assert!(
        (best_phi - r.phi_star).abs() <= 0.01 + 1e-9,
        "grid argmax {best_phi} vs phi* {}",
        r.phi_star
    );
    println!("ACCEPTANCE 05 analytic optima: PASS");
}

#[test]
fn criterion_06_event_ratio_limits() {
    for draw in 0..20u64 {
        let u = |k| uniform(SEED, draw, k, Purpose::Event);
        let lambda_c = 0.02 + 0.18 * u(0);
        let hr = 0.3 + 0.6 * u(1);
        let lambda_e = lambda_c * hr;
        let eta = 1e-4 + 0.02 * u(2);
        let phi = 0.5 + 1.5 * u(3);
        let pi = phi / (1.0 + phi);
        let dropout = PiecewiseExponentialModel::new(vec![], vec![eta]).unwrap();
        let e = EventCurveInputs::new(
            PiecewiseExponentialModel::exponential(lambda_e).unwrap(),
            &dropout,
            9.0,
            200.0 * pi,
        )
        .unwrap();
        let c = EventCurveInputs::new(
            PiecewiseExponentialModel::exponential(lambda_c).unwrap(),
            &dropout,
            9.0,
            200.0 * (1.0 - pi),
        )
        .unwrap();
        let (short_limit, long_limit) =
            trialpower::event_ratio_limits(lambda_e, lambda_c, eta, phi);
        let short =
            expected_events(&e, 1e-4).unwrap() / expected_events(&c, 1e-4).unwrap();
        let long =
            expected_events(&e, 1e4).unwrap() / expected_events(&c, 1e4).unwrap();
        assert!(
            (short / short_limit - 1.0).abs() < 1e-3,
            "short-limit mismatch on draw {draw}: {short} vs {short_limit}"
        );
        assert!(
            (long / long_limit - 1.0).abs() < 1e-3,
            "long-limit mismatch on draw {draw}: {long} vs {long_limit}"
        );
        // the short-time limit is phi * HR
        assert!((short_limit - phi * hr).abs() < 1e-12);
    }
    println!("ACCEPTANCE 06 expected-event ratio limits: PASS");
}

#[test]
fn criterion_07_single_knot_balance_interval() {
    let lambda01 = std::f64::consts::LN_2 / 12.0;
    for &hr in &[0.5, 0.6, 0.7, 0.8] {
        for &dn in &[0.5, 0.6, 0.7, 0.8] {
            for &ratio in &[0.5, 2.0 / 3.0, 1.0, 1.5, 2.0] {
                let control = PiecewiseExponentialModel::new(
                    vec![4.0],
                    vec![lambda01, lambda01 * ratio],
                )
                .unwrap();
                let design = TrialDesign::builder()
                    .hazard_ratio(hr)
                    .control_survival(control)
                    .phi(1.0)
                    .dropout_probability(0.01, 12.0)
                    .accrual_rate(grid_accrual_rate(hr))
                    .event_patient_ratio(dn)
                    .alpha_one_sided(0.025)
                    .target_power(0.8)
                    .build()
                    .unwrap();
                let sol =
                    optimal_rr(ApproxMethod::PiecewiseMle, &design, design.d).unwrap();
                let balance =
                    balance_at_phi(&design, sol.phi_star, design.d as f64).unwrap();
                assert!(
                    balance > 0.97 && balance < 1.03,
                    "balance {balance} at (hr={hr}, dn={dn}, ratio={ratio})"
                );
            }
        }
    }
    println!("ACCEPTANCE 07 single-knot balance interval: PASS");
}

#[test]
fn criterion_08_mle_identities() {
    let design = cm017();
    let knots = [6.0, 12.0];
    for replicate in 0..20 {
        let ds = simulate_trial(&design, design.d, SEED, replicate);
        let fit = fit_piecewise_mle(&ds, &knots).unwrap();

        // recount events and exposure independently from the raw data
        let j_total = fit.edges.len() - 1;
        for j in 0..j_total {
            let (lo, hi) = (fit.edges[j], fit.edges[j + 1]);
            let mut d = [0.0f64; 2];
            let mut r = [0.0f64; 2];
            for o in &ds.observations {
                let i = o.arm_index();
                r[i] += (hi.min(o.time) - lo).max(0.0);
                if o.event && o.time >= lo && o.time < hi {
                    d[i] += 1.0;
                }
            }
            assert!((fit.interval_events[0][j] - d[0]).abs() < 1e-10);
            assert!((fit.interval_events[1][j] - d[1]).abs() < 1e-10);
            assert!((fit.interval_exposure[0][j] - r[0]).abs() < 1e-9);
            assert!((fit.interval_exposure[1][j] - r[1]).abs() < 1e-9);
            // lambda-hat is the control occurrence/exposure rate
            assert!(
                (fit.lambda_hat[j] - d[0] / r[0]).abs() < 1e-10,
                "lambda identity fails in interval {j}"
            );
        }
        // the psi-hat score equation: fitted experimental events match the
        // observed total
        let fitted_d1: f64 = (0..j_total)
            .map(|j| fit.psi_hat * fit.lambda_hat[j] * fit.interval_exposure[1][j])
            .sum();
        let d1: f64 = fit.interval_events[1].iter().sum();
        assert!(
            (fitted_d1 - d1).abs() < 1e-10,
            "psi score identity: {fitted_d1} vs {d1}"
        );
        // Wald variance recomputed from the event counts
        let info: f64 = (0..j_total)
            .filter(|&j| fit.interval_events[0][j] > 0.0 && fit.interval_events[1][j] > 0.0)
            .map(|j| {
                1.0 / (1.0 / fit.interval_events[1][j] + 1.0 / fit.interval_events[0][j])
            })
            .sum();
        assert_eq!(fit.var_log_psi, 1.0 / info);
    }

    // with a single interval the per-interval event identity is exact
    let ds = simulate_trial(&design, design.d, SEED, 99);
    let fit = fit_piecewise_mle(&ds, &[]).unwrap();
    assert!(
        (fit.psi_hat * fit.lambda_hat[0] * fit.interval_exposure[1][0]
            - fit.interval_events[1][0])
            .abs()
            < 1e-10
    );
    println!("ACCEPTANCE 08 piecewise MLE identities: PASS");
}

/// Brute-force logrank reference: recompute at-risk counts by scanning the
/// whole dataset at every distinct event time.
fn logrank_bruteforce(observations: &[Observation]) -> f64 {
    let mut event_times: Vec<f64> = observations
        .iter()
        .filter(|o| o.event)
        .map(|o| o.time)
        .collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();
    let mut numer = 0.0;
    let mut var = 0.0;
    for &t in &event_times {
        let at_risk = observations.iter().filter(|o| o.time >= t).count() as f64;
        let at_risk_exp = observations
            .iter()
            .filter(|o| o.time >= t && o.arm == Arm::Experimental)
            .count() as f64;
        let deaths = observations
            .iter()
            .filter(|o| o.event && o.time == t)
            .count() as f64;
        let deaths_exp = observations
            .iter()
            .filter(|o| o.event && o.time == t && o.arm == Arm::Experimental)
            .count() as f64;
        numer += deaths_exp - deaths * at_risk_exp / at_risk;
        if at_risk > 1.0 {
            var += deaths * (at_risk_exp / at_risk) * (1.0 - at_risk_exp / at_risk)
                * (at_risk - deaths)
                / (at_risk - 1.0);
        }
    }
    numer / var.sqrt()
}

#[test]
fn criterion_09_oracle_equivalence() {
    // logrank versus brute force on 100 random small datasets
    let mut tested = 0u32;
    let mut draw = 0u64;
    while tested < 100 {
        draw += 1;
        let u = |k| uniform(SEED.wrapping_add(1), draw, k, Purpose::Event);
        let n = 2 + (u(0) * 29.0) as usize;
        let mut observations = Vec::with_capacity(n);
        for i in 0..n {
            let b = |k: u64| uniform(SEED.wrapping_add(1), draw, 100 + i as u64 * 4 + k, Purpose::Event);
            // coarse grid of times so ties actually occur
            let time = (1.0 + (b(0) * 8.0).floor()) / 2.0;
            observations.push(Observation {
                arm: if b(1) < 0.5 { Arm::Control } else { Arm::Experimental },
                entry: 0.0,
                time,
                event: b(2) < 0.7,
            });
        }
        let ds = trialpower::power::dataset_from_observations(observations);
        let reference = logrank_bruteforce(&ds.observations);
        if !reference.is_finite() {
            continue; // degenerate draw (no events or zero variance)
        }
        let z = match logrank_statistic(&ds) {
            Ok(z) => z,
            Err(_) => continue,
        };
        assert!(
            (z - reference).abs() < 1e-12,
            "logrank mismatch on draw {draw}: {z} vs {reference}"
        );
        tested += 1;
    }

    // closed form versus quadrature on single-interval models
    for draw in 0..20u64 {
        let u = |k| uniform(SEED.wrapping_add(2), draw, k, Purpose::Event);
        let lambda = 0.01 + 0.3 * u(0);
        let eta = 0.02 * u(1);
        let r = 0.5 + 15.0 * u(2);
        let inputs = EventCurveInputs::new(
            PiecewiseExponentialModel::exponential(lambda).unwrap(),
            &PiecewiseExponentialModel::new(vec![], vec![eta.max(1e-9)]).unwrap(),
            r,
            100.0,
        )
        .unwrap();
        for &t in &[0.3, 2.0, r, 2.0 * r + 1.0, 80.0] {
            let closed = trialpower::events::expected_events_closed_form(&inputs, t)
                .unwrap();
            let quad = trialpower::events::expected_events_quadrature(&inputs, t)
                .unwrap();
            let scale = closed.abs().max(1e-12);
            assert!(
                ((closed - quad) / scale).abs() < 1e-6,
                "event curves disagree at t={t}: {closed} vs {quad}"
            );
        }
    }
    println!("ACCEPTANCE 09 oracle equivalence: PASS");
}

#[test]
fn criterion_10_null_calibration() {
    let design = cm017().with_hazard_ratio(1.0);
    let replicates = 10_000;
    let est =
        empirical_power(&design, design.d, 0.025, replicates, SEED).unwrap();
    let bound = 3.0 * (0.025f64 * 0.975 / replicates as f64).sqrt();
    assert!(
        (est.power - 0.025).abs() < bound,
        "null rejection rate {} outside {} of 0.025",
        est.power,
        bound
    );
    println!("ACCEPTANCE 10 null calibration: PASS");
}

#[test]
fn latent_histories_are_reused_across_event_sizes() {
    // common-random-number guarantee backing the calibration search
    let design = cm017();
    let a = latent_patients(&design, SEED, 7);
    let low = dataset_at_events(&a, 60);
    let high = dataset_at_events(&a, 133);
    assert!(low.cutoff < high.cutoff);
    let b = latent_patients(&design, SEED, 7);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.latent_event.to_bits(), y.latent_event.to_bits());
        assert_eq!(x.latent_dropout.to_bits(), y.latent_dropout.to_bits());
        assert_eq!(x.entry.to_bits(), y.entry.to_bits());
    }
}

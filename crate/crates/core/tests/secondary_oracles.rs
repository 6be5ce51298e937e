//! Oracle tests for secondary metrics: re-priced values on the unique
//! primary optimum, their signed shadow prices by slackness system, brute
//! force, and the unit-demand fallback, and the sampled secondary estimates.

mod common;

use common::*;
use matchsp_core::estimators::{rct_estimate_sample, ExperimentDraw, MatchSplit, SeedRecord};
use matchsp_core::lp::solve_matching;
use matchsp_core::secondary::{
    phi_secondary, secondary_duals, secondary_duals_bruteforce, secondary_duals_cs,
    secondary_estimates, SecondaryMetric,
};
use matchsp_core::{Error, Mat, MatchingInstance};

fn metric(inst: &MatchingInstance, rows: &[Vec<f64>]) -> SecondaryMetric {
    SecondaryMetric::new(inst, Mat::from_rows(rows).unwrap()).unwrap()
}

#[test]
fn contested_supply_prices_displacement() {
    // Two unit demands fight over one unit of supply; the primary optimum
    // serves type 0. One more type-0 unit changes nothing the metric sees,
    // but the first type-0 unit displaced a type-1 match worth 10.
    let inst = two_by_one();
    let w = metric(&inst, &[vec![5.0], vec![10.0]]);
    let d = [1.0, 1.0];
    let s = [1.0];

    assert_close(phi_secondary(&inst, &w, &d, &s).unwrap(), 5.0, 1e-12, "secondary value");

    assert!(matches!(secondary_duals_cs(&inst, &w, &d, &s), Err(Error::DegeneratePrimal)));

    let left = secondary_duals(&inst, &w, &d, &s).unwrap();
    assert_close(left.a_w[0], -5.0, 1e-12, "left price of type 0");
    assert_close(left.a_w[1], 0.0, 1e-12, "left price of type 1");

    let right = secondary_duals_bruteforce(&inst, &w, &d, &s).unwrap();
    assert_close(right.a_w[0], 0.0, 1e-12, "right price of type 0");
    assert_close(right.a_w[1], 0.0, 1e-12, "right price of type 1");
}

#[test]
fn degenerate_square_market_falls_back_to_left_differences() {
    let values = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 0.5]]).unwrap();
    let inst = MatchingInstance::from_dense(&values).unwrap();
    let w = metric(&inst, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let d = [1.0, 1.0];
    let s = [1.0, 1.0];

    assert!(matches!(secondary_duals_cs(&inst, &w, &d, &s), Err(Error::DegeneratePrimal)));
    let duals = secondary_duals(&inst, &w, &d, &s).unwrap();
    assert_close(duals.a_w[0], -1.0, 1e-12, "type 0 price");
    assert_close(duals.a_w[1], 0.0, 1e-12, "type 1 price");
}

#[test]
fn slackness_route_reproduces_primary_duals_when_weights_equal_values() {
    let inst = geometric_instance();
    let w = SecondaryMetric::new(&inst, inst.to_dense_values()).unwrap();
    let d = [3.5];
    let s = geometric_supply();
    let duals = secondary_duals_cs(&inst, &w, &d, &s).unwrap();
    assert_close(duals.a_w[0], 0.25, 1e-12, "self-priced dual");
}

#[test]
fn non_unique_primary_optimum_is_rejected() {
    let values = Mat::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
    let inst = MatchingInstance::from_dense(&values).unwrap();
    let w = metric(&inst, &[vec![3.0], vec![4.0]]);
    let d = [1.0, 1.0];
    let s = [1.0];
    assert!(matches!(phi_secondary(&inst, &w, &d, &s), Err(Error::NonUniquePrimal)));
    assert!(matches!(secondary_duals(&inst, &w, &d, &s), Err(Error::NonUniquePrimal)));
}

#[test]
fn weights_must_fit_and_be_finite() {
    let inst = two_by_one();
    assert!(matches!(
        SecondaryMetric::new(&inst, Mat::zeros(1, 1)),
        Err(Error::DimensionMismatch(_))
    ));
    let bad = Mat::from_rows(&[vec![1.0], vec![f64::INFINITY]]).unwrap();
    assert!(matches!(SecondaryMetric::new(&inst, bad), Err(Error::InvalidInput(_))));
}

#[test]
fn slackness_matches_bruteforce_on_random_markets() {
    let mut r = rng(4001);
    let mut successes = 0;
    let mut attempts = 0;
    while successes < 200 && attempts < 4000 {
        attempts += 1;
        let inst = random_instance(&mut r, 5, 8.0);
        let (n_d, n_s) = (inst.n_demand(), inst.n_supply());
        let d: Vec<f64> =
            random_integral_vector(&mut r, n_d, 3).iter().map(|&x| x + 1.0).collect();
        let s: Vec<f64> =
            random_integral_vector(&mut r, n_s, 3).iter().map(|&x| x + 1.0).collect();
        let w_rows: Vec<Vec<f64>> = (0..n_d).map(|_| random_vector(&mut r, n_s, -5.0, 5.0)).collect();
        let w = metric(&inst, &w_rows);

        let cs = match secondary_duals_cs(&inst, &w, &d, &s) {
            Ok(duals) => duals,
            Err(Error::DegeneratePrimal) | Err(Error::NonUniquePrimal) => continue,
            Err(e) => panic!("unexpected failure: {e}"),
        };
        let brute = match secondary_duals_bruteforce(&inst, &w, &d, &s) {
            Ok(duals) => duals,
            Err(Error::NonUniquePrimal) => continue,
            Err(e) => panic!("unexpected failure: {e}"),
        };
        successes += 1;

        let bound = 5.0 * (n_d + n_s) as f64;
        for i in 0..n_d {
            assert_close(
                cs.a_w[i],
                brute.a_w[i],
                1e-8 * brute.a_w[i].abs().max(1.0),
                &format!("attempt {attempts}: secondary dual {i}"),
            );
            assert!(cs.a_w[i].abs() <= bound, "attempt {attempts}: price {} breaks the telescoping bound", cs.a_w[i]);
        }

        // Self-priced weights must hand back the primary demand duals.
        let self_metric = SecondaryMetric::new(&inst, inst.to_dense_values()).unwrap();
        let self_duals = secondary_duals_cs(&inst, &self_metric, &d, &s).unwrap();
        let sol = solve_matching(&inst, &d, &s).unwrap();
        for i in 0..n_d {
            assert_close(
                self_duals.a_w[i],
                sol.a[i],
                1e-8 * sol.a[i].abs().max(1.0),
                &format!("attempt {attempts}: self-priced dual {i}"),
            );
        }
    }
    assert!(successes >= 200, "only {successes} clean markets in {attempts} attempts");
}

#[test]
fn secondary_value_is_locally_linear_in_demand() {
    let mut r = rng(4002);
    let mut successes = 0;
    let mut attempts = 0;
    while successes < 100 && attempts < 3000 {
        attempts += 1;
        let inst = random_instance(&mut r, 4, 8.0);
        let (n_d, n_s) = (inst.n_demand(), inst.n_supply());
        let d: Vec<f64> =
            random_integral_vector(&mut r, n_d, 3).iter().map(|&x| x + 1.0).collect();
        let s: Vec<f64> =
            random_integral_vector(&mut r, n_s, 3).iter().map(|&x| x + 1.0).collect();
        let w_rows: Vec<Vec<f64>> = (0..n_d).map(|_| random_vector(&mut r, n_s, -5.0, 5.0)).collect();
        let w = metric(&inst, &w_rows);

        let cs = match secondary_duals_cs(&inst, &w, &d, &s) {
            Ok(duals) => duals,
            Err(Error::DegeneratePrimal) | Err(Error::NonUniquePrimal) => continue,
            Err(e) => panic!("unexpected failure: {e}"),
        };
        let base = phi_secondary(&inst, &w, &d, &s).unwrap();
        let mut work = d.clone();
        let mut ok = true;
        for i in 0..n_d {
            work[i] = d[i] + 0.5;
            match phi_secondary(&inst, &w, &work, &s) {
                Ok(stepped) => assert_close(
                    stepped,
                    base + 0.5 * cs.a_w[i],
                    1e-8 * base.abs().max(1.0),
                    &format!("attempt {attempts}: half step on type {i}"),
                ),
                Err(Error::NonUniquePrimal) => ok = false,
                Err(e) => panic!("unexpected failure: {e}"),
            }
            work[i] = d[i];
        }
        if ok {
            successes += 1;
        }
    }
    assert!(successes >= 100, "only {successes} clean markets in {attempts} attempts");
}

#[test]
fn sampled_secondary_estimates_match_hand_arithmetic() {
    let inst = two_by_one();
    let w = metric(&inst, &[vec![5.0], vec![10.0]]);
    let draw = ExperimentDraw {
        tau: 1.0,
        rho: 0.5,
        d_control: vec![1.0, 1.0],
        d_treatment: vec![1.0, 2.0],
        supply: vec![1.0],
        seed: SeedRecord { root: 0, stream: 0 },
    };
    let x_total = Mat::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
    let split = MatchSplit {
        x_control: Mat::from_rows(&[vec![1.0], vec![0.0]]).unwrap(),
        x_treatment: Mat::from_rows(&[vec![0.0], vec![0.0]]).unwrap(),
    };
    split.check(&x_total, &draw).unwrap();

    // Control earned w = 5, treatment nothing: (0/0.5 - 5/0.5) / 1 = -10.
    // Prices (-5, 0) on count gaps (0, 1): -5 (1/0.5 - 1/0.5) + 0 = 0.
    let duals = secondary_duals(&inst, &w, &[1.0, 1.0], &[1.0]).unwrap();
    let (rct_w, sp_w) = secondary_estimates(&draw, &split, &duals, &inst, &w).unwrap();
    assert_close(rct_w, -10.0, 1e-12, "sampled secondary rct");
    assert_close(sp_w, 0.0, 1e-12, "sampled secondary sp");

    // With the primary values as weights the secondary rct is the primary one.
    let self_metric = SecondaryMetric::new(&inst, inst.to_dense_values()).unwrap();
    let (rct_self, _) = secondary_estimates(&draw, &split, &duals, &inst, &self_metric).unwrap();
    assert_close(
        rct_self,
        rct_estimate_sample(&draw, &split, &inst).unwrap(),
        1e-12,
        "self-priced sampled rct",
    );

    // Equal group counts at rho = 1/2 cancel the sp form exactly.
    let balanced = ExperimentDraw {
        d_control: vec![1.0, 2.0],
        d_treatment: vec![1.0, 2.0],
        ..draw
    };
    let (_, sp_balanced) =
        secondary_estimates(&balanced, &split, &duals, &inst, &w).unwrap();
    assert_eq!(sp_balanced, 0.0);
}

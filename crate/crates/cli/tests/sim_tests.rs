//! Tests for the Poisson matching-cycle simulation layer: draw determinism,
//! the hypergeometric match split, single replications, and the Monte Carlo
//! and supply-scaling drivers.

use matchsp::sim::{
    derive_root, draw_experiment, monte_carlo, poisson_count, run_cycle, simulate_gte,
    split_matches, stream_rng, supply_scaling_sweep, SimConfig,
};
use matchsp_core::estimators::{bias_report, ExperimentDraw, SeedRecord};
use matchsp_core::{MarketRates, Mat, MatchingInstance};

fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
    assert!(
        (actual - expected).abs() <= tol,
        "{what}: {actual} vs {expected} (tol {tol})"
    );
}

fn geometric_instance() -> MatchingInstance {
    let values = Mat::from_rows(&[vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]]).unwrap();
    MatchingInstance::from_dense(&values).unwrap()
}

fn geometric_rates() -> MarketRates {
    MarketRates::new(vec![1.5], vec![4.0], vec![1.0; 6]).unwrap()
}

fn sim_config(taus: Vec<f64>, reps: u32, seed: u64) -> SimConfig {
    SimConfig {
        taus,
        rho: 0.5,
        reps,
        seed,
        estimate_raw: true,
        estimate_rb: true,
        estimate_sp: true,
        truth_reps: 200,
    }
}

#[test]
fn derive_root_changes_with_root_and_tag() {
    let a = derive_root(7, 1);
    let b = derive_root(7, 2);
    let c = derive_root(8, 1);
    assert_ne!(a, b);
    assert_ne!(a, c);
    assert_eq!(a, derive_root(7, 1));
}

#[test]
fn draws_are_deterministic_per_seed_record() {
    let rates = geometric_rates();
    let seed = SeedRecord { root: 11, stream: 3 };
    let first = draw_experiment(&rates, 50.0, 0.5, seed);
    let second = draw_experiment(&rates, 50.0, 0.5, seed);
    assert_eq!(first, second);
    let other_stream = draw_experiment(&rates, 50.0, 0.5, SeedRecord { root: 11, stream: 4 });
    assert_ne!(first, other_stream);
    let other_root = draw_experiment(&rates, 50.0, 0.5, SeedRecord { root: 12, stream: 3 });
    assert_ne!(first, other_root);
}

#[test]
fn zero_rates_leave_the_stream_position_alone() {
    let mut with_zero = stream_rng(SeedRecord { root: 5, stream: 9 });
    let zero = poisson_count(&mut with_zero, 0.0);
    let after_zero = poisson_count(&mut with_zero, 2.0);
    assert_eq!(zero, 0.0);
    let mut without = stream_rng(SeedRecord { root: 5, stream: 9 });
    let direct = poisson_count(&mut without, 2.0);
    assert_eq!(after_zero, direct);
}

#[test]
fn draw_counts_are_nonnegative_integers() {
    let rates = geometric_rates();
    for stream in 0..20 {
        let draw = draw_experiment(&rates, 200.0, 0.5, SeedRecord { root: 3, stream });
        for &c in draw.d_control.iter().chain(&draw.d_treatment).chain(&draw.supply) {
            assert!(c >= 0.0 && c == c.round(), "count {c} not integral");
        }
    }
}

fn unit_draw(d_control: Vec<f64>, d_treatment: Vec<f64>, n_s: usize) -> ExperimentDraw {
    ExperimentDraw {
        tau: 1.0,
        rho: 0.5,
        d_control,
        d_treatment,
        supply: vec![1.0; n_s],
        seed: SeedRecord { root: 0, stream: 0 },
    }
}

#[test]
fn split_with_no_control_units_sends_everything_to_treatment() {
    let x = Mat::from_rows(&[vec![3.0, 2.0]]).unwrap();
    let draw = unit_draw(vec![0.0], vec![5.0], 2);
    let mut rng_a = stream_rng(SeedRecord { root: 1, stream: 0 });
    let mut rng_b = stream_rng(SeedRecord { root: 1, stream: 0 });
    let split = split_matches(&x, &draw, &mut rng_a).unwrap();
    assert_eq!(split.x_control.data(), &[0.0, 0.0]);
    assert_eq!(split.x_treatment.data(), &[3.0, 2.0]);
    // The deterministic branch consumes no randomness.
    let a: u64 = rand::RngExt::random(&mut rng_a);
    let b: u64 = rand::RngExt::random(&mut rng_b);
    assert_eq!(a, b);
}

#[test]
fn split_with_all_control_units_keeps_everything_in_control() {
    let x = Mat::from_rows(&[vec![4.0, 0.0, 1.0]]).unwrap();
    let draw = unit_draw(vec![5.0], vec![0.0], 3);
    let mut rng_a = stream_rng(SeedRecord { root: 2, stream: 0 });
    let mut rng_b = stream_rng(SeedRecord { root: 2, stream: 0 });
    let split = split_matches(&x, &draw, &mut rng_a).unwrap();
    assert_eq!(split.x_control.data(), &[4.0, 0.0, 1.0]);
    assert_eq!(split.x_treatment.data(), &[0.0, 0.0, 0.0]);
    let a: u64 = rand::RngExt::random(&mut rng_a);
    let b: u64 = rand::RngExt::random(&mut rng_b);
    assert_eq!(a, b);
}

#[test]
fn split_parts_always_recompose_the_matching() {
    let x = Mat::from_rows(&[vec![5.0, 7.0, 3.0], vec![2.0, 0.0, 4.0]]).unwrap();
    let draw = ExperimentDraw {
        tau: 1.0,
        rho: 0.5,
        d_control: vec![8.0, 3.0],
        d_treatment: vec![12.0, 6.0],
        supply: vec![9.0, 9.0, 9.0],
        seed: SeedRecord { root: 0, stream: 0 },
    };
    for stream in 0..50 {
        let mut rng = stream_rng(SeedRecord { root: 17, stream });
        let split = split_matches(&x, &draw, &mut rng).unwrap();
        split.check(&x, &draw).unwrap();
    }
}

#[test]
fn split_mean_matches_the_urn_expectation() {
    // Row with 20 arrivals, 8 control: each matched unit is a uniform draw
    // without replacement, so E[control part] = (8/20) * x.
    let x = Mat::from_rows(&[vec![5.0, 7.0, 3.0]]).unwrap();
    let draw = unit_draw(vec![8.0], vec![12.0], 3);
    let reps = 100_000u64;
    let mut sums = [0.0f64; 3];
    for stream in 0..reps {
        let mut rng = stream_rng(SeedRecord { root: 23, stream });
        let split = split_matches(&x, &draw, &mut rng).unwrap();
        for (sum, j) in sums.iter_mut().zip(0..3) {
            *sum += split.x_control.at(0, j);
        }
        for j in 0..3 {
            assert_eq!(
                split.x_control.at(0, j) + split.x_treatment.at(0, j),
                x.at(0, j)
            );
        }
    }
    let expected = [2.0, 2.8, 1.2];
    for j in 0..3 {
        // SE of the mean is below 0.004; 0.02 gives a wide margin.
        assert_close(sums[j] / reps as f64, expected[j], 0.02, "urn mean");
    }
}

#[test]
fn split_rejects_more_matches_than_arrivals() {
    let x = Mat::from_rows(&[vec![3.0, 3.0]]).unwrap();
    let draw = unit_draw(vec![2.0], vec![3.0], 2);
    let mut rng = stream_rng(SeedRecord { root: 1, stream: 1 });
    let err = split_matches(&x, &draw, &mut rng).unwrap_err();
    assert!(matches!(err, matchsp::Error::InconsistentCounts(_)), "got {err:?}");
}

#[test]
fn split_rejects_fractional_counts() {
    let x = Mat::from_rows(&[vec![1.5]]).unwrap();
    let draw = unit_draw(vec![2.0], vec![2.0], 1);
    let mut rng = stream_rng(SeedRecord { root: 1, stream: 2 });
    assert!(split_matches(&x, &draw, &mut rng).is_err());
    let x_ok = Mat::from_rows(&[vec![1.0]]).unwrap();
    let bad_draw = unit_draw(vec![2.5], vec![2.0], 1);
    assert!(split_matches(&x_ok, &bad_draw, &mut rng).is_err());
}

#[test]
fn split_rejects_dimension_mismatches() {
    let x = Mat::from_rows(&[vec![1.0, 0.0]]).unwrap();
    let draw = unit_draw(vec![1.0, 1.0], vec![1.0, 1.0], 2);
    let mut rng = stream_rng(SeedRecord { root: 1, stream: 3 });
    assert!(split_matches(&x, &draw, &mut rng).is_err());
}

#[test]
fn run_cycle_is_deterministic_per_seed() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let seed = SeedRecord { root: 99, stream: 7 };
    let first = run_cycle(&inst, &rates, 200.0, 0.5, seed).unwrap();
    let second = run_cycle(&inst, &rates, 200.0, 0.5, seed).unwrap();
    assert_eq!(first, second);
    let other = run_cycle(&inst, &rates, 200.0, 0.5, SeedRecord { root: 99, stream: 8 }).unwrap();
    assert_ne!(first, other);
}

#[test]
fn degenerate_unit_market_reports_perturbed_duals() {
    // One demand type, one supply type, both arriving at unit scale: small
    // draws frequently tie demand against supply, and the perturbed re-solve
    // must come back nondegenerate whenever the pooled demand is all ones.
    let values = Mat::from_rows(&[vec![1.0]]).unwrap();
    let inst = MatchingInstance::from_dense(&values).unwrap();
    let rates = MarketRates::new(vec![0.5], vec![0.5], vec![1.0]).unwrap();
    let mut saw_unit_demand = false;
    for stream in 0..200 {
        let seed = SeedRecord { root: 31, stream };
        let rec = run_cycle(&inst, &rates, 1.0, 0.5, seed).unwrap();
        let draw = draw_experiment(&rates, 1.0, 0.5, seed);
        let pooled = draw.experiment_demand();
        if pooled == vec![1.0] && draw.supply[0] >= 1.0 {
            saw_unit_demand = true;
            assert!(!rec.degenerate, "perturbed unit solve flagged degenerate");
            // One unit of demand against available supply earns the full
            // edge value, so the dual prices the demand side at 1.
            assert_close(rec.delta_sp, draw.d_treatment[0] * 2.0 - draw.d_control[0] * 2.0, 1e-9, "unit sp");
        }
    }
    assert!(saw_unit_demand, "no replication hit the unit-demand case");
}

#[test]
fn simulate_gte_is_exactly_zero_without_a_lift() {
    let inst = geometric_instance();
    let rates = MarketRates::new(vec![1.5], vec![0.0], vec![1.0; 6]).unwrap();
    let value = simulate_gte(&inst, &rates, 500.0, 50, 77).unwrap();
    assert_eq!(value, 0.0);
}

#[test]
fn simulate_gte_approaches_the_fluid_effect() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let value = simulate_gte(&inst, &rates, 2000.0, 200, 13).unwrap();
    assert_close(value, 1.40625, 0.1, "finite-horizon effect");
}

#[test]
fn monte_carlo_means_land_near_the_fluid_limits() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let cfg = sim_config(vec![1000.0], 200, 42);
    let run = monte_carlo(&inst, &rates, &cfg).unwrap();
    assert_eq!(run.stats.len(), 1);
    assert_eq!(run.records.len(), 200);
    let s = &run.stats[0];
    assert_close(s.delta_true, 1.40625, 0.1, "true effect");
    assert_close(s.raw.unwrap().mean, 29.0 / 7.0, 0.2, "raw mean");
    assert_close(s.rb.unwrap().mean, 29.0 / 7.0, 0.2, "rb mean");
    assert_close(s.sp.unwrap().mean, 1.0, 0.1, "sp mean");
}

#[test]
fn monte_carlo_is_deterministic_and_seed_sensitive() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let cfg = sim_config(vec![50.0, 100.0], 20, 5);
    let first = monte_carlo(&inst, &rates, &cfg).unwrap();
    let second = monte_carlo(&inst, &rates, &cfg).unwrap();
    assert_eq!(first.stats, second.stats);
    assert_eq!(first.records, second.records);
    let other = monte_carlo(&inst, &rates, &sim_config(vec![50.0, 100.0], 20, 6)).unwrap();
    assert_ne!(first.records, other.records);
}

#[test]
fn single_replication_reports_no_variance() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let cfg = sim_config(vec![100.0], 1, 9);
    let run = monte_carlo(&inst, &rates, &cfg).unwrap();
    let m = run.stats[0].raw.unwrap();
    assert!(m.variance.is_none() && m.std_error.is_none() && m.variance_scaled.is_none());
}

#[test]
fn estimator_flags_suppress_columns() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let mut cfg = sim_config(vec![100.0], 5, 9);
    cfg.estimate_raw = false;
    cfg.estimate_sp = false;
    let run = monte_carlo(&inst, &rates, &cfg).unwrap();
    assert!(run.stats[0].raw.is_none());
    assert!(run.stats[0].rb.is_some());
    assert!(run.stats[0].sp.is_none());
}

#[test]
fn sim_config_validation_rejects_bad_plans() {
    let base = sim_config(vec![100.0], 10, 1);
    let mut no_taus = base.clone();
    no_taus.taus.clear();
    assert!(no_taus.validate().is_err());
    let mut bad_tau = base.clone();
    bad_tau.taus = vec![0.0];
    assert!(bad_tau.validate().is_err());
    let mut bad_rho = base.clone();
    bad_rho.rho = 1.0;
    assert!(bad_rho.validate().is_err());
    let mut no_reps = base.clone();
    no_reps.reps = 0;
    assert!(no_reps.validate().is_err());
    assert!(base.validate().is_ok());
}

#[test]
fn sweep_at_factor_one_reproduces_the_plain_report() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let points = supply_scaling_sweep(&inst, &rates, &[1.0], 0.5).unwrap();
    let report = bias_report(&inst, &rates, 0.5).unwrap();
    assert_eq!(points[0].oversupply, report);
    assert_eq!(points[0].undersupply, report);
}

#[test]
fn sweep_extremes_wash_out_the_expected_biases() {
    let inst = geometric_instance();
    let rates = geometric_rates();
    let points = supply_scaling_sweep(&inst, &rates, &[1000.0], 0.5).unwrap();
    let p = &points[0];
    assert_close(p.oversupply.bias_rct, 0.0, 1e-9, "oversupply rct bias");
    assert_close(p.oversupply.bias_sp, 0.0, 1e-9, "oversupply sp bias");
    assert!(p.undersupply.bias_rct > 1.0, "undersupply rct bias {}", p.undersupply.bias_rct);
    assert_close(p.undersupply.bias_sp, 0.0, 1e-9, "undersupply sp bias");
}

#[test]
fn sweep_rejects_negative_lifts_and_bad_factors() {
    let inst = geometric_instance();
    let down = MarketRates::new(vec![1.5], vec![-0.5], vec![1.0; 6]).unwrap();
    assert!(supply_scaling_sweep(&inst, &down, &[1.0], 0.5).is_err());
    let rates = geometric_rates();
    assert!(supply_scaling_sweep(&inst, &rates, &[0.0], 0.5).is_err());
    assert!(supply_scaling_sweep(&inst, &rates, &[-2.0], 0.5).is_err());
}

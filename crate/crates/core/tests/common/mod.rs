//! Shared fixtures and independent oracles for the integration tests.

#![allow(dead_code)]

use matchsp_core::{MarketRates, Mat, MatchingInstance};
use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn assert_close(actual: f64, expect: f64, tol: f64, what: &str) {
    assert!(
        (actual - expect).abs() <= tol,
        "{what}: got {actual}, want {expect} (tol {tol})"
    );
}

/// Single demand type facing six unit supplies with geometrically decaying
/// match values.
pub fn geometric_instance() -> MatchingInstance {
    let v = Mat::from_rows(&[vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]]).unwrap();
    MatchingInstance::from_dense(&v).unwrap()
}

pub fn geometric_supply() -> Vec<f64> {
    vec![1.0; 6]
}

pub fn geometric_rates() -> MarketRates {
    MarketRates::new(vec![1.5], vec![4.0], geometric_supply()).unwrap()
}

/// One demand and one supply type, treatment creating demand from nothing
/// against fractional supply; the market where a symmetric experiment stops
/// favoring the SP estimator.
pub fn asymmetric_instance() -> (MatchingInstance, MarketRates) {
    let v = Mat::from_rows(&[vec![1.0]]).unwrap();
    let inst = MatchingInstance::from_dense(&v).unwrap();
    let rates = MarketRates::new(vec![0.0], vec![1.0], vec![0.625]).unwrap();
    (inst, rates)
}

/// Two demand types competing for one supply type at different values.
pub fn two_by_one() -> MatchingInstance {
    let v = Mat::from_rows(&[vec![2.0], vec![1.0]]).unwrap();
    MatchingInstance::from_dense(&v).unwrap()
}

/// Greedy fill-by-decreasing-value oracle for single-demand-type markets:
/// pour `d` units into supplies in value order.
pub fn greedy_single_type(values: &[f64], supplies: &[f64], d: f64) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    let mut rem = d;
    let mut total = 0.0;
    for j in order {
        if rem <= 0.0 || values[j] <= 0.0 {
            break;
        }
        let take = rem.min(supplies[j]);
        total += take * values[j];
        rem -= take;
    }
    total
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random instance with values in `[0, v_max)`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_types: usize, v_max: f64) -> MatchingInstance {
    let n_d = rng.random_range(1..=max_types);
    let n_s = rng.random_range(1..=max_types);
    let rows: Vec<Vec<f64>> = (0..n_d)
        .map(|_| (0..n_s).map(|_| rng.random_range(0.0..v_max)).collect())
        .collect();
    MatchingInstance::from_dense(&Mat::from_rows(&rows).unwrap()).unwrap()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn random_integral_vector(rng: &mut ChaCha8Rng, n: usize, max: u32) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..=max) as f64).collect()
}

/// Random fluid rates over an instance; `sign` > 0 draws `beta >= 0`,
/// `sign` < 0 draws `beta <= 0` (capped so `lambda + beta >= 0`).
pub fn random_rates(rng: &mut ChaCha8Rng, inst: &MatchingInstance, sign: f64) -> MarketRates {
    let n_d = inst.n_demand();
    let lambda = random_vector(rng, n_d, 0.5, 4.0);
    let beta: Vec<f64> = lambda
        .iter()
        .map(|&l| {
            let lift: f64 = rng.random_range(0.05..2.0);
            if sign >= 0.0 {
                lift
            } else {
                -lift.min(l * rng.random_range(0.1..0.95))
            }
        })
        .collect();
    let pi = random_vector(rng, inst.n_supply(), 0.3, 4.0);
    MarketRates::new(lambda, beta, pi).unwrap()
}

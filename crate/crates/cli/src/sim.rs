//! Finite-horizon experiment simulator: Poisson arrival draws, treatment
//! splits of the realized matching, per-replication estimator records, and
//! Monte Carlo aggregation across horizons and supply scalings.

use matchsp_core::estimators::{
    bias_report, rct_estimate_sample, rct_estimate_sample_rb, sp_estimate_sample, EstimateReport,
    ExperimentDraw, MatchSplit, SeedRecord,
};
use matchsp_core::lp::solve_matching;
use matchsp_core::market::{perturb_demand, phi};
use matchsp_core::num::sum_compensated;
use matchsp_core::{Mat, MarketRates, MatchingInstance};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A replication's numbers as they land in the per-replication CSV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EstimateRecord {
    pub tau: f64,
    pub rho: f64,
    pub seed: SeedRecord,
    pub delta_rct_raw: f64,
    pub delta_rct_rb: f64,
    pub delta_sp: f64,
    pub degenerate: bool,
}

/// Sample moments for one estimator column. Variance and the derived fields
/// are absent when only a single replication ran.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EstimatorMoments {
    pub mean: f64,
    pub variance: Option<f64>,
    pub std_error: Option<f64>,
    /// Variance of sqrt(tau) times the estimator, for cross-horizon plots.
    pub variance_scaled: Option<f64>,
}

/// Aggregate for one horizon in a Monte Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonteCarloStats {
    pub tau: f64,
    pub rho: f64,
    pub reps: u32,
    pub delta_true: f64,
    pub raw: Option<EstimatorMoments>,
    pub rb: Option<EstimatorMoments>,
    pub sp: Option<EstimatorMoments>,
    pub degenerate_share: f64,
}

/// Full Monte Carlo output: per-horizon summaries plus every record.
#[derive(Debug, Clone)]
pub struct MonteCarloRun {
    pub stats: Vec<MonteCarloStats>,
    pub records: Vec<EstimateRecord>,
}

/// Monte Carlo study plan.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub taus: Vec<f64>,
    pub rho: f64,
    pub reps: u32,
    pub seed: u64,
    pub estimate_raw: bool,
    pub estimate_rb: bool,
    pub estimate_sp: bool,
    /// Replications of the paired simulation that pins down the finite-
    /// horizon ground truth per tau.
    pub truth_reps: u32,
}

impl SimConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.taus.is_empty() {
            return Err(crate::Error::Config("simulate: no horizons given".into()));
        }
        if self.taus.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(crate::Error::Config("simulate: horizons must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(crate::Error::Config(format!(
                "simulate: treatment fraction {} outside (0, 1)",
                self.rho
            )));
        }
        if self.reps == 0 {
            return Err(crate::Error::Config("simulate: reps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Seedable generator positioned on a named stream of the root seed.
pub fn stream_rng(seed: SeedRecord) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.root);
    rng.set_stream(seed.stream);
    rng
}

/// Derive an independent root for a sub-study so its stream ids cannot
/// collide with the parent's. SplitMix64 finalizer.
pub fn derive_root(root: u64, tag: u64) -> u64 {
    let mut z = root ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Poisson count with the zero-rate case handled without touching the
/// generator, so rate vectors with structural zeros stay reproducible.
pub fn poisson_count(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    Poisson::new(rate).expect("positive finite rate").sample(rng)
}

fn draw_parts(
    rates: &MarketRates,
    tau: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d_control: Vec<f64> = rates
        .lambda
        .iter()
        .map(|&l| poisson_count(rng, (1.0 - rho) * l * tau))
        .collect();
    let d_treatment: Vec<f64> = rates
        .lambda
        .iter()
        .zip(rates.beta.iter())
        .map(|(&l, &b)| poisson_count(rng, rho * (l + b) * tau))
        .collect();
    let supply: Vec<f64> = rates.pi.iter().map(|&p| poisson_count(rng, p * tau)).collect();
    (d_control, d_treatment, supply)
}

/// Draw one experiment's arrivals: control demand at rate (1-rho)*lambda*tau,
/// treatment demand at rho*(lambda+beta)*tau, supply at pi*tau, all Poisson
/// and deterministic for a given seed record.
pub fn draw_experiment(rates: &MarketRates, tau: f64, rho: f64, seed: SeedRecord) -> ExperimentDraw {
    let mut rng = stream_rng(seed);
    let (d_control, d_treatment, supply) = draw_parts(rates, tau, rho, &mut rng);
    ExperimentDraw { tau, rho, d_control, d_treatment, supply, seed }
}

fn integral_count(value: f64, what: &str) -> crate::Result<u64> {
    let rounded = value.round();
    if !(0.0..=9.0e15).contains(&rounded) || (value - rounded).abs() > 1e-6 {
        return Err(crate::Error::InconsistentCounts(format!(
            "{what} = {value} is not a nonnegative integer"
        )));
    }
    Ok(rounded as u64)
}

/// Split the realized matching between arms, treating each demand type's
/// matches as an urn sampled without replacement: the control draw over the
/// match categories (one per supply type, plus unmatched) is multivariate
/// hypergeometric, realized as chained univariate draws in edge order.
pub fn split_matches(
    x_total: &Mat,
    draw: &ExperimentDraw,
    rng: &mut ChaCha8Rng,
) -> crate::Result<MatchSplit> {
    let (n_d, n_s) = (x_total.rows(), x_total.cols());
    if draw.d_control.len() != n_d || draw.d_treatment.len() != n_d {
        return Err(crate::Error::InconsistentCounts(format!(
            "split: matching has {n_d} demand rows, draw has {}",
            draw.d_control.len()
        )));
    }
    let mut x_control = Mat::zeros(n_d, n_s);
    let mut x_treatment = Mat::zeros(n_d, n_s);
    for i in 0..n_d {
        let controls = integral_count(draw.d_control[i], "control count")?;
        let treats = integral_count(draw.d_treatment[i], "treatment count")?;
        let total = controls + treats;
        let mut matched = 0u64;
        for j in 0..n_s {
            matched += integral_count(x_total.at(i, j), "match count")?;
        }
        if matched > total {
            return Err(crate::Error::InconsistentCounts(format!(
                "split: row {i} matches {matched} units but only {total} arrived"
            )));
        }
        let mut pop_left = total;
        let mut draws_left = controls;
        for j in 0..n_s {
            let category = integral_count(x_total.at(i, j), "match count")?;
            if category == 0 {
                continue;
            }
            if draws_left == 0 {
                x_treatment.set(i, j, category as f64);
                continue;
            }
            let taken = if draws_left == pop_left {
                category
            } else {
                Hypergeometric::new(pop_left, category, draws_left)
                    .expect("chained urn parameters are consistent")
                    .sample(rng)
            };
            x_control.set(i, j, taken as f64);
            x_treatment.set(i, j, (category - taken) as f64);
            pop_left -= category;
            draws_left -= taken;
        }
    }
    Ok(MatchSplit { x_control, x_treatment })
}

/// One full replication: draw arrivals, solve the realized matching, split
/// it between arms, and evaluate the three sampled estimators. Degenerate
/// all-unit-demand solves get their duals from a left demand perturbation.
pub fn run_cycle(
    inst: &MatchingInstance,
    rates: &MarketRates,
    tau: f64,
    rho: f64,
    seed: SeedRecord,
) -> crate::Result<EstimateRecord> {
    let mut rng = stream_rng(seed);
    let (d_control, d_treatment, supply) = draw_parts(rates, tau, rho, &mut rng);
    let draw = ExperimentDraw { tau, rho, d_control, d_treatment, supply, seed };
    draw.validate(inst)?;
    let demand = draw.experiment_demand();
    let sol = solve_matching(inst, &demand, &draw.supply)?;
    let split = split_matches(&sol.x, &draw, &mut rng)?;
    let delta_rct_raw = rct_estimate_sample(&draw, &split, inst)?;
    let delta_rct_rb = rct_estimate_sample_rb(&draw, &sol.x, inst)?;
    let unit_demand = demand.iter().all(|&d| d == 1.0);
    let (duals, degenerate) = if sol.degenerate && unit_demand {
        let eps = 0.5 / demand.len() as f64;
        let perturbed = perturb_demand(&demand, eps)?;
        let psol = solve_matching(inst, &perturbed, &draw.supply)?;
        (psol.a, psol.degenerate)
    } else {
        (sol.a, sol.degenerate)
    };
    let delta_sp = sp_estimate_sample(&draw, &duals)?;
    Ok(EstimateRecord { tau, rho, seed, delta_rct_raw, delta_rct_rb, delta_sp, degenerate })
}

/// Paired finite-horizon ground truth: mean of (1/tau)[Phi(D_t, S) -
/// Phi(D_c, S)] where both arms share the supply draw and the demand draws
/// use a common stream, so a zero lift yields exactly zero.
pub fn simulate_gte(
    inst: &MatchingInstance,
    rates: &MarketRates,
    tau: f64,
    reps: u32,
    root_seed: u64,
) -> crate::Result<f64> {
    let treated_rates: Vec<f64> =
        rates.lambda.iter().zip(rates.beta.iter()).map(|(&l, &b)| l + b).collect();
    let diffs: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> crate::Result<f64> {
            let mut supply_rng =
                stream_rng(SeedRecord { root: root_seed, stream: 4 * r as u64 });
            let supply: Vec<f64> =
                rates.pi.iter().map(|&p| poisson_count(&mut supply_rng, p * tau)).collect();
            let demand_rng = stream_rng(SeedRecord { root: root_seed, stream: 4 * r as u64 + 1 });
            let mut treated_rng = demand_rng.clone();
            let mut control_rng = demand_rng;
            let d_treated: Vec<f64> = treated_rates
                .iter()
                .map(|&l| poisson_count(&mut treated_rng, l * tau))
                .collect();
            let d_control: Vec<f64> =
                rates.lambda.iter().map(|&l| poisson_count(&mut control_rng, l * tau)).collect();
            Ok((phi(inst, &d_treated, &supply)? - phi(inst, &d_control, &supply)?) / tau)
        })
        .collect::<crate::Result<Vec<f64>>>()?;
    Ok(sum_compensated(diffs.iter().copied()) / reps as f64)
}

/// Mean of (1/tau) Phi(D, S) at the experiment rates, for checking fluid
/// convergence of the realized per-period match value.
pub fn simulate_value_mean(
    inst: &MatchingInstance,
    rates: &MarketRates,
    rho: f64,
    tau: f64,
    reps: u32,
    root_seed: u64,
) -> crate::Result<f64> {
    let exp_rates = rates.experiment_demand(rho);
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> crate::Result<f64> {
            let mut rng = stream_rng(SeedRecord { root: root_seed, stream: r as u64 });
            let demand: Vec<f64> =
                exp_rates.iter().map(|&l| poisson_count(&mut rng, l * tau)).collect();
            let supply: Vec<f64> =
                rates.pi.iter().map(|&p| poisson_count(&mut rng, p * tau)).collect();
            Ok(phi(inst, &demand, &supply)? / tau)
        })
        .collect::<crate::Result<Vec<f64>>>()?;
    Ok(sum_compensated(values.iter().copied()) / reps as f64)
}

fn moments(values: &[f64], tau: f64) -> EstimatorMoments {
    let n = values.len();
    let mean = sum_compensated(values.iter().copied()) / n as f64;
    if n < 2 {
        return EstimatorMoments { mean, variance: None, std_error: None, variance_scaled: None };
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let variance = sum_compensated(sq.iter().copied()) / (n - 1) as f64;
    EstimatorMoments {
        mean,
        variance: Some(variance),
        std_error: Some((variance / n as f64).sqrt()),
        variance_scaled: Some(tau * variance),
    }
}

/// Run the study: for each horizon, `reps` independent replications on
/// dedicated streams plus a paired ground-truth simulation on a derived
/// root. Replications run in parallel; aggregation is order-independent.
pub fn monte_carlo(
    inst: &MatchingInstance,
    rates: &MarketRates,
    cfg: &SimConfig,
) -> crate::Result<MonteCarloRun> {
    cfg.validate()?;
    rates.validate(inst).map_err(crate::Error::Solver)?;
    let mut stats = Vec::with_capacity(cfg.taus.len());
    let mut records = Vec::with_capacity(cfg.taus.len() * cfg.reps as usize);
    for (t_idx, &tau) in cfg.taus.iter().enumerate() {
        let batch: Vec<EstimateRecord> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| {
                let stream = ((t_idx as u64) << 32) | r as u64;
                run_cycle(inst, rates, tau, cfg.rho, SeedRecord { root: cfg.seed, stream })
            })
            .collect::<crate::Result<Vec<_>>>()?;
        let delta_true = simulate_gte(
            inst,
            rates,
            tau,
            cfg.truth_reps.max(1),
            derive_root(cfg.seed, 0x7472_7574_6800 + t_idx as u64),
        )?;
        let raw: Vec<f64> = batch.iter().map(|rec| rec.delta_rct_raw).collect();
        let rb: Vec<f64> = batch.iter().map(|rec| rec.delta_rct_rb).collect();
        let sp: Vec<f64> = batch.iter().map(|rec| rec.delta_sp).collect();
        let degenerate_share =
            batch.iter().filter(|rec| rec.degenerate).count() as f64 / batch.len() as f64;
        stats.push(MonteCarloStats {
            tau,
            rho: cfg.rho,
            reps: cfg.reps,
            delta_true,
            raw: cfg.estimate_raw.then(|| moments(&raw, tau)),
            rb: cfg.estimate_rb.then(|| moments(&rb, tau)),
            sp: cfg.estimate_sp.then(|| moments(&sp, tau)),
            degenerate_share,
        });
        records.extend(batch);
    }
    Ok(MonteCarloRun { stats, records })
}

/// One supply-scaling point: fluid bias reports for the market pushed into
/// deep oversupply (supply rates scaled up) and deep undersupply (demand
/// and lift rates scaled up).
#[derive(Debug, Clone, Serialize)]
pub struct ScalePoint {
    pub factor: f64,
    pub oversupply: EstimateReport,
    pub undersupply: EstimateReport,
}

/// Sweep the fluid bias reports across supply-imbalance factors. Requires a
/// nonnegative lift so the regime labels keep their meaning; factor 1
/// reproduces the unscaled report on both branches.
pub fn supply_scaling_sweep(
    inst: &MatchingInstance,
    rates: &MarketRates,
    factors: &[f64],
    rho: f64,
) -> crate::Result<Vec<ScalePoint>> {
    if rates.beta.iter().any(|&b| b < 0.0) {
        return Err(crate::Error::Config(
            "sweep: supply scaling needs a nonnegative lift in every type".into(),
        ));
    }
    if factors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
        return Err(crate::Error::Config("sweep: factors must be positive".into()));
    }
    let mut points = Vec::with_capacity(factors.len());
    for &factor in factors {
        let over_pi: Vec<f64> = rates.pi.iter().map(|&p| p * factor).collect();
        let over =
            MarketRates::new(rates.lambda.clone(), rates.beta.clone(), over_pi)?;
        let under_lambda: Vec<f64> = rates.lambda.iter().map(|&l| l * factor).collect();
        let under_beta: Vec<f64> = rates.beta.iter().map(|&b| b * factor).collect();
        let under = MarketRates::new(under_lambda, under_beta, rates.pi.clone())?;
        points.push(ScalePoint {
            factor,
            oversupply: bias_report(inst, &over, rho)?,
            undersupply: bias_report(inst, &under, rho)?,
        });
    }
    Ok(points)
}

//! Rideshare experiment: unit-type matching of ride requests to drivers on
//! a mutual nearest-neighbor graph, with a treatment that lifts request
//! volume. Compares the naive randomized estimator against shadow prices
//! from a left-perturbed demand solve.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use matchsp_core::estimators::SeedRecord;
use matchsp_core::lp::solve_matching_sparse;
use matchsp_core::{Edge, MatchingInstance};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sim::{derive_root, stream_rng};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Kilometers per degree of latitude.
pub const DEG_KM: f64 = EARTH_RADIUS_KM * core::f64::consts::PI / 180.0;
/// Seconds a driver stays available after coming online.
pub const DEFAULT_WINDOW_S: f64 = 900.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// Great-circle distance in kilometers.
pub fn haversine(p: LatLon, q: LatLon) -> f64 {
    let (lat1, lon1) = (p.lat.to_radians(), p.lon.to_radians());
    let (lat2, lon2) = (q.lat.to_radians(), q.lon.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RideRecord {
    pub pickup: LatLon,
    pub dropoff: LatLon,
    pub request_time_s: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriverRecord {
    pub loc: LatLon,
    pub online_time_s: f64,
    pub window_s: f64,
}

/// Synthetic city layout: ride and driver positions cluster around a few
/// centers scattered near a common origin.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthParams {
    pub center: LatLon,
    pub n_clusters: usize,
    pub center_spread_km: f64,
    pub cluster_radius_km: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            center: LatLon { lat: 40.7, lon: -74.0 },
            n_clusters: 4,
            center_spread_km: 6.0,
            cluster_radius_km: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SynthParams),
    Csv { rides: PathBuf, drivers: PathBuf },
}

/// Study plan for the rideshare experiment.
#[derive(Debug, Clone)]
pub struct RideshareConfig {
    pub n_rides: usize,
    pub n_drivers: usize,
    /// Relative demand lift e: the ride pool represents treated volume
    /// lambda*(1+e), and control demand thins it by 1/(1+e).
    pub effect: f64,
    /// Neighbor count for the mutual k-nearest admissibility graph.
    pub k: usize,
    pub rho: f64,
    /// Left demand perturbation; default is 1/(2 * present rides).
    pub epsilon: Option<f64>,
    pub reps: u32,
    pub seed: u64,
    pub source: DataSource,
}

impl RideshareConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.effect <= -1.0 || !self.effect.is_finite() {
            return Err(crate::Error::Config(format!(
                "rideshare: effect {} must exceed -1",
                self.effect
            )));
        }
        if self.k == 0 {
            return Err(crate::Error::Config("rideshare: k must be at least 1".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(crate::Error::Config(format!(
                "rideshare: treatment fraction {} outside (0, 1)",
                self.rho
            )));
        }
        if self.reps == 0 {
            return Err(crate::Error::Config("rideshare: reps must be at least 1".into()));
        }
        if matches!(self.source, DataSource::Synthetic(_)) && (self.n_rides == 0 || self.n_drivers == 0)
        {
            return Err(crate::Error::Config("rideshare: need rides and drivers".into()));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(crate::Error::Config(format!(
                    "rideshare: perturbation {eps} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Final study summary.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RideshareReport {
    pub true_effect: f64,
    pub rct_estimate: f64,
    pub sp_estimate: f64,
    pub rct_std: f64,
    pub sp_std: f64,
    pub n_rides: usize,
    pub n_drivers: usize,
    pub effect_e: f64,
    pub replications: u32,
}

/// One replication's numbers, for the per-replication CSV.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RideshareRep {
    pub rep: u32,
    pub delta_true: f64,
    pub delta_rct: f64,
    pub delta_sp: f64,
    pub degenerate: bool,
}

fn offset_km(origin: LatLon, east_km: f64, north_km: f64) -> LatLon {
    LatLon {
        lat: origin.lat + north_km / DEG_KM,
        lon: origin.lon + east_km / (DEG_KM * origin.lat.to_radians().cos()),
    }
}

fn jitter(rng: &mut ChaCha8Rng, center: LatLon, radius_km: f64) -> LatLon {
    let r = radius_km * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..core::f64::consts::TAU);
    offset_km(center, r * theta.cos(), r * theta.sin())
}

/// Draw a synthetic day of rides and drivers, deterministic per seed.
pub fn synth_city(
    params: &SynthParams,
    n_rides: usize,
    n_drivers: usize,
    seed: u64,
) -> (Vec<RideRecord>, Vec<DriverRecord>) {
    let mut rng = stream_rng(SeedRecord { root: seed, stream: 0 });
    let centers: Vec<LatLon> = (0..params.n_clusters.max(1))
        .map(|_| jitter(&mut rng, params.center, params.center_spread_km))
        .collect();
    let rides: Vec<RideRecord> = (0..n_rides)
        .map(|_| {
            let pickup_c = centers[rng.random_range(0..centers.len())];
            let pickup = jitter(&mut rng, pickup_c, params.cluster_radius_km);
            let dropoff_c = centers[rng.random_range(0..centers.len())];
            let dropoff = jitter(&mut rng, dropoff_c, params.cluster_radius_km);
            let request_time_s = rng.random_range(0..86_400) as f64;
            RideRecord { pickup, dropoff, request_time_s }
        })
        .collect();
    let drivers: Vec<DriverRecord> = (0..n_drivers)
        .map(|_| {
            let c = centers[rng.random_range(0..centers.len())];
            let loc = jitter(&mut rng, c, params.cluster_radius_km);
            let online_time_s = rng.random_range(0..86_400) as f64;
            DriverRecord { loc, online_time_s, window_s: DEFAULT_WINDOW_S }
        })
        .collect();
    (rides, drivers)
}

fn open_csv(path: &Path) -> crate::Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(crate::Error::from)
}

fn field(record: &csv::StringRecord, idx: usize, what: &str) -> crate::Result<f64> {
    let raw = record
        .get(idx)
        .ok_or_else(|| crate::Error::Config(format!("{what}: missing column {idx}")))?;
    raw.parse::<f64>()
        .map_err(|_| crate::Error::Config(format!("{what}: bad number {raw:?} in column {idx}")))
}

/// Read rides from a CSV with header
/// `request_time_s,pickup_lat,pickup_lon,dropoff_lat,dropoff_lon`.
pub fn read_rides_csv(path: &Path) -> crate::Result<Vec<RideRecord>> {
    let mut reader = open_csv(path)?;
    let mut rides = Vec::new();
    for row in reader.records() {
        let row = row?;
        rides.push(RideRecord {
            request_time_s: field(&row, 0, "rides csv")?,
            pickup: LatLon { lat: field(&row, 1, "rides csv")?, lon: field(&row, 2, "rides csv")? },
            dropoff: LatLon {
                lat: field(&row, 3, "rides csv")?,
                lon: field(&row, 4, "rides csv")?,
            },
        });
    }
    Ok(rides)
}

/// Read drivers from a CSV with header `online_time_s,lat,lon`. Availability
/// windows are not part of the format; every driver gets the default.
pub fn read_drivers_csv(path: &Path) -> crate::Result<Vec<DriverRecord>> {
    let mut reader = open_csv(path)?;
    let mut drivers = Vec::new();
    for row in reader.records() {
        let row = row?;
        drivers.push(DriverRecord {
            online_time_s: field(&row, 0, "drivers csv")?,
            loc: LatLon { lat: field(&row, 1, "drivers csv")?, lon: field(&row, 2, "drivers csv")? },
            window_s: DEFAULT_WINDOW_S,
        });
    }
    Ok(drivers)
}

fn k_smallest(candidates: &mut Vec<(f64, u32)>, k: usize) -> &[(f64, u32)] {
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    &candidates[..candidates.len().min(k)]
}

/// Build the unit-type matching market: a ride admits a driver when the
/// request falls inside the driver's availability window and either side is
/// among the other's k nearest feasible counterparts by pickup distance.
/// Edge value is ride distance minus pickup distance; non-positive values
/// are dropped.
pub fn build_matching(
    rides: &[RideRecord],
    drivers: &[DriverRecord],
    k: usize,
) -> crate::Result<MatchingInstance> {
    if rides.is_empty() || drivers.is_empty() {
        return Err(crate::Error::EmptyGraph);
    }
    let n_d = rides.len();
    let n_s = drivers.len();
    let mut per_ride: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n_d];
    let mut per_driver: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n_s];
    for (i, ride) in rides.iter().enumerate() {
        for (j, driver) in drivers.iter().enumerate() {
            let wait = ride.request_time_s - driver.online_time_s;
            if wait < 0.0 || wait > driver.window_s {
                continue;
            }
            let dist = haversine(driver.loc, ride.pickup);
            per_ride[i].push((dist, j as u32));
            per_driver[j].push((dist, i as u32));
        }
    }
    let mut admissible: BTreeSet<(u32, u32)> = BTreeSet::new();
    for (i, candidates) in per_ride.iter_mut().enumerate() {
        for &(_, j) in k_smallest(candidates, k) {
            admissible.insert((i as u32, j));
        }
    }
    for (j, candidates) in per_driver.iter_mut().enumerate() {
        for &(_, i) in k_smallest(candidates, k) {
            admissible.insert((i, j as u32));
        }
    }
    let mut edges = Vec::with_capacity(admissible.len());
    for (i, j) in admissible {
        let ride = &rides[i as usize];
        let value = haversine(ride.pickup, ride.dropoff)
            - haversine(drivers[j as usize].loc, ride.pickup);
        if value > 0.0 {
            edges.push(Edge { i, j, value });
        }
    }
    if edges.is_empty() {
        return Err(crate::Error::EmptyGraph);
    }
    MatchingInstance::from_edges(n_d, n_s, edges).map_err(crate::Error::Solver)
}

/// One replication on a fixed market: assign rides to arms, thin the
/// lower-volume arm (control for a positive effect, treatment for a
/// negative one), solve the realized sub-market, and price with duals from
/// a left-perturbed solve. Ground truth pairs the global-treatment pool
/// against the global-control pool, thinned the same way and sharing the
/// same drivers.
fn replicate(
    inst: &MatchingInstance,
    cfg: &RideshareConfig,
    supply: &[f64],
    full_objective: f64,
    rep: u32,
) -> crate::Result<RideshareRep> {
    let n_d = inst.n_demand();
    let keep_control = (1.0 / (1.0 + cfg.effect)).min(1.0);
    let keep_treated = (1.0 + cfg.effect).min(1.0);
    let mut rng = stream_rng(SeedRecord { root: cfg.seed, stream: rep as u64 });
    let treated: Vec<bool> = (0..n_d).map(|_| rng.random_bool(cfg.rho)).collect();
    let present: Vec<bool> = treated
        .iter()
        .map(|&t| {
            let keep = if t { keep_treated } else { keep_control };
            keep >= 1.0 || rng.random_bool(keep)
        })
        .collect();
    let n_present = present.iter().filter(|&&p| p).count();
    if n_present == 0 {
        return Err(crate::Error::Config(
            "rideshare: every ride thinned away; increase the pool".into(),
        ));
    }
    let demand: Vec<f64> = present.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect();
    let sol = solve_matching_sparse(inst, &demand, supply)?;
    let eps = match cfg.epsilon {
        Some(eps) => {
            if eps >= 1.0 / n_present as f64 {
                return Err(crate::Error::Config(format!(
                    "rideshare: perturbation {eps} must stay below 1/{n_present}"
                )));
            }
            eps
        }
        None => 0.5 / n_present as f64,
    };
    let perturbed: Vec<f64> = present.iter().map(|&p| if p { 1.0 - eps } else { 0.0 }).collect();
    let psol = solve_matching_sparse(inst, &perturbed, supply)?;
    let row_values = sol.demand_row_values(inst);
    let w_t = 1.0 / cfg.rho;
    let w_c = 1.0 / (1.0 - cfg.rho);
    let mut delta_rct = 0.0;
    let mut delta_sp = 0.0;
    for i in 0..n_d {
        if !present[i] {
            continue;
        }
        let weight = if treated[i] { w_t } else { -w_c };
        delta_rct += weight * row_values[i];
        delta_sp += weight * psol.a[i];
    }
    let thinned_objective = |rng: &mut ChaCha8Rng, keep: f64| -> crate::Result<f64> {
        if keep >= 1.0 {
            return Ok(full_objective);
        }
        let demand: Vec<f64> =
            (0..n_d).map(|_| if rng.random_bool(keep) { 1.0 } else { 0.0 }).collect();
        Ok(solve_matching_sparse(inst, &demand, supply)?.objective)
    };
    let treated_objective = thinned_objective(&mut rng, keep_treated)?;
    let control_objective = thinned_objective(&mut rng, keep_control)?;
    Ok(RideshareRep {
        rep,
        delta_true: treated_objective - control_objective,
        delta_rct,
        delta_sp,
        degenerate: psol.degenerate,
    })
}

/// Load or synthesize the day's data for a study plan.
pub fn load_data(cfg: &RideshareConfig) -> crate::Result<(Vec<RideRecord>, Vec<DriverRecord>)> {
    match &cfg.source {
        DataSource::Synthetic(params) => {
            Ok(synth_city(params, cfg.n_rides, cfg.n_drivers, derive_root(cfg.seed, 0xda7a)))
        }
        DataSource::Csv { rides, drivers } => {
            let r = read_rides_csv(rides)?;
            let d = read_drivers_csv(drivers)?;
            if r.is_empty() || d.is_empty() {
                return Err(crate::Error::Config("rideshare: empty csv data".into()));
            }
            Ok((r, d))
        }
    }
}

/// Run the full study: build the market once, then replicate assignment,
/// thinning, solves, and estimators.
pub fn run_rideshare_experiment(
    cfg: &RideshareConfig,
) -> crate::Result<(RideshareReport, Vec<RideshareRep>)> {
    cfg.validate()?;
    let (rides, drivers) = load_data(cfg)?;
    let inst = build_matching(&rides, &drivers, cfg.k)?;
    let supply = vec![1.0; drivers.len()];
    let full_demand = vec![1.0; rides.len()];
    let full_objective = solve_matching_sparse(&inst, &full_demand, &supply)?.objective;
    let batch: Vec<RideshareRep> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| replicate(&inst, cfg, &supply, full_objective, rep))
        .collect::<crate::Result<Vec<_>>>()?;
    let trues: Vec<f64> = batch.iter().map(|r| r.delta_true).collect();
    let rcts: Vec<f64> = batch.iter().map(|r| r.delta_rct).collect();
    let sps: Vec<f64> = batch.iter().map(|r| r.delta_sp).collect();
    let (true_effect, _) = crate::estimator_means(&trues);
    let (rct_estimate, rct_se) = crate::estimator_means(&rcts);
    let (sp_estimate, sp_se) = crate::estimator_means(&sps);
    let n = cfg.reps as f64;
    let report = RideshareReport {
        true_effect,
        rct_estimate,
        sp_estimate,
        rct_std: rct_se * n.sqrt(),
        sp_std: sp_se * n.sqrt(),
        n_rides: rides.len(),
        n_drivers: drivers.len(),
        effect_e: cfg.effect,
        replications: cfg.reps,
    };
    Ok((report, batch))
}

//! TOML study configuration: every section has working defaults (the
//! one-row geometric example market), so each subcommand runs without a
//! config file. CLI flags override file values; the effective config is
//! what gets digested into the run manifest.

use std::path::{Path, PathBuf};

use matchsp_core::{Mat, MarketRates, MatchingInstance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::rideshare::{DataSource, LatLon, RideshareConfig, SynthParams};
use crate::sim::SimConfig;
use crate::supply_chain::SupplyChainConfig;

fn default_values() -> Vec<Vec<f64>> {
    vec![vec![2.0, 1.0, 0.5, 0.25, 0.125, 0.0625]]
}

fn default_lambda() -> Vec<f64> {
    vec![1.5]
}

fn default_beta() -> Vec<f64> {
    vec![4.0]
}

fn default_pi() -> Vec<f64> {
    vec![1.0; 6]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    /// Match value per (demand type, supply type) pair.
    pub values: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
}

impl Default for MarketSection {
    fn default() -> Self {
        MarketSection {
            values: default_values(),
            lambda: default_lambda(),
            beta: default_beta(),
            pi: default_pi(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub rho: f64,
    pub taus: Vec<f64>,
    pub reps: u32,
    pub seed: u64,
    /// Replications of the paired ground-truth simulation per horizon.
    pub truth_reps: u32,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection { rho: 0.5, taus: vec![1000.0], reps: 200, seed: 42, truth_reps: 500 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub raw_rct: bool,
    pub rb_rct: bool,
    pub sp: bool,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection { raw_rct: true, rb_rct: true, sp: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub factors: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { factors: vec![1.0, 10.0, 100.0, 1000.0] }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondarySection {
    /// Secondary edge weights; empty means self-priced (weights = values).
    pub weights: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RideshareSection {
    pub drivers: usize,
    pub rides: usize,
    pub effect: f64,
    pub k: usize,
    pub rho: f64,
    /// Left demand perturbation; 0 selects the 1/(2 * present) default.
    pub epsilon: f64,
    pub reps: u32,
    pub seed: u64,
    /// Paths to trip and driver CSVs; empty strings select synthetic data.
    pub rides_csv: String,
    pub drivers_csv: String,
    pub center_lat: f64,
    pub center_lon: f64,
    pub clusters: usize,
    pub center_spread_km: f64,
    pub cluster_radius_km: f64,
}

impl Default for RideshareSection {
    fn default() -> Self {
        let synth = SynthParams::default();
        RideshareSection {
            drivers: 2000,
            rides: 2000,
            effect: 0.05,
            k: 50,
            rho: 0.5,
            epsilon: 0.0,
            reps: 20,
            seed: 7,
            rides_csv: String::new(),
            drivers_csv: String::new(),
            center_lat: synth.center.lat,
            center_lon: synth.center.lon,
            clusters: synth.n_clusters,
            center_spread_km: synth.center_spread_km,
            cluster_radius_km: synth.cluster_radius_km,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupplyChainSection {
    pub lambda: Vec<f64>,
    pub betas: Vec<Vec<f64>>,
    pub rho: f64,
    pub reps: u32,
    pub seed: u64,
}

impl Default for SupplyChainSection {
    fn default() -> Self {
        SupplyChainSection {
            lambda: vec![130.0, 120.0],
            betas: vec![
                vec![10.0, 10.0],
                vec![20.0, 20.0],
                vec![-10.0, -10.0],
                vec![-20.0, 20.0],
                vec![20.0, -20.0],
            ],
            rho: 0.5,
            reps: 1000,
            seed: 7,
        }
    }
}

/// The whole study configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub market: MarketSection,
    pub experiment: ExperimentSection,
    pub estimators: EstimatorSection,
    pub sweep: SweepSection,
    pub secondary: SecondarySection,
    pub rideshare: RideshareSection,
    pub supplychain: SupplyChainSection,
}

impl AppConfig {
    /// Defaults when no path is given; otherwise parse the file, rejecting
    /// unknown keys.
    pub fn load(path: Option<&Path>) -> crate::Result<AppConfig> {
        let Some(path) = path else {
            return Ok(AppConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| crate::Error::Config(format!("{}: {e}", path.display())))
    }

    /// Canonical TOML rendering of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical rendering.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The configured market instance.
    pub fn instance(&self) -> crate::Result<MatchingInstance> {
        let rows = self.market.values.len();
        if rows == 0 {
            return Err(crate::Error::Config("market.values is empty".into()));
        }
        let cols = self.market.values[0].len();
        if self.market.values.iter().any(|r| r.len() != cols) {
            return Err(crate::Error::Config("market.values rows have unequal lengths".into()));
        }
        let mat = Mat::from_rows(&self.market.values)
            .map_err(|e| crate::Error::Config(format!("market.values: {e}")))?;
        MatchingInstance::from_dense(&mat)
            .map_err(|e| crate::Error::Config(format!("market.values: {e}")))
    }

    /// The configured market rates, validated against the instance.
    pub fn rates(&self, inst: &MatchingInstance) -> crate::Result<MarketRates> {
        let rates = MarketRates::new(
            self.market.lambda.clone(),
            self.market.beta.clone(),
            self.market.pi.clone(),
        )
        .map_err(|e| crate::Error::Config(format!("market rates: {e}")))?;
        rates.validate(inst).map_err(|e| crate::Error::Config(format!("market rates: {e}")))?;
        Ok(rates)
    }

    /// Secondary weights as a matrix; self-priced when the section is empty.
    pub fn secondary_weights(&self, inst: &MatchingInstance) -> crate::Result<Mat> {
        if self.secondary.weights.is_empty() {
            let mut w = Mat::zeros(inst.n_demand(), inst.n_supply());
            for e in inst.edges() {
                w.set(e.i as usize, e.j as usize, e.value);
            }
            return Ok(w);
        }
        Mat::from_rows(&self.secondary.weights)
            .map_err(|e| crate::Error::Config(format!("secondary.weights: {e}")))
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            taus: self.experiment.taus.clone(),
            rho: self.experiment.rho,
            reps: self.experiment.reps,
            seed: self.experiment.seed,
            estimate_raw: self.estimators.raw_rct,
            estimate_rb: self.estimators.rb_rct,
            estimate_sp: self.estimators.sp,
            truth_reps: self.experiment.truth_reps,
        }
    }

    pub fn rideshare_config(&self) -> crate::Result<RideshareConfig> {
        let section = &self.rideshare;
        let source = match (section.rides_csv.is_empty(), section.drivers_csv.is_empty()) {
            (true, true) => DataSource::Synthetic(SynthParams {
                center: LatLon { lat: section.center_lat, lon: section.center_lon },
                n_clusters: section.clusters,
                center_spread_km: section.center_spread_km,
                cluster_radius_km: section.cluster_radius_km,
            }),
            (false, false) => DataSource::Csv {
                rides: PathBuf::from(&section.rides_csv),
                drivers: PathBuf::from(&section.drivers_csv),
            },
            _ => {
                return Err(crate::Error::Config(
                    "rideshare: set both rides_csv and drivers_csv or neither".into(),
                ))
            }
        };
        Ok(RideshareConfig {
            n_rides: section.rides,
            n_drivers: section.drivers,
            effect: section.effect,
            k: section.k,
            rho: section.rho,
            epsilon: (section.epsilon > 0.0).then_some(section.epsilon),
            reps: section.reps,
            seed: section.seed,
            source,
        })
    }

    pub fn supply_chain_config(&self) -> crate::Result<SupplyChainConfig> {
        let section = &self.supplychain;
        let lambda: [f64; 2] = section
            .lambda
            .clone()
            .try_into()
            .map_err(|_| crate::Error::Config("supplychain.lambda needs two entries".into()))?;
        let mut betas = Vec::with_capacity(section.betas.len());
        for b in &section.betas {
            let beta: [f64; 2] = b
                .clone()
                .try_into()
                .map_err(|_| crate::Error::Config("supplychain.betas entries need two".into()))?;
            betas.push(beta);
        }
        Ok(SupplyChainConfig {
            lambda,
            betas,
            rho: section.rho,
            reps: section.reps,
            seed: section.seed,
        })
    }

    /// Apply a global seed override to every study section.
    pub fn override_seed(&mut self, seed: u64) {
        self.experiment.seed = seed;
        self.rideshare.seed = seed;
        self.supplychain.seed = seed;
    }
}

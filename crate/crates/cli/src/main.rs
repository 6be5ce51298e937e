//! Command-line front end: loads the study config, applies flag overrides,
//! runs the requested study, and writes its artifacts atomically into the
//! output directory together with a run manifest.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use matchsp::config::AppConfig;
use matchsp::output;
use matchsp::sim;
use matchsp::{rideshare, supply_chain, Error};
use matchsp_core::estimators::bias_report;
use matchsp_core::market::build_psi_profile;
use matchsp_core::secondary::{secondary_duals, SecondaryMetric};
use serde::Serialize;

const PROFILE_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "matchsp",
    version,
    about = "Shadow-price debiasing toolkit for matching-market experiments"
)]
struct Cli {
    /// Study configuration file (TOML). Without it, every section uses the
    /// bundled single-row example market.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override every study seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Worker threads for parallel replications.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Fluid-limit bias report and value profile for the configured market.
    Fluid,
    /// Partial-treatment value profile only.
    Psi,
    /// Finite-horizon Monte Carlo study of the sampled estimators.
    Simulate {
        /// Horizon(s) to simulate; repeat or comma-separate for a sweep.
        #[arg(long, value_name = "TAU", num_args = 1.., value_delimiter = ',')]
        tau: Vec<f64>,
        #[arg(long, value_name = "N")]
        reps: Option<u32>,
        #[arg(long, value_name = "RHO")]
        rho: Option<f64>,
    },
    /// Fluid bias reports across supply-imbalance factors.
    Sweep {
        #[arg(long, value_name = "F", num_args = 1.., value_delimiter = ',')]
        factors: Vec<f64>,
    },
    /// Ride-matching study on synthetic or CSV trip data.
    Rideshare {
        #[arg(long, value_name = "N")]
        drivers: Option<usize>,
        #[arg(long, value_name = "N")]
        rides: Option<usize>,
        #[arg(long, value_name = "E", allow_negative_numbers = true)]
        effect: Option<f64>,
        #[arg(long, value_name = "N")]
        reps: Option<u32>,
    },
    /// Logistics-network study with randomized retailer demand lifts.
    Supplychain {
        /// Demand regime preset: undersupply or oversupply.
        #[arg(long, value_name = "REGIME")]
        regime: Option<String>,
        #[arg(long, value_name = "N")]
        reps: Option<u32>,
    },
    /// Secondary-metric shadow prices at the experiment operating point.
    Secondary,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn apply_overrides(cfg: &mut AppConfig, command: &Option<Command>) -> matchsp::Result<String> {
    let name = match command {
        None => "",
        Some(Command::Fluid) => "fluid",
        Some(Command::Psi) => "psi",
        Some(Command::Simulate { tau, reps, rho }) => {
            if !tau.is_empty() {
                cfg.experiment.taus = tau.clone();
            }
            if let Some(reps) = reps {
                cfg.experiment.reps = *reps;
            }
            if let Some(rho) = rho {
                cfg.experiment.rho = *rho;
            }
            "simulate"
        }
        Some(Command::Sweep { factors }) => {
            if !factors.is_empty() {
                cfg.sweep.factors = factors.clone();
            }
            "sweep"
        }
        Some(Command::Rideshare { drivers, rides, effect, reps }) => {
            if let Some(drivers) = drivers {
                cfg.rideshare.drivers = *drivers;
            }
            if let Some(rides) = rides {
                cfg.rideshare.rides = *rides;
            }
            if let Some(effect) = effect {
                cfg.rideshare.effect = *effect;
            }
            if let Some(reps) = reps {
                cfg.rideshare.reps = *reps;
            }
            "rideshare"
        }
        Some(Command::Supplychain { regime, reps }) => {
            if let Some(regime) = regime {
                cfg.supplychain.lambda = match regime.as_str() {
                    "undersupply" => vec![130.0, 120.0],
                    "oversupply" => vec![60.0, 60.0],
                    other => {
                        return Err(Error::Config(format!(
                            "unknown regime {other:?}; use undersupply or oversupply"
                        )))
                    }
                };
            }
            if let Some(reps) = reps {
                cfg.supplychain.reps = *reps;
            }
            "supplychain"
        }
        Some(Command::Secondary) => "secondary",
    };
    Ok(name.to_string())
}

fn run(cli: Cli) -> matchsp::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let command_name = apply_overrides(&mut cfg, &cli.command)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Error::Config("no subcommand given; see --help".into()));
    };
    let digest = cfg.digest();
    let out = cli.out.as_path();
    let outputs = match command {
        Command::Fluid => cmd_fluid(&cfg, out)?,
        Command::Psi => cmd_psi(&cfg, out)?,
        Command::Simulate { .. } => cmd_simulate(&cfg, out)?,
        Command::Sweep { .. } => cmd_sweep(&cfg, out)?,
        Command::Rideshare { .. } => cmd_rideshare(&cfg, out)?,
        Command::Supplychain { regime, .. } => cmd_supplychain(&cfg, out, regime.as_deref())?,
        Command::Secondary => cmd_secondary(&cfg, out)?,
    };
    output::write_manifest(out, &command_name, &digest, root_seed(&cfg, command), &outputs)?;
    for path in &outputs {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn root_seed(cfg: &AppConfig, command: &Command) -> u64 {
    match command {
        Command::Rideshare { .. } => cfg.rideshare.seed,
        Command::Supplychain { .. } => cfg.supplychain.seed,
        _ => cfg.experiment.seed,
    }
}

fn cmd_fluid(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let rates = cfg.rates(&inst)?;
    let report = bias_report(&inst, &rates, cfg.experiment.rho)?;
    let profile = build_psi_profile(&inst, &rates, PROFILE_TOL)?;
    let report_path = out.join("fluid_report.json");
    let profile_path = out.join("psi_profile.csv");
    output::write_json(&report_path, &report)?;
    output::atomic_write(&profile_path, output::profile_csv(&profile).as_bytes())?;
    Ok(vec![report_path, profile_path])
}

fn cmd_psi(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let rates = cfg.rates(&inst)?;
    let profile = build_psi_profile(&inst, &rates, PROFILE_TOL)?;
    let profile_path = out.join("psi_profile.csv");
    output::atomic_write(&profile_path, output::profile_csv(&profile).as_bytes())?;
    Ok(vec![profile_path])
}

fn cmd_simulate(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let rates = cfg.rates(&inst)?;
    let run = sim::monte_carlo(&inst, &rates, &cfg.sim_config())?;
    let records_path = out.join("replications.csv");
    let stats_path = out.join("summary.csv");
    let json_path = out.join("summary.json");
    output::atomic_write(&records_path, output::records_csv(&run.records).as_bytes())?;
    output::atomic_write(&stats_path, output::stats_csv(&run.stats).as_bytes())?;
    output::write_json(&json_path, &run.stats)?;
    Ok(vec![records_path, stats_path, json_path])
}

fn cmd_sweep(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let rates = cfg.rates(&inst)?;
    let points = sim::supply_scaling_sweep(&inst, &rates, &cfg.sweep.factors, cfg.experiment.rho)?;
    let csv_path = out.join("sweep.csv");
    let json_path = out.join("sweep.json");
    output::atomic_write(&csv_path, output::sweep_csv(&points).as_bytes())?;
    output::write_json(&json_path, &points)?;
    Ok(vec![csv_path, json_path])
}

fn cmd_rideshare(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let ride_cfg = cfg.rideshare_config()?;
    let (report, rows) = rideshare::run_rideshare_experiment(&ride_cfg)?;
    let report_path = out.join("rideshare_report.json");
    let rows_path = out.join("rideshare_replications.csv");
    output::write_json(&report_path, &report)?;
    output::atomic_write(&rows_path, output::rideshare_rows_csv(&rows).as_bytes())?;
    Ok(vec![report_path, rows_path])
}

fn cmd_supplychain(cfg: &AppConfig, out: &Path, regime: Option<&str>) -> matchsp::Result<Vec<PathBuf>> {
    let chain_cfg = cfg.supply_chain_config()?;
    let label = match regime {
        Some(label) => label.to_string(),
        None if chain_cfg.lambda == [130.0, 120.0] => "undersupply".to_string(),
        None if chain_cfg.lambda == [60.0, 60.0] => "oversupply".to_string(),
        None => "custom".to_string(),
    };
    let (reports, rows) = supply_chain::run_supply_chain_experiment(&chain_cfg, &label)?;
    let report_path = out.join("supplychain_report.json");
    let summary_path = out.join("supplychain_summary.csv");
    let rows_path = out.join("supplychain_replications.csv");
    output::write_json(&report_path, &reports)?;
    output::atomic_write(&summary_path, output::supply_summary_csv(&reports).as_bytes())?;
    output::atomic_write(&rows_path, output::supply_rows_csv(&rows).as_bytes())?;
    Ok(vec![report_path, summary_path, rows_path])
}

#[derive(Serialize)]
struct SecondaryReport {
    duals: Vec<f64>,
    demand: Vec<f64>,
    supply: Vec<f64>,
    rho: f64,
}

fn cmd_secondary(cfg: &AppConfig, out: &Path) -> matchsp::Result<Vec<PathBuf>> {
    let inst = cfg.instance()?;
    let rates = cfg.rates(&inst)?;
    let weights = cfg.secondary_weights(&inst)?;
    let metric = SecondaryMetric::new(&inst, weights)
        .map_err(|e| Error::Config(format!("secondary.weights: {e}")))?;
    let demand = rates.experiment_demand(cfg.experiment.rho);
    let duals = secondary_duals(&inst, &metric, &demand, &rates.pi)?;
    let report = SecondaryReport {
        duals: duals.a_w,
        demand,
        supply: rates.pi.clone(),
        rho: cfg.experiment.rho,
    };
    let report_path = out.join("secondary_report.json");
    output::write_json(&report_path, &report)?;
    Ok(vec![report_path])
}

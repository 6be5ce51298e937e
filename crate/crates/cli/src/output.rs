//! Report writers: atomic file output, CSV builders for every artifact the
//! CLI emits, and the run manifest. All numeric formatting is shortest
//! round-trip, so reruns produce byte-identical files.

use std::io::Write;
use std::path::{Path, PathBuf};

use matchsp_core::market::PsiProfile;
use serde::Serialize;

use crate::rideshare::RideshareRep;
use crate::sim::{EstimateRecord, MonteCarloStats, ScalePoint};
use crate::supply_chain::{SupplyChainRep, SupplyChainReport};

fn io_err(path: &Path, source: std::io::Error) -> crate::Error {
    crate::Error::Io { path: path.display().to_string(), source }
}

/// Write through a temp file in the target directory and rename into place,
/// so a failed run leaves no partial artifact.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.flush().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Pretty JSON plus trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> crate::Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::Error::Config(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Partial-treatment value profile, one row per breakpoint. The slope column
/// carries the segment starting at that breakpoint; the final row repeats
/// the last segment's slope.
pub fn profile_csv(profile: &PsiProfile) -> String {
    let mut out = String::from("eta,value,slope\n");
    let last = profile.slopes.len().saturating_sub(1);
    for (k, (&eta, &value)) in profile.breakpoints.iter().zip(&profile.values).enumerate() {
        let slope = profile.slopes[k.min(last)];
        out.push_str(&format!("{eta},{value},{slope}\n"));
    }
    out
}

/// Per-replication rows of a Monte Carlo study.
pub fn records_csv(records: &[EstimateRecord]) -> String {
    let mut out = String::from("tau,rho,seed,delta_rct_raw,delta_rct_rb,delta_sp,degenerate_flag\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.tau,
            r.rho,
            r.seed.stream,
            r.delta_rct_raw,
            r.delta_rct_rb,
            r.delta_sp,
            u8::from(r.degenerate)
        ));
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Plot-ready per-horizon aggregate of a Monte Carlo study.
pub fn stats_csv(stats: &[MonteCarloStats]) -> String {
    let mut out = String::from(
        "tau,rho,reps,delta_true,mean_rct_raw,stderr_rct_raw,var_scaled_rct_raw,\
         mean_rct_rb,stderr_rct_rb,var_scaled_rct_rb,mean_sp,stderr_sp,var_scaled_sp,\
         degenerate_share\n",
    );
    for s in stats {
        let cols = [s.raw, s.rb, s.sp]
            .map(|m| match m {
                Some(m) => format!(
                    "{},{},{}",
                    m.mean,
                    opt(m.std_error),
                    opt(m.variance_scaled)
                ),
                None => ",,".into(),
            })
            .join(",");
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.tau, s.rho, s.reps, s.delta_true, cols, s.degenerate_share
        ));
    }
    out
}

/// Supply-imbalance sweep, one row per factor with both regimes' fluid
/// estimates and biases.
pub fn sweep_csv(points: &[ScalePoint]) -> String {
    let mut out = String::from(
        "factor,over_delta_true,over_delta_rct,over_delta_sp,over_bias_rct,over_bias_sp,\
         under_delta_true,under_delta_rct,under_delta_sp,under_bias_rct,under_bias_sp\n",
    );
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.factor,
            p.oversupply.delta_true,
            p.oversupply.delta_rct,
            p.oversupply.delta_sp,
            p.oversupply.bias_rct,
            p.oversupply.bias_sp,
            p.undersupply.delta_true,
            p.undersupply.delta_rct,
            p.undersupply.delta_sp,
            p.undersupply.bias_rct,
            p.undersupply.bias_sp,
        ));
    }
    out
}

/// Per-replication rows of the rideshare study.
pub fn rideshare_rows_csv(rows: &[RideshareRep]) -> String {
    let mut out = String::from("rep,delta_true,delta_rct,delta_sp,degenerate_flag\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.rep,
            r.delta_true,
            r.delta_rct,
            r.delta_sp,
            u8::from(r.degenerate)
        ));
    }
    out
}

/// Per-replication rows of the supply-chain study.
pub fn supply_rows_csv(rows: &[SupplyChainRep]) -> String {
    let mut out = String::from("beta_index,rep,delta_true,delta_rct,delta_sp,degenerate_flag\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.beta_index,
            r.rep,
            r.delta_true,
            r.delta_rct,
            r.delta_sp,
            u8::from(r.degenerate)
        ));
    }
    out
}

/// Plot-ready aggregate of the supply-chain study, one row per lift.
pub fn supply_summary_csv(reports: &[SupplyChainReport]) -> String {
    let mut out = String::from(
        "beta_1,beta_2,delta_true,stderr_true,delta_rct,stderr_rct,delta_sp,stderr_sp,regime\n",
    );
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.beta[0],
            r.beta[1],
            r.delta_true,
            r.stderr_true,
            r.delta_rct,
            r.stderr_rct,
            r.delta_sp,
            r.stderr_sp,
            r.regime
        ));
    }
    out
}

/// Record of one CLI invocation, written next to its artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub root_seed: u64,
    pub tool_version: String,
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

/// Assemble and write `manifest.json` in the output directory.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config_digest: &str,
    root_seed: u64,
    outputs: &[PathBuf],
) -> crate::Result<()> {
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = RunManifest {
        command: command.to_string(),
        config_digest: config_digest.to_string(),
        root_seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        created_unix,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}

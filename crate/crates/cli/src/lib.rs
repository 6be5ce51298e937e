//! Simulation harness and file-format layer over the core matching-market
//! library: Poisson matching-cycle studies, the rideshare and supply-chain
//! scenarios, config parsing, and report writers for the CLI binary.

pub mod config;
pub mod output;
pub mod rideshare;
pub mod sim;
pub mod supply_chain;

/// Companion-crate error: configuration and data problems stay separate from
/// solver failures so the CLI can map them to distinct exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),
    #[error("no admissible edges survive the matching construction")]
    EmptyGraph,
    #[error(transparent)]
    Solver(#[from] matchsp_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Sample mean and standard error of a replication column. A single
/// replication reports a zero standard error.
pub fn estimator_means(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = matchsp_core::num::sum_compensated(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let sq = values.iter().map(|v| (v - mean) * (v - mean));
    let variance = matchsp_core::num::sum_compensated(sq) / (n - 1) as f64;
    (mean, (variance / n as f64).sqrt())
}

impl Error {
    /// CLI exit code: 2 for anything the user can fix in config or data,
    /// 3 for solver failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::EmptyGraph => 2,
            Error::Solver(_) => 3,
            _ => 1,
        }
    }
}

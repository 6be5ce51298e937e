use alloc::string::String;
use core::fmt;

/// Errors shared by the solver, market model, and estimator layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Vector or matrix dimensions disagree with the instance shape.
    DimensionMismatch(String),
    /// Inputs violate a documented precondition (negative rates, NaN values,
    /// duplicate edges, and similar).
    InvalidInput(String),
    /// The solver hit its pivot cap or detected an unbounded ray; the result
    /// would not be trustworthy, so nothing is returned.
    NumericalFailure(String),
    /// A scalar argument fell outside its admissible interval.
    OutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    /// Profile bisection exceeded the recursion cap before every segment
    /// certified as linear.
    MaxDepthExceeded { depth: u32 },
    /// The treatment fraction sits on a kink of the partial-treatment value
    /// curve, where the one-sided slopes disagree.
    BreakpointAmbiguity { rho: f64, slope_below: f64, slope_above: f64 },
    /// Demand perturbation size must stay strictly inside (0, 1/n_d).
    EpsilonOutOfRange { eps: f64, limit: f64 },
    /// The primary optimum is not unique, so secondary values on it are
    /// ill-defined.
    NonUniquePrimal,
    /// The primary solution is degenerate; the complementary-slackness system
    /// is not square and cannot identify secondary duals.
    DegeneratePrimal,
    /// The linear system for secondary duals lost rank.
    SingularSystem,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::OutOfRange { name, value, lo, hi } => {
                write!(f, "{name} = {value} outside [{lo}, {hi}]")
            }
            Error::MaxDepthExceeded { depth } => {
                write!(f, "profile bisection exceeded depth {depth}")
            }
            Error::BreakpointAmbiguity { rho, slope_below, slope_above } => write!(
                f,
                "rho = {rho} sits on a value-curve breakpoint (slopes {slope_below} vs {slope_above})"
            ),
            Error::EpsilonOutOfRange { eps, limit } => {
                write!(f, "epsilon = {eps} outside (0, {limit})")
            }
            Error::NonUniquePrimal => write!(f, "primary optimum is not unique"),
            Error::DegeneratePrimal => write!(f, "primary solution is degenerate"),
            Error::SingularSystem => write!(f, "secondary dual system is singular"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

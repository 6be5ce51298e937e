//! Treatment-effect estimators for matching markets, in both the fluid limit
//! and the sampled (finite-count) regime.
//!
//! Both estimator families difference treatment against control after one
//! pooled market solve at the experiment state. The RCT form credits each
//! demand unit with the average value its type earned; the SP form credits it
//! with the type's shadow price. Their fluid limits are `vbar . beta` and
//! `a . beta` respectively, evaluated at demand `lambda + rho beta`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{MarketRates, MatchingInstance};
use crate::lp::{solve_matching_sparse, SparseSolveResult};
use crate::mat::Mat;
use crate::market::{gte_fluid, gte_via_integral, PsiProfile};
use crate::num::{dot, sum_compensated, CompensatedSum, BREAKPOINT_PROBE_OFFSET};

/// RNG provenance of a drawn experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeedRecord {
    pub root: u64,
    pub stream: u64,
}

/// One sampled experiment: realized control/treatment demand counts and
/// supply counts at market scale `tau`, treatment fraction `rho`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentDraw {
    pub tau: f64,
    pub rho: f64,
    pub d_control: Vec<f64>,
    pub d_treatment: Vec<f64>,
    pub supply: Vec<f64>,
    pub seed: SeedRecord,
}

impl ExperimentDraw {
    /// Pooled demand the experiment market is solved at: control plus
    /// treatment counts, componentwise.
    pub fn experiment_demand(&self) -> Vec<f64> {
        self.d_control.iter().zip(&self.d_treatment).map(|(&c, &t)| c + t).collect()
    }

    /// Shape and count sanity against an instance: integral nonnegative
    /// counts, `tau > 0`, `rho` strictly interior.
    pub fn validate(&self, inst: &MatchingInstance) -> Result<()> {
        if self.d_control.len() != inst.n_demand()
            || self.d_treatment.len() != inst.n_demand()
            || self.supply.len() != inst.n_supply()
        {
            return Err(Error::DimensionMismatch("draw dimensions vs instance".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidInput("tau must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::OutOfRange { name: "rho", value: self.rho, lo: 0.0, hi: 1.0 });
        }
        let counts = self.d_control.iter().chain(&self.d_treatment).chain(&self.supply);
        for &c in counts {
            let integral = c.is_finite() && c >= 0.0 && (c as u64) as f64 == c;
            if !integral {
                return Err(Error::InvalidInput("draw counts must be nonnegative integers".into()));
            }
        }
        Ok(())
    }
}

/// A pooled matching broken down by the group of the demand unit matched.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchSplit {
    pub x_control: Mat,
    pub x_treatment: Mat,
}

impl MatchSplit {
    /// Checks the split against the pooled matching it came from: parts sum
    /// back to `x_total` and each group's matches fit inside its demand.
    pub fn check(&self, x_total: &Mat, draw: &ExperimentDraw) -> Result<()> {
        let (r, c) = (x_total.rows(), x_total.cols());
        if self.x_control.rows() != r
            || self.x_control.cols() != c
            || self.x_treatment.rows() != r
            || self.x_treatment.cols() != c
        {
            return Err(Error::DimensionMismatch("split dimensions vs matching".into()));
        }
        for i in 0..r {
            for j in 0..c {
                let sum = self.x_control.at(i, j) + self.x_treatment.at(i, j);
                if (sum - x_total.at(i, j)).abs() > 1e-9 {
                    return Err(Error::InvalidInput("split does not sum to the matching".into()));
                }
            }
        }
        for i in 0..r {
            if self.x_control.row_sum(i) > draw.d_control[i] + 1e-9
                || self.x_treatment.row_sum(i) > draw.d_treatment[i] + 1e-9
            {
                return Err(Error::InvalidInput("split exceeds group demand".into()));
            }
        }
        Ok(())
    }
}

/// Fluid RCT estimate with its per-type average values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FluidRct {
    pub value: f64,
    /// Average value earned per unit of type-i experiment demand.
    pub vbar: Vec<f64>,
    /// Types whose experiment demand is zero; their `vbar` is set to 0.
    pub zero_demand: Vec<bool>,
    pub degenerate: bool,
}

/// Fluid SP estimate with the demand duals it used.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FluidSp {
    pub value: f64,
    pub duals: Vec<f64>,
    pub degenerate: bool,
}

fn solve_experiment(
    inst: &MatchingInstance,
    rates: &MarketRates,
    rho: f64,
) -> Result<(SparseSolveResult, Vec<f64>)> {
    rates.validate(inst)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::OutOfRange { name: "rho", value: rho, lo: 0.0, hi: 1.0 });
    }
    let d = rates.experiment_demand(rho);
    let sol = solve_matching_sparse(inst, &d, &rates.pi)?;
    Ok((sol, d))
}

/// Fluid-limit RCT estimate `vbar . beta` at the experiment point
/// `lambda + rho beta`. A degenerate experiment point is flagged, not
/// rejected; types with zero experiment demand contribute zero.
pub fn rct_estimate_fluid(
    inst: &MatchingInstance,
    rates: &MarketRates,
    rho: f64,
) -> Result<FluidRct> {
    let (sol, d) = solve_experiment(inst, rates, rho)?;
    let row_values = sol.demand_row_values(inst);
    let mut vbar = vec![0.0; d.len()];
    let mut zero_demand = vec![false; d.len()];
    for i in 0..d.len() {
        if d[i] == 0.0 {
            zero_demand[i] = true;
        } else {
            vbar[i] = row_values[i] / d[i];
        }
    }
    let value = dot(&vbar, &rates.beta);
    Ok(FluidRct { value, vbar, zero_demand, degenerate: sol.degenerate })
}

/// Fluid-limit SP estimate `a . beta` from the demand duals at the
/// experiment point. When `rho` sits on a kink of the partial-treatment
/// value curve the duals are ambiguous and the estimator is undefined;
/// slope probes on both sides of `rho` detect this and error.
pub fn sp_estimate_fluid(
    inst: &MatchingInstance,
    rates: &MarketRates,
    rho: f64,
) -> Result<FluidSp> {
    let (sol, _) = solve_experiment(inst, rates, rho)?;
    let off = BREAKPOINT_PROBE_OFFSET.min(rho * 0.5).min((1.0 - rho) * 0.5);
    let slope_below = probe_slope(inst, rates, rho - off)?;
    let slope_above = probe_slope(inst, rates, rho + off)?;
    let tol = 1e-8 * slope_below.abs().max(slope_above.abs()).max(1.0);
    if (slope_below - slope_above).abs() > tol {
        return Err(Error::BreakpointAmbiguity { rho, slope_below, slope_above });
    }
    Ok(FluidSp { value: dot(&sol.a, &rates.beta), duals: sol.a, degenerate: sol.degenerate })
}

fn probe_slope(inst: &MatchingInstance, rates: &MarketRates, eta: f64) -> Result<f64> {
    let sol = solve_matching_sparse(inst, &rates.demand_at(eta), &rates.pi)?;
    Ok(dot(&sol.a, &rates.beta))
}

/// Sampled RCT estimate from a grouped match split:
/// `(1/tau) [ (1/rho) sum v X_treatment - (1/(1-rho)) sum v X_control ]`.
pub fn rct_estimate_sample(
    draw: &ExperimentDraw,
    split: &MatchSplit,
    inst: &MatchingInstance,
) -> Result<f64> {
    draw.validate(inst)?;
    if split.x_control.rows() != inst.n_demand() || split.x_control.cols() != inst.n_supply() {
        return Err(Error::DimensionMismatch("split dimensions vs instance".into()));
    }
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for e in inst.edges() {
        let (i, j) = (e.i as usize, e.j as usize);
        treated.add(e.value * split.x_treatment.at(i, j));
        control.add(e.value * split.x_control.at(i, j));
    }
    Ok((treated.value() / draw.rho - control.value() / (1.0 - draw.rho)) / draw.tau)
}

/// Rao-Blackwellized sampled RCT estimate: conditions out the split
/// randomness, crediting each type its realized average value
/// `Vbar_i = sum_j x_ij v_ij / D_i` (zero when `D_i = 0`):
/// `(1/tau) Vbar . ((1/rho) D_treatment - (1/(1-rho)) D_control)`.
pub fn rct_estimate_sample_rb(
    draw: &ExperimentDraw,
    x_total: &Mat,
    inst: &MatchingInstance,
) -> Result<f64> {
    draw.validate(inst)?;
    if x_total.rows() != inst.n_demand() || x_total.cols() != inst.n_supply() {
        return Err(Error::DimensionMismatch("matching dimensions vs instance".into()));
    }
    let mut row_value = vec![0.0; inst.n_demand()];
    for e in inst.edges() {
        row_value[e.i as usize] += e.value * x_total.at(e.i as usize, e.j as usize);
    }
    let terms = (0..inst.n_demand()).map(|i| {
        let d_i = draw.d_control[i] + draw.d_treatment[i];
        if d_i == 0.0 {
            return 0.0;
        }
        let vbar = row_value[i] / d_i;
        vbar * (draw.d_treatment[i] / draw.rho - draw.d_control[i] / (1.0 - draw.rho))
    });
    Ok(sum_compensated(terms) / draw.tau)
}

/// Sampled SP estimate from demand duals of the pooled solve:
/// `(1/tau) a . ((1/rho) D_treatment - (1/(1-rho)) D_control)`.
pub fn sp_estimate_sample(draw: &ExperimentDraw, duals_a: &[f64]) -> Result<f64> {
    if duals_a.len() != draw.d_control.len() || draw.d_control.len() != draw.d_treatment.len() {
        return Err(Error::DimensionMismatch("dual length vs draw".into()));
    }
    let terms = duals_a.iter().enumerate().map(|(i, &a)| {
        a * (draw.d_treatment[i] / draw.rho - draw.d_control[i] / (1.0 - draw.rho))
    });
    Ok(sum_compensated(terms) / draw.tau)
}

/// Side-by-side fluid comparison of both estimators against the true effect.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EstimateReport {
    pub delta_true: f64,
    pub delta_rct: f64,
    pub delta_sp: f64,
    pub bias_rct: f64,
    pub bias_sp: f64,
    pub vbar: Vec<f64>,
    pub duals: Vec<f64>,
    pub degenerate: bool,
    pub sign_consistent: bool,
    pub symmetric: bool,
    /// True when `rho` sat on a slope kink; `delta_sp` then reports the
    /// solver's dual vertex and should be read with care.
    pub breakpoint_ambiguous: bool,
}

/// Computes the true fluid effect and both fluid estimates at treatment
/// fraction `rho`. Degeneracy and kink collisions are reported as flags so
/// a study over many instances never aborts midway.
pub fn bias_report(inst: &MatchingInstance, rates: &MarketRates, rho: f64) -> Result<EstimateReport> {
    let delta_true = gte_fluid(inst, rates)?;
    let rct = rct_estimate_fluid(inst, rates, rho)?;
    let (delta_sp, duals, sp_degenerate, breakpoint_ambiguous) =
        match sp_estimate_fluid(inst, rates, rho) {
            Ok(sp) => (sp.value, sp.duals, sp.degenerate, false),
            Err(Error::BreakpointAmbiguity { .. }) => {
                let (sol, _) = solve_experiment(inst, rates, rho)?;
                (dot(&sol.a, &rates.beta), sol.a, sol.degenerate, true)
            }
            Err(e) => return Err(e),
        };
    Ok(EstimateReport {
        delta_true,
        delta_rct: rct.value,
        delta_sp,
        bias_rct: (rct.value - delta_true).abs(),
        bias_sp: (delta_sp - delta_true).abs(),
        vbar: rct.vbar,
        duals,
        degenerate: rct.degenerate || sp_degenerate,
        sign_consistent: rates.sign_consistent(),
        symmetric: rho == 0.5,
        breakpoint_ambiguous,
    })
}

/// Expected fluid SP estimate when the treatment fraction is drawn uniformly
/// on (0, 1): the segment-exact integral of the curve slope, which
/// telescopes to the true effect. Equals `gte_via_integral`.
pub fn expected_sp_uniform_rho(profile: &PsiProfile) -> f64 {
    gte_via_integral(profile)
}

//! Fluid market values and the partial-treatment value curve.
//!
//! `phi` is the optimal matching value at given demand/supply masses. The
//! curve `psi(eta) = phi(lambda + eta * beta, pi)` interpolates the fully
//! untreated market (eta = 0) into the fully treated one (eta = 1); it is
//! concave and piecewise linear in eta, its segment slopes are the
//! demand-dual inner products `a(eta) . beta`, and its endpoint gap is the
//! fluid treatment effect. `build_psi_profile` certifies the piecewise
//! structure by recursive bisection with one-sided slope probes.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::instance::{MarketRates, MatchingInstance};
use crate::lp::solve_matching_sparse;
use crate::num::{dot, sum_compensated, BREAKPOINT_PROBE_OFFSET};

/// Maximum bisection depth for the profile builder.
pub const MAX_PROFILE_DEPTH: u32 = 60;

/// Optimal matching value at demand `d` and supply `s`.
pub fn phi(inst: &MatchingInstance, d: &[f64], s: &[f64]) -> Result<f64> {
    Ok(solve_matching_sparse(inst, d, s)?.objective)
}

/// Partial-treatment value `phi(lambda + eta beta, pi)` for `eta` in [0, 1].
pub fn psi(inst: &MatchingInstance, rates: &MarketRates, eta: f64) -> Result<f64> {
    rates.validate(inst)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange { name: "eta", value: eta, lo: 0.0, hi: 1.0 });
    }
    phi(inst, &rates.demand_at(eta), &rates.pi)
}

/// Fluid global treatment effect: `phi` at treated rates minus `phi` at
/// baseline rates.
pub fn gte_fluid(inst: &MatchingInstance, rates: &MarketRates) -> Result<f64> {
    rates.validate(inst)?;
    let treated = phi(inst, &rates.demand_at(1.0), &rates.pi)?;
    let baseline = phi(inst, &rates.demand_at(0.0), &rates.pi)?;
    Ok(treated - baseline)
}

/// Piecewise-linear description of `psi` over [0, 1].
///
/// `breakpoints` is ascending and spans [0, 1]; `values[k] = psi(breakpoints[k])`;
/// `slopes[k]` is the change in value per unit `eta` on segment k, equal to
/// `a(eta) . beta` at interior points of the segment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PsiProfile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl PsiProfile {
    pub fn n_segments(&self) -> usize {
        self.slopes.len()
    }

    /// Interpolated curve value at `eta`.
    pub fn value_at(&self, eta: f64) -> f64 {
        let k = self
            .breakpoints
            .windows(2)
            .position(|w| eta <= w[1])
            .unwrap_or(self.slopes.len().saturating_sub(1));
        self.values[k] + self.slopes[k] * (eta - self.breakpoints[k])
    }
}

/// Integral of the profile slope over [0, 1]; telescopes to `psi(1) - psi(0)`
/// and therefore reproduces the fluid treatment effect.
pub fn gte_via_integral(profile: &PsiProfile) -> f64 {
    sum_compensated(
        profile
            .slopes
            .iter()
            .zip(profile.breakpoints.windows(2))
            .map(|(&m, w)| m * (w[1] - w[0])),
    )
}

/// Builds the piecewise-linear profile of `psi` by recursive bisection.
///
/// Each candidate segment is accepted once the one-sided slope probes at its
/// ends agree within `tol` (relative) and the midpoint value matches linear
/// interpolation within `tol`; adjacent segments with equal slopes are then
/// merged. Slope probes are taken `1e-7` inside the segment so a kink at a
/// candidate breakpoint cannot contaminate them. Errors with
/// `MaxDepthExceeded` past depth 60, which at sane tolerances indicates a
/// non-piecewise-linear input rather than a fine structure.
pub fn build_psi_profile(
    inst: &MatchingInstance,
    rates: &MarketRates,
    tol: f64,
) -> Result<PsiProfile> {
    rates.validate(inst)?;
    if !(tol > 0.0 && tol < 0.1) {
        return Err(Error::OutOfRange { name: "tol", value: tol, lo: 0.0, hi: 0.1 });
    }

    let v0 = psi(inst, rates, 0.0)?;
    let v1 = psi(inst, rates, 1.0)?;
    let value_scale = v0.abs().max(v1.abs()).max(1.0);
    let value_tol = tol * value_scale;

    let mut builder = ProfileBuilder { inst, rates, tol, value_tol, cuts: Vec::new() };
    builder.refine(0.0, v0, 1.0, v1, 0)?;

    // Assemble breakpoints, then merge away cuts the data cannot justify.
    // A cut survives only where the right slope drops distinctly below the
    // left slope: equal slopes mean the curve is linear across the cut, and
    // an apparent slope increase contradicts concavity, so it can only be
    // quotient rounding noise on very short segments. The pair tolerance
    // widens by the quotient noise floor of the two segment widths.
    let mut bps = vec![0.0];
    let mut vals = vec![v0];
    for &(eta, value) in &builder.cuts {
        bps.push(eta);
        vals.push(value);
    }
    bps.push(1.0);
    vals.push(v1);

    let noise = 16.0 * f64::EPSILON * value_scale;
    let mut out_b = vec![bps[0]];
    let mut out_v = vec![vals[0]];
    let mut out_m: Vec<f64> = Vec::new();
    for k in 0..bps.len() - 1 {
        out_b.push(bps[k + 1]);
        out_v.push(vals[k + 1]);
        out_m.push((vals[k + 1] - vals[k]) / (bps[k + 1] - bps[k]));
        while out_m.len() >= 2 {
            let n_b = out_b.len();
            let (m_left, m_right) = (out_m[out_m.len() - 2], out_m[out_m.len() - 1]);
            let (w_left, w_right) =
                (out_b[n_b - 2] - out_b[n_b - 3], out_b[n_b - 1] - out_b[n_b - 2]);
            let pair_tol = tol * m_left.abs().max(m_right.abs()).max(1.0)
                + noise * (1.0 / w_left + 1.0 / w_right);
            if m_right < m_left - pair_tol {
                break;
            }
            out_b.remove(n_b - 2);
            out_v.remove(n_b - 2);
            out_m.pop();
            let lo = out_b[out_b.len() - 2];
            let lo_v = out_v[out_v.len() - 2];
            *out_m.last_mut().unwrap() =
                (out_v.last().unwrap() - lo_v) / (out_b.last().unwrap() - lo);
        }
    }

    Ok(PsiProfile { breakpoints: out_b, values: out_v, slopes: out_m })
}

struct ProfileBuilder<'a> {
    inst: &'a MatchingInstance,
    rates: &'a MarketRates,
    tol: f64,
    value_tol: f64,
    /// Interior cut points accepted so far, in ascending order.
    cuts: Vec<(f64, f64)>,
}

impl ProfileBuilder<'_> {
    fn refine(&mut self, lo: f64, v_lo: f64, hi: f64, v_hi: f64, depth: u32) -> Result<()> {
        if depth > MAX_PROFILE_DEPTH {
            return Err(Error::MaxDepthExceeded { depth: MAX_PROFILE_DEPTH });
        }
        let off = BREAKPOINT_PROBE_OFFSET.min((hi - lo) * 0.25);
        let s_lo = self.slope_at(lo + off)?;
        let s_hi = self.slope_at(hi - off)?;
        let mid = 0.5 * (lo + hi);
        let v_mid = psi(self.inst, self.rates, mid)?;

        let slope_tol = self.tol * s_lo.abs().max(s_hi.abs()).max(1.0);
        let linear = (s_lo - s_hi).abs() <= slope_tol
            && (v_mid - 0.5 * (v_lo + v_hi)).abs() <= self.value_tol;
        if linear {
            return Ok(());
        }
        self.refine(lo, v_lo, mid, v_mid, depth + 1)?;
        self.cuts.push((mid, v_mid));
        self.refine(mid, v_mid, hi, v_hi, depth + 1)
    }

    /// One-sided slope probe: `a(eta) . beta` from the dual at `eta`.
    fn slope_at(&self, eta: f64) -> Result<f64> {
        let sol = solve_matching_sparse(self.inst, &self.rates.demand_at(eta), &self.rates.pi)?;
        Ok(dot(&sol.a, &self.rates.beta))
    }
}

/// Which one-sided demand difference a marginal value reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalSide {
    /// `phi(d) - phi(d - e_i)`, defined only where `d_i >= 1`.
    Left,
    /// `phi(d + e_i) - phi(d)`.
    Right,
}

/// Per-type one-unit marginal values of `phi` in the demand coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalValues {
    pub values: Vec<f64>,
    /// True where a left marginal was requested but `d_i < 1` forced the
    /// right difference instead.
    pub right_fallback: Vec<bool>,
}

/// Brute-force one-unit marginals via `n_d + 1` solves.
pub fn marginal_values(
    inst: &MatchingInstance,
    d: &[f64],
    s: &[f64],
    side: MarginalSide,
) -> Result<MarginalValues> {
    inst.check_demand_vector(d)?;
    inst.check_supply_vector(s)?;
    let base = phi(inst, d, s)?;
    let mut values = Vec::with_capacity(d.len());
    let mut right_fallback = vec![false; d.len()];
    let mut work = d.to_vec();
    for i in 0..d.len() {
        let use_right = match side {
            MarginalSide::Right => true,
            MarginalSide::Left => {
                let fallback = d[i] < 1.0;
                right_fallback[i] = fallback;
                fallback
            }
        };
        if use_right {
            work[i] = d[i] + 1.0;
            values.push(phi(inst, &work, s)? - base);
        } else {
            work[i] = d[i] - 1.0;
            values.push(base - phi(inst, &work, s)?);
        }
        work[i] = d[i];
    }
    Ok(MarginalValues { values, right_fallback })
}

/// Shrinks a unit-type demand vector to `1 - eps` per type. Requires every
/// entry of `d` to be exactly one and `0 < eps < 1/n_d`; within that range
/// the perturbed LP is nondegenerate and its demand duals equal the left
/// marginal values of the unperturbed problem.
pub fn perturb_demand(d: &[f64], eps: f64) -> Result<Vec<f64>> {
    if d.is_empty() || d.iter().any(|&x| x != 1.0) {
        return Err(Error::InvalidInput("perturbation requires all-ones demand".into()));
    }
    let limit = 1.0 / d.len() as f64;
    if !(eps > 0.0 && eps < limit) {
        return Err(Error::EpsilonOutOfRange { eps, limit });
    }
    Ok(vec![1.0 - eps; d.len()])
}

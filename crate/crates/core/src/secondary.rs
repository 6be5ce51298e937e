//! Secondary metrics: re-pricing the optimal matching with a second set of
//! edge weights, and the shadow prices of demand in that metric.
//!
//! The secondary value rides on the primary optimum, so it is only defined
//! when that optimum is unique. Its shadow prices are signed: adding demand
//! of a type can displace matches the secondary metric valued more.

use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::estimators::{ExperimentDraw, MatchSplit};
use crate::instance::MatchingInstance;
use crate::linalg::lu_solve;
use crate::lp::{solve_matching_sparse, SparseSolveResult};
use crate::mat::Mat;
use crate::num::{feas_tol, sum_compensated, CompensatedSum};

/// Alternative per-pair weights evaluated on the primary optimal matching.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SecondaryMetric {
    w: Mat,
}

impl SecondaryMetric {
    /// Weights must cover the instance shape and be finite on every
    /// admissible pair; inadmissible entries are never read.
    pub fn new(inst: &MatchingInstance, w: Mat) -> Result<Self> {
        if w.rows() != inst.n_demand() || w.cols() != inst.n_supply() {
            return Err(Error::DimensionMismatch("secondary weights vs instance".into()));
        }
        for e in inst.edges() {
            if !w.at(e.i as usize, e.j as usize).is_finite() {
                return Err(Error::InvalidInput(format!(
                    "secondary weight at ({}, {}) is not finite",
                    e.i, e.j
                )));
            }
        }
        Ok(Self { w })
    }

    pub fn weights(&self) -> &Mat {
        &self.w
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.w.at(i, j)
    }
}

/// Signed demand shadow prices of a secondary metric.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SecondaryDuals {
    pub a_w: Vec<f64>,
}

fn solve_unique(inst: &MatchingInstance, d: &[f64], s: &[f64]) -> Result<SparseSolveResult> {
    let sol = solve_matching_sparse(inst, d, s)?;
    if !sol.primal_unique_hint {
        return Err(Error::NonUniquePrimal);
    }
    Ok(sol)
}

fn secondary_value(inst: &MatchingInstance, w: &SecondaryMetric, sol: &SparseSolveResult) -> f64 {
    sum_compensated(
        inst.edges()
            .iter()
            .zip(&sol.flows)
            .map(|(e, &x)| w.at(e.i as usize, e.j as usize) * x),
    )
}

/// Secondary metric value: `sum w_ij x*_ij` over the unique primary optimum.
pub fn phi_secondary(
    inst: &MatchingInstance,
    w: &SecondaryMetric,
    d: &[f64],
    s: &[f64],
) -> Result<f64> {
    Ok(secondary_value(inst, w, &solve_unique(inst, d, s)?))
}

/// Secondary shadow prices by definition: `a_w_i = phi_w(d + e_i) - phi_w(d)`
/// via `n_d + 1` solves, every one required to have a unique optimum.
pub fn secondary_duals_bruteforce(
    inst: &MatchingInstance,
    w: &SecondaryMetric,
    d: &[f64],
    s: &[f64],
) -> Result<SecondaryDuals> {
    inst.check_demand_vector(d)?;
    inst.check_supply_vector(s)?;
    let base = phi_secondary(inst, w, d, s)?;
    let mut work = d.to_vec();
    let mut a_w = Vec::with_capacity(d.len());
    for i in 0..d.len() {
        work[i] = d[i] + 1.0;
        a_w.push(phi_secondary(inst, w, &work, s)? - base);
        work[i] = d[i];
    }
    Ok(SecondaryDuals { a_w })
}

/// Secondary shadow prices from one solve, through the complementary
/// slackness system of the primary optimum: support pairs pin
/// `a_i + b_j = w_ij`, slack demand rows pin `a_i = 0`, slack supply columns
/// pin `b_j = 0`. Nondegeneracy makes that system square; the first `n_d`
/// unknowns are the demand prices.
pub fn secondary_duals_cs(
    inst: &MatchingInstance,
    w: &SecondaryMetric,
    d: &[f64],
    s: &[f64],
) -> Result<SecondaryDuals> {
    inst.check_demand_vector(d)?;
    inst.check_supply_vector(s)?;
    let sol = solve_unique(inst, d, s)?;
    let (n_d, n_s) = (inst.n_demand(), inst.n_supply());
    let n = n_d + n_s;
    let rate_scale = d
        .iter()
        .chain(s.iter())
        .fold(1.0_f64, |acc, &x| acc.max(x.abs()));
    let tol = feas_tol(rate_scale);

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut rhs: Vec<f64> = Vec::with_capacity(n);
    let mut row_total = vec![0.0; n_d];
    let mut col_total = vec![0.0; n_s];
    for (e, &x) in inst.edges().iter().zip(&sol.flows) {
        row_total[e.i as usize] += x;
        col_total[e.j as usize] += x;
        if x > tol {
            let mut row = vec![0.0; n];
            row[e.i as usize] = 1.0;
            row[n_d + e.j as usize] = 1.0;
            rows.push(row);
            rhs.push(w.at(e.i as usize, e.j as usize));
        }
    }
    for i in 0..n_d {
        if row_total[i] < d[i] - tol {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    for j in 0..n_s {
        if col_total[j] < s[j] - tol {
            let mut row = vec![0.0; n];
            row[n_d + j] = 1.0;
            rows.push(row);
            rhs.push(0.0);
        }
    }
    if rows.len() != n {
        return Err(Error::DegeneratePrimal);
    }
    let mut ab = lu_solve(&rows, &rhs)?;
    ab.truncate(n_d);
    Ok(SecondaryDuals { a_w: ab })
}

/// Secondary shadow prices with the degenerate fallback: the slackness
/// system when it is square, else (for unit-type demand) the one-unit left
/// differences `phi_w(d) - phi_w(d - e_i)`.
pub fn secondary_duals(
    inst: &MatchingInstance,
    w: &SecondaryMetric,
    d: &[f64],
    s: &[f64],
) -> Result<SecondaryDuals> {
    match secondary_duals_cs(inst, w, d, s) {
        Err(Error::DegeneratePrimal) if d.iter().all(|&x| x == 1.0) => {
            let base = phi_secondary(inst, w, d, s)?;
            let mut work = d.to_vec();
            let mut a_w = Vec::with_capacity(d.len());
            for i in 0..d.len() {
                work[i] = 0.0;
                a_w.push(base - phi_secondary(inst, w, &work, s)?);
                work[i] = 1.0;
            }
            Ok(SecondaryDuals { a_w })
        }
        other => other,
    }
}

/// Sampled secondary estimates mirroring the primary pair: the RCT form
/// re-prices the grouped matches with `w`, the SP form prices demand counts
/// with `a_w`. Returns `(rct_w, sp_w)`.
pub fn secondary_estimates(
    draw: &ExperimentDraw,
    split: &MatchSplit,
    a_w: &SecondaryDuals,
    inst: &MatchingInstance,
    w: &SecondaryMetric,
) -> Result<(f64, f64)> {
    draw.validate(inst)?;
    if a_w.a_w.len() != inst.n_demand() {
        return Err(Error::DimensionMismatch("secondary duals vs instance".into()));
    }
    if split.x_control.rows() != inst.n_demand() || split.x_control.cols() != inst.n_supply() {
        return Err(Error::DimensionMismatch("split dimensions vs instance".into()));
    }
    let mut treated = CompensatedSum::default();
    let mut control = CompensatedSum::default();
    for e in inst.edges() {
        let (i, j) = (e.i as usize, e.j as usize);
        treated.add(w.at(i, j) * split.x_treatment.at(i, j));
        control.add(w.at(i, j) * split.x_control.at(i, j));
    }
    let rct_w = (treated.value() / draw.rho - control.value() / (1.0 - draw.rho)) / draw.tau;
    let sp_terms = a_w.a_w.iter().enumerate().map(|(i, &a)| {
        a * (draw.d_treatment[i] / draw.rho - draw.d_control[i] / (1.0 - draw.rho))
    });
    let sp_w = sum_compensated(sp_terms) / draw.tau;
    Ok((rct_w, sp_w))
}

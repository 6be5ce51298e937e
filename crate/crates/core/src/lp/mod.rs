//! Matching LP solves with shadow-price extraction.
//!
//! `solve_matching` is the production path (network simplex on the sparse
//! admissible set); `solve_matching_reference` solves the same LP through
//! an unrelated dense tableau, kept as a second route for cross-checks.
//! Both report primal matchings, both dual vectors, and degeneracy flags.

mod dense_simplex;
pub mod flow;
mod net_simplex;

use alloc::vec::Vec;

use crate::error::Result;
use crate::instance::MatchingInstance;
use crate::mat::Mat;
use crate::num::{dual_tol, feas_tol, scale_of, sum_compensated};

pub(crate) use dense_simplex::solve_inequality_form;

/// Solution of a matching LP in dense form.
#[derive(Debug, Clone)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SolveResult {
    /// Optimal matching, `n_d x n_s`; integral whenever `d` and `s` are.
    pub x: Mat,
    /// Demand-side shadow prices, one per demand type.
    pub a: Vec<f64>,
    /// Supply-side shadow prices, one per supply type.
    pub b: Vec<f64>,
    /// Optimal value `sum v_ij x_ij`.
    pub objective: f64,
    /// True when the solution has fewer positive matches than tight
    /// capacity rows, in which case the dual vertex is not unique.
    pub degenerate: bool,
    /// True exactly when the solve is not degenerate.
    pub dual_unique_hint: bool,
    /// False when some nonbasic pair prices out at zero reduced cost and an
    /// alternative optimal matching may exist.
    pub primal_unique_hint: bool,
}

/// Solution of a matching LP kept in edge space; `flows[k]` matches
/// `instance.edges()[k]`. Used for large sparse markets where a dense
/// matrix would be wasteful.
#[derive(Debug, Clone)]
pub struct SparseSolveResult {
    pub flows: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub objective: f64,
    pub degenerate: bool,
    pub dual_unique_hint: bool,
    pub primal_unique_hint: bool,
}

impl SparseSolveResult {
    /// Value matched per demand type: `sum_j x_ij v_ij` for each i.
    pub fn demand_row_values(&self, inst: &MatchingInstance) -> Vec<f64> {
        let mut acc = alloc::vec![crate::num::CompensatedSum::new(); inst.n_demand()];
        for (edge, &f) in inst.edges().iter().zip(&self.flows) {
            acc[edge.i as usize].add(f * edge.value);
        }
        acc.into_iter().map(|c| c.value()).collect()
    }

    /// Matched quantity per demand type: `sum_j x_ij` for each i.
    pub fn demand_row_totals(&self, inst: &MatchingInstance) -> Vec<f64> {
        let mut acc = alloc::vec![crate::num::CompensatedSum::new(); inst.n_demand()];
        for (edge, &f) in inst.edges().iter().zip(&self.flows) {
            acc[edge.i as usize].add(f);
        }
        acc.into_iter().map(|c| c.value()).collect()
    }

    fn densify(&self, inst: &MatchingInstance) -> SolveResult {
        let mut x = Mat::zeros(inst.n_demand(), inst.n_supply());
        for (edge, &f) in inst.edges().iter().zip(&self.flows) {
            x.set(edge.i as usize, edge.j as usize, f);
        }
        SolveResult {
            x,
            a: self.a.clone(),
            b: self.b.clone(),
            objective: self.objective,
            degenerate: self.degenerate,
            dual_unique_hint: self.dual_unique_hint,
            primal_unique_hint: self.primal_unique_hint,
        }
    }
}

/// Solves `max sum v_ij x_ij` over row capacities `d` and column capacities
/// `s`. Valid inputs (`d, s >= 0`, finite) are always feasible; errors are
/// dimension or input errors, or a solver pivot-cap failure.
pub fn solve_matching(inst: &MatchingInstance, d: &[f64], s: &[f64]) -> Result<SolveResult> {
    Ok(solve_matching_sparse(inst, d, s)?.densify(inst))
}

/// Edge-space twin of [`solve_matching`].
pub fn solve_matching_sparse(
    inst: &MatchingInstance,
    d: &[f64],
    s: &[f64],
) -> Result<SparseSolveResult> {
    inst.check_demand_vector(d)?;
    inst.check_supply_vector(s)?;
    let arcs: Vec<(u32, u32, f64)> =
        inst.edges().iter().map(|e| (e.i, e.j, e.value)).collect();
    let sol = net_simplex::solve_transport(inst.n_demand(), inst.n_supply(), &arcs, d, s)?;

    let degenerate = is_degenerate_sparse(inst, &sol.flows, d, s, sol.objective);
    Ok(SparseSolveResult {
        flows: sol.flows,
        a: sol.a,
        b: sol.b,
        objective: sol.objective,
        degenerate,
        dual_unique_hint: !degenerate,
        primal_unique_hint: sol.primal_unique_hint,
    })
}

/// Reference solve through the dense tableau simplex on the explicit LP.
/// Independent of the network-simplex path; intended for desk-scale
/// instances and cross-validation.
pub fn solve_matching_reference(
    inst: &MatchingInstance,
    d: &[f64],
    s: &[f64],
) -> Result<SolveResult> {
    inst.check_demand_vector(d)?;
    inst.check_supply_vector(s)?;
    let n_d = inst.n_demand();
    let n_s = inst.n_supply();
    let edges = inst.edges();
    if edges.is_empty() {
        let x = Mat::zeros(n_d, n_s);
        let degenerate = is_degenerate(&x, d, s);
        return Ok(SolveResult {
            x,
            a: alloc::vec![0.0; n_d],
            b: alloc::vec![0.0; n_s],
            objective: 0.0,
            degenerate,
            dual_unique_hint: !degenerate,
            primal_unique_hint: true,
        });
    }
    let n = edges.len();

    let mut c = alloc::vec![0.0; n];
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_d + n_s);
    let mut rhs = Vec::with_capacity(n_d + n_s);
    for (k, e) in edges.iter().enumerate() {
        c[k] = e.value;
    }
    for i in 0..n_d {
        let mut row = alloc::vec![0.0; n];
        for (k, e) in edges.iter().enumerate() {
            if e.i as usize == i {
                row[k] = 1.0;
            }
        }
        rows.push(row);
        rhs.push(d[i]);
    }
    for j in 0..n_s {
        let mut row = alloc::vec![0.0; n];
        for (k, e) in edges.iter().enumerate() {
            if e.j as usize == j {
                row[k] = 1.0;
            }
        }
        rows.push(row);
        rhs.push(s[j]);
    }

    let sol = solve_inequality_form(&c, &rows, &rhs)?;
    let mut x = Mat::zeros(n_d, n_s);
    for (k, e) in edges.iter().enumerate() {
        x.set(e.i as usize, e.j as usize, sol.x[k]);
    }
    let degenerate = is_degenerate(&x, d, s);
    Ok(SolveResult {
        x,
        a: sol.duals[..n_d].to_vec(),
        b: sol.duals[n_d..].to_vec(),
        objective: sol.objective,
        degenerate,
        dual_unique_hint: !degenerate,
        primal_unique_hint: !sol.zero_reduced_nonbasic,
    })
}

/// True when the matching has strictly fewer positive entries than the
/// number of tight capacity rows, the combinatorial signature of a
/// degenerate vertex (and hence of non-unique duals).
pub fn is_degenerate(x: &Mat, d: &[f64], s: &[f64]) -> bool {
    let scale = scale_of(value_scale(x, d, s));
    let tol = feas_tol(scale);
    let mut positive = 0usize;
    for i in 0..x.rows() {
        for j in 0..x.cols() {
            if x.at(i, j) > tol {
                positive += 1;
            }
        }
    }
    let mut tight = 0usize;
    for (i, &di) in d.iter().enumerate() {
        if (x.row_sum(i) - di).abs() <= tol {
            tight += 1;
        }
    }
    for (j, &sj) in s.iter().enumerate() {
        if (x.col_sum(j) - sj).abs() <= tol {
            tight += 1;
        }
    }
    positive < tight
}

fn is_degenerate_sparse(
    inst: &MatchingInstance,
    flows: &[f64],
    d: &[f64],
    s: &[f64],
    objective: f64,
) -> bool {
    let tol = feas_tol(scale_of(objective).max(rate_scale(d, s)));
    let mut positive = 0usize;
    let mut row_sum = alloc::vec![0.0; inst.n_demand()];
    let mut col_sum = alloc::vec![0.0; inst.n_supply()];
    for (edge, &f) in inst.edges().iter().zip(flows) {
        if f > tol {
            positive += 1;
        }
        row_sum[edge.i as usize] += f;
        col_sum[edge.j as usize] += f;
    }
    let mut tight = 0usize;
    for (sum, cap) in row_sum.iter().zip(d).chain(col_sum.iter().zip(s)) {
        if (sum - cap).abs() <= tol {
            tight += 1;
        }
    }
    positive < tight
}

fn value_scale(x: &Mat, d: &[f64], s: &[f64]) -> f64 {
    let mut m = 1.0f64;
    for &v in x.data() {
        m = m.max(v.abs());
    }
    for &v in d.iter().chain(s) {
        m = m.max(v.abs());
    }
    m
}

fn rate_scale(d: &[f64], s: &[f64]) -> f64 {
    let mut m = 1.0f64;
    for &v in d.iter().chain(s) {
        m = m.max(v.abs());
    }
    m
}

/// Checks the three complementary-slackness conditions linking a matching
/// to a dual pair: positive matches price out exactly, slack demand rows
/// carry zero demand dual, slack supply columns carry zero supply dual.
pub fn check_complementary_slackness(
    inst: &MatchingInstance,
    x: &Mat,
    a: &[f64],
    b: &[f64],
    d: &[f64],
    s: &[f64],
) -> bool {
    if x.rows() != inst.n_demand()
        || x.cols() != inst.n_supply()
        || a.len() != inst.n_demand()
        || b.len() != inst.n_supply()
        || d.len() != inst.n_demand()
        || s.len() != inst.n_supply()
    {
        return false;
    }
    let objective = sum_compensated(
        inst.edges().iter().map(|e| e.value * x.at(e.i as usize, e.j as usize)),
    );
    let scale = scale_of(objective).max(rate_scale(d, s));
    let f_tol = feas_tol(scale);
    let d_tol = dual_tol(scale);

    for e in inst.edges() {
        if x.at(e.i as usize, e.j as usize) > f_tol {
            let gap = a[e.i as usize] + b[e.j as usize] - e.value;
            if gap.abs() > d_tol {
                return false;
            }
        }
    }
    for (i, &di) in d.iter().enumerate() {
        if x.row_sum(i) < di - f_tol && a[i].abs() > d_tol {
            return false;
        }
    }
    for (j, &sj) in s.iter().enumerate() {
        if x.col_sum(j) < sj - f_tol && b[j].abs() > d_tol {
            return false;
        }
    }
    true
}

//! Dense tableau simplex for small LPs in inequality form.
//!
//! Solves  max c.x  s.t.  A x <= b,  x >= 0  with b >= 0, so the all-slack
//! basis is immediately feasible and no phase-one is needed. Equality rows
//! are expressed by callers as paired inequalities. Bland's rule runs on
//! every pivot; these LPs are tiny (tens of rows), so the anti-cycling
//! guarantee is worth more than pivot-count tuning.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num::{all_finite, dot};

#[derive(Debug)]
pub(crate) struct DenseSolution {
    pub x: Vec<f64>,
    /// One dual per row, nonnegative at optimality.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub degenerate_basis: bool,
    pub zero_reduced_nonbasic: bool,
}

/// Maximizes `c.x` over `rows[k].x <= rhs[k]`, `x >= 0`.
pub(crate) fn solve_inequality_form(
    c: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
) -> Result<DenseSolution> {
    let n = c.len();
    let m = rows.len();
    if rhs.len() != m {
        return Err(Error::DimensionMismatch("rhs length vs row count".into()));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("empty LP".into()));
    }
    let mut scale = 1.0f64;
    for row in rows {
        if row.len() != n {
            return Err(Error::DimensionMismatch("row length vs variable count".into()));
        }
        if !all_finite(row) {
            return Err(Error::InvalidInput("non-finite row coefficient".into()));
        }
        for &v in row {
            scale = scale.max(v.abs());
        }
    }
    if !all_finite(c) || !all_finite(rhs) {
        return Err(Error::InvalidInput("non-finite objective or rhs".into()));
    }
    for &v in c {
        scale = scale.max(v.abs());
    }
    for &v in rhs {
        if v < 0.0 {
            return Err(Error::InvalidInput("rhs must be nonnegative".into()));
        }
        scale = scale.max(v.abs());
    }
    let tol = 1e-9 * scale;

    // Columns: n structural, m slacks, then the rhs.
    let width = n + m + 1;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut row = vec![0.0; width];
        row[..n].copy_from_slice(&rows[k]);
        row[n + k] = 1.0;
        row[width - 1] = rhs[k];
        tab.push(row);
    }
    // Reduced costs of the minimization form (c' = -c).
    let mut red = vec![0.0; width - 1];
    red[..n].copy_from_slice(c);
    for r in red[..n].iter_mut() {
        *r = -*r;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let cap = 10_000 + 200 * (n + m);
    let mut iters = 0usize;
    loop {
        let Some(enter) = (0..width - 1).find(|&j| red[j] < -tol) else { break };
        let mut leave = usize::MAX;
        let mut best_ratio = f64::INFINITY;
        for (k, row) in tab.iter().enumerate() {
            let coef = row[enter];
            if coef > tol {
                // Clamp rounding dust so degenerate steps stay at zero.
                let ratio = (row[width - 1] / coef).max(0.0);
                if ratio < best_ratio || (ratio == best_ratio && basis[k] < basis[leave]) {
                    best_ratio = ratio;
                    leave = k;
                }
            }
        }
        if leave == usize::MAX {
            return Err(Error::NumericalFailure("unbounded dense LP".into()));
        }
        iters += 1;
        if iters > cap {
            return Err(Error::NumericalFailure("dense simplex pivot cap".into()));
        }

        let piv = tab[leave][enter];
        for v in tab[leave].iter_mut() {
            *v /= piv;
        }
        for k in 0..m {
            if k != leave {
                let f = tab[k][enter];
                if f != 0.0 {
                    for j in 0..width {
                        tab[k][j] -= f * tab[leave][j];
                    }
                    tab[k][enter] = 0.0;
                }
            }
        }
        let f = red[enter];
        if f != 0.0 {
            for j in 0..width - 1 {
                red[j] -= f * tab[leave][j];
            }
            red[enter] = 0.0;
        }
        basis[leave] = enter;
    }

    let mut x = vec![0.0; n];
    let mut degenerate_basis = false;
    for (k, &col) in basis.iter().enumerate() {
        let val = tab[k][width - 1];
        if val.abs() <= tol {
            degenerate_basis = true;
        }
        if col < n {
            x[col] = val.max(0.0);
        }
    }
    let duals: Vec<f64> = (0..m).map(|k| red[n + k].max(0.0)).collect();
    let in_basis = {
        let mut flags = vec![false; width - 1];
        for &col in &basis {
            flags[col] = true;
        }
        flags
    };
    let zero_reduced_nonbasic =
        (0..width - 1).any(|j| !in_basis[j] && red[j].abs() <= tol);

    let objective = dot(c, &x);
    Ok(DenseSolution { x, duals, objective, degenerate_basis, zero_reduced_nonbasic })
}

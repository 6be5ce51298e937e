//! Dense LU solve with partial pivoting, sized for the small square systems
//! this crate builds (one row per matched pair or slack constraint).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Solves `m x = rhs` for square row-major `m`, overwriting nothing.
/// Errors with `SingularSystem` when a pivot column has no usable entry.
pub fn lu_solve(m: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.len();
    if rhs.len() != n || m.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch("lu_solve expects a square system".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    let mut a: Vec<f64> = Vec::with_capacity(n * n);
    for row in m {
        a.extend_from_slice(row);
    }
    let mut x = rhs.to_vec();

    let scale = a.iter().fold(1.0_f64, |acc, &v| acc.max(v.abs()));
    let tol = 1e-12 * scale;

    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[perm[col] * n + col].abs();
        for (k, &p) in perm.iter().enumerate().skip(col + 1) {
            let cand = a[p * n + col].abs();
            if cand > best {
                best = cand;
                pivot = k;
            }
        }
        if best <= tol {
            return Err(Error::SingularSystem);
        }
        perm.swap(col, pivot);
        let p_row = perm[col];
        let inv = 1.0 / a[p_row * n + col];
        for &r in perm.iter().skip(col + 1) {
            let f = a[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for k in col + 1..n {
                a[r * n + k] -= f * a[p_row * n + k];
            }
            x[r] -= f * x[p_row];
        }
    }

    let mut out = vec![0.0; n];
    for col in (0..n).rev() {
        let r = perm[col];
        let mut acc = x[r];
        for k in col + 1..n {
            acc -= a[r * n + k] * out[k];
        }
        out[col] = acc / a[r * n + col];
    }
    Ok(out)
}

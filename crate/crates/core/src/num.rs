//! Tolerance conventions and compensated summation.
//!
//! All feasibility checks use `1e-9 * scale` and all dual or optimality
//! checks use `1e-8 * scale`, where `scale = max(1, |objective|)` of the
//! solve in question. Sums that feed reported statistics go through
//! Neumaier compensation so aggregation order cannot leak into results.

/// Relative feasibility tolerance.
pub const FEAS_REL_TOL: f64 = 1e-9;

/// Relative dual / optimality tolerance.
pub const DUAL_REL_TOL: f64 = 1e-8;

/// Offset used when probing one-sided slopes next to a candidate breakpoint.
pub const BREAKPOINT_PROBE_OFFSET: f64 = 1e-7;

/// Scale factor for tolerances derived from an objective value.
pub fn scale_of(objective: f64) -> f64 {
    objective.abs().max(1.0)
}

/// Absolute feasibility tolerance at the given scale.
pub fn feas_tol(scale: f64) -> f64 {
    FEAS_REL_TOL * scale
}

/// Absolute dual tolerance at the given scale.
pub fn dual_tol(scale: f64) -> f64 {
    DUAL_REL_TOL * scale
}

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator.
pub fn sum_compensated(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Compensated dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_compensated(a.iter().zip(b).map(|(x, y)| x * y))
}

/// True when every entry is finite.
pub fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

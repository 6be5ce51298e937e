//! Market shape: admissible demand/supply pairs with per-pair match values,
//! and the arrival-rate triple used by the fluid model.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::num::all_finite;

/// One admissible demand/supply pair and the value of matching it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub i: u32,
    pub j: u32,
    pub value: f64,
}

/// A bipartite matching market over `n_d` demand types and `n_s` supply types.
///
/// The admissible pair set is stored sparsely as a sorted edge list; dense
/// value tables convert via [`MatchingInstance::from_dense`]. Pairs absent
/// from the list cannot be matched.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchingInstance {
    n_d: usize,
    n_s: usize,
    edges: Vec<Edge>,
}

impl MatchingInstance {
    /// All pairs admissible, values from a dense table.
    pub fn from_dense(values: &Mat) -> Result<Self> {
        let mut edges = Vec::with_capacity(values.rows() * values.cols());
        for i in 0..values.rows() {
            for j in 0..values.cols() {
                edges.push(Edge { i: i as u32, j: j as u32, value: values.at(i, j) });
            }
        }
        Self::from_edges(values.rows(), values.cols(), edges)
    }

    /// Sparse admissible set. Edges are sorted row-major; duplicate pairs,
    /// out-of-range indices, and non-finite values are rejected.
    pub fn from_edges(n_d: usize, n_s: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if n_d == 0 || n_s == 0 {
            return Err(Error::InvalidInput("market needs at least one type per side".into()));
        }
        if n_d > u32::MAX as usize || n_s > u32::MAX as usize {
            return Err(Error::InvalidInput("type count exceeds index range".into()));
        }
        for e in &edges {
            if (e.i as usize) >= n_d || (e.j as usize) >= n_s {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) outside {n_d} x {n_s} market",
                    e.i, e.j
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "edge ({}, {}) has non-finite value",
                    e.i, e.j
                )));
            }
        }
        edges.sort_unstable_by_key(|e| (e.i, e.j));
        if edges.windows(2).any(|w| w[0].i == w[1].i && w[0].j == w[1].j) {
            return Err(Error::InvalidInput("duplicate admissible pair".into()));
        }
        Ok(Self { n_d, n_s, edges })
    }

    pub fn n_demand(&self) -> usize {
        self.n_d
    }

    pub fn n_supply(&self) -> usize {
        self.n_s
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Match value of pair `(i, j)`, or None when the pair is inadmissible.
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i as u32, j as u32);
        self.edges
            .binary_search_by_key(&key, |e| (e.i, e.j))
            .ok()
            .map(|pos| self.edges[pos].value)
    }

    /// Demand types with no admissible partner. They can never match and
    /// always carry zero shadow price.
    pub fn isolated_demand_types(&self) -> Vec<usize> {
        let mut seen = alloc::vec![false; self.n_d];
        for e in &self.edges {
            seen[e.i as usize] = true;
        }
        (0..self.n_d).filter(|&i| !seen[i]).collect()
    }

    /// Dense value table with `0.0` at inadmissible pairs (test convenience;
    /// pads sparse instances).
    pub fn to_dense_values(&self) -> Mat {
        let mut m = Mat::zeros(self.n_d, self.n_s);
        for e in &self.edges {
            m.set(e.i as usize, e.j as usize, e.value);
        }
        m
    }

    /// Checks a demand-side vector against the instance shape.
    pub fn check_demand_vector(&self, d: &[f64]) -> Result<()> {
        check_rate_vector("demand", d, self.n_d)
    }

    /// Checks a supply-side vector against the instance shape.
    pub fn check_supply_vector(&self, s: &[f64]) -> Result<()> {
        check_rate_vector("supply", s, self.n_s)
    }
}

fn check_rate_vector(side: &str, v: &[f64], expect: usize) -> Result<()> {
    if v.len() != expect {
        return Err(Error::DimensionMismatch(format!(
            "{side} vector has {} entries, instance has {expect} types",
            v.len()
        )));
    }
    if !all_finite(v) {
        return Err(Error::InvalidInput(format!("{side} vector has non-finite entries")));
    }
    if v.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidInput(format!("{side} vector has negative entries")));
    }
    Ok(())
}

/// Decomposition of demand rates into intent mass and request odds: type `i`
/// arrives with intent rate `lambda_tilde_i` and requests with probability
/// `p_i` untreated, `p_i + q_i` treated, so `lambda_i = lambda_tilde_i p_i`
/// and `beta_i = lambda_tilde_i q_i`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntentDecomposition {
    pub lambda_tilde: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Fluid arrival rates: baseline demand `lambda`, treatment lift `beta`, and
/// supply `pi`. Requires `lambda >= 0`, `pi >= 0`, and `lambda + beta >= 0`
/// so every interpolated demand rate stays nonnegative.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MarketRates {
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub pi: Vec<f64>,
    pub intent: Option<IntentDecomposition>,
}

impl MarketRates {
    pub fn new(lambda: Vec<f64>, beta: Vec<f64>, pi: Vec<f64>) -> Result<Self> {
        let rates = Self { lambda, beta, pi, intent: None };
        rates.validate_shape_free()?;
        Ok(rates)
    }

    /// Attaches an intent decomposition, checking consistency with the
    /// stored rates to 1e-12 relative.
    pub fn with_intent(mut self, intent: IntentDecomposition) -> Result<Self> {
        let n = self.lambda.len();
        if intent.lambda_tilde.len() != n || intent.p.len() != n || intent.q.len() != n {
            return Err(Error::DimensionMismatch("intent decomposition length".into()));
        }
        if !all_finite(&intent.lambda_tilde) || !all_finite(&intent.p) || !all_finite(&intent.q) {
            return Err(Error::InvalidInput("intent decomposition has non-finite entries".into()));
        }
        for i in 0..n {
            let (lt, p, q) = (intent.lambda_tilde[i], intent.p[i], intent.q[i]);
            if lt < 0.0 || !(0.0..=1.0).contains(&p) || q < -p || q > 1.0 - p {
                return Err(Error::InvalidInput(format!(
                    "intent decomposition out of range at type {i}"
                )));
            }
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
            if !close(self.lambda[i], lt * p) || !close(self.beta[i], lt * q) {
                return Err(Error::InvalidInput(format!(
                    "intent decomposition inconsistent with rates at type {i}"
                )));
            }
        }
        self.intent = Some(intent);
        Ok(self)
    }

    fn validate_shape_free(&self) -> Result<()> {
        if self.lambda.len() != self.beta.len() {
            return Err(Error::DimensionMismatch("lambda and beta lengths differ".into()));
        }
        if !all_finite(&self.lambda) || !all_finite(&self.beta) || !all_finite(&self.pi) {
            return Err(Error::InvalidInput("rates contain non-finite entries".into()));
        }
        if self.lambda.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput("lambda has negative entries".into()));
        }
        if self.pi.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput("pi has negative entries".into()));
        }
        if self.lambda.iter().zip(&self.beta).any(|(&l, &b)| l + b < 0.0) {
            return Err(Error::InvalidInput("lambda + beta has negative entries".into()));
        }
        Ok(())
    }

    /// Checks the rate dimensions against an instance.
    pub fn validate(&self, inst: &MatchingInstance) -> Result<()> {
        self.validate_shape_free()?;
        if self.lambda.len() != inst.n_demand() {
            return Err(Error::DimensionMismatch("lambda length vs demand types".into()));
        }
        if self.pi.len() != inst.n_supply() {
            return Err(Error::DimensionMismatch("pi length vs supply types".into()));
        }
        Ok(())
    }

    /// Demand rates when a fraction `eta` of the treatment lift is applied:
    /// `lambda + eta * beta`, clamped against negative rounding dust.
    pub fn demand_at(&self, eta: f64) -> Vec<f64> {
        self.lambda
            .iter()
            .zip(&self.beta)
            .map(|(&l, &b)| (l + eta * b).max(0.0))
            .collect()
    }

    /// Experiment-market demand rates at treatment fraction `rho`:
    /// treated demand `rho (lambda + beta)` plus control demand
    /// `(1 - rho) lambda`, which sum to `lambda + rho beta`.
    pub fn experiment_demand(&self, rho: f64) -> Vec<f64> {
        self.demand_at(rho)
    }

    /// True when every component of `beta` moves the same direction.
    pub fn sign_consistent(&self) -> bool {
        self.beta.iter().all(|&b| b >= 0.0) || self.beta.iter().all(|&b| b <= 0.0)
    }
}

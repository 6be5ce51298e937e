//! Network simplex for the bipartite matching LP.
//!
//! The LP  max sum v_ij x_ij  s.t.  sum_j x_ij <= d_i,  sum_i x_ij <= s_j,
//! x >= 0  is solved as an uncapacitated min-cost transshipment problem:
//! demand node i carries balance d_i, supply node j carries balance -s_j,
//! and a dummy root absorbs the imbalance through zero-cost slack arcs
//! (demand -> root) and fill arcs (root -> supply). Matching arcs cost
//! -v_ij. The all-slack spanning tree is a basic feasible start, every
//! pivot keeps flows exact when the inputs are integral, and the final
//! tree potentials yield the shadow prices directly.
//!
//! Pivoting is deterministic: block pricing over a fixed arc order picks
//! the most negative reduced cost (lowest index on ties), and a stretch of
//! degenerate pivots switches to Bland's rule, which restores the textbook
//! termination guarantee on the highly degenerate unit-type instances.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num::{dual_tol, sum_compensated};

const NONE: usize = usize::MAX;

/// Raw solver output in arc space.
pub(crate) struct NetSolution {
    /// Flow on each matching arc, aligned with the input arc order.
    pub flows: Vec<f64>,
    /// Demand-side duals, one per demand type, nonnegative at optimality.
    pub a: Vec<f64>,
    /// Supply-side duals, one per supply type, nonnegative at optimality.
    pub b: Vec<f64>,
    /// Matching value sum v_ij x_ij.
    pub objective: f64,
    /// False when some nonbasic arc prices out at zero reduced cost, in
    /// which case the optimal solution may not be unique.
    pub primal_unique_hint: bool,
}

/// Solves the matching LP for admissible arcs `(i, j, value)`.
pub(crate) fn solve_transport(
    n_d: usize,
    n_s: usize,
    arcs: &[(u32, u32, f64)],
    d: &[f64],
    s: &[f64],
) -> Result<NetSolution> {
    let mut net = Net::new(n_d, n_s, arcs, d, s);
    net.run()?;
    Ok(net.extract())
}

struct Net {
    n_d: usize,
    n_s: usize,
    n_match: usize,
    tail: Vec<u32>,
    head: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<u32>,
    pot: Vec<f64>,
    tree_adj: Vec<Vec<u32>>,
    // Scratch reused across pivots.
    mark: Vec<bool>,
    marked: Vec<usize>,
    stack: Vec<usize>,
    cost_scale: f64,
    next_arc: usize,
    bland: bool,
    degen_streak: usize,
}

impl Net {
    fn new(n_d: usize, n_s: usize, arcs: &[(u32, u32, f64)], d: &[f64], s: &[f64]) -> Self {
        let n_nodes = n_d + n_s + 1;
        let root = n_d + n_s;
        let n_match = arcs.len();
        let n_arcs = n_match + n_d + n_s;

        let mut tail = Vec::with_capacity(n_arcs);
        let mut head = Vec::with_capacity(n_arcs);
        let mut cost = Vec::with_capacity(n_arcs);
        let mut cost_scale = 1.0f64;
        for &(i, j, v) in arcs {
            tail.push(i);
            head.push(n_d as u32 + j);
            cost.push(-v);
            cost_scale = cost_scale.max(v.abs());
        }
        for i in 0..n_d {
            tail.push(i as u32);
            head.push(root as u32);
            cost.push(0.0);
        }
        for j in 0..n_s {
            tail.push(root as u32);
            head.push((n_d + j) as u32);
            cost.push(0.0);
        }

        let mut flow = vec![0.0; n_arcs];
        let mut in_tree = vec![false; n_arcs];
        let mut parent = vec![NONE; n_nodes];
        let mut parent_arc = vec![NONE; n_nodes];
        let mut depth = vec![0u32; n_nodes];
        let mut tree_adj: Vec<Vec<u32>> = vec![Vec::new(); n_nodes];
        tree_adj[root].reserve(n_d + n_s);

        for i in 0..n_d {
            let arc = n_match + i;
            flow[arc] = d[i];
            in_tree[arc] = true;
            parent[i] = root;
            parent_arc[i] = arc;
            depth[i] = 1;
            tree_adj[i].push(arc as u32);
            tree_adj[root].push(arc as u32);
        }
        for j in 0..n_s {
            let arc = n_match + n_d + j;
            flow[arc] = s[j];
            in_tree[arc] = true;
            let node = n_d + j;
            parent[node] = root;
            parent_arc[node] = arc;
            depth[node] = 1;
            tree_adj[node].push(arc as u32);
            tree_adj[root].push(arc as u32);
        }

        Net {
            n_d,
            n_s,
            n_match,
            tail,
            head,
            cost,
            flow,
            in_tree,
            parent,
            parent_arc,
            depth,
            pot: vec![0.0; n_nodes],
            tree_adj,
            mark: vec![false; n_nodes],
            marked: Vec::new(),
            stack: Vec::new(),
            cost_scale,
            next_arc: 0,
            bland: false,
            degen_streak: 0,
        }
    }

    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.cost[e] - self.pot[self.tail[e] as usize] + self.pot[self.head[e] as usize]
    }

    fn run(&mut self) -> Result<()> {
        let n_arcs = self.cost.len();
        let tol = 1e-9 * self.cost_scale;
        let block_size = n_arcs.isqrt().max(64).min(n_arcs.max(1));
        let stall_limit = 500 + self.n_d + self.n_s;
        let pivot_cap = 1_000 + 30 * n_arcs + 50 * (self.n_d + self.n_s);
        let mut pivots = 0usize;

        loop {
            let entering = if self.bland {
                self.find_entering_bland(tol)
            } else {
                self.find_entering_block(tol, block_size)
            };
            let Some(e) = entering else { return Ok(()) };
            pivots += 1;
            if pivots > pivot_cap {
                return Err(Error::NumericalFailure("network simplex pivot cap".into()));
            }
            let theta = self.pivot(e)?;
            if theta > 0.0 {
                self.degen_streak = 0;
                self.bland = false;
            } else {
                self.degen_streak += 1;
                if self.degen_streak > stall_limit {
                    self.bland = true;
                }
            }
        }
    }

    /// Most negative reduced cost within the next block holding a candidate;
    /// ties resolve to the lowest arc index because the scan is ascending.
    fn find_entering_block(&mut self, tol: f64, block_size: usize) -> Option<usize> {
        let n_arcs = self.cost.len();
        let mut scanned = 0;
        let mut pos = self.next_arc;
        while scanned < n_arcs {
            let mut best = NONE;
            let mut best_r = -tol;
            let mut in_block = 0;
            while in_block < block_size && scanned < n_arcs {
                if !self.in_tree[pos] {
                    let r = self.reduced(pos);
                    if r < best_r {
                        best_r = r;
                        best = pos;
                    }
                }
                pos += 1;
                if pos == n_arcs {
                    pos = 0;
                }
                in_block += 1;
                scanned += 1;
            }
            if best != NONE {
                self.next_arc = pos;
                return Some(best);
            }
        }
        None
    }

    fn find_entering_bland(&self, tol: f64) -> Option<usize> {
        (0..self.cost.len()).find(|&e| !self.in_tree[e] && self.reduced(e) < -tol)
    }

    /// Executes one pivot on entering arc `e`; returns the flow step.
    fn pivot(&mut self, e: usize) -> Result<f64> {
        let u = self.tail[e] as usize;
        let w = self.head[e] as usize;

        // Walk both endpoints to their common ancestor, bounding the step by
        // every tree arc the cycle traverses against its direction. The
        // cycle orientation follows the entering arc from u to w, continues
        // up from w, and returns down to u.
        let mut theta = f64::INFINITY;
        let mut leaving = NONE;
        {
            let mut x = u;
            let mut y = w;
            while x != y {
                if self.depth[x] >= self.depth[y] {
                    let arc = self.parent_arc[x];
                    // The cycle runs parent -> x on this side, so an arc
                    // pointing x -> parent is traversed against.
                    if self.tail[arc] as usize == x {
                        let cap = self.flow[arc];
                        if cap < theta || (cap == theta && arc < leaving) {
                            theta = cap;
                            leaving = arc;
                        }
                    }
                    x = self.parent[x];
                } else {
                    let arc = self.parent_arc[y];
                    // The cycle runs y -> parent on this side.
                    if self.head[arc] as usize == y {
                        let cap = self.flow[arc];
                        if cap < theta || (cap == theta && arc < leaving) {
                            theta = cap;
                            leaving = arc;
                        }
                    }
                    y = self.parent[y];
                }
            }
        }
        if leaving == NONE {
            return Err(Error::NumericalFailure("unbounded pivot ray".into()));
        }

        self.flow[e] += theta;
        let mut x = u;
        let mut y = w;
        while x != y {
            if self.depth[x] >= self.depth[y] {
                let arc = self.parent_arc[x];
                if self.tail[arc] as usize == x {
                    self.flow[arc] -= theta;
                } else {
                    self.flow[arc] += theta;
                }
                x = self.parent[x];
            } else {
                let arc = self.parent_arc[y];
                if self.head[arc] as usize == y {
                    self.flow[arc] -= theta;
                } else {
                    self.flow[arc] += theta;
                }
                y = self.parent[y];
            }
        }
        self.flow[leaving] = 0.0;

        self.replace(e, leaving, u, w);
        Ok(theta)
    }

    /// Swaps `leaving` out of the tree for `entering`, reroots the detached
    /// subtree, and refreshes its potentials and depths.
    fn replace(&mut self, entering: usize, leaving: usize, u: usize, w: usize) {
        // Child endpoint of the leaving arc: the deeper one.
        let lt = self.tail[leaving] as usize;
        let lh = self.head[leaving] as usize;
        let q = if self.parent_arc[lt] == leaving { lt } else { lh };
        debug_assert_eq!(self.parent_arc[q], leaving);

        self.detach_adj(leaving, lt);
        self.detach_adj(leaving, lh);
        self.in_tree[leaving] = false;

        // Mark the detached subtree.
        self.marked.clear();
        self.stack.clear();
        self.stack.push(q);
        self.mark[q] = true;
        self.marked.push(q);
        while let Some(x) = self.stack.pop() {
            for idx in 0..self.tree_adj[x].len() {
                let arc = self.tree_adj[x][idx] as usize;
                let other = self.other_end(arc, x);
                if !self.mark[other] {
                    self.mark[other] = true;
                    self.marked.push(other);
                    self.stack.push(other);
                }
            }
        }

        let (s_in, s_out) = if self.mark[u] { (u, w) } else { (w, u) };
        debug_assert!(self.mark[s_in] && !self.mark[s_out]);

        // Reverse the parent chain from s_in up to q, then hang the subtree
        // off the entering arc.
        let mut chain_nodes = Vec::new();
        let mut chain_arcs = Vec::new();
        let mut x = s_in;
        while x != q {
            chain_nodes.push(x);
            chain_arcs.push(self.parent_arc[x]);
            x = self.parent[x];
        }
        chain_nodes.push(q);
        for k in 0..chain_arcs.len() {
            self.parent[chain_nodes[k + 1]] = chain_nodes[k];
            self.parent_arc[chain_nodes[k + 1]] = chain_arcs[k];
        }
        self.parent[s_in] = s_out;
        self.parent_arc[s_in] = entering;

        self.in_tree[entering] = true;
        self.tree_adj[u].push(entering as u32);
        self.tree_adj[w].push(entering as u32);

        // Refresh potentials and depths over the subtree only; the rest of
        // the tree is untouched by the basis exchange.
        self.pot[s_in] = if self.head[entering] as usize == s_in {
            self.pot[s_out] - self.cost[entering]
        } else {
            self.pot[s_out] + self.cost[entering]
        };
        self.depth[s_in] = self.depth[s_out] + 1;
        self.stack.clear();
        self.stack.push(s_in);
        while let Some(x) = self.stack.pop() {
            for idx in 0..self.tree_adj[x].len() {
                let arc = self.tree_adj[x][idx] as usize;
                if arc == self.parent_arc[x] {
                    continue;
                }
                let y = self.other_end(arc, x);
                debug_assert!(self.mark[y]);
                self.parent[y] = x;
                self.parent_arc[y] = arc;
                self.depth[y] = self.depth[x] + 1;
                self.pot[y] = if self.head[arc] as usize == y {
                    self.pot[x] - self.cost[arc]
                } else {
                    self.pot[x] + self.cost[arc]
                };
                self.stack.push(y);
            }
        }

        for &x in &self.marked {
            self.mark[x] = false;
        }
    }

    #[inline]
    fn other_end(&self, arc: usize, x: usize) -> usize {
        let t = self.tail[arc] as usize;
        if t == x { self.head[arc] as usize } else { t }
    }

    fn detach_adj(&mut self, arc: usize, node: usize) {
        let adj = &mut self.tree_adj[node];
        let pos = adj.iter().position(|&a| a as usize == arc).expect("tree arc in adjacency");
        adj.swap_remove(pos);
    }

    fn extract(&self) -> NetSolution {
        let flows: Vec<f64> = self.flow[..self.n_match].to_vec();
        let objective =
            sum_compensated((0..self.n_match).map(|e| -self.cost[e] * self.flow[e]));

        // Demand duals are negated potentials, supply duals raw potentials,
        // with the root pinned at zero by construction.
        let a: Vec<f64> = (0..self.n_d).map(|i| -self.pot[i]).collect();
        let b: Vec<f64> = (0..self.n_s).map(|j| self.pot[self.n_d + j]).collect();

        let hint_tol = dual_tol(self.cost_scale);
        let primal_unique_hint =
            !(0..self.cost.len()).any(|e| !self.in_tree[e] && self.reduced(e).abs() <= hint_tol);

        NetSolution { flows, a, b, objective, primal_unique_hint }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_demand_one_supply() {
        let arcs = [(0u32, 0u32, 2.0), (1, 0, 1.0)];
        let sol = solve_transport(2, 1, &arcs, &[2.0, 2.0], &[3.0]).unwrap();
        assert_eq!(sol.flows, vec![2.0, 1.0]);
        assert_eq!(sol.objective, 5.0);
        assert_eq!(sol.a, vec![1.0, 0.0]);
        assert_eq!(sol.b, vec![1.0]);
    }

    #[test]
    fn geometric_capacity_fill() {
        let values = [2.0, 1.0, 0.5, 0.25, 0.125, 0.0625];
        let arcs: Vec<(u32, u32, f64)> =
            values.iter().enumerate().map(|(j, &v)| (0u32, j as u32, v)).collect();
        let s = vec![1.0; 6];
        let sol = solve_transport(1, 6, &arcs, &[3.5], &s).unwrap();
        assert_eq!(sol.objective, 3.625);
        assert_eq!(sol.a, vec![0.25]);
        assert_eq!(sol.b, vec![1.75, 0.75, 0.25, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_arc_set_is_trivial() {
        let sol = solve_transport(2, 2, &[], &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!(sol.flows.is_empty());
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.a, vec![0.0, 0.0]);
        assert_eq!(sol.b, vec![0.0, 0.0]);
    }

    #[test]
    fn oversupply_prices_demand_at_best_value() {
        let arcs = [(0u32, 0u32, 2.0), (0, 1, 1.0)];
        let sol = solve_transport(1, 2, &arcs, &[1.0], &[5.0, 5.0]).unwrap();
        assert_eq!(sol.objective, 2.0);
        assert_eq!(sol.a, vec![2.0]);
        assert_eq!(sol.b, vec![0.0, 0.0]);
    }
}
